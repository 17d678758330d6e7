//! The list objective f(L;G), exact assignment oracles, and the greedy list
//! generator with its approximation-bound harness.
//!
//! All comparisons are exact: IoU entries stay as [`PixelRatio`] and sums are
//! carried in [`BigRational`]. Floats appear only at reporting boundaries.

use crate::rational::PixelRatio;
use crate::scene::{Chunk, GroundTruthInstance, iou};
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum AssignmentError {
    #[error("brute-force cap exceeded: |C| = {n_chunks} (max 12), k = {k} (max 5)")]
    CapExceeded { n_chunks: usize, k: usize },
    #[error("empty candidate set")]
    EmptyCandidates,
}

/// Rectangular IoU weight matrix: rows are chunks, columns are ground-truth
/// slots including all-zero dummy columns.
#[derive(Clone, Debug)]
pub struct ScoreMatrix {
    pub weights: Vec<Vec<PixelRatio>>,
    pub n_rows: usize,
    pub n_cols: usize,
}

impl ScoreMatrix {
    /// Build from a list of chunks against instances, augmented with dummy
    /// columns so that `n_cols = max(n_rows, |G|)`.
    pub fn from_list(chunks: &[&Chunk], instances: &[GroundTruthInstance]) -> ScoreMatrix {
        let n_rows = chunks.len();
        let n_cols = n_rows.max(instances.len());
        let weights = chunks
            .iter()
            .map(|c| {
                (0..n_cols)
                    .map(|j| {
                        if j < instances.len() {
                            iou(c, &instances[j])
                        } else {
                            PixelRatio::ZERO
                        }
                    })
                    .collect()
            })
            .collect();
        ScoreMatrix {
            weights,
            n_rows,
            n_cols,
        }
    }

    pub fn from_weights(weights: Vec<Vec<PixelRatio>>) -> ScoreMatrix {
        let n_rows = weights.len();
        let n_cols = weights.first().map_or(0, |r| r.len());
        ScoreMatrix {
            weights,
            n_rows,
            n_cols,
        }
    }
}

fn big(r: PixelRatio) -> BigRational {
    r.to_big()
}

/// Maximum-weight assignment value of the matrix padded square with zeros.
///
/// Kuhn-Munkres with potentials on exact rationals; maximization is handled
/// by negating weights.
pub fn hungarian_value(m: &ScoreMatrix) -> BigRational {
    let (value, _) = hungarian_inner(m);
    value
}

/// Maximum-weight assignment with a deterministic tie-break: among all
/// maximizing assignments, the lexicographically smallest row→column vector.
pub fn hungarian(m: &ScoreMatrix) -> (Vec<usize>, BigRational) {
    let total = hungarian_value(m);
    let n = m.n_rows.max(m.n_cols); // padded square side
    let weight = |i: usize, j: usize| -> PixelRatio {
        if j < m.n_cols {
            m.weights[i][j]
        } else {
            PixelRatio::ZERO
        }
    };
    let mut cols_used = vec![false; n];
    let mut assignment = vec![0usize; m.n_rows];
    let mut fixed_sum = BigRational::zero();
    for i in 0..m.n_rows {
        // Fix row i to the smallest column that still permits the optimum.
        let mut chosen = None;
        for j in 0..n {
            if cols_used[j] {
                continue;
            }
            let rest = best_remaining(m, i + 1, &cols_used, j, n);
            let candidate = &fixed_sum + big(weight(i, j)) + rest;
            if candidate == total {
                chosen = Some(j);
                break;
            }
        }
        let j = chosen.expect("optimal assignment must extend");
        assignment[i] = j;
        fixed_sum += big(weight(i, j));
        cols_used[j] = true;
    }
    (assignment, total)
}

/// Optimal value over rows `from..` with some columns excluded.
fn best_remaining(
    m: &ScoreMatrix,
    from: usize,
    cols_used: &[bool],
    extra_col: usize,
    n: usize,
) -> BigRational {
    if from >= m.n_rows {
        return BigRational::zero();
    }
    let free_cols: Vec<usize> = (0..n)
        .filter(|&j| !cols_used[j] && j != extra_col)
        .collect();
    let sub = ScoreMatrix::from_weights(
        (from..m.n_rows)
            .map(|i| {
                free_cols
                    .iter()
                    .map(|&j| {
                        if j < m.n_cols {
                            m.weights[i][j]
                        } else {
                            PixelRatio::ZERO
                        }
                    })
                    .collect()
            })
            .collect(),
    );
    hungarian_value(&sub)
}

/// Kuhn-Munkres on the square zero-padded matrix; returns (value, col→row).
fn hungarian_inner(m: &ScoreMatrix) -> (BigRational, Vec<isize>) {
    let n = m.n_rows.max(m.n_cols);
    if n == 0 {
        return (BigRational::zero(), Vec::new());
    }
    // Minimize cost = -weight on an n×n matrix (zero padding).
    let cost = |i: usize, j: usize| -> BigRational {
        if i < m.n_rows && j < m.n_cols {
            -big(m.weights[i][j])
        } else {
            BigRational::zero()
        }
    };
    let inf = BigRational::new(BigInt::from(u64::MAX), BigInt::one());

    let mut u = vec![BigRational::zero(); n + 1];
    let mut v = vec![BigRational::zero(); n + 1];
    let mut p = vec![0usize; n + 1]; // col (1-based) → row (1-based), 0 = free
    let mut way = vec![0usize; n + 1];

    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0usize;
        let mut minv = vec![inf.clone(); n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = inf.clone();
            let mut j1 = 0usize;
            for j in 1..=n {
                if used[j] {
                    continue;
                }
                let cur = cost(i0 - 1, j - 1) - &u[i0] - &v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j].clone();
                    j1 = j;
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[p[j]] += &delta;
                    v[j] -= &delta;
                } else {
                    minv[j] -= &delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }

    let mut value = BigRational::zero();
    let mut col_to_row = vec![-1isize; n];
    for j in 1..=n {
        if p[j] > 0 {
            let (i, jj) = (p[j] - 1, j - 1);
            col_to_row[jj] = i as isize;
            if i < m.n_rows && jj < m.n_cols {
                value += big(m.weights[i][jj]);
            }
        }
    }
    (value, col_to_row)
}

/// f(L;G): the sum of IoUs under the optimal one-to-one assignment of the
/// list's chunks to (dummy-augmented) instances. f(∅;G) = 0.
pub fn f_of_list(chunks: &[&Chunk], instances: &[GroundTruthInstance]) -> BigRational {
    if chunks.is_empty() {
        return BigRational::zero();
    }
    hungarian_value(&ScoreMatrix::from_list(chunks, instances))
}

/// One slot of a prediction list.
#[derive(Clone, Debug)]
pub struct ListEntry {
    /// Index into the candidate pool the list was built from.
    pub chunk_index: usize,
    pub chunk: Chunk,
    /// Instance paired by the greedy step; `None` once no instances remain
    /// (and always `None` for learned predictions).
    pub paired_instance: Option<u32>,
    /// Exact greedy marginal y(c;G_re); `None` for learned predictions.
    pub marginal: Option<PixelRatio>,
    /// Selection score: the marginal for greedy runs, the predictor output
    /// for learned runs.
    pub score: f64,
}

/// An ordered prediction list with per-slot greedy marginals and the prefix
/// values of the accumulated objective.
#[derive(Clone, Debug)]
pub struct PredictionList {
    pub entries: Vec<ListEntry>,
    /// cumulative_f[i] = Σ marginals of entries 0..=i.
    pub cumulative_f: Vec<BigRational>,
}

impl PredictionList {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn chunks(&self) -> Vec<&Chunk> {
        self.entries.iter().map(|e| &e.chunk).collect()
    }

    pub fn chunk_indices(&self) -> Vec<usize> {
        self.entries.iter().map(|e| e.chunk_index).collect()
    }
}

/// Greedy list generation with ground-truth access: each round appends the
/// unselected chunk with the highest best-IoU over remaining instances and
/// retires its paired instance. Ties break to the smallest chunk index, and
/// paired-instance ties to the smallest instance id.
pub fn greedy_list(
    candidates: &[Chunk],
    instances: &[GroundTruthInstance],
    k: usize,
) -> PredictionList {
    assert!(k >= 1, "budget must be at least 1");
    assert!(!candidates.is_empty(), "candidate set must be non-empty");
    let rounds = k.min(candidates.len());
    let mut selected = vec![false; candidates.len()];
    let mut remaining: Vec<bool> = vec![true; instances.len()];
    let mut entries: Vec<ListEntry> = Vec::with_capacity(rounds);
    let mut cumulative_f = Vec::with_capacity(rounds);
    let mut running = BigRational::zero();

    for _ in 0..rounds {
        let mut best: Option<(PixelRatio, usize, Option<u32>)> = None;
        for (ci, c) in candidates.iter().enumerate() {
            if selected[ci] {
                continue;
            }
            // y(c;G_re) and π_gr(c;G_re), smallest instance id on ties.
            let mut y = PixelRatio::ZERO;
            let mut pair: Option<u32> = None;
            for (gi, g) in instances.iter().enumerate() {
                if !remaining[gi] {
                    continue;
                }
                let v = iou(c, g);
                if pair.is_none() || v > y {
                    y = v;
                    pair = Some(gi as u32);
                }
            }
            match &best {
                Some((by, _, _)) if y <= *by => {}
                _ => best = Some((y, ci, pair)),
            }
        }
        let (y, ci, pair) = best.expect("at least one unselected candidate");
        if let Some(e) = entries.last() {
            debug_assert!(
                Some(y) <= e.marginal,
                "greedy marginals must be non-increasing"
            );
        }
        selected[ci] = true;
        if let Some(g) = pair {
            remaining[g as usize] = false;
        }
        running += y.to_big();
        cumulative_f.push(running.clone());
        entries.push(ListEntry {
            chunk_index: ci,
            chunk: candidates[ci].clone(),
            paired_instance: pair,
            marginal: Some(y),
            score: y.to_f64(),
        });
    }

    PredictionList {
        entries,
        cumulative_f,
    }
}

/// Exact maximizer of the list objective by enumerating every size-min(k,|C|)
/// subset and solving the assignment for each. Desk-scale oracle only.
pub fn optimal_list_bruteforce(
    candidates: &[Chunk],
    instances: &[GroundTruthInstance],
    k: usize,
) -> Result<(Vec<usize>, BigRational), AssignmentError> {
    if candidates.is_empty() {
        return Err(AssignmentError::EmptyCandidates);
    }
    if candidates.len() > 12 || k > 5 {
        return Err(AssignmentError::CapExceeded {
            n_chunks: candidates.len(),
            k,
        });
    }
    let m = k.min(candidates.len());
    let mut best_value = BigRational::zero();
    let mut best_subset: Vec<usize> = Vec::new();
    let mut subset: Vec<usize> = Vec::with_capacity(m);
    enumerate_subsets(candidates.len(), m, 0, &mut subset, &mut |s| {
        let chunks: Vec<&Chunk> = s.iter().map(|&i| &candidates[i]).collect();
        let v = f_of_list(&chunks, instances);
        if best_subset.is_empty() || v > best_value {
            best_value = v;
            best_subset = s.to_vec();
        }
    });
    Ok((best_subset, best_value))
}

fn enumerate_subsets(
    n: usize,
    m: usize,
    from: usize,
    subset: &mut Vec<usize>,
    visit: &mut impl FnMut(&[usize]),
) {
    if subset.len() == m {
        visit(subset);
        return;
    }
    let need = m - subset.len();
    for i in from..=n.saturating_sub(need) {
        subset.push(i);
        enumerate_subsets(n, m, i + 1, subset, visit);
        subset.pop();
    }
}

/// Per-prefix comparison of the greedy list against the brute-force optimum.
#[derive(Clone, Debug)]
pub struct HalfApproxRow {
    pub prefix: usize,
    pub f_greedy: BigRational,
    pub f_opt: BigRational,
    /// f_greedy / f_opt; 1 when both are zero.
    pub ratio: f64,
    pub bound_ok: bool,
}

#[derive(Clone, Debug)]
pub struct HalfApproxReport {
    pub rows: Vec<HalfApproxRow>,
    pub prefix_recursion_ok: bool,
    pub ok: bool,
}

/// Checks f(L_i^gr;G) ≥ ½ f(L_i*) for every prefix i = 1..k, and that the
/// budget-i greedy list is the length-i prefix of the budget-k list.
pub fn verify_half_approx(
    candidates: &[Chunk],
    instances: &[GroundTruthInstance],
    k: usize,
) -> Result<HalfApproxReport, AssignmentError> {
    let full = greedy_list(candidates, instances, k);
    let half = BigRational::new(BigInt::one(), BigInt::from(2));
    let mut rows = Vec::new();
    let mut prefix_recursion_ok = true;
    for i in 1..=full.len() {
        let prefix: Vec<&Chunk> = full.entries[..i].iter().map(|e| &e.chunk).collect();
        let f_greedy = f_of_list(&prefix, instances);
        let (_, f_opt) = optimal_list_bruteforce(candidates, instances, i)?;
        let bound_ok = &f_greedy >= &(&half * &f_opt);
        let ratio = if f_opt.is_zero() {
            1.0
        } else {
            ratio_to_f64(&f_greedy) / ratio_to_f64(&f_opt)
        };
        rows.push(HalfApproxRow {
            prefix: i,
            f_greedy,
            f_opt,
            ratio,
            bound_ok,
        });
        let sub = greedy_list(candidates, instances, i);
        if sub.chunk_indices() != full.chunk_indices()[..i] {
            prefix_recursion_ok = false;
        }
    }
    let ok = prefix_recursion_ok && rows.iter().all(|r| r.bound_ok);
    Ok(HalfApproxReport {
        rows,
        prefix_recursion_ok,
        ok,
    })
}

pub fn ratio_to_f64(r: &BigRational) -> f64 {
    use num_traits::ToPrimitive;
    r.to_f64().unwrap_or(f64::NAN)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scene::{build_scene, Chunk, InstanceSpec, PixelGrid, Scene};

    /// A 10×10 scene whose superpixels are the 10 columns; instances are
    /// pixel sets, so candidate chunks get the IoU pattern we need by
    /// selecting columns.
    fn column_scene(instances: Vec<Vec<u32>>) -> Scene {
        let mut ids = vec![0u32; 100];
        for p in 0..100u32 {
            ids[p as usize] = p % 10;
        }
        build_scene(
            PixelGrid::new(10, 10, ids),
            instances
                .into_iter()
                .map(|mask| InstanceSpec {
                    class_label: 1,
                    mask,
                })
                .collect(),
        )
        .unwrap()
    }

    fn columns(cols: &[u32]) -> Vec<u32> {
        let mut px = Vec::new();
        for &c in cols {
            for r in 0..10u32 {
                px.push(r * 10 + c);
            }
        }
        px
    }

    /// Brute-force matching value by enumerating injective row→col maps.
    fn perm_oracle(m: &ScoreMatrix) -> BigRational {
        fn rec(m: &ScoreMatrix, row: usize, used: &mut Vec<bool>) -> BigRational {
            if row == m.n_rows {
                return BigRational::zero();
            }
            // A row may also stay unmatched (zero padding).
            let mut best = rec(m, row + 1, used);
            for j in 0..m.n_cols {
                if used[j] {
                    continue;
                }
                used[j] = true;
                let v = m.weights[row][j].to_big() + rec(m, row + 1, used);
                used[j] = false;
                if v > best {
                    best = v;
                }
            }
            best
        }
        rec(m, 0, &mut vec![false; m.n_cols])
    }

    fn pr(n: u64, d: u64) -> PixelRatio {
        PixelRatio::new(n, d)
    }

    #[test]
    fn hungarian_two_by_two() {
        let m = ScoreMatrix::from_weights(vec![
            vec![pr(9, 10), pr(1, 10)],
            vec![pr(2, 10), pr(8, 10)],
        ]);
        let (assignment, value) = hungarian(&m);
        assert_eq!(assignment, vec![0, 1]);
        assert_eq!(value, pr(17, 10).to_big());
    }

    #[test]
    fn hungarian_identity_matrix() {
        let n = 5;
        let m = ScoreMatrix::from_weights(
            (0..n)
                .map(|i| {
                    (0..n)
                        .map(|j| if i == j { PixelRatio::ONE } else { PixelRatio::ZERO })
                        .collect()
                })
                .collect(),
        );
        let (assignment, value) = hungarian(&m);
        assert_eq!(assignment, vec![0, 1, 2, 3, 4]);
        assert_eq!(value, BigRational::from(BigInt::from(5)));
    }

    #[test]
    fn hungarian_matches_permutation_oracle_small_random() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for _ in 0..200 {
            let rows = rng.gen_range(1..=6);
            let cols = rng.gen_range(1..=6);
            let m = ScoreMatrix::from_weights(
                (0..rows)
                    .map(|_| {
                        (0..cols)
                            .map(|_| {
                                let d = rng.gen_range(1..=20u64);
                                pr(rng.gen_range(0..=d), d)
                            })
                            .collect()
                    })
                    .collect(),
            );
            assert_eq!(hungarian_value(&m), perm_oracle(&m));
        }
    }

    #[test]
    fn hungarian_lex_tiebreak() {
        // All-equal weights: every permutation is optimal; lex-smallest wins.
        let m = ScoreMatrix::from_weights(vec![
            vec![pr(1, 2), pr(1, 2)],
            vec![pr(1, 2), pr(1, 2)],
        ]);
        let (assignment, _) = hungarian(&m);
        assert_eq!(assignment, vec![0, 1]);
    }

    #[test]
    fn f_of_list_spec_example() {
        // IoUs c1:(0.8, 0.1), c2:(0.7, 0.6): g1 columns 0..8, g2 column 9 plus
        // engineered overlaps are hard to hit exactly; check via raw matrix.
        let m = ScoreMatrix::from_weights(vec![
            vec![pr(8, 10), pr(1, 10)],
            vec![pr(7, 10), pr(6, 10)],
        ]);
        assert_eq!(hungarian_value(&m), pr(14, 10).to_big());
    }

    #[test]
    fn f_of_list_scene_cases() {
        let scene = column_scene(vec![columns(&[0, 1, 2, 3])]);
        let g = &scene.instances;
        let exact = Chunk::from_ids(&scene, vec![0, 1, 2, 3]);
        assert_eq!(f_of_list(&[&exact], g), BigRational::one());
        // |L| = 3, |G| = 1: two dummies; f = max single IoU.
        let c1 = Chunk::from_ids(&scene, vec![0]);
        let c2 = Chunk::from_ids(&scene, vec![0, 1]);
        let expected = iou(&c2, &g[0]).to_big();
        assert_eq!(f_of_list(&[&c1, &c2, &exact], g), BigRational::one());
        assert!(f_of_list(&[&c1, &c2], g) == expected.max(iou(&c1, &g[0]).to_big()));
        assert_eq!(f_of_list(&[], g), BigRational::zero());
    }

    /// Worked example for the half-approximation bound: IoUs c1:(0.6,0.5),
    /// c2:(0.55,0.0) are approximated with exact column fractions
    /// c1:(3/5, 1/2), c2:(11/20, 0).
    #[test]
    fn greedy_vs_optimal_half_approx_example() {
        let m = ScoreMatrix::from_weights(vec![
            vec![pr(6, 10), pr(5, 10)],
            vec![pr(55, 100), pr(0, 1)],
        ]);
        // Direct matrix check of both assignment values.
        assert_eq!(hungarian_value(&m), pr(105, 100).to_big());
    }

    fn chunk_pool(scene: &Scene, sets: &[&[u32]]) -> Vec<Chunk> {
        sets.iter()
            .map(|ids| Chunk::from_ids(scene, ids.to_vec()))
            .collect()
    }

    #[test]
    fn greedy_list_spec_example_one() {
        // c1:(0.8,0.1), c2:(0.7,0.6), c3:(0.0,0.5), k=2 → (c1→g1, c2→g2).
        // Columns: g1 = cols 0..5 (area 50), g2 = cols 6..8 (area 30); build
        // candidates with those IoU orderings (exact values differ, ordering
        // and argmaxes match the example's structure).
        let scene = column_scene(vec![columns(&[0, 1, 2, 3, 4]), columns(&[6, 7, 8])]);
        let pool = chunk_pool(
            &scene,
            &[
                &[0, 1, 2, 3],    // high on g1, zero on g2
                &[3, 4, 5, 6, 7], // mid on g1, mid on g2
                &[8],             // zero on g1, low on g2
            ],
        );
        let list = greedy_list(&pool, &scene.instances, 2);
        assert_eq!(list.chunk_indices(), vec![0, 1]);
        assert_eq!(list.entries[0].paired_instance, Some(0));
        assert_eq!(list.entries[1].paired_instance, Some(1));
        // marginals non-increasing
        assert!(list.entries[0].marginal >= list.entries[1].marginal);
    }

    #[test]
    fn greedy_k1_picks_best_single() {
        let scene = column_scene(vec![columns(&[0, 1, 2])]);
        let pool = chunk_pool(&scene, &[&[5], &[0, 1, 2], &[0]]);
        let list = greedy_list(&pool, &scene.instances, 1);
        assert_eq!(list.chunk_indices(), vec![1]);
        assert_eq!(list.entries[0].marginal, Some(PixelRatio::ONE));
    }

    #[test]
    fn greedy_exhausted_ground_truth_pads_with_zero_marginals() {
        let scene = column_scene(vec![columns(&[0])]);
        let pool = chunk_pool(&scene, &[&[0], &[1], &[2]]);
        let list = greedy_list(&pool, &scene.instances, 3);
        assert_eq!(list.len(), 3);
        assert_eq!(list.entries[0].chunk_index, 0);
        assert!(list.entries[1].marginal.unwrap().is_zero());
        // fallback picks candidates in index order
        assert_eq!(list.entries[1].chunk_index, 1);
        assert_eq!(list.entries[2].chunk_index, 2);
        // cumulative_f non-decreasing
        assert!(list.cumulative_f[0] <= list.cumulative_f[1]);
        assert!(list.cumulative_f[1] <= list.cumulative_f[2]);
    }

    #[test]
    fn greedy_shorter_pool_returns_shorter_list() {
        let scene = column_scene(vec![columns(&[0])]);
        let pool = chunk_pool(&scene, &[&[0], &[1]]);
        let list = greedy_list(&pool, &scene.instances, 5);
        assert_eq!(list.len(), 2);
    }

    #[test]
    fn bruteforce_cap_enforced() {
        let scene = column_scene(vec![columns(&[0])]);
        let pool: Vec<Chunk> = (0..13)
            .map(|_| Chunk::from_ids(&scene, vec![0]))
            .collect();
        assert!(matches!(
            optimal_list_bruteforce(&pool, &scene.instances, 2),
            Err(AssignmentError::CapExceeded { .. })
        ));
    }

    #[test]
    fn bruteforce_perfect_covers() {
        let scene = column_scene(vec![columns(&[0, 1]), columns(&[5, 6])]);
        let pool = chunk_pool(&scene, &[&[0, 1], &[5, 6], &[9]]);
        let (subset, value) = optimal_list_bruteforce(&pool, &scene.instances, 2).unwrap();
        assert_eq!(subset, vec![0, 1]);
        assert_eq!(value, BigRational::from(BigInt::from(2)));
    }

    #[test]
    fn half_approx_report_on_small_scene() {
        let scene = column_scene(vec![columns(&[0, 1, 2]), columns(&[5, 6])]);
        let pool = chunk_pool(&scene, &[&[0, 1], &[1, 2, 3], &[5], &[5, 6], &[9]]);
        let report = verify_half_approx(&pool, &scene.instances, 3).unwrap();
        assert!(report.ok, "bound violated: {:?}", report.rows);
        assert!(report.prefix_recursion_ok);
        for r in &report.rows {
            assert!(r.ratio >= 0.5 - 1e-12);
        }
    }
}
