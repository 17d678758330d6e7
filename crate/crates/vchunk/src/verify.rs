//! Randomized verification suites behind the `verify` command and the
//! acceptance gate: Hungarian exactness against permutation enumeration, the
//! the guarantee harnesses, the violation-rate check, and the incremental-IoU
//! identity. Every suite is deterministic given its seed and reports the
//! first failing case for reproduction.

use crate::assignment::{
    hungarian_value, verify_half_approx, AssignmentError, ScoreMatrix,
};
use crate::grower::{
    best_in_chain, brute_force_best_chunk, grow_single, verify_violation_rate, verify_perturbation_floor,
    ViolationRateReport, OracleScorer,
};
use crate::rational::PixelRatio;
use crate::scene::{build_scene, iou, iou_extend, Chunk, InstanceSpec, PixelGrid, Scene};
use num_rational::BigRational;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

#[derive(Clone, Debug)]
pub struct SuiteReport {
    pub name: String,
    pub cases: usize,
    pub failures: usize,
    pub first_failure: Option<String>,
}

impl SuiteReport {
    pub fn ok(&self) -> bool {
        self.failures == 0
    }

    pub fn line(&self) -> String {
        format!(
            "{}: {} — {} cases, {} failures{}",
            self.name,
            if self.ok() { "ok" } else { "FAILED" },
            self.cases,
            self.failures,
            self.first_failure
                .as_deref()
                .map(|d| format!(" (first: {d})"))
                .unwrap_or_default()
        )
    }
}

fn collect_suite(
    name: &str,
    results: Vec<Result<(), String>>,
) -> SuiteReport {
    let failures: Vec<String> = results.into_iter().filter_map(Result::err).collect();
    SuiteReport {
        name: name.to_string(),
        cases: 0, // patched by callers that know the case count
        failures: failures.len(),
        first_failure: failures.into_iter().next(),
    }
}

// ---------------------------------------------------------------------------
// Random inputs
// ---------------------------------------------------------------------------

/// Random reduced ratios with numerator ≤ denominator ≤ 60.
fn random_matrix(rng: &mut impl Rng) -> ScoreMatrix {
    let rows = rng.gen_range(1..=6);
    let cols = rng.gen_range(1..=6);
    let weights = (0..rows)
        .map(|_| {
            (0..cols)
                .map(|_| {
                    let den = rng.gen_range(1..=60u64);
                    let num = rng.gen_range(0..=den);
                    PixelRatio::new(num, den)
                })
                .collect()
        })
        .collect();
    ScoreMatrix::from_weights(weights)
}

/// Exact assignment optimum by enumerating all column permutations of the
/// zero-padded square matrix.
pub fn permutation_oracle(m: &ScoreMatrix) -> BigRational {
    use num_traits::Zero;
    let n = m.n_rows.max(m.n_cols);
    let weight = |r: usize, c: usize| -> BigRational {
        if r < m.n_rows && c < m.n_cols {
            m.weights[r][c].to_big()
        } else {
            BigRational::zero()
        }
    };
    let mut cols: Vec<usize> = (0..n).collect();
    let mut best = BigRational::zero();
    permute(&mut cols, 0, &mut |perm| {
        let total: BigRational = perm.iter().enumerate().map(|(r, &c)| weight(r, c)).sum();
        if total > best {
            best = total;
        }
    });
    best
}

fn permute(items: &mut Vec<usize>, k: usize, visit: &mut impl FnMut(&[usize])) {
    if k == items.len() {
        visit(items);
        return;
    }
    for i in k..items.len() {
        items.swap(k, i);
        permute(items, k + 1, visit);
        items.swap(k, i);
    }
}

/// Small random scene: 4–8 pixels per side, 3–8 superpixels (every id
/// present), and 1–3 disjoint random-span instances.
pub fn random_scene(rng: &mut impl Rng, max_superpixels: u32) -> Scene {
    let w = rng.gen_range(4..=8u32);
    let h = rng.gen_range(4..=8u32);
    let n_px = (w * h) as usize;
    let n_sp = rng.gen_range(3..=max_superpixels.min(n_px as u32));
    let mut ids: Vec<u32> = (0..n_px).map(|_| rng.gen_range(0..n_sp)).collect();
    // Guarantee every superpixel owns at least one pixel.
    let mut slots: Vec<usize> = (0..n_px).collect();
    slots.shuffle(rng);
    for (k, &slot) in slots.iter().take(n_sp as usize).enumerate() {
        ids[slot] = k as u32;
    }
    let grid = PixelGrid::new(w, h, ids);

    let n_inst = rng.gen_range(1..=3usize);
    let mut pixels: Vec<u32> = (0..n_px as u32).collect();
    pixels.shuffle(rng);
    let mut specs = Vec::with_capacity(n_inst);
    let mut cursor = 0usize;
    for _ in 0..n_inst {
        let remaining = n_px - cursor;
        if remaining == 0 {
            break;
        }
        let take = rng.gen_range(1..=remaining.min(n_px / 2).max(1));
        specs.push(InstanceSpec {
            class_label: 1,
            mask: pixels[cursor..cursor + take].to_vec(),
        });
        cursor += take;
    }
    build_scene(grid, specs).expect("random scene construction is valid")
}

/// Random candidate pool: unions of random superpixel subsets.
pub fn random_candidates(scene: &Scene, max_candidates: usize, rng: &mut impl Rng) -> Vec<Chunk> {
    let n = scene.n_superpixels() as u32;
    let count = rng.gen_range(1..=max_candidates);
    (0..count)
        .map(|_| {
            let size = rng.gen_range(1..=n);
            let mut ids: Vec<u32> = (0..n).collect();
            ids.shuffle(rng);
            ids.truncate(size as usize);
            Chunk::from_ids(scene, ids)
        })
        .collect()
}

// ---------------------------------------------------------------------------
// Suites
// ---------------------------------------------------------------------------

pub fn hungarian_suite(cases: usize, seed: u64) -> SuiteReport {
    let results: Vec<Result<(), String>> = (0..cases)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(i as u64);
            let m = random_matrix(&mut rng);
            let got = hungarian_value(&m);
            let want = permutation_oracle(&m);
            if got == want {
                Ok(())
            } else {
                Err(format!("case {i}: hungarian {got} ≠ oracle {want}"))
            }
        })
        .collect();
    let mut report = collect_suite("hungarian-exactness", results);
    report.cases = cases;
    report
}

pub fn half_approx_suite(cases: usize, seed: u64) -> Result<SuiteReport, AssignmentError> {
    let results: Vec<Result<(), String>> = (0..cases)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(i as u64);
            let scene = random_scene(&mut rng, 8);
            let candidates = random_candidates(&scene, 12, &mut rng);
            let k = rng.gen_range(1..=4usize);
            match verify_half_approx(&candidates, &scene.instances, k) {
                Ok(report) if report.ok => Ok(()),
                Ok(report) => Err(format!(
                    "case {i}: bound violated (recursion_ok={}, worst ratio {:.6})",
                    report.prefix_recursion_ok,
                    report
                        .rows
                        .iter()
                        .map(|r| r.ratio)
                        .fold(f64::INFINITY, f64::min),
                )),
                Err(e) => Err(format!("case {i}: {e}")),
            }
        })
        .collect();
    let mut report = collect_suite("greedy-half-approximation", results);
    report.cases = cases;
    Ok(report)
}

pub fn chain_optimality_suite(cases: usize, seed: u64) -> SuiteReport {
    let results: Vec<Result<(), String>> = (0..cases)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(i as u64);
            let scene = random_scene(&mut rng, 8); // ≤ 8 sps keeps 2^n trivial
            let g = &scene.instances[rng.gen_range(0..scene.n_instances())];
            let chain = grow_single(&scene, &OracleScorer { instance: g.id });
            let (_, best) = best_in_chain(&scene, &chain, g);
            let (_, opt) = brute_force_best_chunk(&scene, g);
            if best == opt {
                Ok(())
            } else {
                Err(format!(
                    "case {i}: chain best {} ≠ brute-force optimum {}",
                    best.to_f64(),
                    opt.to_f64()
                ))
            }
        })
        .collect();
    let mut report = collect_suite("chain-optimality", results);
    report.cases = cases;
    report
}

pub fn perturbation_floor_suite(
    scenes: usize,
    perturbations: usize,
    eps_values: &[f64],
    seed: u64,
) -> SuiteReport {
    let results: Vec<Result<(), String>> = (0..scenes)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(i as u64);
            let scene = random_scene(&mut rng, 8);
            let g = &scene.instances[rng.gen_range(0..scene.n_instances())];
            for &eps in eps_values {
                let report = verify_perturbation_floor(&scene, g, eps, perturbations, &mut rng);
                if report.violations > 0 {
                    return Err(format!(
                        "case {i} eps {eps}: {} violations, min slack {:.6}",
                        report.violations, report.min_slack
                    ));
                }
            }
            Ok(())
        })
        .collect();
    let mut report = collect_suite("perturbation-floor", results);
    report.cases = scenes * perturbations * eps_values.len();
    report
}

pub fn violation_rate_suite(
    n_scenes: usize,
    trials_per_scene: usize,
    eps: f64,
    etas: &[f64],
    seed: u64,
) -> (Vec<ViolationRateReport>, SuiteReport) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let scenes: Vec<(Scene, u32)> = (0..n_scenes)
        .map(|_| {
            let scene = random_scene(&mut rng, 8);
            let g = rng.gen_range(0..scene.n_instances()) as u32;
            (scene, g)
        })
        .collect();
    let mut reports = Vec::new();
    let mut failures = Vec::new();
    for &eta in etas {
        let report = verify_violation_rate(&scenes, eps, eta, trials_per_scene, &mut rng);
        if !report.ok {
            failures.push(format!(
                "eta {eta}: violation rate {:.4} exceeds bound",
                report.violation_rate
            ));
        }
        reports.push(report);
    }
    let suite = SuiteReport {
        name: "expected-violation-rate".to_string(),
        cases: n_scenes * trials_per_scene * etas.len(),
        failures: failures.len(),
        first_failure: failures.into_iter().next(),
    };
    (reports, suite)
}

/// Incremental IoU against from-scratch recounts on random extensions.
pub fn incremental_iou_suite(cases: usize, seed: u64) -> SuiteReport {
    let results: Vec<Result<(), String>> = (0..cases)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(i as u64);
            let scene = random_scene(&mut rng, 8);
            let g = &scene.instances[rng.gen_range(0..scene.n_instances())];
            let n = scene.n_superpixels() as u32;
            let mut ids: Vec<u32> = (0..n).collect();
            ids.shuffle(&mut rng);
            let c_size = rng.gen_range(0..n) as usize;
            let c = Chunk::from_ids(&scene, ids[..c_size].to_vec());
            let s = &scene.superpixels[ids[c_size] as usize];
            let fast = iou_extend(&c, s, g).expect("s not in c");
            let mut extended_ids = c.ids.clone();
            extended_ids.push(s.id);
            let slow = iou(&Chunk::from_ids(&scene, extended_ids), g);
            if fast == slow {
                Ok(())
            } else {
                Err(format!(
                    "case {i}: incremental {} ≠ recount {}",
                    fast.to_f64(),
                    slow.to_f64()
                ))
            }
        })
        .collect();
    let mut report = collect_suite("incremental-iou-identity", results);
    report.cases = cases;
    report
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hungarian_suite_small_run() {
        let report = hungarian_suite(50, 1);
        assert!(report.ok(), "{}", report.line());
    }

    #[test]
    fn guarantee_suites_small_runs() {
        let r1 = half_approx_suite(25, 2).unwrap();
        assert!(r1.ok(), "{}", r1.line());
        let r2 = chain_optimality_suite(25, 3);
        assert!(r2.ok(), "{}", r2.line());
        let r3 = perturbation_floor_suite(10, 5, &[0.05], 4);
        assert!(r3.ok(), "{}", r3.line());
    }

    #[test]
    fn violation_rate_suite_small_run() {
        let (reports, suite) = violation_rate_suite(10, 10, 0.05, &[0.5], 5);
        assert!(suite.ok(), "{}", suite.line());
        assert_eq!(reports.len(), 1);
    }

    #[test]
    fn incremental_suite_small_run() {
        let report = incremental_iou_suite(200, 6);
        assert!(report.ok(), "{}", report.line());
    }

    #[test]
    fn random_scene_is_valid_partition() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..50 {
            let scene = random_scene(&mut rng, 8);
            let total: u64 = scene.superpixels.iter().map(|sp| sp.area).sum();
            assert_eq!(total, scene.grid.n_pixels() as u64);
            assert!(!scene.instances.is_empty());
        }
    }
}
