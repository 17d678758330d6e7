//! Candidate chunk generation by region growing.
//!
//! The single-instance grower sorts superpixels by a predicted α̂ and emits
//! the chain of prefix chunks; with the oracle predictor the chain provably
//! contains the best chunk. The multi-instance grower seeds a chunk and
//! re-scores remaining superpixels against the evolving chunk each step.

use crate::rational::PixelRatio;
use crate::scene::{growth_ratios, Chunk, GroundTruthInstance, Scene, SceneError, Superpixel};
use rand::Rng;

pub const DEFAULT_MAX_CHUNK_SIZE: usize = 40;

/// Scores a candidate superpixel against the chunk grown so far.
pub trait GrowScorer {
    fn score(&self, scene: &Scene, sp: &Superpixel, chunk: &Chunk) -> f64;
}

/// Oracle predictor: the exact α_i = |s_i ∩ g| / |s_i|.
pub struct OracleScorer {
    pub instance: u32,
}

impl GrowScorer for OracleScorer {
    fn score(&self, _scene: &Scene, sp: &Superpixel, _chunk: &Chunk) -> f64 {
        let dx = sp.per_instance_intersection[self.instance as usize];
        dx as f64 / sp.area as f64
    }
}

/// Oracle plus one uniform draw in [−ε, ε] per superpixel, clamped to [0,1].
pub struct PerturbedScorer {
    pub instance: u32,
    noise: Vec<f64>,
}

impl PerturbedScorer {
    pub fn new(scene: &Scene, instance: u32, eps: f64, rng: &mut impl Rng) -> PerturbedScorer {
        let noise = (0..scene.n_superpixels())
            .map(|_| {
                if eps == 0.0 {
                    0.0
                } else {
                    rng.gen_range(-eps..=eps)
                }
            })
            .collect();
        PerturbedScorer { instance, noise }
    }

    /// Empirical mean squared α-error of this draw (clamping included).
    pub fn empirical_sq_error(&self, scene: &Scene) -> f64 {
        let mut sum = 0.0;
        for sp in &scene.superpixels {
            let alpha =
                sp.per_instance_intersection[self.instance as usize] as f64 / sp.area as f64;
            let hat = (alpha + self.noise[sp.id as usize]).clamp(0.0, 1.0);
            sum += (hat - alpha) * (hat - alpha);
        }
        sum / scene.n_superpixels() as f64
    }
}

impl GrowScorer for PerturbedScorer {
    fn score(&self, _scene: &Scene, sp: &Superpixel, _chunk: &Chunk) -> f64 {
        let alpha = sp.per_instance_intersection[self.instance as usize] as f64 / sp.area as f64;
        (alpha + self.noise[sp.id as usize]).clamp(0.0, 1.0)
    }
}

/// One growth run, stored as the ordered superpixel additions. Prefix chunks
/// are materialized on demand so long chains stay O(n) in memory.
#[derive(Clone, Debug)]
pub struct GrowthChain {
    pub seed: Option<u32>,
    pub steps: Vec<u32>,
    pub per_step_score: Vec<f64>,
}

impl GrowthChain {
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn prefix_chunk(&self, scene: &Scene, len: usize) -> Chunk {
        Chunk::from_ids(scene, self.steps[..len].to_vec())
    }

    pub fn prefix_chunks(&self, scene: &Scene) -> Vec<Chunk> {
        let mut out = Vec::with_capacity(self.len());
        let mut c = Chunk::empty(scene);
        for &id in &self.steps {
            c = c.add(scene, id).expect("each superpixel added once");
            out.push(c.clone());
        }
        out
    }

    /// IoU of every prefix against g, computed incrementally.
    pub fn prefix_ious(&self, scene: &Scene, g: &GroundTruthInstance) -> Vec<PixelRatio> {
        let mut inter = 0u64;
        let mut area = 0u64;
        self.steps
            .iter()
            .map(|&id| {
                let sp = &scene.superpixels[id as usize];
                inter += sp.per_instance_intersection[g.id as usize];
                area += sp.area;
                PixelRatio::new(inter, area + g.area - inter)
            })
            .collect()
    }
}

/// Sort all superpixels by predictor score (descending, ties by id); the
/// chain is every prefix of that order. Scores are evaluated once against
/// the empty chunk.
pub fn grow_single(scene: &Scene, scorer: &dyn GrowScorer) -> GrowthChain {
    let empty = Chunk::empty(scene);
    let mut scored: Vec<(f64, u32)> = scene
        .superpixels
        .iter()
        .map(|sp| (scorer.score(scene, sp, &empty), sp.id))
        .collect();
    scored.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap().then(a.1.cmp(&b.1)));
    let (per_step_score, steps) = scored.into_iter().unzip();
    GrowthChain {
        seed: None,
        steps,
        per_step_score,
    }
}

/// Best prefix chunk of the chain by IoU; ties go to the smallest prefix.
pub fn best_in_chain(
    scene: &Scene,
    chain: &GrowthChain,
    g: &GroundTruthInstance,
) -> (Chunk, PixelRatio) {
    assert!(!chain.is_empty(), "chain must be non-empty");
    let ious = chain.prefix_ious(scene, g);
    let mut best_len = 1usize;
    let mut best_iou = ious[0];
    for (i, v) in ious.iter().enumerate().skip(1) {
        if *v > best_iou {
            best_iou = *v;
            best_len = i + 1;
        }
    }
    (chain.prefix_chunk(scene, best_len), best_iou)
}

/// Exact best chunk over all 2^n superpixel subsets. Desk-scale oracle;
/// capped at n ≤ 20.
pub fn brute_force_best_chunk(scene: &Scene, g: &GroundTruthInstance) -> (Vec<u32>, PixelRatio) {
    let n = scene.n_superpixels();
    assert!(n <= 20, "subset enumeration capped at 20 superpixels");
    let gr = growth_ratios(scene, g);
    let mut best_mask = 0u32;
    let mut best = PixelRatio::ZERO;
    for mask in 0u32..(1u32 << n) {
        let mut inter = 0u64;
        let mut extra = 0u64;
        let mut m = mask;
        while m != 0 {
            let i = m.trailing_zeros() as usize;
            inter += gr.delta_x[i];
            extra += gr.delta_y[i];
            m &= m - 1;
        }
        let union = g.area + extra;
        let v = if union == 0 {
            PixelRatio::ZERO
        } else {
            PixelRatio::new(inter, union)
        };
        if v > best {
            best = v;
            best_mask = mask;
        }
    }
    let ids = (0..n as u32).filter(|i| best_mask >> i & 1 == 1).collect();
    (ids, best)
}

/// Seeded multi-instance growing: one chain per seed, scoring remaining
/// superpixels against the evolving chunk; returns the union of all prefix
/// chunks, deduplicated by their superpixel-id set.
pub fn grow_multi(
    scene: &Scene,
    scorer: &dyn GrowScorer,
    seeds: &[u32],
    max_chunk_size: usize,
) -> Result<Vec<Chunk>, SceneError> {
    assert!(!seeds.is_empty(), "seeds must be non-empty");
    let n = scene.n_superpixels() as u32;
    for &s in seeds {
        if s >= n {
            return Err(SceneError::SuperpixelIdOutOfRange { id: s, n });
        }
    }
    let mut out: Vec<Chunk> = Vec::new();
    let mut seen: std::collections::HashSet<Vec<u32>> = std::collections::HashSet::new();
    for chain in grow_multi_chains(scene, scorer, seeds, max_chunk_size) {
        for c in chain.prefix_chunks(scene) {
            if seen.insert(c.ids.clone()) {
                out.push(c);
            }
        }
    }
    Ok(out)
}

/// The per-seed chains behind [`grow_multi`], without deduplication.
pub fn grow_multi_chains(
    scene: &Scene,
    scorer: &dyn GrowScorer,
    seeds: &[u32],
    max_chunk_size: usize,
) -> Vec<GrowthChain> {
    seeds
        .iter()
        .map(|&seed| {
            let mut c = Chunk::empty(scene).add(scene, seed).expect("fresh chunk");
            let mut steps = vec![seed];
            let mut per_step_score = vec![f64::NAN];
            while c.ids.len() < max_chunk_size && c.ids.len() < scene.n_superpixels() {
                // G(s, c) depends on the evolving chunk: full rescan each step.
                let mut best: Option<(f64, u32)> = None;
                for sp in &scene.superpixels {
                    if c.contains(sp.id) {
                        continue;
                    }
                    let s = scorer.score(scene, sp, &c);
                    match best {
                        Some((bs, _)) if s <= bs => {}
                        _ => best = Some((s, sp.id)),
                    }
                }
                let (score, id) = best.expect("unvisited superpixel exists");
                c = c.add(scene, id).expect("not yet a member");
                steps.push(id);
                per_step_score.push(score);
            }
            GrowthChain {
                seed: Some(seed),
                steps,
                per_step_score,
            }
        })
        .collect()
}

/// Superpixel ids sampled on a regular pixel grid with the given interval,
/// deduplicated in scan order.
pub fn grid_seeds(scene: &Scene, interval: u32) -> Vec<u32> {
    let mut seen = vec![false; scene.n_superpixels()];
    let mut seeds = Vec::new();
    let off = interval / 2;
    let mut r = off;
    while r < scene.grid.height {
        let mut c = off;
        while c < scene.grid.width {
            let id = scene.grid.id_at(r * scene.grid.width + c);
            if !seen[id as usize] {
                seen[id as usize] = true;
                seeds.push(id);
            }
            c += interval;
        }
        r += interval;
    }
    seeds
}

#[derive(Clone, Debug)]
pub struct PerturbationFloorReport {
    pub r_star: f64,
    pub eps: f64,
    pub trials: usize,
    pub violations: usize,
    /// min over trials of best-in-chain IoU − (R(c*) − 2ε).
    pub min_slack: f64,
}

/// Runs the perturbed-oracle grower and checks best-in-chain IoU ≥ R(c*) − 2ε
/// (non-strict form, so that ε = 0 degenerates to chain-optimality equality).
pub fn verify_perturbation_floor(
    scene: &Scene,
    g: &GroundTruthInstance,
    eps: f64,
    trials: usize,
    rng: &mut impl Rng,
) -> PerturbationFloorReport {
    let (_, r_star) = brute_force_best_chunk(scene, g);
    let r_star = r_star.to_f64();
    let floor = r_star - 2.0 * eps;
    let mut violations = 0;
    let mut min_slack = f64::INFINITY;
    for _ in 0..trials {
        let scorer = PerturbedScorer::new(scene, g.id, eps, rng);
        let chain = grow_single(scene, &scorer);
        let (_, best) = best_in_chain(scene, &chain, g);
        let slack = best.to_f64() - floor;
        if slack < min_slack {
            min_slack = slack;
        }
        if slack < 0.0 {
            violations += 1;
        }
    }
    PerturbationFloorReport {
        r_star,
        eps,
        trials,
        violations,
        min_slack,
    }
}

#[derive(Clone, Debug)]
pub struct ViolationRateReport {
    pub eta: f64,
    pub trials: usize,
    pub violations: usize,
    pub violation_rate: f64,
    pub mean_delta_hat: f64,
    pub ok: bool,
}

/// Statistical check of the expected-squared-error bound: the fraction of
/// trials with best-in-chain IoU < R(c*) − 2·η⁻¹·√(n·δ̂) must stay ≤ η.
pub fn verify_violation_rate(
    scenes: &[(Scene, u32)],
    eps: f64,
    eta: f64,
    trials_per_scene: usize,
    rng: &mut impl Rng,
) -> ViolationRateReport {
    let mut trials = 0;
    let mut violations = 0;
    let mut delta_sum = 0.0;
    for (scene, g_idx) in scenes {
        let g = &scene.instances[*g_idx as usize];
        let (_, r_star) = brute_force_best_chunk(scene, g);
        let r_star = r_star.to_f64();
        let n = scene.n_superpixels() as f64;
        for _ in 0..trials_per_scene {
            let scorer = PerturbedScorer::new(scene, g.id, eps, rng);
            let delta_hat = scorer.empirical_sq_error(scene);
            delta_sum += delta_hat;
            let floor = r_star - 2.0 * (n * delta_hat).sqrt() / eta;
            let chain = grow_single(scene, &scorer);
            let (_, best) = best_in_chain(scene, &chain, g);
            trials += 1;
            if best.to_f64() < floor {
                violations += 1;
            }
        }
    }
    let violation_rate = if trials == 0 {
        0.0
    } else {
        violations as f64 / trials as f64
    };
    ViolationRateReport {
        eta,
        trials,
        violations,
        violation_rate,
        mean_delta_hat: if trials == 0 { 0.0 } else { delta_sum / trials as f64 },
        ok: violation_rate <= eta,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scene::{build_scene, InstanceSpec, PixelGrid};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    /// Worked example: |g| = 10 and superpixels with (|s|, |s∩g|) =
    /// (3,3), (5,3), (5,1); the remaining superpixel holds the last 3 pixels
    /// of g inside 19 pixels, so its α = 3/19 ranks below all three.
    fn worked_example() -> Scene {
        // 4 wide × 8 tall grid = 32 px. g = pixels 0..10.
        let mut ids = vec![3u32; 32];
        for p in [0, 1, 2] {
            ids[p] = 0;
        }
        for p in [3, 4, 5, 10, 11] {
            ids[p] = 1;
        }
        for p in [6, 12, 13, 14, 15] {
            ids[p] = 2;
        }
        build_scene(
            PixelGrid::new(4, 8, ids),
            vec![InstanceSpec {
                class_label: 1,
                mask: (0..10).collect(),
            }],
        )
        .unwrap()
    }

    #[test]
    fn grow_single_worked_example() {
        let scene = worked_example();
        let g = &scene.instances[0];
        let chain = grow_single(&scene, &OracleScorer { instance: 0 });
        // Oracle order: α = 1, 3/5, 1/5, then background.
        assert_eq!(&chain.steps[..3], &[0, 1, 2]);
        let ious = chain.prefix_ious(&scene, g);
        assert_eq!(ious[0], PixelRatio::new(3, 10));
        assert_eq!(ious[1], PixelRatio::new(6, 12));
        assert_eq!(ious[2], PixelRatio::new(7, 16));
        let (best, best_iou) = best_in_chain(&scene, &chain, g);
        assert_eq!(best.ids, vec![0, 1]);
        assert_eq!(best_iou, PixelRatio::new(1, 2));
    }

    #[test]
    fn brute_force_confirms_worked_example() {
        let scene = worked_example();
        let g = &scene.instances[0];
        let (ids, best) = brute_force_best_chunk(&scene, g);
        assert_eq!(best, PixelRatio::new(1, 2));
        assert_eq!(ids, vec![0, 1]);
    }

    #[test]
    fn exact_cover_is_best_singleton() {
        let mut ids = vec![1u32; 16];
        for p in [0, 1, 4, 5] {
            ids[p] = 0;
        }
        let scene = build_scene(
            PixelGrid::new(4, 4, ids),
            vec![InstanceSpec {
                class_label: 1,
                mask: vec![0, 1, 4, 5],
            }],
        )
        .unwrap();
        let chain = grow_single(&scene, &OracleScorer { instance: 0 });
        let g = &scene.instances[0];
        assert_eq!(chain.prefix_ious(&scene, g)[0], PixelRatio::ONE);
        let (best, v) = best_in_chain(&scene, &chain, g);
        assert_eq!(best.ids, vec![0]);
        assert_eq!(v, PixelRatio::ONE);
    }

    #[test]
    fn eps_zero_matches_optimum() {
        let scene = worked_example();
        let g = &scene.instances[0];
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let report = verify_perturbation_floor(&scene, g, 0.0, 5, &mut rng);
        assert_eq!(report.violations, 0);
        assert!(report.min_slack.abs() < 1e-12);
    }

    #[test]
    fn small_eps_never_violates_floor() {
        let scene = worked_example();
        let g = &scene.instances[0];
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for eps in [0.01, 0.05, 0.1] {
            let report = verify_perturbation_floor(&scene, g, eps, 50, &mut rng);
            assert_eq!(report.violations, 0, "eps={eps}: {report:?}");
        }
    }

    #[test]
    fn grow_multi_context_free_matches_single_chain() {
        let scene = worked_example();
        // Seeding at the top-α superpixel, an α-only scorer reproduces the
        // single-instance chain prefix (truncated at the cutoff).
        let scorer = OracleScorer { instance: 0 };
        let chains = grow_multi_chains(&scene, &scorer, &[0], 3);
        assert_eq!(chains[0].steps, vec![0, 1, 2]);
        let single = grow_single(&scene, &scorer);
        assert_eq!(&single.steps[..3], &chains[0].steps[..]);
    }

    #[test]
    fn grow_multi_dedups_and_bounds() {
        let scene = worked_example();
        let scorer = OracleScorer { instance: 0 };
        let seeds = vec![0u32, 1];
        let out = grow_multi(&scene, &scorer, &seeds, 3).unwrap();
        assert!(out.len() <= seeds.len() * 3);
        for c in &out {
            let seed_ok = c.contains(0) || c.contains(1);
            assert!(seed_ok, "chunk contains its seed");
        }
        // bad seed rejected
        assert!(grow_multi(&scene, &scorer, &[99], 3).is_err());
    }

    #[test]
    fn chain_iou_unimodal_under_oracle() {
        let scene = worked_example();
        let g = &scene.instances[0];
        let gr = growth_ratios(&scene, g);
        let chain = grow_single(&scene, &OracleScorer { instance: 0 });
        let mut prev = PixelRatio::ZERO;
        for (step, cur) in chain.steps.iter().zip(chain.prefix_ious(&scene, g)) {
            match gr.ratio[*step as usize].cmp_ratio(&prev) {
                std::cmp::Ordering::Greater => assert!(cur > prev),
                std::cmp::Ordering::Less => assert!(cur < prev),
                std::cmp::Ordering::Equal => assert_eq!(cur, prev),
            }
            prev = cur;
        }
    }

    #[test]
    fn grid_seeds_dedup() {
        let scene = worked_example();
        let seeds = grid_seeds(&scene, 1);
        assert_eq!(seeds.len(), scene.n_superpixels());
        let seeds2 = grid_seeds(&scene, 2);
        assert!(!seeds2.is_empty() && seeds2.len() <= scene.n_superpixels());
    }
}
