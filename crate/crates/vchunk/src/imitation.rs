//! Behavior cloning of the two oracles: rollout data collection for the
//! grower and list regressors, and the ground-truth-free list predictor.

use crate::assignment::{greedy_list, ListEntry, PredictionList};
use crate::features::{phi, theta, FeatureContext};
use crate::learner::{ImitationDataset, LearnerError, RegressionForest};
use crate::scene::{Chunk, GroundTruthInstance, Scene};
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::Zero;

/// One scene plus its derived inputs, as consumed by the collectors.
pub struct TrainingScene<'a> {
    pub scene_id: u32,
    pub ctx: &'a FeatureContext<'a>,
}

/// For each instance: an oracle-greedy growth rollout starting from the
/// highest-α superpixel; at every step one row (θ(s,c), |s∩g|/|s|) for each
/// superpixel not yet in the chunk.
///
/// Row count per rollout of T steps over n superpixels: Σ_{t=0}^{T-1} (n−t).
pub fn collect_grower_data(
    scenes: &[TrainingScene],
    max_chunk_size: usize,
) -> Result<ImitationDataset, LearnerError> {
    let mut data = ImitationDataset::default();
    for ts in scenes {
        let scene = ts.ctx.scene;
        for g in &scene.instances {
            let mut c = Chunk::empty(scene);
            let steps = max_chunk_size.min(scene.n_superpixels());
            for step in 0..steps {
                // The oracle's first pick is the argmax-α superpixel, so the
                // seed needs no special casing.
                let mut pick: Option<(f64, u32)> = None;
                for sp in &scene.superpixels {
                    if c.contains(sp.id) {
                        continue;
                    }
                    let inter = sp.per_instance_intersection[g.id as usize];
                    let alpha = inter as f64 / sp.area as f64;
                    let row = theta(ts.ctx, sp, &c).expect("s not in c");
                    data.push(row, alpha, ts.scene_id, step as u32);
                    match pick {
                        Some((best, _)) if alpha <= best => {}
                        _ => pick = Some((alpha, sp.id)),
                    }
                }
                let (_, id) = pick.expect("unvisited superpixel exists");
                c = c.add(scene, id).expect("fresh superpixel");
            }
        }
    }
    if data.is_empty() {
        return Err(LearnerError::EmptyData);
    }
    Ok(data)
}

/// Rolls out greedy list construction over each scene's candidate pool; at
/// every round emits (Φ(c, L_so_far), y(c;G_re)) for each unselected
/// candidate, where G_re shrinks by the greedily paired instance.
pub fn collect_list_data(
    scenes: &[TrainingScene],
    candidate_sets: &[Vec<Chunk>],
    k: usize,
) -> Result<ImitationDataset, LearnerError> {
    assert_eq!(scenes.len(), candidate_sets.len());
    let mut data = ImitationDataset::default();
    for (ts, candidates) in scenes.iter().zip(candidate_sets) {
        if candidates.is_empty() {
            continue;
        }
        let scene = ts.ctx.scene;
        let reference = greedy_list(candidates, &scene.instances, k);
        let mut selected = vec![false; candidates.len()];
        let mut remaining: Vec<bool> = vec![true; scene.instances.len()];
        let mut so_far = PredictionList {
            entries: vec![],
            cumulative_f: vec![],
        };
        for (round, entry) in reference.entries.iter().enumerate() {
            for (ci, c) in candidates.iter().enumerate() {
                if selected[ci] {
                    continue;
                }
                let y = best_remaining_iou(scene, c, &remaining);
                let row = phi(ts.ctx, c, &so_far);
                data.push(row, y, ts.scene_id, round as u32);
            }
            selected[entry.chunk_index] = true;
            if let Some(g) = entry.paired_instance {
                remaining[g as usize] = false;
            }
            so_far.entries.push(entry.clone());
        }
    }
    if data.is_empty() {
        return Err(LearnerError::EmptyData);
    }
    Ok(data)
}

fn best_remaining_iou(scene: &Scene, c: &Chunk, remaining: &[bool]) -> f64 {
    scene
        .instances
        .iter()
        .filter(|g| remaining[g.id as usize])
        .map(|g| crate::scene::iou(c, g).to_f64())
        .fold(0.0f64, f64::max)
}

/// Scores a candidate chunk against the list built so far.
pub trait ListScorer {
    fn score(
        &self,
        ctx: &FeatureContext,
        c: &Chunk,
        list: &PredictionList,
    ) -> Result<f64, LearnerError>;
}

pub struct ForestListScorer<'a> {
    pub forest: &'a RegressionForest,
}

impl ListScorer for ForestListScorer<'_> {
    fn score(
        &self,
        ctx: &FeatureContext,
        c: &Chunk,
        list: &PredictionList,
    ) -> Result<f64, LearnerError> {
        self.forest.predict(&phi(ctx, c, list))
    }
}

/// Test double with ground-truth access: recovers G_re by replaying the
/// greedy pairing over the list built so far, then returns the true marginal.
/// Plugging this into [`predict_list`] must reproduce [`greedy_list`].
pub struct GreedyOracleScorer<'a> {
    pub instances: &'a [GroundTruthInstance],
}

impl ListScorer for GreedyOracleScorer<'_> {
    fn score(
        &self,
        ctx: &FeatureContext,
        c: &Chunk,
        list: &PredictionList,
    ) -> Result<f64, LearnerError> {
        let mut remaining = vec![true; self.instances.len()];
        for e in &list.entries {
            // Greedy pairing: best remaining IoU, ties to the smallest id.
            let mut pair: Option<(crate::rational::PixelRatio, usize)> = None;
            for (gi, g) in self.instances.iter().enumerate() {
                if !remaining[gi] {
                    continue;
                }
                let v = crate::scene::iou(&e.chunk, g);
                match &pair {
                    Some((best, _)) if v <= *best => {}
                    _ => pair = Some((v, gi)),
                }
            }
            if let Some((_, gi)) = pair {
                remaining[gi] = false;
            }
        }
        Ok(best_remaining_iou(ctx.scene, c, &remaining))
    }
}

/// Ground-truth-free list construction: k rounds, each rescoring every
/// unselected candidate against the current list and appending the argmax
/// (ties to the earliest candidate). Features change with the list, so
/// nothing is cached across rounds.
pub fn predict_list(
    ctx: &FeatureContext,
    candidates: &[Chunk],
    scorer: &dyn ListScorer,
    k: usize,
) -> Result<PredictionList, LearnerError> {
    let rounds = k.min(candidates.len());
    let mut selected = vec![false; candidates.len()];
    let mut list = PredictionList {
        entries: vec![],
        cumulative_f: vec![],
    };
    let mut running = BigRational::zero();
    for _ in 0..rounds {
        let mut best: Option<(f64, usize)> = None;
        for (ci, c) in candidates.iter().enumerate() {
            if selected[ci] {
                continue;
            }
            let s = scorer.score(ctx, c, &list)?;
            match best {
                Some((bs, _)) if s <= bs => {}
                _ => best = Some((s, ci)),
            }
        }
        let (score, ci) = best.expect("unselected candidate exists");
        selected[ci] = true;
        running += BigRational::from_float(score).unwrap_or_else(BigRational::zero);
        list.cumulative_f.push(running.clone());
        list.entries.push(ListEntry {
            chunk_index: ci,
            chunk: candidates[ci].clone(),
            paired_instance: None,
            marginal: None,
            score,
        });
    }
    let _ = BigInt::zero(); // keep the explicit num-bigint dependency obvious
    Ok(list)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grower::{grid_seeds, grow_multi, OracleScorer, DEFAULT_MAX_CHUNK_SIZE};
    use crate::learner::{fit_forest, ForestConfig};
    use crate::synth::{generate_scene, SynthConfig};

    fn synth(scene_index: u32) -> (Scene, crate::synth::SemanticChannel) {
        let config = SynthConfig {
            width: 32,
            height: 32,
            n_superpixels: 24,
            ..SynthConfig::default()
        };
        generate_scene(&config, scene_index).unwrap()
    }

    #[test]
    fn grower_row_count_identity() {
        let (scene, channel) = synth(0);
        let ctx = FeatureContext::new(&scene, &channel);
        let max = 6usize;
        let data = collect_grower_data(
            &[TrainingScene {
                scene_id: 0,
                ctx: &ctx,
            }],
            max,
        )
        .unwrap();
        let n = scene.n_superpixels();
        let per_rollout: usize = (0..max).map(|t| n - t).sum();
        assert_eq!(data.len(), per_rollout * scene.n_instances());
    }

    #[test]
    fn grower_targets_match_alpha_extremes() {
        let (scene, channel) = synth(1);
        let ctx = FeatureContext::new(&scene, &channel);
        let data = collect_grower_data(
            &[TrainingScene {
                scene_id: 1,
                ctx: &ctx,
            }],
            1,
        )
        .unwrap();
        // Step-0 rows cover every superpixel per instance, in scene order.
        let n = scene.n_superpixels();
        for (gi, g) in scene.instances.iter().enumerate() {
            for i in 0..n {
                let sp = &scene.superpixels[i];
                let expected =
                    sp.per_instance_intersection[g.id as usize] as f64 / sp.area as f64;
                assert_eq!(data.targets[gi * n + i], expected);
            }
        }
        assert!(data.targets.iter().any(|&t| t == 0.0));
    }

    #[test]
    fn list_data_slot0_targets_are_best_ious() {
        let (scene, channel) = synth(2);
        let ctx = FeatureContext::new(&scene, &channel);
        let candidates = grow_multi(
            &scene,
            &OracleScorer {
                instance: scene.instances[0].id,
            },
            &grid_seeds(&scene, 8),
            DEFAULT_MAX_CHUNK_SIZE,
        )
        .unwrap();
        let data = collect_list_data(
            &[TrainingScene {
                scene_id: 2,
                ctx: &ctx,
            }],
            &[candidates.clone()],
            3,
        )
        .unwrap();
        for (i, c) in candidates.iter().enumerate() {
            let expected = scene
                .instances
                .iter()
                .map(|g| crate::scene::iou(c, g).to_f64())
                .fold(0.0f64, f64::max);
            assert_eq!(data.targets[i], expected);
            assert_eq!(data.provenance[i], (2, 0));
        }
    }

    #[test]
    fn oracle_scorer_reproduces_greedy_list() {
        for idx in 0..8 {
            let (scene, channel) = synth(idx);
            let ctx = FeatureContext::new(&scene, &channel);
            let mut candidates = Vec::new();
            for g in &scene.instances {
                candidates.extend(
                    grow_multi(
                        &scene,
                        &OracleScorer { instance: g.id },
                        &grid_seeds(&scene, 8),
                        DEFAULT_MAX_CHUNK_SIZE,
                    )
                    .unwrap(),
                );
            }
            let k = 4;
            let reference = greedy_list(&candidates, &scene.instances, k);
            let scorer = GreedyOracleScorer {
                instances: &scene.instances,
            };
            let predicted = predict_list(&ctx, &candidates, &scorer, k).unwrap();
            assert_eq!(
                predicted.chunk_indices(),
                reference.chunk_indices(),
                "scene {idx}"
            );
        }
    }

    #[test]
    fn predict_list_k_zero_is_empty() {
        let (scene, channel) = synth(3);
        let ctx = FeatureContext::new(&scene, &channel);
        let candidates = vec![Chunk::from_ids(&scene, vec![0])];
        let scorer = GreedyOracleScorer {
            instances: &scene.instances,
        };
        let list = predict_list(&ctx, &candidates, &scorer, 0).unwrap();
        assert!(list.is_empty());
    }

    #[test]
    fn forest_scorer_dim_mismatch_rejected() {
        let (scene, channel) = synth(4);
        let ctx = FeatureContext::new(&scene, &channel);
        // Forest trained on 1-D data cannot score Φ vectors.
        let mut d = ImitationDataset::default();
        for i in 0..20 {
            d.push(vec![i as f64 / 20.0], (i % 2) as f64, 0, i);
        }
        let forest = fit_forest(&d, &ForestConfig::default()).unwrap();
        let scorer = ForestListScorer { forest: &forest };
        let candidates = vec![Chunk::from_ids(&scene, vec![0])];
        assert!(matches!(
            predict_list(&ctx, &candidates, &scorer, 1),
            Err(LearnerError::DimMismatch { .. })
        ));
    }
}
