//! Evaluation metrics: average best overlap, prefix slot scores of the list
//! objective, instance accuracy, and the two oracle-ceiling rows.

use crate::assignment::{f_of_list, ratio_to_f64};
use crate::grower::brute_force_best_chunk;
use crate::rational::PixelRatio;
use crate::scene::{iou, Chunk, GroundTruthInstance, Scene};
use num_rational::BigRational;
use num_traits::Zero;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("exact oracle mode requires ≤ {cap} superpixels, scene has {got}")]
    CapExceeded { cap: usize, got: usize },
}

/// Per-instance best candidate IoU; empty candidate pool gives zeros.
pub fn best_overlaps(candidates: &[Chunk], instances: &[GroundTruthInstance]) -> Vec<PixelRatio> {
    instances
        .iter()
        .map(|g| {
            candidates
                .iter()
                .map(|c| iou(c, g))
                .max()
                .unwrap_or(PixelRatio::ZERO)
        })
        .collect()
}

/// Mean over instances of the best candidate IoU.
pub fn abo(candidates: &[Chunk], instances: &[GroundTruthInstance]) -> BigRational {
    assert!(!instances.is_empty(), "ABO needs at least one instance");
    let sum: BigRational = best_overlaps(candidates, instances)
        .iter()
        .map(PixelRatio::to_big)
        .sum();
    sum / BigRational::from_integer(instances.len().into())
}

/// f(L[0:i]) for i = 1..=k, padded with the final value when |L| < k. An
/// empty list scores zero everywhere.
pub fn slot_scores(chunks: &[&Chunk], instances: &[GroundTruthInstance], k: usize) -> Vec<BigRational> {
    let mut out = Vec::with_capacity(k);
    for i in 1..=k {
        if chunks.is_empty() {
            out.push(BigRational::zero());
        } else {
            let prefix = &chunks[..i.min(chunks.len())];
            out.push(f_of_list(prefix, instances));
        }
    }
    out
}

/// f(L;G) / max(|L|, |G|): mean matched IoU per slot under the optimal
/// assignment. Empty lists score zero.
pub fn instance_accuracy(chunks: &[&Chunk], instances: &[GroundTruthInstance]) -> BigRational {
    if chunks.is_empty() || instances.is_empty() {
        return BigRational::zero();
    }
    let denom = chunks.len().max(instances.len());
    f_of_list(chunks, instances) / BigRational::from_integer(denom.into())
}

pub enum OracleMode {
    /// R(c*) by 2^n enumeration; rejects scenes over the cap.
    Exact { cap: usize },
    /// R(c*) restricted to the best over the supplied candidate pool.
    PoolRestricted,
}

/// The two oracle ceilings, averaged over instances and scenes: the best
/// chunk achievable at all, and the best reachable from the grower's pools.
pub fn oracle_rows(
    scenes: &[&Scene],
    candidate_sets: &[Vec<Chunk>],
    mode: OracleMode,
) -> Result<(f64, f64), MetricsError> {
    assert_eq!(scenes.len(), candidate_sets.len());
    let mut best_sum = BigRational::zero();
    let mut pool_sum = BigRational::zero();
    let mut count = 0usize;
    for (scene, pool) in scenes.iter().zip(candidate_sets) {
        for g in &scene.instances {
            let pool_best = pool
                .iter()
                .map(|c| iou(c, g))
                .max()
                .unwrap_or(PixelRatio::ZERO);
            let best = match mode {
                OracleMode::Exact { cap } => {
                    if scene.n_superpixels() > cap {
                        return Err(MetricsError::CapExceeded {
                            cap,
                            got: scene.n_superpixels(),
                        });
                    }
                    brute_force_best_chunk(scene, g).1
                }
                OracleMode::PoolRestricted => pool_best,
            };
            best_sum += best.to_big();
            pool_sum += pool_best.to_big();
            count += 1;
        }
    }
    if count == 0 {
        return Ok((0.0, 0.0));
    }
    let n = BigRational::from_integer(count.into());
    Ok((ratio_to_f64(&(best_sum / n.clone())), ratio_to_f64(&(pool_sum / n))))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grower::{grow_multi, OracleScorer};
    use crate::scene::{build_scene, InstanceSpec, PixelGrid};
    use num_traits::ToPrimitive;

    /// 10×10 grid, one superpixel per column; two instances covering columns
    /// 0–1 and 5–6 exactly.
    fn column_scene() -> Scene {
        let w = 10u32;
        let ids: Vec<u32> = (0..w * w).map(|p| p % w).collect();
        let cols = |a: u32, b: u32| -> Vec<u32> {
            (0..w)
                .flat_map(|r| (a..=b).map(move |c| r * w + c))
                .collect()
        };
        build_scene(
            PixelGrid::new(w, w, ids),
            vec![
                InstanceSpec {
                    class_label: 1,
                    mask: cols(0, 1),
                },
                InstanceSpec {
                    class_label: 1,
                    mask: cols(5, 6),
                },
            ],
        )
        .unwrap()
    }

    #[test]
    fn abo_is_mean_of_bests() {
        let scene = column_scene();
        // Candidate A covers instance 0 exactly; candidate B covers half of
        // instance 1 (column 5 only → IoU 1/2).
        let a = Chunk::from_ids(&scene, vec![0, 1]);
        let b = Chunk::from_ids(&scene, vec![5]);
        let v = abo(&[a, b], &scene.instances);
        assert_eq!(v, BigRational::new(3.into(), 4.into()));
        assert_eq!(abo(&[], &scene.instances), BigRational::zero());
    }

    #[test]
    fn exact_covers_give_abo_one() {
        let scene = column_scene();
        let a = Chunk::from_ids(&scene, vec![0, 1]);
        let b = Chunk::from_ids(&scene, vec![5, 6]);
        assert_eq!(abo(&[a, b], &scene.instances).to_f64().unwrap(), 1.0);
    }

    #[test]
    fn slot_scores_pad_and_accumulate() {
        let scene = column_scene();
        let a = Chunk::from_ids(&scene, vec![0, 1]);
        let b = Chunk::from_ids(&scene, vec![5, 6]);
        let scores = slot_scores(&[&a, &b], &scene.instances, 3);
        assert_eq!(scores[0], BigRational::from_integer(1.into()));
        assert_eq!(scores[1], BigRational::from_integer(2.into()));
        assert_eq!(scores[2], BigRational::from_integer(2.into()), "padding");
        let single = slot_scores(&[&a], &scene.instances, 3);
        assert!(single.iter().all(|v| *v == single[0]));
        assert!(slot_scores(&[], &scene.instances, 2)
            .iter()
            .all(|v| v.is_zero()));
    }

    #[test]
    fn instance_accuracy_cases() {
        let scene = column_scene();
        let a = Chunk::from_ids(&scene, vec![0, 1]);
        let b = Chunk::from_ids(&scene, vec![5, 6]);
        assert_eq!(
            instance_accuracy(&[&a, &b], &scene.instances),
            BigRational::from_integer(1.into())
        );
        assert!(instance_accuracy(&[], &scene.instances).is_zero());
        // Over-long lists are penalized by the max(|L|,|G|) denominator.
        let c = Chunk::from_ids(&scene, vec![9]);
        let acc = instance_accuracy(&[&a, &b, &c], &scene.instances);
        assert_eq!(acc, BigRational::new(2.into(), 3.into()));
    }

    #[test]
    fn oracle_rows_match_on_small_scene() {
        let scene = column_scene();
        let mut pool = Vec::new();
        for g in &scene.instances {
            pool.extend(
                grow_multi(&scene, &OracleScorer { instance: g.id }, &[0, 5], 10).unwrap(),
            );
        }
        let scenes = vec![&scene];
        let sets = vec![pool];
        let (exact, from_pool) =
            oracle_rows(&scenes, &sets, OracleMode::Exact { cap: 15 }).unwrap();
        assert_eq!(exact, 1.0);
        assert_eq!(from_pool, 1.0, "oracle chains reach the global optimum");
        assert!(matches!(
            oracle_rows(&scenes, &sets, OracleMode::Exact { cap: 5 }),
            Err(MetricsError::CapExceeded { .. })
        ));
        let empty: Vec<Chunk> = vec![];
        let (a, b) = oracle_rows(&scenes, &[empty], OracleMode::PoolRestricted).unwrap();
        assert_eq!((a, b), (0.0, 0.0));
    }
}
