//! RANSAC baselines over the same minimal/non-minimal solvers, used to
//! contrast sampling-based robustness against GNC.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::registration::{
    registration_residuals, weighted_horn, PointCorrespondence, RigidPose,
};
use crate::shape::{
    shape_residuals, solve_shape_weighted, ShapeCorrespondence, ShapeSolveOptions,
    WeakPerspectivePose,
};

/// RANSAC loop parameters.
///
/// `inlier_threshold` plays the same role as the GNC inlier scale `c_bar`:
/// residuals strictly below it vote for a hypothesis.
#[derive(Debug, Clone, Copy)]
pub struct RansacConfig {
    pub max_iterations: usize,
    pub confidence: f64,
    pub inlier_threshold: f64,
    pub seed: u64,
}

impl RansacConfig {
    /// Registration default: up to 1000 sampling iterations at 0.99
    /// confidence.
    pub fn registration(inlier_threshold: f64, seed: u64) -> Self {
        Self { max_iterations: 1000, confidence: 0.99, inlier_threshold, seed }
    }

    /// Shape-alignment default: up to 100 sampling iterations (each minimal
    /// solve runs the full multi-start minimizer, so iterations are costly).
    pub fn shape(inlier_threshold: f64, seed: u64) -> Self {
        Self { max_iterations: 100, confidence: 0.99, inlier_threshold, seed }
    }
}

#[derive(Debug, Clone)]
pub struct RansacResult<E> {
    pub estimate: E,
    pub inlier_mask: Vec<bool>,
    /// Sampling iterations actually executed (the adaptive bound may stop
    /// the loop well before `max_iterations`).
    pub iterations_used: usize,
    pub consensus_size: usize,
}

#[derive(Debug, Clone, Error)]
pub enum RansacError {
    #[error("need at least {needed} correspondences, got {got}")]
    NotEnoughCorrespondences { needed: usize, got: usize },
    #[error("no sample reached a minimal consensus")]
    NoConsensus,
}

/// Standard adaptive iteration bound: enough samples that one is outlier-free
/// with the requested confidence, given the best inlier ratio seen so far.
fn adaptive_iteration_bound(confidence: f64, inlier_ratio: f64, sample_size: usize) -> usize {
    let p_good = inlier_ratio.powi(sample_size as i32);
    if p_good <= 0.0 {
        return usize::MAX;
    }
    if p_good >= 1.0 {
        return 0;
    }
    let bound = ((1.0 - confidence).ln() / (1.0 - p_good).ln()).ceil();
    if bound.is_finite() && bound >= 0.0 {
        bound as usize
    } else {
        usize::MAX
    }
}

/// Shared hypothesize-verify-refine loop.
///
/// `fit_minimal` solves on a sampled index set, `fit_consensus` re-solves on
/// all current inliers; either may decline degenerate inputs by returning
/// `None`. The refit is kept only when it does not shrink the consensus.
fn ransac_loop<E>(
    n: usize,
    sample_size: usize,
    config: &RansacConfig,
    fit_minimal: impl Fn(&[usize]) -> Option<E>,
    fit_consensus: impl Fn(&[bool]) -> Option<E>,
    residuals: impl Fn(&E) -> Vec<f64>,
) -> Result<RansacResult<E>, RansacError> {
    assert!(config.max_iterations >= 1, "max_iterations must be at least 1");
    assert!(
        config.confidence > 0.0 && config.confidence < 1.0,
        "confidence must lie strictly between 0 and 1"
    );
    assert!(config.inlier_threshold > 0.0, "inlier_threshold must be positive");
    if n < sample_size {
        return Err(RansacError::NotEnoughCorrespondences { needed: sample_size, got: n });
    }

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut best: Option<(E, Vec<bool>, usize)> = None;
    let mut bound = config.max_iterations;
    let mut iterations_used = 0;

    for iteration in 1..=config.max_iterations {
        iterations_used = iteration;
        let sample = rand::seq::index::sample(&mut rng, n, sample_size).into_vec();
        if let Some(model) = fit_minimal(&sample) {
            let mask: Vec<bool> = residuals(&model)
                .iter()
                .map(|&r| r < config.inlier_threshold)
                .collect();
            let size = mask.iter().filter(|&&m| m).count();
            if best.as_ref().is_none_or(|(_, _, b)| size > *b) {
                let ratio = size as f64 / n as f64;
                bound = bound.min(adaptive_iteration_bound(config.confidence, ratio, sample_size));
                best = Some((model, mask, size));
            }
        }
        if iteration >= bound {
            break;
        }
    }

    let (mut estimate, mut mask, mut consensus) = best.ok_or(RansacError::NoConsensus)?;
    if consensus < sample_size {
        return Err(RansacError::NoConsensus);
    }

    // Consensus refinement: refit on all inliers, keep it unless it shrinks
    // the consensus.
    if let Some(refined) = fit_consensus(&mask) {
        let refined_mask: Vec<bool> = residuals(&refined)
            .iter()
            .map(|&r| r < config.inlier_threshold)
            .collect();
        let refined_size = refined_mask.iter().filter(|&&m| m).count();
        if refined_size >= consensus {
            estimate = refined;
            mask = refined_mask;
            consensus = refined_size;
        }
    }

    Ok(RansacResult { estimate, inlier_mask: mask, iterations_used, consensus_size: consensus })
}

/// RANSAC rigid registration: 3-point minimal samples solved with the
/// closed-form weighted solver, consensus refit on the inlier set.
pub fn ransac_registration(
    correspondences: &[PointCorrespondence],
    config: &RansacConfig,
) -> Result<RansacResult<RigidPose>, RansacError> {
    let unit = vec![1.0; correspondences.len()];
    ransac_loop(
        correspondences.len(),
        3,
        config,
        |sample| {
            let picked: Vec<_> = sample.iter().map(|&i| correspondences[i]).collect();
            weighted_horn(&picked, &[1.0; 3]).ok()
        },
        |mask| {
            let picked: Vec<_> = correspondences
                .iter()
                .zip(mask)
                .filter(|(_, &m)| m)
                .map(|(c, _)| *c)
                .collect();
            weighted_horn(&picked, &unit[..picked.len()]).ok()
        },
        |pose| registration_residuals(correspondences, pose),
    )
}

/// RANSAC shape alignment: 4-point minimal samples solved with the full
/// multi-start solver, consensus refit likewise.
pub fn ransac_shape_alignment(
    correspondences: &[ShapeCorrespondence],
    config: &RansacConfig,
) -> Result<RansacResult<WeakPerspectivePose>, RansacError> {
    let options = ShapeSolveOptions { restarts: 16, seed: config.seed };
    let unit = vec![1.0; correspondences.len()];
    ransac_loop(
        correspondences.len(),
        4,
        config,
        |sample| {
            let picked: Vec<_> = sample.iter().map(|&i| correspondences[i]).collect();
            solve_shape_weighted(&picked, &[1.0; 4], &options).ok()
        },
        |mask| {
            let picked: Vec<_> = correspondences
                .iter()
                .zip(mask)
                .filter(|(_, &m)| m)
                .map(|(c, _)| *c)
                .collect();
            solve_shape_weighted(&picked, &unit[..picked.len()], &options).ok()
        },
        |pose| shape_residuals(correspondences, pose),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::shape::rotation_from_quat;
    use approx::assert_abs_diff_eq;
    use nalgebra::{Matrix3, Vector2, Vector3, Vector4};
    use rand::{Rng, SeedableRng};
    use rand_distr::StandardNormal;

    fn registration_instance(
        seed: u64,
        n: usize,
        outliers: usize,
    ) -> (Vec<PointCorrespondence>, RigidPose, Vec<bool>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let q = {
            let v = Vector4::new(
                rng.sample::<f64, _>(StandardNormal),
                rng.sample::<f64, _>(StandardNormal),
                rng.sample::<f64, _>(StandardNormal),
                rng.sample::<f64, _>(StandardNormal),
            );
            v / v.norm()
        };
        let pose = RigidPose {
            rotation: rotation_from_quat(&q).unwrap(),
            translation: Vector3::new(0.4, -0.2, 0.7),
        };
        let mut correspondences = Vec::with_capacity(n);
        let mask: Vec<bool> = (0..n).map(|i| i < outliers).collect();
        for &is_outlier in &mask {
            let source = Vector3::new(
                rng.random_range(0.0..1.0),
                rng.random_range(0.0..1.0),
                rng.random_range(0.0..1.0),
            );
            let target = if is_outlier {
                Vector3::new(
                    rng.random_range(-1.0..2.0),
                    rng.random_range(-1.0..2.0),
                    rng.random_range(-1.0..2.0),
                )
            } else {
                pose.apply(&source)
            };
            correspondences.push(PointCorrespondence { source, target });
        }
        (correspondences, pose, mask)
    }

    #[test]
    fn clean_data_stops_after_one_iteration() {
        let (correspondences, pose, _) = registration_instance(31, 30, 0);
        let config = RansacConfig::registration(0.01, 5);
        let result = ransac_registration(&correspondences, &config).unwrap();
        assert_eq!(result.iterations_used, 1);
        assert_eq!(result.consensus_size, 30);
        assert_abs_diff_eq!(result.estimate.rotation, pose.rotation, epsilon = 1e-9);
        assert_abs_diff_eq!(result.estimate.translation, pose.translation, epsilon = 1e-9);
    }

    #[test]
    fn recovers_under_half_outliers() {
        let (correspondences, pose, outlier_mask) = registration_instance(32, 60, 30);
        let config = RansacConfig::registration(0.01, 7);
        let result = ransac_registration(&correspondences, &config).unwrap();
        assert!(result.iterations_used < config.max_iterations);
        assert_abs_diff_eq!(result.estimate.rotation, pose.rotation, epsilon = 1e-6);
        for (found, &is_outlier) in result.inlier_mask.iter().zip(&outlier_mask) {
            if !is_outlier {
                assert!(*found, "true inlier left out of the consensus");
            }
        }
    }

    #[test]
    fn runs_are_deterministic() {
        let (correspondences, _, _) = registration_instance(33, 40, 16);
        let config = RansacConfig::registration(0.01, 11);
        let a = ransac_registration(&correspondences, &config).unwrap();
        let b = ransac_registration(&correspondences, &config).unwrap();
        assert_eq!(a.inlier_mask, b.inlier_mask);
        assert_eq!(a.iterations_used, b.iterations_used);
        assert_eq!(
            a.estimate.translation.as_slice(),
            b.estimate.translation.as_slice()
        );
    }

    #[test]
    fn garbage_data_yields_no_consensus() {
        let mut rng = ChaCha8Rng::seed_from_u64(34);
        let correspondences: Vec<_> = (0..5)
            .map(|_| PointCorrespondence {
                source: Vector3::new(
                    rng.random_range(-1.0..1.0),
                    rng.random_range(-1.0..1.0),
                    rng.random_range(-1.0..1.0),
                ),
                target: Vector3::new(
                    rng.random_range(-1.0..1.0),
                    rng.random_range(-1.0..1.0),
                    rng.random_range(-1.0..1.0),
                ),
            })
            .collect();
        // Random pairs have mismatched pairwise distances, so even the
        // sampled triples cannot be fit within a tight threshold.
        let config = RansacConfig { max_iterations: 50, ..RansacConfig::registration(1e-9, 3) };
        assert!(matches!(
            ransac_registration(&correspondences, &config),
            Err(RansacError::NoConsensus)
        ));

        assert!(matches!(
            ransac_registration(&correspondences[..2], &RansacConfig::registration(0.1, 0)),
            Err(RansacError::NotEnoughCorrespondences { .. })
        ));
    }

    #[test]
    fn contaminated_minimal_sample_scores_below_inlier_count() {
        let (correspondences, _, outlier_mask) = registration_instance(35, 30, 6);
        let inlier_count = outlier_mask.iter().filter(|&&m| !m).count();
        // Fit on two inliers and one outlier.
        let picked = [correspondences[10], correspondences[20], correspondences[0]];
        assert!(outlier_mask[0] && !outlier_mask[10] && !outlier_mask[20]);
        let pose = weighted_horn(&picked, &[1.0; 3]).unwrap();
        let consensus = registration_residuals(&correspondences, &pose)
            .iter()
            .filter(|&&r| r < 0.06)
            .count();
        assert!(consensus < inlier_count);
    }

    #[test]
    fn adaptive_bound_matches_formula() {
        assert_eq!(adaptive_iteration_bound(0.99, 1.0, 3), 0);
        assert_eq!(adaptive_iteration_bound(0.99, 0.0, 3), usize::MAX);
        // 0.5^3 = 0.125: ceil(ln 0.01 / ln 0.875) = 35.
        assert_eq!(adaptive_iteration_bound(0.99, 0.5, 3), 35);
        // 0.2^3 = 0.008: ceil(ln 0.01 / ln 0.992) = 574.
        assert_eq!(adaptive_iteration_bound(0.99, 0.2, 3), 574);
    }

    fn shape_instance(
        seed: u64,
        n: usize,
        outliers: usize,
    ) -> (Vec<ShapeCorrespondence>, WeakPerspectivePose) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let q = {
            let v = Vector4::new(
                rng.sample::<f64, _>(StandardNormal),
                rng.sample::<f64, _>(StandardNormal),
                rng.sample::<f64, _>(StandardNormal),
                rng.sample::<f64, _>(StandardNormal),
            );
            v / v.norm()
        };
        let pose = WeakPerspectivePose {
            scale: 1.3,
            rotation: rotation_from_quat(&q).unwrap(),
            translation: Vector2::new(0.2, -0.5),
        };
        let models: Vec<Vector3<f64>> = (0..n)
            .map(|_| {
                Vector3::new(
                    rng.random_range(-1.0..1.0),
                    rng.random_range(-1.0..1.0),
                    rng.random_range(-1.0..1.0),
                )
            })
            .collect();
        let correspondences = (0..n)
            .map(|i| {
                // Outliers observe the projection of a different model point.
                let observed = if i < outliers { models[(i + n / 2) % n] } else { models[i] };
                let feature = pose.scale * (pose.rotation * observed).xy() + pose.translation;
                ShapeCorrespondence { feature, model: models[i] }
            })
            .collect();
        (correspondences, pose)
    }

    #[test]
    fn shape_ransac_recovers_clean_pose() {
        let (correspondences, pose) = shape_instance(36, 20, 0);
        let config = RansacConfig::shape(0.01, 3);
        let result = ransac_shape_alignment(&correspondences, &config).unwrap();
        assert_eq!(result.iterations_used, 1);
        assert_eq!(result.consensus_size, 20);
        assert!((result.estimate.scale - pose.scale).abs() <= 1e-6);
        assert_abs_diff_eq!(result.estimate.rotation, pose.rotation, epsilon = 1e-5);
    }

    #[test]
    fn shape_ransac_survives_mismatched_correspondences() {
        let (correspondences, pose) = shape_instance(37, 24, 8);
        let config = RansacConfig::shape(0.01, 9);
        let result = ransac_shape_alignment(&correspondences, &config).unwrap();
        assert!((result.estimate.scale - pose.scale).abs() <= 0.01 * pose.scale);
        let trace = (pose.rotation.transpose() * result.estimate.rotation).trace();
        let angle = ((trace - 1.0) / 2.0).clamp(-1.0, 1.0).acos();
        assert!(angle.to_degrees() < 1.0, "rotation error {angle}");
        assert_eq!(result.consensus_size, 16);
    }

    #[test]
    fn rotation_fixture_is_proper() {
        // Guard for the fixtures above, which bypass the public constructors.
        let (_, pose) = shape_instance(38, 8, 0);
        assert_abs_diff_eq!(
            pose.rotation.transpose() * pose.rotation,
            Matrix3::identity(),
            epsilon = 1e-12
        );
    }
}
