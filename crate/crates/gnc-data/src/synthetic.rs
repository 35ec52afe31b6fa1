//! Seeded generators for registration and shape-alignment instances.
//!
//! Both generators follow the same recipe: draw a ground-truth model, produce
//! noisy inlier measurements from it, then corrupt a fixed fraction of the
//! measurements with structured outliers (uniform points in the target
//! bounding box for registration, rewired projections for shape alignment).
//! The draw order is fixed, so a `(spec, seed)` pair maps to exactly one
//! instance, bit for bit, on every platform.

use std::path::PathBuf;

use nalgebra::{Matrix3, Vector2, Vector3, Vector4};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use thiserror::Error;

use gnc_solvers::registration::{PointCorrespondence, RigidPose};
use gnc_solvers::shape::{rotation_from_quat, ShapeCorrespondence, WeakPerspectivePose};

use crate::ply::{load_ply_points, PlyError};

/// Where the source points of a registration instance come from.
#[derive(Debug, Clone, PartialEq)]
pub enum SourceCloud {
    /// `n` points sampled uniformly from the unit cube.
    RandomCube,
    /// `n` points sampled without replacement from an ASCII PLY file.
    FromPly(PathBuf),
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegistrationInstanceSpec {
    pub n: usize,
    pub sigma: f64,
    pub outlier_rate: f64,
    pub seed: u64,
    pub source: SourceCloud,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ShapeInstanceSpec {
    pub n: usize,
    pub sigma: f64,
    pub outlier_rate: f64,
    pub seed: u64,
}

#[derive(Debug, Clone)]
pub struct RegistrationInstance {
    pub correspondences: Vec<PointCorrespondence>,
    pub ground_truth: RigidPose,
    /// `true` where the correspondence was replaced by an outlier.
    pub outlier_mask: Vec<bool>,
}

#[derive(Debug, Clone)]
pub struct ShapeInstance {
    pub correspondences: Vec<ShapeCorrespondence>,
    pub ground_truth: WeakPerspectivePose,
    pub outlier_mask: Vec<bool>,
}

#[derive(Debug, Error)]
pub enum GenerateError {
    #[error("invalid instance spec: {0}")]
    InvalidSpec(String),
    #[error("source cloud has {available} points, need {requested}")]
    NotEnoughPoints { available: usize, requested: usize },
    #[error("source cloud is degenerate: all points coincide")]
    DegenerateCloud,
    #[error(transparent)]
    Ply(#[from] PlyError),
}

fn validate(n: usize, sigma: f64, outlier_rate: f64) -> Result<usize, GenerateError> {
    if n == 0 {
        return Err(GenerateError::InvalidSpec("n must be positive".into()));
    }
    if !sigma.is_finite() || sigma < 0.0 {
        return Err(GenerateError::InvalidSpec(format!(
            "sigma must be finite and non-negative, got {sigma}"
        )));
    }
    if !(0.0..1.0).contains(&outlier_rate) {
        return Err(GenerateError::InvalidSpec(format!(
            "outlier rate must be in [0, 1), got {outlier_rate}"
        )));
    }
    Ok((outlier_rate * n as f64).round() as usize)
}

/// Draw a rotation uniformly over SO(3) by normalizing a 4-vector of
/// standard Gaussians into a unit quaternion.
pub fn random_rotation<R: Rng>(rng: &mut R) -> Matrix3<f64> {
    loop {
        let v = Vector4::<f64>::from_fn(|_, _| rng.sample(StandardNormal));
        let norm = v.norm();
        if norm > 1e-6 {
            return rotation_from_quat(&(v / norm)).expect("normalized quaternion is unit");
        }
    }
}

fn standard_normal<R: Rng>(rng: &mut R) -> f64 {
    rng.sample(StandardNormal)
}

/// Uniform sample that tolerates a collapsed interval.
fn uniform_in<R: Rng>(rng: &mut R, lo: f64, hi: f64) -> f64 {
    if hi > lo {
        rng.random_range(lo..hi)
    } else {
        lo
    }
}

/// Translate the cloud's minimum corner to the origin and scale the maximum
/// axis-aligned extent to 1, so noise levels and thresholds are comparable
/// across sources.
fn normalize_to_unit_extent(points: &mut [Vector3<f64>]) -> Result<(), GenerateError> {
    let mut lo = points[0];
    let mut hi = points[0];
    for p in points.iter() {
        lo = lo.inf(p);
        hi = hi.sup(p);
    }
    let extent = (hi - lo).max();
    if !extent.is_finite() || extent <= 0.0 {
        return Err(GenerateError::DegenerateCloud);
    }
    for p in points.iter_mut() {
        *p = (*p - lo) / extent;
    }
    Ok(())
}

/// Generate a rigid-registration instance with Gaussian inlier noise and
/// uniform outliers in the bounding box of the transformed cloud.
pub fn generate_registration(
    spec: &RegistrationInstanceSpec,
) -> Result<RegistrationInstance, GenerateError> {
    let outlier_count = validate(spec.n, spec.sigma, spec.outlier_rate)?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);

    let mut source: Vec<Vector3<f64>> = match &spec.source {
        SourceCloud::RandomCube => (0..spec.n)
            .map(|_| Vector3::from_fn(|_, _| rng.random_range(0.0..1.0)))
            .collect(),
        SourceCloud::FromPly(path) => {
            let cloud = load_ply_points(path)?;
            if cloud.len() < spec.n {
                return Err(GenerateError::NotEnoughPoints {
                    available: cloud.len(),
                    requested: spec.n,
                });
            }
            rand::seq::index::sample(&mut rng, cloud.len(), spec.n)
                .iter()
                .map(|i| cloud[i])
                .collect()
        }
    };
    normalize_to_unit_extent(&mut source)?;

    let rotation = random_rotation(&mut rng);
    let translation = Vector3::from_fn(|_, _| rng.random_range(-1.0..1.0));
    let ground_truth = RigidPose {
        rotation,
        translation,
    };

    let mut outlier_mask = vec![false; spec.n];
    for i in rand::seq::index::sample(&mut rng, spec.n, outlier_count) {
        outlier_mask[i] = true;
    }

    // Noiseless transformed cloud, reused both for the inlier means and for
    // the box the outliers are drawn from.
    let transformed: Vec<Vector3<f64>> = source.iter().map(|a| ground_truth.apply(a)).collect();
    let mut lo = transformed[0];
    let mut hi = transformed[0];
    for p in &transformed {
        lo = lo.inf(p);
        hi = hi.sup(p);
    }

    let correspondences = source
        .iter()
        .zip(&transformed)
        .zip(&outlier_mask)
        .map(|((a, b), &is_outlier)| {
            let target = if is_outlier {
                Vector3::from_fn(|k, _| uniform_in(&mut rng, lo[k], hi[k]))
            } else {
                b + spec.sigma * Vector3::from_fn(|_, _| standard_normal(&mut rng))
            };
            PointCorrespondence {
                source: *a,
                target,
            }
        })
        .collect();

    Ok(RegistrationInstance {
        correspondences,
        ground_truth,
        outlier_mask,
    })
}

/// Generate a shape-alignment instance: weak-perspective projections of a
/// random model, with outliers rewired to the projection of a *different*
/// model point so they stay inside the image statistics.
pub fn generate_shape_alignment(spec: &ShapeInstanceSpec) -> Result<ShapeInstance, GenerateError> {
    let outlier_count = validate(spec.n, spec.sigma, spec.outlier_rate)?;
    if outlier_count > 0 && spec.n < 2 {
        return Err(GenerateError::InvalidSpec(
            "rewired outliers need at least two model points".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);

    let model: Vec<Vector3<f64>> = (0..spec.n)
        .map(|_| Vector3::from_fn(|_, _| rng.random_range(-1.0..1.0)))
        .collect();
    let scale = rng.random_range(0.5..2.0);
    let rotation = random_rotation(&mut rng);
    let translation = Vector2::from_fn(|_, _| rng.random_range(-1.0..1.0));
    let ground_truth = WeakPerspectivePose {
        scale,
        rotation,
        translation,
    };

    let mut outlier_mask = vec![false; spec.n];
    for i in rand::seq::index::sample(&mut rng, spec.n, outlier_count) {
        outlier_mask[i] = true;
    }

    let project = |b: &Vector3<f64>| -> Vector2<f64> {
        let rotated = rotation * b;
        scale * rotated.xy() + translation
    };

    let correspondences = model
        .iter()
        .enumerate()
        .map(|(i, b)| {
            let noise = spec.sigma * Vector2::from_fn(|_, _| standard_normal(&mut rng));
            let observed = if outlier_mask[i] {
                // Project another point of the same model: the feature is
                // plausible on its own but inconsistent with `b`.
                let j = loop {
                    let j = rng.random_range(0..spec.n);
                    if j != i {
                        break j;
                    }
                };
                project(&model[j])
            } else {
                project(b)
            };
            ShapeCorrespondence {
                feature: observed + noise,
                model: *b,
            }
        })
        .collect();

    Ok(ShapeInstance {
        correspondences,
        ground_truth,
        outlier_mask,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use gnc_solvers::registration::weighted_horn;
    use gnc_solvers::shape::{
        solve_shape_weighted, shape_residuals, ShapeSolveOptions,
    };
    use crate::metrics::rotation_error_deg;
    use std::io::Write;

    fn cube_spec(seed: u64) -> RegistrationInstanceSpec {
        RegistrationInstanceSpec {
            n: 60,
            sigma: 0.01,
            outlier_rate: 0.3,
            seed,
            source: SourceCloud::RandomCube,
        }
    }

    #[test]
    fn same_seed_reproduces_the_instance_bit_for_bit() {
        let a = generate_registration(&cube_spec(7)).unwrap();
        let b = generate_registration(&cube_spec(7)).unwrap();
        assert_eq!(a.outlier_mask, b.outlier_mask);
        assert_eq!(a.ground_truth.rotation, b.ground_truth.rotation);
        assert_eq!(a.ground_truth.translation, b.ground_truth.translation);
        for (x, y) in a.correspondences.iter().zip(&b.correspondences) {
            assert_eq!(x.source, y.source);
            assert_eq!(x.target, y.target);
        }

        let c = generate_registration(&cube_spec(8)).unwrap();
        assert_ne!(
            a.correspondences[0].target,
            c.correspondences[0].target,
            "different seeds must give different instances"
        );
    }

    #[test]
    fn outlier_count_is_the_rounded_fraction() {
        for (n, rate, expect) in [(100, 0.8, 80), (60, 0.33, 20), (10, 0.0, 0), (7, 0.5, 4)] {
            let spec = RegistrationInstanceSpec {
                n,
                sigma: 0.0,
                outlier_rate: rate,
                seed: 1,
                source: SourceCloud::RandomCube,
            };
            let inst = generate_registration(&spec).unwrap();
            assert_eq!(inst.outlier_mask.len(), n);
            assert_eq!(inst.outlier_mask.iter().filter(|&&o| o).count(), expect);

            let shape = generate_shape_alignment(&ShapeInstanceSpec {
                n,
                sigma: 0.0,
                outlier_rate: rate,
                seed: 1,
            })
            .unwrap();
            assert_eq!(shape.outlier_mask.iter().filter(|&&o| o).count(), expect);
        }
    }

    #[test]
    fn source_cloud_is_anchored_at_origin_with_unit_extent() {
        let inst = generate_registration(&cube_spec(3)).unwrap();
        let mut lo = inst.correspondences[0].source;
        let mut hi = lo;
        for c in &inst.correspondences {
            lo = lo.inf(&c.source);
            hi = hi.sup(&c.source);
        }
        assert_abs_diff_eq!(lo, Vector3::zeros(), epsilon = 1e-12);
        assert_abs_diff_eq!((hi - lo).max(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn noiseless_outlier_free_instance_is_solved_exactly() {
        let spec = RegistrationInstanceSpec {
            n: 40,
            sigma: 0.0,
            outlier_rate: 0.0,
            seed: 11,
            source: SourceCloud::RandomCube,
        };
        let inst = generate_registration(&spec).unwrap();
        let pose = weighted_horn(&inst.correspondences, &vec![1.0; 40]).unwrap();
        assert!(rotation_error_deg(&pose.rotation, &inst.ground_truth.rotation) < 1e-9);
        assert_abs_diff_eq!(
            pose.translation,
            inst.ground_truth.translation,
            epsilon = 1e-9
        );

        let shape = generate_shape_alignment(&ShapeInstanceSpec {
            n: 30,
            sigma: 0.0,
            outlier_rate: 0.0,
            seed: 11,
        })
        .unwrap();
        let est = solve_shape_weighted(
            &shape.correspondences,
            &vec![1.0; 30],
            &ShapeSolveOptions::default(),
        )
        .unwrap();
        assert!(rotation_error_deg(&est.rotation, &shape.ground_truth.rotation) < 1e-4);
        assert_abs_diff_eq!(est.scale, shape.ground_truth.scale, epsilon = 1e-6);
        assert_abs_diff_eq!(
            est.translation,
            shape.ground_truth.translation,
            epsilon = 1e-6
        );
    }

    #[test]
    fn inlier_residuals_at_the_ground_truth_stay_within_six_sigma() {
        for seed in 0..10 {
            let spec = RegistrationInstanceSpec {
                sigma: 0.01,
                ..cube_spec(seed)
            };
            let inst = generate_registration(&spec).unwrap();
            for (c, &out) in inst.correspondences.iter().zip(&inst.outlier_mask) {
                if !out {
                    let r = (c.target - inst.ground_truth.apply(&c.source)).norm();
                    assert!(r <= 6.0 * spec.sigma, "inlier residual {r} too large");
                }
            }
        }
    }

    #[test]
    fn shape_outliers_are_rewired_but_inliers_project_cleanly() {
        let spec = ShapeInstanceSpec {
            n: 25,
            sigma: 0.0,
            outlier_rate: 0.4,
            seed: 5,
        };
        let inst = generate_shape_alignment(&spec).unwrap();
        let pose = inst.ground_truth;
        let residuals = shape_residuals(&inst.correspondences, &pose);
        for (i, (&r, &out)) in residuals.iter().zip(&inst.outlier_mask).enumerate() {
            if out {
                assert!(r > 1e-9, "outlier {i} coincides with its own projection");
            } else {
                assert!(r < 1e-12, "inlier {i} has residual {r}");
            }
        }
    }

    #[test]
    fn gaussian_quaternions_cover_rotations_without_bias() {
        // The trace of a uniformly distributed rotation has mean 0; a strong
        // deviation would indicate a biased sampler.
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let samples = 100_000;
        let mean_trace: f64 = (0..samples)
            .map(|_| random_rotation(&mut rng).trace())
            .sum::<f64>()
            / samples as f64;
        assert!(
            mean_trace.abs() < 0.02,
            "mean trace {mean_trace} suggests biased rotations"
        );
    }

    #[test]
    fn invalid_specs_are_rejected() {
        let bad_rate = RegistrationInstanceSpec {
            outlier_rate: 1.0,
            ..cube_spec(0)
        };
        assert!(matches!(
            generate_registration(&bad_rate),
            Err(GenerateError::InvalidSpec(_))
        ));

        let bad_sigma = RegistrationInstanceSpec {
            sigma: -0.1,
            ..cube_spec(0)
        };
        assert!(matches!(
            generate_registration(&bad_sigma),
            Err(GenerateError::InvalidSpec(_))
        ));

        let empty = RegistrationInstanceSpec {
            n: 0,
            ..cube_spec(0)
        };
        assert!(matches!(
            generate_registration(&empty),
            Err(GenerateError::InvalidSpec(_))
        ));
    }

    #[test]
    fn ply_backed_instances_subsample_the_file() {
        let mut file = tempfile::NamedTempFile::new().unwrap();
        writeln!(file, "ply\nformat ascii 1.0\nelement vertex 5\nproperty float x\nproperty float y\nproperty float z\nend_header").unwrap();
        for i in 0..5 {
            writeln!(file, "{} {} {}", i as f64, 2.0 * i as f64, 0.5).unwrap();
        }
        file.flush().unwrap();

        let spec = RegistrationInstanceSpec {
            n: 3,
            sigma: 0.0,
            outlier_rate: 0.0,
            seed: 4,
            source: SourceCloud::FromPly(file.path().to_path_buf()),
        };
        let inst = generate_registration(&spec).unwrap();
        assert_eq!(inst.correspondences.len(), 3);
        // After normalization every source point still lies on the original
        // line y = 2x (direction is preserved by scaling and translation).
        for c in &inst.correspondences {
            assert_abs_diff_eq!(c.source.y, 2.0 * c.source.x, epsilon = 1e-12);
        }

        let too_many = RegistrationInstanceSpec {
            n: 9,
            ..spec.clone()
        };
        assert!(matches!(
            generate_registration(&too_many),
            Err(GenerateError::NotEnoughPoints {
                available: 5,
                requested: 9
            })
        ));
    }
}
