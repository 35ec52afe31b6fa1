//! Weighted closed-form rigid registration of 3D point correspondences.
//!
//! Given correspondences `(a_i, b_i)` and weights `w_i`, the solver minimizes
//! `sum_i w_i ||b_i - R a_i - t||^2` exactly: translation is eliminated
//! through the weighted centroids and the rotation comes from the SVD of the
//! weighted cross-covariance, with the usual determinant fix to exclude
//! reflections.

use gnc_core::WeightedProblem;
use nalgebra::{Matrix3, Vector3};
use thiserror::Error;

/// A putative match between a source point and a target point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PointCorrespondence {
    pub source: Vector3<f64>,
    pub target: Vector3<f64>,
}

/// A rigid transform `x -> R x + t` with `R` a proper rotation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RigidPose {
    pub rotation: Matrix3<f64>,
    pub translation: Vector3<f64>,
}

impl RigidPose {
    pub fn identity() -> Self {
        Self {
            rotation: Matrix3::identity(),
            translation: Vector3::zeros(),
        }
    }

    pub fn apply(&self, point: &Vector3<f64>) -> Vector3<f64> {
        self.rotation * point + self.translation
    }
}

#[derive(Debug, Clone, Error)]
pub enum RegistrationError {
    #[error("need at least {needed} correspondences, got {got}")]
    NotEnoughCorrespondences { needed: usize, got: usize },
    #[error("degenerate configuration: {0}")]
    DegenerateConfiguration(&'static str),
}

/// Ratio to the largest singular value below which the weighted
/// cross-covariance is treated as rank-deficient.
const DEGENERACY_RATIO: f64 = 1e-12;

/// Solve the weighted rigid-registration problem in closed form.
///
/// The rotation maximizes `trace(R H)` for the weighted cross-covariance
/// `H = sum_i w_i (a_i - a_bar)(b_i - b_bar)^T`: with `H = U S V^T` it is
/// `R = V diag(1, 1, det(V U^T)) U^T`, and `t = b_bar - R a_bar`. Setting a
/// weight to zero is exactly equivalent to deleting that correspondence.
///
/// Fails when the total weight vanishes or the weighted sources are
/// (numerically) collinear or coincident, i.e. the two smallest singular
/// values of `H` fall below `1e-12` times the largest.
pub fn weighted_horn(
    correspondences: &[PointCorrespondence],
    weights: &[f64],
) -> Result<RigidPose, RegistrationError> {
    assert_eq!(
        correspondences.len(),
        weights.len(),
        "one weight per correspondence"
    );
    let n = correspondences.len();
    if n < 3 {
        return Err(RegistrationError::NotEnoughCorrespondences { needed: 3, got: n });
    }
    let total: f64 = weights.iter().sum();
    if total <= 0.0 {
        return Err(RegistrationError::DegenerateConfiguration(
            "total weight is zero",
        ));
    }

    let mut a_bar = Vector3::zeros();
    let mut b_bar = Vector3::zeros();
    for (c, &w) in correspondences.iter().zip(weights) {
        a_bar += w * c.source;
        b_bar += w * c.target;
    }
    a_bar /= total;
    b_bar /= total;

    let mut cross = Matrix3::zeros();
    for (c, &w) in correspondences.iter().zip(weights) {
        cross += w * (c.source - a_bar) * (c.target - b_bar).transpose();
    }

    let svd = cross.svd(true, true);
    let sv = svd.singular_values;
    if sv[0] <= 0.0 || sv[1] < DEGENERACY_RATIO * sv[0] {
        return Err(RegistrationError::DegenerateConfiguration(
            "weighted sources are collinear or coincident",
        ));
    }
    let u = svd.u.expect("u requested");
    let v_t = svd.v_t.expect("v_t requested");

    let det = (v_t.transpose() * u.transpose()).determinant();
    let fix = Matrix3::from_diagonal(&Vector3::new(1.0, 1.0, det.signum()));
    let rotation = v_t.transpose() * fix * u.transpose();
    let translation = b_bar - rotation * a_bar;
    Ok(RigidPose { rotation, translation })
}

/// Residual magnitudes `||b_i - R a_i - t||` at a pose.
pub fn registration_residuals(
    correspondences: &[PointCorrespondence],
    pose: &RigidPose,
) -> Vec<f64> {
    correspondences
        .iter()
        .map(|c| (c.target - pose.apply(&c.source)).norm())
        .collect()
}

/// Rigid registration as a GNC-solvable weighted problem.
#[derive(Debug, Clone)]
pub struct RegistrationProblem {
    pub correspondences: Vec<PointCorrespondence>,
}

impl RegistrationProblem {
    pub fn new(correspondences: Vec<PointCorrespondence>) -> Self {
        Self { correspondences }
    }
}

impl WeightedProblem for RegistrationProblem {
    type Estimate = RigidPose;
    type Error = RegistrationError;

    fn measurement_count(&self) -> usize {
        self.correspondences.len()
    }

    fn solve_weighted(&self, weights: &[f64]) -> Result<RigidPose, RegistrationError> {
        weighted_horn(&self.correspondences, weights)
    }

    fn residuals(&self, estimate: &RigidPose) -> Vec<f64> {
        registration_residuals(&self.correspondences, estimate)
    }
}
