//! Weak-perspective shape alignment: recover scale `s`, rotation `R` and 2D
//! translation `t` from correspondences between 2D features `z_i` and 3D
//! model points `B_i`, minimizing
//!
//! ```text
//! sum_i w_i || z_i - s P R B_i - t ||^2,    P = first two rows of I_3.
//! ```
//!
//! The solve happens in three stages, each exact:
//!
//! 1. **Translation marginalization.** For fixed `(s, R)` the optimal `t` is
//!    the difference of weighted centroids, so the objective collapses to the
//!    centered, weight-absorbed lists `z~_i = sqrt(w_i)(z_i - z_bar)`,
//!    `B~_i = sqrt(w_i)(B_i - B_bar)`.
//! 2. **Quaternion monomial lift.** With `v = sqrt(s) q` for a unit
//!    quaternion `q` (scalar-last `x, y, z, w`), `s R` is a *linear* function
//!    `A m(v)` of the ten degree-2 monomials `m(v)`, so the objective becomes
//!    the quartic `f(v) = m(v)^T Q m(v) - 2 g^T m(v) + h`.
//! 3. **Multi-start minimization.** `f` is minimized by damped-Newton descent
//!    from 12 fixed starts plus seeded random restarts, each scaled to a
//!    data-driven initial scale; the acceptance suite certifies the result
//!    against a brute-force rotation/scale grid.

use gnc_core::WeightedProblem;
use nalgebra::{Matrix3, Matrix4, SMatrix, SVector, Vector2, Vector3, Vector4};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use std::sync::LazyLock;
use thiserror::Error;

pub type Matrix10 = SMatrix<f64, 10, 10>;
pub type Vector10 = SVector<f64, 10>;

/// A putative match between a 2D feature and a 3D model point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShapeCorrespondence {
    pub feature: Vector2<f64>,
    pub model: Vector3<f64>,
}

/// A weak-perspective camera pose: `z = s P R B + t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeakPerspectivePose {
    pub scale: f64,
    pub rotation: Matrix3<f64>,
    pub translation: Vector2<f64>,
}

/// The lifted 4-vector `v = sqrt(s) q`: its norm squared is the scale and its
/// direction is the rotation quaternion.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuatVec(pub Vector4<f64>);

impl QuatVec {
    pub fn scale(&self) -> f64 {
        self.0.norm_squared()
    }
}

/// Centered, weight-absorbed correspondences with the weighted centroids
/// needed to restore the translation afterwards.
#[derive(Debug, Clone)]
pub struct Centered {
    pub z_tilde: Vec<Vector2<f64>>,
    pub b_tilde: Vec<Vector3<f64>>,
    pub z_bar: Vector2<f64>,
    pub b_bar: Vector3<f64>,
}

/// The quartic objective `f(v) = m(v)^T Q m(v) - 2 g^T m(v) + h` plus the
/// cached quantities needed to recover the full pose and to scale the
/// minimizer's starting points.
#[derive(Debug, Clone)]
pub struct QghForm {
    pub q: Matrix10,
    pub g: Vector10,
    pub h: f64,
    pub z_bar: Vector2<f64>,
    pub b_bar: Vector3<f64>,
    /// `sum_i ||P B~_i||^2`, the denominator of the initial scale estimate.
    pub projected_spread: f64,
}

#[derive(Debug, Clone, Error)]
pub enum ShapeError {
    #[error("degenerate configuration: {0}")]
    DegenerateConfiguration(&'static str),
    #[error("quaternion norm {norm} is not 1")]
    NonUnitQuaternion { norm: f64 },
    #[error("no descent run produced a finite objective")]
    OptimizationFailed,
    #[error("lifted vector is numerically zero, scale is undefined")]
    DegenerateScale,
}

/// Linear map from the quaternion monomials to `vec(s R)` in column-major
/// order (`R11 R21 R31 R12 ...`). Exact for `v = sqrt(s) q` with `q` unit.
static LIFT: LazyLock<SMatrix<f64, 9, 10>> = LazyLock::new(|| {
    SMatrix::<f64, 9, 10>::from_row_slice(&[
        1.0, -1.0, -1.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, //
        0.0, 0.0, 0.0, 0.0, 2.0, 0.0, 0.0, 0.0, 0.0, 2.0, //
        0.0, 0.0, 0.0, 0.0, 0.0, 2.0, 0.0, 0.0, -2.0, 0.0, //
        0.0, 0.0, 0.0, 0.0, 2.0, 0.0, 0.0, 0.0, 0.0, -2.0, //
        -1.0, 1.0, -1.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, //
        0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 2.0, 2.0, 0.0, 0.0, //
        0.0, 0.0, 0.0, 0.0, 0.0, 2.0, 0.0, 0.0, 2.0, 0.0, //
        0.0, 0.0, 0.0, 0.0, 0.0, 0.0, -2.0, 2.0, 0.0, 0.0, //
        -1.0, -1.0, 1.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0,
    ])
});

const UNIT_NORM_TOL: f64 = 1e-9;
const MAX_INNER_ITERATIONS: usize = 500;
const GRADIENT_TOL: f64 = 1e-10;
const SCALE_EPS: f64 = 1e-9;

/// Eliminate the translation for the current weights.
///
/// Returns the weight-absorbed centered lists and the weighted centroids;
/// fails when the total weight is zero.
pub fn marginalize_translation(
    correspondences: &[ShapeCorrespondence],
    weights: &[f64],
) -> Result<Centered, ShapeError> {
    assert_eq!(
        correspondences.len(),
        weights.len(),
        "one weight per correspondence"
    );
    let total: f64 = weights.iter().sum();
    if total <= 0.0 {
        return Err(ShapeError::DegenerateConfiguration("total weight is zero"));
    }
    let mut z_bar = Vector2::zeros();
    let mut b_bar = Vector3::zeros();
    for (c, &w) in correspondences.iter().zip(weights) {
        z_bar += w * c.feature;
        b_bar += w * c.model;
    }
    z_bar /= total;
    b_bar /= total;

    let mut z_tilde = Vec::with_capacity(correspondences.len());
    let mut b_tilde = Vec::with_capacity(correspondences.len());
    for (c, &w) in correspondences.iter().zip(weights) {
        let root = w.sqrt();
        z_tilde.push(root * (c.feature - z_bar));
        b_tilde.push(root * (c.model - b_bar));
    }
    Ok(Centered { z_tilde, b_tilde, z_bar, b_bar })
}

/// The ten degree-2 monomials of `v`, ordered
/// `(v1^2, v2^2, v3^2, v4^2, v1v2, v1v3, v1v4, v2v3, v2v4, v3v4)`.
pub fn quat_monomials(v: &Vector4<f64>) -> Vector10 {
    let (a, b, c, d) = (v[0], v[1], v[2], v[3]);
    Vector10::from_column_slice(&[
        a * a,
        b * b,
        c * c,
        d * d,
        a * b,
        a * c,
        a * d,
        b * c,
        b * d,
        c * d,
    ])
}

/// Rotation matrix of a unit quaternion `(x, y, z, w)` through the monomial
/// lift: `R = unstack(A m(q))`.
pub fn rotation_from_quat(q: &Vector4<f64>) -> Result<Matrix3<f64>, ShapeError> {
    let norm = q.norm();
    if (norm - 1.0).abs() > UNIT_NORM_TOL {
        return Err(ShapeError::NonUnitQuaternion { norm });
    }
    let stacked = *LIFT * quat_monomials(q);
    Ok(Matrix3::from_column_slice(stacked.as_slice()))
}

/// Assemble the quartic objective from centered correspondences:
/// `Q = A^T (sum B~ B~^T (x) P^T P) A`, `g = A^T sum vec(P^T z~ B~^T)`,
/// `h = sum ||z~||^2`.
pub fn build_qgh(centered: &Centered) -> QghForm {
    let ptp = Matrix3::from_diagonal(&Vector3::new(1.0, 1.0, 0.0));
    let mut model_second_moment = Matrix3::zeros();
    let mut stacked_cross = SVector::<f64, 9>::zeros();
    let mut h = 0.0;
    let mut projected_spread = 0.0;
    for (zt, bt) in centered.z_tilde.iter().zip(&centered.b_tilde) {
        model_second_moment += bt * bt.transpose();
        // vec(P^T z~ B~^T): P^T z~ just pads z~ with a zero third row.
        let lifted_feature = Vector3::new(zt[0], zt[1], 0.0);
        let cross = lifted_feature * bt.transpose();
        stacked_cross += SVector::<f64, 9>::from_column_slice(cross.as_slice());
        h += zt.norm_squared();
        projected_spread += bt[0] * bt[0] + bt[1] * bt[1];
    }
    let kron = model_second_moment.kronecker(&ptp);
    QghForm {
        q: LIFT.transpose() * kron * *LIFT,
        g: LIFT.transpose() * stacked_cross,
        h,
        z_bar: centered.z_bar,
        b_bar: centered.b_bar,
        projected_spread,
    }
}

/// Evaluate `f(v) = m^T Q m - 2 g^T m + h`.
pub fn objective_f(form: &QghForm, v: &Vector4<f64>) -> f64 {
    let m = quat_monomials(v);
    (form.q * m).dot(&m) - 2.0 * form.g.dot(&m) + form.h
}

/// Jacobian of the monomial vector, `dm/dv`.
fn monomial_jacobian(v: &Vector4<f64>) -> SMatrix<f64, 10, 4> {
    let (a, b, c, d) = (v[0], v[1], v[2], v[3]);
    SMatrix::<f64, 10, 4>::from_row_slice(&[
        2.0 * a,
        0.0,
        0.0,
        0.0, //
        0.0,
        2.0 * b,
        0.0,
        0.0, //
        0.0,
        0.0,
        2.0 * c,
        0.0, //
        0.0,
        0.0,
        0.0,
        2.0 * d, //
        b,
        a,
        0.0,
        0.0, //
        c,
        0.0,
        a,
        0.0, //
        d,
        0.0,
        0.0,
        a, //
        0.0,
        c,
        b,
        0.0, //
        0.0,
        d,
        0.0,
        b, //
        0.0,
        0.0,
        d,
        c,
    ])
}

/// Analytic gradient of `f` by the chain rule: `2 J(v)^T (Q m(v) - g)`.
pub fn gradient_f(form: &QghForm, v: &Vector4<f64>) -> Vector4<f64> {
    let m = quat_monomials(v);
    let residual = form.q * m - form.g;
    2.0 * monomial_jacobian(v).transpose() * residual
}

/// Hessian of `f`; each monomial is quadratic so its second derivative is a
/// constant matrix contracted against `Q m - g`.
fn hessian_f(form: &QghForm, v: &Vector4<f64>) -> Matrix4<f64> {
    let m = quat_monomials(v);
    let residual = form.q * m - form.g;
    let jac = monomial_jacobian(v);
    let c = &residual;
    #[rustfmt::skip]
    let curvature = Matrix4::new(
        2.0 * c[0], c[4],       c[5],       c[6],
        c[4],       2.0 * c[1], c[7],       c[8],
        c[5],       c[7],       2.0 * c[2], c[9],
        c[6],       c[8],       c[9],       2.0 * c[3],
    );
    2.0 * jac.transpose() * form.q * jac + 2.0 * curvature
}

/// One damped-Newton descent run; returns the final iterate and objective.
fn local_descent(form: &QghForm, start: &Vector4<f64>) -> (Vector4<f64>, f64) {
    let mut v = *start;
    let mut value = objective_f(form, &v);
    if !value.is_finite() {
        return (v, f64::INFINITY);
    }
    let mut damping = 1e-3;
    for _ in 0..MAX_INNER_ITERATIONS {
        let grad = gradient_f(form, &v);
        if grad.norm() < GRADIENT_TOL * value.max(1.0) {
            break;
        }
        let hess = hessian_f(form, &v);
        let mut stepped = false;
        while damping <= 1e12 {
            let system = hess + Matrix4::identity() * damping;
            if let Some(step) = system.lu().solve(&(-grad)) {
                let candidate = v + step;
                let candidate_value = objective_f(form, &candidate);
                if candidate_value.is_finite() && candidate_value < value {
                    v = candidate;
                    value = candidate_value;
                    damping = (damping / 3.0).max(1e-12);
                    stepped = true;
                    break;
                }
            }
            damping *= 10.0;
        }
        if !stepped {
            // No damped step descends: numerically at a local minimum.
            break;
        }
    }
    (v, value)
}

fn random_unit_quaternion(rng: &mut ChaCha8Rng) -> Vector4<f64> {
    loop {
        let q = Vector4::new(
            rng.sample::<f64, _>(StandardNormal),
            rng.sample::<f64, _>(StandardNormal),
            rng.sample::<f64, _>(StandardNormal),
            rng.sample::<f64, _>(StandardNormal),
        );
        let norm = q.norm();
        if norm > 1e-12 {
            return q / norm;
        }
    }
}

/// Minimize the lifted quartic by multi-start damped Newton.
///
/// Starts are the six quarter-turn quaternions about the signed coordinate
/// axes, six fixed mixed-sign quaternions, and `restarts` seeded random unit
/// quaternions, each scaled so the start represents the moment-based scale
/// estimate `s_hat = sqrt(sum ||z~||^2 / sum ||P B~||^2)`. Each run stops
/// when the gradient norm falls below `1e-10 * max(1, f)` or after 500
/// iterations; the best final objective wins, ties broken by start order.
pub fn minimize_f(form: &QghForm, restarts: usize, seed: u64) -> Result<QuatVec, ShapeError> {
    let s_hat = if form.h <= 0.0 {
        // Centered features vanish: f = m^T Q m with minimum at v = 0.
        0.0
    } else if form.projected_spread > 0.0 {
        (form.h / form.projected_spread).sqrt()
    } else {
        return Err(ShapeError::DegenerateConfiguration(
            "projected model has no spread",
        ));
    };
    let radius = s_hat.sqrt();

    let mut starts: Vec<Vector4<f64>> = Vec::with_capacity(12 + restarts);
    let half_turn = std::f64::consts::FRAC_1_SQRT_2;
    for axis in 0..3 {
        for sign in [1.0, -1.0] {
            let mut q = Vector4::zeros();
            q[axis] = sign * half_turn;
            q[3] = half_turn;
            starts.push(q);
        }
    }
    for signs in [
        [1.0, 1.0, 1.0, 1.0],
        [-1.0, 1.0, 1.0, 1.0],
        [1.0, -1.0, 1.0, 1.0],
        [1.0, 1.0, -1.0, 1.0],
        [-1.0, -1.0, 1.0, 1.0],
        [1.0, -1.0, -1.0, 1.0],
    ] {
        starts.push(0.5 * Vector4::from_column_slice(&signs));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..restarts {
        starts.push(random_unit_quaternion(&mut rng));
    }

    let mut best: Option<(Vector4<f64>, f64)> = None;
    for start in &starts {
        let (v, value) = local_descent(form, &(start * radius));
        if value.is_finite() && best.as_ref().is_none_or(|(_, b)| value < *b) {
            best = Some((v, value));
        }
    }
    best.map(|(v, _)| QuatVec(v)).ok_or(ShapeError::OptimizationFailed)
}

/// Read the pose out of a minimizer: `s = ||v||^2`, `R = R(v / ||v||)`,
/// `t = z_bar - s P R B_bar`.
pub fn recover_pose(form: &QghForm, v: &QuatVec) -> Result<WeakPerspectivePose, ShapeError> {
    let norm = v.0.norm();
    if norm <= SCALE_EPS {
        return Err(ShapeError::DegenerateScale);
    }
    let scale = norm * norm;
    let rotation = rotation_from_quat(&(v.0 / norm))?;
    let projected = (rotation * form.b_bar).xy();
    Ok(WeakPerspectivePose {
        scale,
        rotation,
        translation: form.z_bar - scale * projected,
    })
}

/// Residual magnitudes `||z_i - s P R B_i - t||` at a pose.
pub fn shape_residuals(
    correspondences: &[ShapeCorrespondence],
    pose: &WeakPerspectivePose,
) -> Vec<f64> {
    correspondences
        .iter()
        .map(|c| {
            let projected = pose.scale * (pose.rotation * c.model).xy() + pose.translation;
            (c.feature - projected).norm()
        })
        .collect()
}

/// Options for the weighted shape solve used inside GNC and RANSAC.
#[derive(Debug, Clone, Copy)]
pub struct ShapeSolveOptions {
    pub restarts: usize,
    pub seed: u64,
}

impl Default for ShapeSolveOptions {
    fn default() -> Self {
        Self { restarts: 16, seed: 0 }
    }
}

/// Shape alignment as a GNC-solvable weighted problem.
#[derive(Debug, Clone)]
pub struct ShapeAlignmentProblem {
    pub correspondences: Vec<ShapeCorrespondence>,
    pub options: ShapeSolveOptions,
}

impl ShapeAlignmentProblem {
    pub fn new(correspondences: Vec<ShapeCorrespondence>) -> Self {
        Self { correspondences, options: ShapeSolveOptions::default() }
    }
}

/// Full weighted solve: marginalize, lift, minimize, recover.
pub fn solve_shape_weighted(
    correspondences: &[ShapeCorrespondence],
    weights: &[f64],
    options: &ShapeSolveOptions,
) -> Result<WeakPerspectivePose, ShapeError> {
    let centered = marginalize_translation(correspondences, weights)?;
    let form = build_qgh(&centered);
    let v = minimize_f(&form, options.restarts, options.seed)?;
    recover_pose(&form, &v)
}

impl WeightedProblem for ShapeAlignmentProblem {
    type Estimate = WeakPerspectivePose;
    type Error = ShapeError;

    fn measurement_count(&self) -> usize {
        self.correspondences.len()
    }

    fn solve_weighted(&self, weights: &[f64]) -> Result<WeakPerspectivePose, ShapeError> {
        solve_shape_weighted(&self.correspondences, weights, &self.options)
    }

    fn residuals(&self, estimate: &WeakPerspectivePose) -> Vec<f64> {
        shape_residuals(&self.correspondences, estimate)
    }
}
