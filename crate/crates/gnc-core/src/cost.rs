//! Robust cost surrogates, their outlier-process penalties, and the
//! closed-form weight updates used by the GNC loop.
//!
//! Each surrogate `rho_mu(r)` satisfies
//!
//! ```text
//! rho_mu(r) = min_w  w * r^2 + penalty(w)
//! ```
//!
//! over the admissible weight range, and the corresponding `weight_update_*`
//! function returns that minimizing weight. This duality is what lets the
//! engine alternate weighted least squares with per-measurement weight
//! refreshes instead of attacking the robust cost directly.

use thiserror::Error;

/// Robust cost family used by the GNC schedule.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CostKind {
    /// Geman-McClure: smooth redescending cost, annealed from high `mu`
    /// (nearly quadratic) down to `mu = 1` (the original cost).
    GemanMcclure,
    /// Truncated least squares: quadratic up to the truncation point, flat
    /// beyond it, annealed from low `mu` (convex-ish) towards `mu -> inf`.
    TruncatedLs,
}

/// A robust cost plus its inlier scale.
///
/// `c_bar` is the maximum residual magnitude expected from an inlier; it must
/// be positive and finite.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RobustCostSpec {
    pub kind: CostKind,
    pub c_bar: f64,
}

impl RobustCostSpec {
    pub fn new(kind: CostKind, c_bar: f64) -> Self {
        Self { kind, c_bar }
    }
}

/// Outcome of `mu` initialization.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MuInit {
    /// Start the schedule at this `mu`.
    Schedule(f64),
    /// Every residual already lies in the inlier regime; the caller should
    /// stop immediately and keep all weights at 1.
    AllInliers,
}

/// Error raised by the penalty functions on weights outside their domain.
#[derive(Debug, Clone, Copy, PartialEq, Error)]
pub enum CostError {
    #[error("weight {w} is outside the penalty domain")]
    WeightOutOfRange { w: f64 },
}

/// Geman-McClure surrogate `mu c^2 r^2 / (mu c^2 + r^2)`.
///
/// At `mu = 1` this is the Geman-McClure cost itself; as `mu -> inf` it
/// approaches the quadratic `r^2`.
pub fn surrogate_gm(r: f64, mu: f64, c_bar: f64) -> f64 {
    let mc2 = mu * c_bar * c_bar;
    let r2 = r * r;
    mc2 * r2 / (mc2 + r2)
}

/// Truncated-least-squares surrogate.
///
/// Piecewise: quadratic `r^2` while `r^2 <= mu/(mu+1) c^2`, constant `c^2`
/// once `r^2 >= (mu+1)/mu c^2`, and an interpolating branch in between. The
/// three branches agree at both breakpoints. As `mu -> inf` the middle branch
/// collapses and the surrogate approaches the hard truncation
/// `min(r^2, c^2)`.
pub fn surrogate_tls(r: f64, mu: f64, c_bar: f64) -> f64 {
    let c2 = c_bar * c_bar;
    let r2 = r * r;
    if r2 * (mu + 1.0) <= mu * c2 {
        r2
    } else if r2 * mu >= (mu + 1.0) * c2 {
        c2
    } else {
        2.0 * c_bar * r.abs() * (mu * (mu + 1.0)).sqrt() - mu * (c2 + r2)
    }
}

/// Geman-McClure outlier-process penalty `mu c^2 (sqrt(w) - 1)^2`.
///
/// Defined for `w` in `(0, 1]`.
pub fn penalty_gm(w: f64, mu: f64, c_bar: f64) -> Result<f64, CostError> {
    if !(w > 0.0 && w <= 1.0) {
        return Err(CostError::WeightOutOfRange { w });
    }
    let s = w.sqrt() - 1.0;
    Ok(mu * c_bar * c_bar * s * s)
}

/// Truncated-least-squares outlier-process penalty `mu (1 - w) / (mu + w) c^2`.
///
/// Defined for `w` in `[0, 1]`.
pub fn penalty_tls(w: f64, mu: f64, c_bar: f64) -> Result<f64, CostError> {
    if !(0.0..=1.0).contains(&w) {
        return Err(CostError::WeightOutOfRange { w });
    }
    Ok(mu * (1.0 - w) / (mu + w) * c_bar * c_bar)
}

/// Minimizer of `w r^2 + penalty_gm(w)`: `(mu c^2 / (r^2 + mu c^2))^2`.
pub fn weight_update_gm(r_sq: f64, mu: f64, c_bar: f64) -> f64 {
    let mc2 = mu * c_bar * c_bar;
    let ratio = mc2 / (r_sq + mc2);
    ratio * ratio
}

/// Minimizer of `w r^2 + penalty_tls(w)` over `[0, 1]`.
///
/// Returns 1 in the quadratic regime, 0 in the truncated regime, and
/// `c sqrt(mu (mu+1)) / r - mu` in between.
pub fn weight_update_tls(r_sq: f64, mu: f64, c_bar: f64) -> f64 {
    let c2 = c_bar * c_bar;
    if r_sq * (mu + 1.0) <= mu * c2 {
        1.0
    } else if r_sq * mu >= (mu + 1.0) * c2 {
        0.0
    } else {
        // r_sq > 0 here because the first branch caught r_sq = 0.
        (c_bar / r_sq.sqrt() * (mu * (mu + 1.0)).sqrt() - mu).clamp(0.0, 1.0)
    }
}

/// Initial `mu` from the largest squared residual of the unit-weight solve.
///
/// Geman-McClure starts at `2 r_max^2 / c^2` and anneals downward; truncated
/// least squares starts at `c^2 / (2 r_max^2 - c^2)` and anneals upward. When
/// the formula would start at or past its target (`mu <= 1` for GM, a
/// non-positive denominator for TLS), every residual is already within the
/// inlier regime and [`MuInit::AllInliers`] is returned instead.
pub fn mu_init(kind: CostKind, r_max_sq: f64, c_bar: f64) -> MuInit {
    let c2 = c_bar * c_bar;
    match kind {
        CostKind::GemanMcclure => {
            let mu = 2.0 * r_max_sq / c2;
            if mu <= 1.0 {
                MuInit::AllInliers
            } else {
                MuInit::Schedule(mu)
            }
        }
        CostKind::TruncatedLs => {
            let denom = 2.0 * r_max_sq - c2;
            if denom <= 0.0 {
                MuInit::AllInliers
            } else {
                MuInit::Schedule(c2 / denom)
            }
        }
    }
}

/// One annealing step: divide `mu` by `factor` for Geman-McClure, multiply
/// for truncated least squares.
pub fn mu_step(kind: CostKind, mu: f64, factor: f64) -> f64 {
    match kind {
        CostKind::GemanMcclure => mu / factor,
        CostKind::TruncatedLs => mu * factor,
    }
}
