//! The GNC outer loop: alternate weighted solves with weight updates while
//! annealing `mu`.

use thiserror::Error;

use crate::cost::{
    mu_init, mu_step, weight_update_gm, weight_update_tls, CostKind, MuInit, RobustCostSpec,
};

/// An estimation problem that can be solved in closed form (or to a verified
/// global optimum) under fixed per-measurement weights.
///
/// Implementations own their measurements; the engine only sees residual
/// magnitudes and opaque estimates.
pub trait WeightedProblem {
    type Estimate;
    type Error: std::error::Error + 'static;

    /// Number of measurements. Weight and residual vectors have this length.
    fn measurement_count(&self) -> usize;

    /// Solve the weighted least-squares problem `min_x sum_i w_i r_i(x)^2`.
    ///
    /// `weights` has `measurement_count()` entries in `[0, 1]`.
    fn solve_weighted(&self, weights: &[f64]) -> Result<Self::Estimate, Self::Error>;

    /// Residual magnitudes `r_i(x) >= 0` at the given estimate.
    fn residuals(&self, estimate: &Self::Estimate) -> Vec<f64>;
}

/// Configuration for [`run_gnc`].
#[derive(Debug, Clone)]
pub struct GncConfig {
    pub cost: RobustCostSpec,
    /// Annealing factor for `mu`; must exceed 1.
    pub mu_factor: f64,
    pub max_outer_iterations: usize,
    /// Relative tolerance on the weighted residual sum (TLS stop rule).
    pub cost_convergence_tol: f64,
    /// Infinity-norm tolerance on the weight vector (both cost kinds).
    pub fixed_point_tol: f64,
    /// Record a per-iteration trace in the result.
    pub record_trace: bool,
}

impl GncConfig {
    pub fn new(cost: RobustCostSpec) -> Self {
        Self {
            cost,
            mu_factor: 1.4,
            max_outer_iterations: 1000,
            cost_convergence_tol: 1e-6,
            fixed_point_tol: 1e-6,
            record_trace: false,
        }
    }

    fn validate(&self) -> Result<(), String> {
        if !(self.cost.c_bar > 0.0 && self.cost.c_bar.is_finite()) {
            return Err(format!("c_bar must be positive and finite, got {}", self.cost.c_bar));
        }
        if !(self.mu_factor > 1.0 && self.mu_factor.is_finite()) {
            return Err(format!("mu_factor must exceed 1, got {}", self.mu_factor));
        }
        if self.max_outer_iterations == 0 {
            return Err("max_outer_iterations must be at least 1".to_owned());
        }
        if !(self.cost_convergence_tol > 0.0 && self.fixed_point_tol > 0.0) {
            return Err("convergence tolerances must be positive".to_owned());
        }
        Ok(())
    }
}

/// One recorded outer iteration: the `mu` it ran at, the weighted residual
/// sum after its weight update, and the updated weight vector.
#[derive(Debug, Clone)]
pub struct GncTraceStep {
    pub mu: f64,
    pub weighted_residual_sum: f64,
    pub weights: Vec<f64>,
}

/// Output of [`run_gnc`].
#[derive(Debug, Clone)]
pub struct GncResult<E> {
    pub estimate: E,
    /// Final per-measurement weights, each in `[0, 1]`.
    pub weights: Vec<f64>,
    /// `weights[i] >= 0.5`.
    pub inlier_mask: Vec<bool>,
    /// Outer iterations executed; 0 when every residual of the unit-weight
    /// solve was already in the inlier regime.
    pub outer_iterations: usize,
    /// False only when the loop hit `max_outer_iterations` without meeting a
    /// stop rule.
    pub converged: bool,
    pub trace: Option<Vec<GncTraceStep>>,
}

#[derive(Debug, Error)]
pub enum GncError<E: std::error::Error + 'static> {
    #[error("problem has no measurements")]
    EmptyProblem,
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("weighted solve failed: {0}")]
    Solver(#[source] E),
}

/// Run graduated non-convexity on `problem`.
///
/// The loop starts from a unit-weight solve, initializes `mu` from the
/// largest squared residual, then alternates a variable update (weighted
/// solve) with a weight update until the cost-specific stop rule fires:
/// `mu < 1` for Geman-McClure, a converged weighted residual sum for
/// truncated least squares, or for either kind a weight vector that stopped
/// moving. Solver failures propagate; hitting `max_outer_iterations` returns
/// a result with `converged = false`.
pub fn run_gnc<P: WeightedProblem>(
    problem: &P,
    config: &GncConfig,
) -> Result<GncResult<P::Estimate>, GncError<P::Error>> {
    config.validate().map_err(GncError::InvalidConfig)?;
    let n = problem.measurement_count();
    if n == 0 {
        return Err(GncError::EmptyProblem);
    }
    let cost = config.cost;

    let mut weights = vec![1.0; n];
    let mut estimate = problem.solve_weighted(&weights).map_err(GncError::Solver)?;
    let mut residuals = problem.residuals(&estimate);
    debug_assert_eq!(residuals.len(), n);

    let r_max_sq = residuals.iter().fold(0.0f64, |acc, r| acc.max(r * r));
    let mut mu = match mu_init(cost.kind, r_max_sq, cost.c_bar) {
        MuInit::AllInliers => {
            return Ok(GncResult {
                estimate,
                weights,
                inlier_mask: vec![true; n],
                outer_iterations: 0,
                converged: true,
                trace: config.record_trace.then(Vec::new),
            });
        }
        MuInit::Schedule(mu) => mu,
    };

    let mut trace = config.record_trace.then(Vec::new);
    let mut prev_cost: Option<f64> = None;
    let mut outer_iterations = 0;
    let mut converged = false;

    for iteration in 1..=config.max_outer_iterations {
        outer_iterations = iteration;

        // Variable update. The first iteration runs at all-one weights, which
        // is exactly the unit-weight solve above, so its result is reused.
        if iteration > 1 {
            estimate = problem.solve_weighted(&weights).map_err(GncError::Solver)?;
            residuals = problem.residuals(&estimate);
        }

        // Weight update from this iteration's residuals.
        let mut weight_shift = 0.0f64;
        let mut weighted_sum = 0.0;
        for (w, r) in weights.iter_mut().zip(&residuals) {
            let r_sq = r * r;
            let updated = match cost.kind {
                CostKind::GemanMcclure => weight_update_gm(r_sq, mu, cost.c_bar),
                CostKind::TruncatedLs => weight_update_tls(r_sq, mu, cost.c_bar),
            };
            weight_shift = weight_shift.max((updated - *w).abs());
            *w = updated;
            weighted_sum += updated * r_sq;
        }

        if let Some(steps) = trace.as_mut() {
            steps.push(GncTraceStep {
                mu,
                weighted_residual_sum: weighted_sum,
                weights: weights.clone(),
            });
        }

        let cost_settled = cost.kind == CostKind::TruncatedLs
            && prev_cost.is_some_and(|prev| {
                (weighted_sum - prev).abs() < config.cost_convergence_tol * prev.max(1.0)
            });
        prev_cost = Some(weighted_sum);

        mu = mu_step(cost.kind, mu, config.mu_factor);
        let schedule_done = cost.kind == CostKind::GemanMcclure && mu < 1.0;

        if schedule_done || cost_settled || weight_shift < config.fixed_point_tol {
            converged = true;
            break;
        }
    }

    let inlier_mask = weights.iter().map(|&w| w >= 0.5).collect();
    Ok(GncResult {
        estimate,
        weights,
        inlier_mask,
        outer_iterations,
        converged,
        trace,
    })
}
