//! Graduated non-convexity (GNC) for robust estimation.
//!
//! GNC minimizes a robust cost by alternating two closed-form steps over a
//! surrogate whose non-convexity is controlled by a parameter `mu`:
//!
//! 1. a *variable update* that solves an ordinary weighted least-squares
//!    problem through a user-supplied [`WeightedProblem`], and
//! 2. a *weight update* that refreshes one latent weight per measurement
//!    from its current residual.
//!
//! Starting from a surrogate that is convex (or nearly so) and annealing
//! `mu` towards the original cost lets the solver escape the poor local
//! minima that plague direct robust optimization, without requiring an
//! initial guess.
//!
//! Two robust costs are provided: Geman-McClure ([`CostKind::GemanMcclure`])
//! and truncated least squares ([`CostKind::TruncatedLs`]). Both use a single
//! scale parameter `c_bar`, the maximum residual expected from an inlier.

mod cost;
mod engine;

pub use cost::{
    mu_init, mu_step, penalty_gm, penalty_tls, surrogate_gm, surrogate_tls, weight_update_gm,
    weight_update_tls, CostError, CostKind, MuInit, RobustCostSpec,
};
pub use engine::{run_gnc, GncConfig, GncError, GncResult, GncTraceStep, WeightedProblem};
