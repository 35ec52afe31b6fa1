//! Monte Carlo sweep runner.
//!
//! A sweep is a grid of (outlier rate, run index) cells. Every cell generates
//! one problem instance from a seed derived deterministically from the sweep
//! seed and the cell coordinates, then runs every requested method on that
//! same instance, so methods are compared on paired data. Records are emitted
//! in (rate, run, method) order regardless of how cells are scheduled.

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use gnc_core::{run_gnc, CostKind, GncConfig, RobustCostSpec};
use gnc_data::{
    generate_registration, generate_shape_alignment, precision_recall, rotation_error_deg,
    GenerateError, RegistrationInstanceSpec, ShapeInstance, ShapeInstanceSpec, SourceCloud,
};
use gnc_data::RegistrationInstance;
use gnc_solvers::ransac::{ransac_registration, ransac_shape_alignment, RansacConfig};
use gnc_solvers::registration::{
    weighted_horn, PointCorrespondence, RegistrationProblem, RigidPose,
};
use gnc_solvers::shape::{
    solve_shape_weighted, ShapeAlignmentProblem, ShapeCorrespondence, ShapeSolveOptions,
    WeakPerspectivePose,
};

/// Error value recorded when a solver fails outright.
pub const FAILURE_SENTINEL: f64 = 1e9;

const RANSAC_SEED_SALT: u64 = 0x9a3c_01d5_77b1_42e6;
const MULTISTART_SEED_SALT: u64 = 0x517c_c1b7_2722_0a95;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum App {
    Registration,
    ShapeAlignment,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Method {
    GncGm,
    GncTls,
    Ransac,
    NonRobustLs,
}

impl Method {
    pub const ALL: [Method; 4] = [
        Method::GncGm,
        Method::GncTls,
        Method::Ransac,
        Method::NonRobustLs,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::GncGm => "gnc-gm",
            Method::GncTls => "gnc-tls",
            Method::Ransac => "ransac",
            Method::NonRobustLs => "nonrobust-ls",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| format!("unknown method `{s}`, expected one of gnc-gm, gnc-tls, ransac, nonrobust-ls"))
    }
}

/// Full description of a Monte Carlo sweep.
#[derive(Debug, Clone)]
pub struct BenchSpec {
    pub application: App,
    pub methods: Vec<Method>,
    pub outlier_rates: Vec<f64>,
    pub runs_per_rate: usize,
    pub n: usize,
    pub sigma: f64,
    /// Inlier threshold for all methods; `None` derives it from `sigma`.
    pub c_bar: Option<f64>,
    pub seed: u64,
    /// Worker threads; 1 runs the sweep sequentially.
    pub jobs: usize,
}

impl BenchSpec {
    pub fn new(application: App) -> Self {
        BenchSpec {
            application,
            methods: Method::ALL.to_vec(),
            outlier_rates: (0..10).map(|i| i as f64 / 10.0).collect(),
            runs_per_rate: 20,
            n: match application {
                App::Registration => 100,
                App::ShapeAlignment => 50,
            },
            sigma: 0.01,
            c_bar: None,
            seed: 0,
            jobs: 1,
        }
    }

    /// The inlier threshold actually used: explicit value, or six noise
    /// standard deviations, or a near-zero band for noiseless data.
    pub fn effective_c_bar(&self) -> f64 {
        self.c_bar
            .unwrap_or(if self.sigma > 0.0 { 6.0 * self.sigma } else { 1e-9 })
    }

    fn validate(&self) -> Result<(), BenchError> {
        let fail = |msg: String| Err(BenchError::InvalidSpec(msg));
        if self.methods.is_empty() {
            return fail("no methods requested".into());
        }
        if self.outlier_rates.is_empty() {
            return fail("no outlier rates requested".into());
        }
        if !self
            .outlier_rates
            .iter()
            .all(|r| (0.0..1.0).contains(r) && r.is_finite())
        {
            return fail(format!(
                "outlier rates must lie in [0, 1), got {:?}",
                self.outlier_rates
            ));
        }
        if !self.outlier_rates.windows(2).all(|w| w[0] < w[1]) {
            return fail("outlier rates must be strictly increasing".into());
        }
        if self.runs_per_rate == 0 {
            return fail("runs_per_rate must be at least 1".into());
        }
        let minimum_n = match self.application {
            App::Registration => 3,
            App::ShapeAlignment => 4,
        };
        if self.n < minimum_n {
            return fail(format!(
                "n = {} is below the minimal solvable size {minimum_n}",
                self.n
            ));
        }
        if !(self.sigma.is_finite() && self.sigma >= 0.0) {
            return fail(format!("sigma must be finite and non-negative, got {}", self.sigma));
        }
        if let Some(c) = self.c_bar {
            if !(c.is_finite() && c > 0.0) {
                return fail(format!("c_bar must be finite and positive, got {c}"));
            }
        }
        if self.jobs == 0 {
            return fail("jobs must be at least 1".into());
        }
        Ok(())
    }
}

/// One CSV row: a single method on a single instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub method: String,
    pub outlier_rate: f64,
    pub run_index: usize,
    pub rotation_error_deg: f64,
    pub translation_error: f64,
    /// Relative scale error; empty for applications without a scale.
    pub scale_error: Option<f64>,
    /// GNC outer iterations, or RANSAC sampling iterations; 0 for the
    /// non-robust baseline, which solves once.
    pub outer_iterations: usize,
    pub wall_time_ms: f64,
    pub converged: bool,
    pub precision: f64,
    pub recall: f64,
}

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("invalid benchmark spec: {0}")]
    InvalidSpec(String),
    #[error("instance generation failed: {0}")]
    Generate(#[from] GenerateError),
}

/// What a single method did on a single instance, before scoring against the
/// ground truth. `estimate: None` means the solver failed outright.
#[derive(Debug, Clone)]
pub struct MethodOutcome<E> {
    pub estimate: Option<E>,
    pub inlier_mask: Vec<bool>,
    pub outer_iterations: usize,
    pub converged: bool,
    pub wall_time_ms: f64,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Deterministic per-cell seed, so every method sees the identical instance
/// and reruns of the sweep reproduce it exactly.
pub fn derive_seed(base: u64, rate_index: usize, run_index: usize) -> u64 {
    let cell = ((rate_index as u64) << 32) ^ (run_index as u64);
    splitmix64(base ^ splitmix64(cell))
}

fn gnc_config(kind: CostKind, c_bar: f64) -> GncConfig {
    GncConfig::new(RobustCostSpec::new(kind, c_bar))
}

/// Run one method on a registration instance. `seed` feeds only the seeded
/// solver internals (RANSAC sampling); GNC and the baseline are deterministic.
pub fn run_registration_method(
    method: Method,
    correspondences: &[PointCorrespondence],
    c_bar: f64,
    seed: u64,
) -> MethodOutcome<RigidPose> {
    let n = correspondences.len();
    let start = Instant::now();
    let outcome = match method {
        Method::GncGm | Method::GncTls => {
            let kind = if method == Method::GncGm {
                CostKind::GemanMcclure
            } else {
                CostKind::TruncatedLs
            };
            let problem = RegistrationProblem::new(correspondences.to_vec());
            match run_gnc(&problem, &gnc_config(kind, c_bar)) {
                Ok(result) => Some((
                    result.estimate,
                    result.inlier_mask,
                    result.outer_iterations,
                    result.converged,
                )),
                Err(_) => None,
            }
        }
        Method::Ransac => {
            let config =
                RansacConfig::registration(c_bar, splitmix64(seed ^ RANSAC_SEED_SALT));
            match ransac_registration(correspondences, &config) {
                Ok(result) => Some((
                    result.estimate,
                    result.inlier_mask,
                    result.iterations_used,
                    true,
                )),
                Err(_) => None,
            }
        }
        Method::NonRobustLs => weighted_horn(correspondences, &vec![1.0; n])
            .ok()
            .map(|pose| (pose, vec![true; n], 0, true)),
    };
    let wall_time_ms = start.elapsed().as_secs_f64() * 1e3;
    match outcome {
        Some((estimate, inlier_mask, outer_iterations, converged)) => MethodOutcome {
            estimate: Some(estimate),
            inlier_mask,
            outer_iterations,
            converged,
            wall_time_ms,
        },
        None => MethodOutcome {
            estimate: None,
            inlier_mask: vec![false; n],
            outer_iterations: 0,
            converged: false,
            wall_time_ms,
        },
    }
}

/// Run one method on a shape-alignment instance. `seed` feeds RANSAC sampling
/// and the multistart minimizer inside the weighted solver.
pub fn run_shape_method(
    method: Method,
    correspondences: &[ShapeCorrespondence],
    c_bar: f64,
    seed: u64,
) -> MethodOutcome<WeakPerspectivePose> {
    let n = correspondences.len();
    let options = ShapeSolveOptions {
        seed: splitmix64(seed ^ MULTISTART_SEED_SALT),
        ..ShapeSolveOptions::default()
    };
    let start = Instant::now();
    let outcome = match method {
        Method::GncGm | Method::GncTls => {
            let kind = if method == Method::GncGm {
                CostKind::GemanMcclure
            } else {
                CostKind::TruncatedLs
            };
            let problem = ShapeAlignmentProblem {
                correspondences: correspondences.to_vec(),
                options,
            };
            match run_gnc(&problem, &gnc_config(kind, c_bar)) {
                Ok(result) => Some((
                    result.estimate,
                    result.inlier_mask,
                    result.outer_iterations,
                    result.converged,
                )),
                Err(_) => None,
            }
        }
        Method::Ransac => {
            let config = RansacConfig::shape(c_bar, splitmix64(seed ^ RANSAC_SEED_SALT));
            match ransac_shape_alignment(correspondences, &config) {
                Ok(result) => Some((
                    result.estimate,
                    result.inlier_mask,
                    result.iterations_used,
                    true,
                )),
                Err(_) => None,
            }
        }
        Method::NonRobustLs => solve_shape_weighted(correspondences, &vec![1.0; n], &options)
            .ok()
            .map(|pose| (pose, vec![true; n], 0, true)),
    };
    let wall_time_ms = start.elapsed().as_secs_f64() * 1e3;
    match outcome {
        Some((estimate, inlier_mask, outer_iterations, converged)) => MethodOutcome {
            estimate: Some(estimate),
            inlier_mask,
            outer_iterations,
            converged,
            wall_time_ms,
        },
        None => MethodOutcome {
            estimate: None,
            inlier_mask: vec![false; n],
            outer_iterations: 0,
            converged: false,
            wall_time_ms,
        },
    }
}

fn registration_record(
    method: Method,
    outlier_rate: f64,
    run_index: usize,
    outcome: &MethodOutcome<RigidPose>,
    instance: &RegistrationInstance,
) -> RunRecord {
    let (rotation_error, translation_error, precision, recall) = match &outcome.estimate {
        Some(pose) => {
            let (precision, recall) =
                precision_recall(&outcome.inlier_mask, &instance.outlier_mask);
            (
                rotation_error_deg(&pose.rotation, &instance.ground_truth.rotation),
                (pose.translation - instance.ground_truth.translation).norm(),
                precision,
                recall,
            )
        }
        None => (FAILURE_SENTINEL, FAILURE_SENTINEL, 0.0, 0.0),
    };
    RunRecord {
        method: method.name().to_string(),
        outlier_rate,
        run_index,
        rotation_error_deg: rotation_error,
        translation_error,
        scale_error: None,
        outer_iterations: outcome.outer_iterations,
        wall_time_ms: outcome.wall_time_ms,
        converged: outcome.converged,
        precision,
        recall,
    }
}

fn shape_record(
    method: Method,
    outlier_rate: f64,
    run_index: usize,
    outcome: &MethodOutcome<WeakPerspectivePose>,
    instance: &ShapeInstance,
) -> RunRecord {
    let truth = &instance.ground_truth;
    let (rotation_error, translation_error, scale_error, precision, recall) =
        match &outcome.estimate {
            Some(pose) => {
                let (precision, recall) =
                    precision_recall(&outcome.inlier_mask, &instance.outlier_mask);
                (
                    rotation_error_deg(&pose.rotation, &truth.rotation),
                    (pose.translation - truth.translation).norm(),
                    (pose.scale - truth.scale).abs() / truth.scale.abs(),
                    precision,
                    recall,
                )
            }
            None => (FAILURE_SENTINEL, FAILURE_SENTINEL, FAILURE_SENTINEL, 0.0, 0.0),
        };
    RunRecord {
        method: method.name().to_string(),
        outlier_rate,
        run_index,
        rotation_error_deg: rotation_error,
        translation_error,
        scale_error: Some(scale_error),
        outer_iterations: outcome.outer_iterations,
        wall_time_ms: outcome.wall_time_ms,
        converged: outcome.converged,
        precision,
        recall,
    }
}

fn run_cell(spec: &BenchSpec, rate_index: usize, run_index: usize) -> Result<Vec<RunRecord>, BenchError> {
    let outlier_rate = spec.outlier_rates[rate_index];
    let instance_seed = derive_seed(spec.seed, rate_index, run_index);
    let c_bar = spec.effective_c_bar();
    match spec.application {
        App::Registration => {
            let instance = generate_registration(&RegistrationInstanceSpec {
                n: spec.n,
                sigma: spec.sigma,
                outlier_rate,
                seed: instance_seed,
                source: SourceCloud::RandomCube,
            })?;
            Ok(spec
                .methods
                .iter()
                .map(|&method| {
                    let outcome = run_registration_method(
                        method,
                        &instance.correspondences,
                        c_bar,
                        instance_seed,
                    );
                    registration_record(method, outlier_rate, run_index, &outcome, &instance)
                })
                .collect())
        }
        App::ShapeAlignment => {
            let instance = generate_shape_alignment(&ShapeInstanceSpec {
                n: spec.n,
                sigma: spec.sigma,
                outlier_rate,
                seed: instance_seed,
            })?;
            Ok(spec
                .methods
                .iter()
                .map(|&method| {
                    let outcome = run_shape_method(
                        method,
                        &instance.correspondences,
                        c_bar,
                        instance_seed,
                    );
                    shape_record(method, outlier_rate, run_index, &outcome, &instance)
                })
                .collect())
        }
    }
}

/// Execute the sweep and return records in (rate, run, method) order.
pub fn run_benchmark(spec: &BenchSpec) -> Result<Vec<RunRecord>, BenchError> {
    spec.validate()?;
    let cells: Vec<(usize, usize)> = (0..spec.outlier_rates.len())
        .flat_map(|rate_index| (0..spec.runs_per_rate).map(move |run| (rate_index, run)))
        .collect();

    let nested: Vec<Vec<RunRecord>> = if spec.jobs > 1 {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(spec.jobs)
            .build()
            .map_err(|e| BenchError::InvalidSpec(format!("could not start {} workers: {e}", spec.jobs)))?;
        pool.install(|| {
            cells
                .par_iter()
                .map(|&(rate_index, run_index)| run_cell(spec, rate_index, run_index))
                .collect::<Result<_, _>>()
        })?
    } else {
        cells
            .iter()
            .map(|&(rate_index, run_index)| run_cell(spec, rate_index, run_index))
            .collect::<Result<_, _>>()?
    };
    Ok(nested.into_iter().flatten().collect())
}
