//! `gnc-bench`: Monte Carlo benchmarks and one-shot solves for robust
//! registration and shape alignment.
//!
//! Exit codes: 0 success (solve: converged), 1 solver did not converge or
//! found no model, 2 invalid arguments or unparseable input files.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use nalgebra::UnitQuaternion;

use gnc_bench::{
    format_summary, parse_index_pairs, parse_registration_correspondences,
    parse_shape_correspondences, read_records_csv, run_benchmark, run_registration_method,
    run_shape_method, summarize, write_records_csv, App, BenchSpec, Method, MethodOutcome,
};
use gnc_data::load_ply_points;
use gnc_solvers::registration::PointCorrespondence;

#[derive(Parser)]
#[command(
    name = "gnc-bench",
    version,
    about = "Benchmark and run robust point-cloud registration and shape alignment"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sweep outlier rates with Monte Carlo instances and write a CSV table.
    Bench(BenchArgs),
    /// Solve a single instance read from files and print the estimate.
    Solve(SolveArgs),
    /// Aggregate a benchmark CSV into per-(method, rate) statistics.
    Summary(SummaryArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum AppArg {
    Registration,
    #[value(name = "shape", alias = "shape-alignment")]
    Shape,
}

impl From<AppArg> for App {
    fn from(arg: AppArg) -> App {
        match arg {
            AppArg::Registration => App::Registration,
            AppArg::Shape => App::ShapeAlignment,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum MethodArg {
    #[value(name = "gnc-gm")]
    GncGm,
    #[value(name = "gnc-tls")]
    GncTls,
    Ransac,
    #[value(name = "nonrobust-ls")]
    NonRobustLs,
}

impl From<MethodArg> for Method {
    fn from(arg: MethodArg) -> Method {
        match arg {
            MethodArg::GncGm => Method::GncGm,
            MethodArg::GncTls => Method::GncTls,
            MethodArg::Ransac => Method::Ransac,
            MethodArg::NonRobustLs => Method::NonRobustLs,
        }
    }
}

impl std::fmt::Display for MethodArg {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(Method::from(*self).name())
    }
}

#[derive(Args)]
struct BenchArgs {
    /// Problem family to benchmark.
    #[arg(long)]
    app: AppArg,
    /// Comma-separated methods to run on each instance.
    #[arg(
        long,
        value_delimiter = ',',
        default_values_t = [MethodArg::GncGm, MethodArg::GncTls, MethodArg::Ransac, MethodArg::NonRobustLs]
    )]
    methods: Vec<MethodArg>,
    /// Comma-separated outlier rates in [0, 1), strictly increasing.
    /// Defaults to 0.0 through 0.9 in steps of 0.1.
    #[arg(long, value_delimiter = ',')]
    rates: Option<Vec<f64>>,
    /// Monte Carlo runs per rate.
    #[arg(long, default_value_t = 20)]
    runs: usize,
    /// Correspondences per instance (default: 100 registration, 50 shape).
    #[arg(long)]
    n: Option<usize>,
    /// Inlier noise standard deviation.
    #[arg(long, default_value_t = 0.01)]
    sigma: f64,
    /// Inlier threshold; defaults to 6*sigma.
    #[arg(long)]
    cbar: Option<f64>,
    /// Master seed; every (rate, run) cell derives its own seed from it.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output CSV path.
    #[arg(long)]
    out: PathBuf,
    /// Worker threads (1 = sequential).
    #[arg(long, default_value_t = 1)]
    jobs: usize,
}

#[derive(Args)]
struct SolveArgs {
    /// Problem family of the input.
    #[arg(long)]
    app: AppArg,
    /// Method to run.
    #[arg(long)]
    method: MethodArg,
    /// Correspondence file: `ax ay az bx by bz` per line for registration,
    /// `zx zy bx by bz` for shape alignment. `#` comments allowed.
    #[arg(long)]
    input: Option<PathBuf>,
    /// Registration only: source cloud PLY (requires --target-ply and --indices).
    #[arg(long)]
    source_ply: Option<PathBuf>,
    /// Registration only: target cloud PLY.
    #[arg(long)]
    target_ply: Option<PathBuf>,
    /// Registration only: `i j` rows pairing source index i with target index j.
    #[arg(long)]
    indices: Option<PathBuf>,
    /// Inlier threshold in residual units.
    #[arg(long, default_value_t = 0.1)]
    cbar: f64,
    /// Seed for the seeded solver internals (RANSAC sampling, multistart).
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct SummaryArgs {
    /// Benchmark CSV produced by the bench subcommand.
    #[arg(long = "in")]
    input: PathBuf,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Bench(args) => run_bench(args),
        Command::Solve(args) => run_solve(args),
        Command::Summary(args) => run_summary(args),
    }
}

fn run_bench(args: BenchArgs) -> ExitCode {
    let application = App::from(args.app);
    let mut spec = BenchSpec::new(application);
    spec.methods = args.methods.into_iter().map(Method::from).collect();
    if let Some(rates) = args.rates {
        spec.outlier_rates = rates;
    }
    spec.runs_per_rate = args.runs;
    if let Some(n) = args.n {
        spec.n = n;
    }
    spec.sigma = args.sigma;
    spec.c_bar = args.cbar;
    spec.seed = args.seed;
    spec.jobs = args.jobs;

    let records = match run_benchmark(&spec) {
        Ok(records) => records,
        Err(error) => {
            eprintln!("error: {error}");
            return ExitCode::from(2);
        }
    };

    let file = match std::fs::File::create(&args.out) {
        Ok(file) => file,
        Err(error) => {
            eprintln!("error: cannot write {}: {error}", args.out.display());
            return ExitCode::from(2);
        }
    };
    if let Err(error) = write_records_csv(file, &records) {
        eprintln!("error: writing {}: {error}", args.out.display());
        return ExitCode::from(2);
    }

    println!(
        "wrote {} records to {}\n",
        records.len(),
        args.out.display()
    );
    print!("{}", format_summary(&summarize(&records)));
    ExitCode::SUCCESS
}

fn load_registration_input(args: &SolveArgs) -> Result<Vec<PointCorrespondence>, String> {
    let ply_flags_set = [&args.source_ply, &args.target_ply, &args.indices]
        .iter()
        .filter(|p| p.is_some())
        .count();
    match (&args.input, ply_flags_set) {
        (Some(_), 1..) => {
            Err("use either --input or the --source-ply/--target-ply/--indices trio, not both".into())
        }
        (Some(path), 0) => {
            parse_registration_correspondences(path).map_err(|e| e.to_string())
        }
        (None, 3) => {
            let source_path = args.source_ply.as_ref().unwrap();
            let target_path = args.target_ply.as_ref().unwrap();
            let index_path = args.indices.as_ref().unwrap();
            let source = load_ply_points(source_path)
                .map_err(|e| format!("{}: {e}", source_path.display()))?;
            let target = load_ply_points(target_path)
                .map_err(|e| format!("{}: {e}", target_path.display()))?;
            let pairs = parse_index_pairs(index_path).map_err(|e| e.to_string())?;
            pairs
                .into_iter()
                .enumerate()
                .map(|(row, (i, j))| {
                    if i >= source.len() {
                        Err(format!(
                            "{}: pair {}: source index {i} out of range ({} points)",
                            index_path.display(),
                            row + 1,
                            source.len()
                        ))
                    } else if j >= target.len() {
                        Err(format!(
                            "{}: pair {}: target index {j} out of range ({} points)",
                            index_path.display(),
                            row + 1,
                            target.len()
                        ))
                    } else {
                        Ok(PointCorrespondence {
                            source: source[i],
                            target: target[j],
                        })
                    }
                })
                .collect()
        }
        (None, 0) => Err("registration needs --input or --source-ply/--target-ply/--indices".into()),
        (None, _) => Err("--source-ply, --target-ply and --indices must be given together".into()),
    }
}

fn print_rotation(rotation: &nalgebra::Matrix3<f64>) {
    let column_major: Vec<String> = rotation.iter().map(|v| format!("{v:.9}")).collect();
    println!("rotation (column-major): {}", column_major.join(" "));
    let quaternion = UnitQuaternion::from_matrix(rotation);
    let q = quaternion.quaternion();
    println!(
        "rotation (quaternion x y z w): {:.9} {:.9} {:.9} {:.9}",
        q.i, q.j, q.k, q.w
    );
}

fn report_outcome<E>(outcome: &MethodOutcome<E>, describe: impl Fn(&E)) -> ExitCode {
    match &outcome.estimate {
        Some(estimate) => {
            describe(estimate);
            let inliers = outcome.inlier_mask.iter().filter(|&&m| m).count();
            println!("inliers: {} / {}", inliers, outcome.inlier_mask.len());
            println!("iterations: {}", outcome.outer_iterations);
            println!("converged: {}", outcome.converged);
            if outcome.converged {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
        None => {
            eprintln!("error: solver failed to produce an estimate");
            ExitCode::from(1)
        }
    }
}

fn run_solve(args: SolveArgs) -> ExitCode {
    let method = Method::from(args.method);
    match App::from(args.app) {
        App::Registration => {
            let correspondences = match load_registration_input(&args) {
                Ok(c) => c,
                Err(message) => {
                    eprintln!("error: {message}");
                    return ExitCode::from(2);
                }
            };
            println!("method: {method}");
            let outcome =
                run_registration_method(method, &correspondences, args.cbar, args.seed);
            report_outcome(&outcome, |pose| {
                print_rotation(&pose.rotation);
                let t = pose.translation;
                println!("translation: {:.9} {:.9} {:.9}", t.x, t.y, t.z);
            })
        }
        App::ShapeAlignment => {
            if args.source_ply.is_some() || args.target_ply.is_some() || args.indices.is_some() {
                eprintln!("error: PLY input only applies to --app registration");
                return ExitCode::from(2);
            }
            let path = match &args.input {
                Some(path) => path,
                None => {
                    eprintln!("error: shape alignment needs --input");
                    return ExitCode::from(2);
                }
            };
            let correspondences = match parse_shape_correspondences(path) {
                Ok(c) => c,
                Err(error) => {
                    eprintln!("error: {error}");
                    return ExitCode::from(2);
                }
            };
            println!("method: {method}");
            let outcome = run_shape_method(method, &correspondences, args.cbar, args.seed);
            report_outcome(&outcome, |pose| {
                print_rotation(&pose.rotation);
                let t = pose.translation;
                println!("translation: {:.9} {:.9}", t.x, t.y);
                println!("scale: {:.9}", pose.scale);
            })
        }
    }
}

fn run_summary(args: SummaryArgs) -> ExitCode {
    let file = match std::fs::File::open(&args.input) {
        Ok(file) => file,
        Err(error) => {
            eprintln!("error: {}: {error}", args.input.display());
            return ExitCode::from(2);
        }
    };
    let records = match read_records_csv(file) {
        Ok(records) => records,
        Err(error) => {
            eprintln!("error: {}: {error}", args.input.display());
            return ExitCode::from(2);
        }
    };
    if records.is_empty() {
        eprintln!("error: {}: no records", args.input.display());
        return ExitCode::from(2);
    }
    print!("{}", format_summary(&summarize(&records)));
    ExitCode::SUCCESS
}
