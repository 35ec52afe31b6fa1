//! Benchmark harness for the robust-estimation toolkit.
//!
//! The library half of the `gnc-bench` binary: it sweeps Monte Carlo
//! instances over outlier rates, runs every requested method on identical
//! instances (paired comparison), and serializes the per-run records to CSV.
//! The binary adds argument parsing, one-shot solves on user files, and a
//! summary printer on top.

mod input;
mod report;
mod run;

pub use input::{
    parse_index_pairs, parse_registration_correspondences, parse_shape_correspondences, InputError,
};
pub use report::{
    format_summary, read_records_csv, records_to_csv_string, summarize, write_records_csv,
    SummaryRow,
};
pub use run::{
    derive_seed, run_benchmark, run_registration_method, run_shape_method, App, BenchError,
    BenchSpec, Method, MethodOutcome, RunRecord, FAILURE_SENTINEL,
};
