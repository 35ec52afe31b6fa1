//! CSV serialization and the per-(method, rate) summary table.

use std::io;

use crate::run::RunRecord;

/// Write records with the canonical header:
/// `method,outlier_rate,run_index,rotation_error_deg,translation_error,scale_error,outer_iterations,wall_time_ms,converged,precision,recall`.
pub fn write_records_csv<W: io::Write>(writer: W, records: &[RunRecord]) -> csv::Result<()> {
    let mut csv_writer = csv::Writer::from_writer(writer);
    for record in records {
        csv_writer.serialize(record)?;
    }
    csv_writer.flush()?;
    Ok(())
}

pub fn records_to_csv_string(records: &[RunRecord]) -> String {
    let mut buffer = Vec::new();
    write_records_csv(&mut buffer, records).expect("writing CSV to memory cannot fail");
    String::from_utf8(buffer).expect("CSV output is UTF-8")
}

pub fn read_records_csv<R: io::Read>(reader: R) -> csv::Result<Vec<RunRecord>> {
    csv::Reader::from_reader(reader)
        .deserialize()
        .collect()
}

/// Aggregate statistics for one (method, outlier rate) group.
#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub method: String,
    pub outlier_rate: f64,
    pub runs: usize,
    pub converged_runs: usize,
    pub median_rotation_error_deg: f64,
    pub max_rotation_error_deg: f64,
    pub median_translation_error: f64,
    pub max_translation_error: f64,
    /// Present when any record in the group carries a scale error.
    pub median_scale_error: Option<f64>,
    pub max_scale_error: Option<f64>,
    pub mean_iterations: f64,
}

fn median(values: &mut [f64]) -> f64 {
    assert!(!values.is_empty());
    values.sort_by(|a, b| a.partial_cmp(b).expect("error metrics are never NaN"));
    let mid = values.len() / 2;
    if values.len() % 2 == 1 {
        values[mid]
    } else {
        0.5 * (values[mid - 1] + values[mid])
    }
}

/// Group records by (method, rate) in first-appearance order and reduce each
/// group to medians and maxima.
pub fn summarize(records: &[RunRecord]) -> Vec<SummaryRow> {
    let mut groups: Vec<(String, f64, Vec<&RunRecord>)> = Vec::new();
    for record in records {
        match groups
            .iter_mut()
            .find(|(m, rate, _)| *m == record.method && *rate == record.outlier_rate)
        {
            Some((_, _, members)) => members.push(record),
            None => groups.push((record.method.clone(), record.outlier_rate, vec![record])),
        }
    }

    groups
        .into_iter()
        .map(|(method, outlier_rate, members)| {
            let mut rotation: Vec<f64> = members.iter().map(|r| r.rotation_error_deg).collect();
            let mut translation: Vec<f64> =
                members.iter().map(|r| r.translation_error).collect();
            let mut scale: Vec<f64> = members.iter().filter_map(|r| r.scale_error).collect();
            let max = |v: &[f64]| v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            SummaryRow {
                runs: members.len(),
                converged_runs: members.iter().filter(|r| r.converged).count(),
                median_rotation_error_deg: median(&mut rotation),
                max_rotation_error_deg: max(&rotation),
                median_translation_error: median(&mut translation),
                max_translation_error: max(&translation),
                median_scale_error: (!scale.is_empty()).then(|| median(&mut scale)),
                max_scale_error: (!scale.is_empty()).then(|| max(&scale)),
                mean_iterations: members.iter().map(|r| r.outer_iterations as f64).sum::<f64>()
                    / members.len() as f64,
                method,
                outlier_rate,
            }
        })
        .collect()
}

/// Render summary rows as an aligned text table.
pub fn format_summary(rows: &[SummaryRow]) -> String {
    let mut out = String::new();
    out.push_str(&format!(
        "{:<13} {:>5} {:>10} {:>12} {:>12} {:>12} {:>12} {:>12} {:>12} {:>10}\n",
        "method",
        "rate",
        "converged",
        "med rot deg",
        "max rot deg",
        "med trans",
        "max trans",
        "med scale",
        "max scale",
        "mean iters"
    ));
    let fmt_opt = |v: Option<f64>| match v {
        Some(x) => format!("{x:.6}"),
        None => "-".to_string(),
    };
    for row in rows {
        out.push_str(&format!(
            "{:<13} {:>5.2} {:>10} {:>12.6} {:>12.6} {:>12.6} {:>12.6} {:>12} {:>12} {:>10.1}\n",
            row.method,
            row.outlier_rate,
            format!("{}/{}", row.converged_runs, row.runs),
            row.median_rotation_error_deg,
            row.max_rotation_error_deg,
            row.median_translation_error,
            row.max_translation_error,
            fmt_opt(row.median_scale_error),
            fmt_opt(row.max_scale_error),
            row.mean_iterations,
        ));
    }
    out
}
