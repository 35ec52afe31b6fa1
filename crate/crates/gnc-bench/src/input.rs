//! Plain-text input files for the one-shot solve command.
//!
//! All formats are line-oriented: whitespace-separated numbers, blank lines
//! and `#` comments ignored. Errors always name the offending file and line.

use std::path::Path;

use nalgebra::{Vector2, Vector3};
use thiserror::Error;

use gnc_solvers::registration::PointCorrespondence;
use gnc_solvers::shape::ShapeCorrespondence;

#[derive(Debug, Error)]
pub enum InputError {
    #[error("{file}: {source}")]
    Io {
        file: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{file}:{line}: {message}")]
    Parse {
        file: String,
        line: usize,
        message: String,
    },
}

fn read_numeric_rows(
    path: &Path,
    columns: usize,
    what: &str,
) -> Result<Vec<Vec<f64>>, InputError> {
    let file = path.display().to_string();
    let text = std::fs::read_to_string(path).map_err(|source| InputError::Io {
        file: file.clone(),
        source,
    })?;
    let mut rows = Vec::new();
    for (index, raw) in text.lines().enumerate() {
        let line = index + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let tokens: Vec<&str> = content.split_whitespace().collect();
        if tokens.len() != columns {
            return Err(InputError::Parse {
                file: file.clone(),
                line,
                message: format!("expected {columns} values per {what} line, got {}", tokens.len()),
            });
        }
        let mut row = Vec::with_capacity(columns);
        for token in tokens {
            row.push(token.parse::<f64>().map_err(|_| InputError::Parse {
                file: file.clone(),
                line,
                message: format!("invalid number `{token}`"),
            })?);
        }
        rows.push(row);
    }
    Ok(rows)
}

/// Parse `ax ay az bx by bz` rows.
pub fn parse_registration_correspondences(
    path: &Path,
) -> Result<Vec<PointCorrespondence>, InputError> {
    Ok(read_numeric_rows(path, 6, "correspondence")?
        .into_iter()
        .map(|row| PointCorrespondence {
            source: Vector3::new(row[0], row[1], row[2]),
            target: Vector3::new(row[3], row[4], row[5]),
        })
        .collect())
}

/// Parse `zx zy bx by bz` rows (2D feature, 3D model point).
pub fn parse_shape_correspondences(path: &Path) -> Result<Vec<ShapeCorrespondence>, InputError> {
    Ok(read_numeric_rows(path, 5, "correspondence")?
        .into_iter()
        .map(|row| ShapeCorrespondence {
            feature: Vector2::new(row[0], row[1]),
            model: Vector3::new(row[2], row[3], row[4]),
        })
        .collect())
}

/// Parse `i j` index pairs into a source/target cloud pair.
pub fn parse_index_pairs(path: &Path) -> Result<Vec<(usize, usize)>, InputError> {
    let file = path.display().to_string();
    read_numeric_rows(path, 2, "index")?
        .into_iter()
        .enumerate()
        .map(|(row_number, row)| {
            let as_index = |value: f64| -> Result<usize, InputError> {
                if value >= 0.0 && value.fract() == 0.0 && value <= usize::MAX as f64 {
                    Ok(value as usize)
                } else {
                    Err(InputError::Parse {
                        file: file.clone(),
                        // read_numeric_rows strips comments/blanks, so the
                        // original line is unknown here; report the pair number.
                        line: row_number + 1,
                        message: format!("`{value}` is not a valid index"),
                    })
                }
            };
            Ok((as_index(row[0])?, as_index(row[1])?))
        })
        .collect()
}
