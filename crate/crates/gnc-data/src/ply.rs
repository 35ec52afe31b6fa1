//! Minimal reader for ASCII PLY point clouds.
//!
//! Only the subset needed to feed scan data into the registration benchmarks
//! is supported: an ASCII file with a `vertex` element carrying scalar `x`,
//! `y`, `z` properties. Additional vertex properties (normals, colors) are
//! skipped, and non-vertex elements such as faces are consumed without being
//! interpreted. Binary files are rejected up front.

use std::path::Path;

use nalgebra::Vector3;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum PlyError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("unsupported PLY format `{0}`, only `ascii` is readable")]
    UnsupportedFormat(String),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
}

fn parse_error(line: usize, message: impl Into<String>) -> PlyError {
    PlyError::Parse {
        line,
        message: message.into(),
    }
}

struct Property {
    name: String,
    is_list: bool,
}

struct Element {
    name: String,
    count: usize,
    properties: Vec<Property>,
}

fn decode<'a>(raw_lines: &[&'a [u8]], index: usize) -> Result<&'a str, PlyError> {
    std::str::from_utf8(raw_lines[index])
        .map(|s| s.trim_end_matches('\r'))
        .map_err(|_| parse_error(index + 1, "line is not valid UTF-8 text"))
}

/// Load the vertex positions of an ASCII PLY file.
pub fn load_ply_points(path: &Path) -> Result<Vec<Vector3<f64>>, PlyError> {
    let bytes = std::fs::read(path)?;
    let raw_lines: Vec<&[u8]> = bytes.split(|&b| b == b'\n').collect();

    // --- Header ---------------------------------------------------------
    if raw_lines.is_empty() || decode(&raw_lines, 0)? != "ply" {
        return Err(parse_error(1, "missing `ply` magic line"));
    }
    let mut elements: Vec<Element> = Vec::new();
    let mut format_seen = false;
    let mut index = 1;
    let body_start = loop {
        if index >= raw_lines.len() {
            return Err(parse_error(
                raw_lines.len(),
                "unexpected end of file inside header",
            ));
        }
        let line = decode(&raw_lines, index)?;
        let line_no = index + 1;
        index += 1;
        let tokens: Vec<&str> = line.split_whitespace().collect();
        match tokens.first().copied() {
            None => continue,
            Some("comment") | Some("obj_info") => continue,
            Some("format") => {
                let kind = *tokens
                    .get(1)
                    .ok_or_else(|| parse_error(line_no, "format line is missing a type"))?;
                if kind != "ascii" {
                    return Err(PlyError::UnsupportedFormat(kind.to_string()));
                }
                format_seen = true;
            }
            Some("element") => {
                let (name, count) = match tokens.as_slice() {
                    ["element", name, count] => (*name, *count),
                    _ => {
                        return Err(parse_error(
                            line_no,
                            "element line must be `element <name> <count>`",
                        ))
                    }
                };
                let count: usize = count.parse().map_err(|_| {
                    parse_error(line_no, format!("invalid element count `{count}`"))
                })?;
                elements.push(Element {
                    name: name.to_string(),
                    count,
                    properties: Vec::new(),
                });
            }
            Some("property") => {
                let element = elements.last_mut().ok_or_else(|| {
                    parse_error(line_no, "property declared before any element")
                })?;
                let is_list = tokens.get(1) == Some(&"list");
                let name = *tokens.last().filter(|_| tokens.len() >= 3).ok_or_else(
                    || parse_error(line_no, "property line is missing a name"),
                )?;
                element.properties.push(Property {
                    name: name.to_string(),
                    is_list,
                });
            }
            Some("end_header") => break line_no,
            Some(other) => {
                return Err(parse_error(
                    line_no,
                    format!("unknown header keyword `{other}`"),
                ));
            }
        }
    };
    if !format_seen {
        return Err(parse_error(body_start, "header has no `format` line"));
    }

    // --- Vertex layout ----------------------------------------------------
    let vertex = elements
        .iter()
        .find(|e| e.name == "vertex")
        .ok_or_else(|| parse_error(body_start, "header declares no `vertex` element"))?;
    if vertex.properties.iter().any(|p| p.is_list) {
        return Err(parse_error(
            body_start,
            "list properties on the vertex element are not supported",
        ));
    }
    let coordinate_index = |axis: &str| -> Result<usize, PlyError> {
        vertex
            .properties
            .iter()
            .position(|p| p.name == axis)
            .ok_or_else(|| {
                parse_error(body_start, format!("vertex element has no `{axis}` property"))
            })
    };
    let xyz = [
        coordinate_index("x")?,
        coordinate_index("y")?,
        coordinate_index("z")?,
    ];

    // --- Body -------------------------------------------------------------
    let mut points = Vec::new();
    for element in &elements {
        let is_vertex = std::ptr::eq(element, vertex);
        let mut remaining = element.count;
        while remaining > 0 {
            let line_no = index + 1;
            if index >= raw_lines.len() {
                return Err(parse_error(
                    line_no,
                    format!("unexpected end of file, {remaining} `{}` rows missing", element.name),
                ));
            }
            let line = decode(&raw_lines, index)?;
            index += 1;
            if line.trim().is_empty() {
                continue;
            }
            remaining -= 1;
            if !is_vertex {
                continue;
            }
            let tokens: Vec<&str> = line.split_whitespace().collect();
            if tokens.len() != vertex.properties.len() {
                return Err(parse_error(
                    line_no,
                    format!(
                        "expected {} vertex values, got {}",
                        vertex.properties.len(),
                        tokens.len()
                    ),
                ));
            }
            let mut coords = [0.0f64; 3];
            for (slot, &column) in coords.iter_mut().zip(&xyz) {
                *slot = tokens[column].parse().map_err(|_| {
                    parse_error(line_no, format!("invalid number `{}`", tokens[column]))
                })?;
            }
            points.push(Vector3::new(coords[0], coords[1], coords[2]));
        }
    }
    Ok(points)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn write_ply(contents: &str) -> tempfile::NamedTempFile {
        let mut file = tempfile::NamedTempFile::new().unwrap();
        file.write_all(contents.as_bytes()).unwrap();
        file.flush().unwrap();
        file
    }

    #[test]
    fn reads_a_minimal_vertex_file() {
        let file = write_ply(
            "ply\nformat ascii 1.0\nelement vertex 2\nproperty float x\nproperty float y\nproperty float z\nend_header\n1 2 3\n-0.5 0 4.25\n",
        );
        let points = load_ply_points(file.path()).unwrap();
        assert_eq!(points, vec![Vector3::new(1.0, 2.0, 3.0), Vector3::new(-0.5, 0.0, 4.25)]);
    }

    #[test]
    fn skips_extra_vertex_properties_and_comments() {
        let file = write_ply(
            "ply\ncomment made by hand\nformat ascii 1.0\ncomment a cube corner\nelement vertex 1\nproperty float x\nproperty float nx\nproperty float y\nproperty float z\nproperty uchar red\nend_header\n7 0.1 8 9 255\n",
        );
        let points = load_ply_points(file.path()).unwrap();
        assert_eq!(points, vec![Vector3::new(7.0, 8.0, 9.0)]);
    }

    #[test]
    fn consumes_face_elements_without_interpreting_them() {
        let file = write_ply(
            "ply\nformat ascii 1.0\nelement vertex 3\nproperty float x\nproperty float y\nproperty float z\nelement face 1\nproperty list uchar int vertex_indices\nend_header\n0 0 0\n1 0 0\n0 1 0\n3 0 1 2\n",
        );
        let points = load_ply_points(file.path()).unwrap();
        assert_eq!(points.len(), 3);
    }

    #[test]
    fn rejects_binary_files() {
        let file = write_ply(
            "ply\nformat binary_little_endian 1.0\nelement vertex 1\nproperty float x\nproperty float y\nproperty float z\nend_header\n",
        );
        match load_ply_points(file.path()) {
            Err(PlyError::UnsupportedFormat(kind)) => assert_eq!(kind, "binary_little_endian"),
            other => panic!("expected UnsupportedFormat, got {other:?}"),
        }
    }

    #[test]
    fn reports_malformed_numbers_with_their_line() {
        let file = write_ply(
            "ply\nformat ascii 1.0\nelement vertex 2\nproperty float x\nproperty float y\nproperty float z\nend_header\n0 0 0\n1 oops 0\n",
        );
        match load_ply_points(file.path()) {
            Err(PlyError::Parse { line, message }) => {
                assert_eq!(line, 9);
                assert!(message.contains("oops"), "message was: {message}");
            }
            other => panic!("expected Parse error, got {other:?}"),
        }
    }

    #[test]
    fn reports_truncated_files_with_the_missing_count() {
        let file = write_ply(
            "ply\nformat ascii 1.0\nelement vertex 3\nproperty float x\nproperty float y\nproperty float z\nend_header\n0 0 0\n",
        );
        match load_ply_points(file.path()) {
            Err(PlyError::Parse { message, .. }) => {
                assert!(message.contains("2 `vertex` rows missing"), "message was: {message}");
            }
            other => panic!("expected Parse error, got {other:?}"),
        }
    }

    #[test]
    fn rejects_headers_without_vertices_or_magic() {
        let no_vertex = write_ply(
            "ply\nformat ascii 1.0\nelement face 0\nproperty list uchar int vertex_indices\nend_header\n",
        );
        assert!(matches!(
            load_ply_points(no_vertex.path()),
            Err(PlyError::Parse { .. })
        ));

        let no_magic = write_ply("off\n0 0 0\n");
        match load_ply_points(no_magic.path()) {
            Err(PlyError::Parse { line: 1, .. }) => {}
            other => panic!("expected a line-1 Parse error, got {other:?}"),
        }
    }

    #[test]
    fn missing_file_surfaces_the_io_error() {
        let err = load_ply_points(Path::new("/nonexistent/cloud.ply")).unwrap_err();
        assert!(matches!(err, PlyError::Io(_)));
    }

    #[test]
    fn wrong_column_count_is_an_error() {
        let file = write_ply(
            "ply\nformat ascii 1.0\nelement vertex 1\nproperty float x\nproperty float y\nproperty float z\nend_header\n1 2\n",
        );
        match load_ply_points(file.path()) {
            Err(PlyError::Parse { line: 8, message }) => {
                assert!(message.contains("expected 3"), "message was: {message}");
            }
            other => panic!("expected Parse error, got {other:?}"),
        }
    }
}
