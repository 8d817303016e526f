//! Tab-separated matrix, label and configuration files.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fs;
use std::path::Path;

use ndarray::Array2;
use xmerge::model::ExpressionMatrix;
use xmerge::{Error, Result};

fn io_error(path: &Path, source: std::io::Error) -> Error {
    Error::Io {
        path: path.display().to_string(),
        source,
    }
}

fn parse_error(path: &Path, line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        file: path.display().to_string(),
        line,
        message: message.into(),
    }
}

/// Tab-separated records with their 1-based line numbers. Blank lines are
/// skipped.
fn records(path: &Path) -> Result<Vec<(usize, Vec<String>)>> {
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(b'\t')
        .has_headers(false)
        .flexible(true)
        .quoting(false)
        .from_path(path)
        .map_err(|e| match e.into_kind() {
            csv::ErrorKind::Io(err) => io_error(path, err),
            other => parse_error(path, 1, format!("{other:?}")),
        })?;
    let mut out = Vec::new();
    for rec in reader.records() {
        let rec = rec.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line() as usize);
            match e.into_kind() {
                csv::ErrorKind::Io(err) => io_error(path, err),
                csv::ErrorKind::Utf8 { .. } => parse_error(path, line, "invalid UTF-8"),
                other => parse_error(path, line, format!("{other:?}")),
            }
        })?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        let fields: Vec<String> = rec
            .iter()
            .map(|f| f.trim_end_matches('\r').to_string())
            .collect();
        if fields.len() == 1 && fields[0].trim().is_empty() {
            continue;
        }
        out.push((line, fields));
    }
    Ok(out)
}

/// Reads a genes × arrays matrix: a header of array ids after one leading
/// cell, then one row per gene starting with its id. With `log2` every value
/// is replaced by its base-2 logarithm.
pub fn read_matrix(path: &Path, log2: bool) -> Result<ExpressionMatrix> {
    let rows = records(path)?;
    let Some(((header_line, header), body)) = rows.split_first() else {
        return Err(parse_error(path, 1, "empty file"));
    };
    if header.len() < 2 {
        return Err(parse_error(
            path,
            *header_line,
            "header needs a gene column and at least one array",
        ));
    }
    let array_ids: Vec<String> = header[1..].to_vec();
    let mut seen = HashSet::new();
    for id in &array_ids {
        if !seen.insert(id.as_str()) {
            return Err(parse_error(
                path,
                *header_line,
                format!("duplicate array id '{id}'"),
            ));
        }
    }
    let width = header.len();
    let mut gene_ids = Vec::with_capacity(body.len());
    let mut genes_seen = HashSet::new();
    let mut values = Vec::with_capacity(body.len() * array_ids.len());
    for (line, fields) in body {
        if fields.len() != width {
            return Err(parse_error(
                path,
                *line,
                format!("expected {width} fields, found {}", fields.len()),
            ));
        }
        if !genes_seen.insert(fields[0].clone()) {
            return Err(parse_error(
                path,
                *line,
                format!("duplicate gene id '{}'", fields[0]),
            ));
        }
        gene_ids.push(fields[0].clone());
        for (col, field) in fields[1..].iter().enumerate() {
            let v: f64 = field.trim().parse().map_err(|_| {
                parse_error(
                    path,
                    *line,
                    format!("invalid number '{field}' in column {}", col + 2),
                )
            })?;
            if !v.is_finite() {
                return Err(parse_error(
                    path,
                    *line,
                    format!("non-finite value '{field}' in column {}", col + 2),
                ));
            }
            let v = if log2 {
                if v <= 0.0 {
                    return Err(parse_error(
                        path,
                        *line,
                        format!(
                            "log2 needs positive values, found {field} in column {}",
                            col + 2
                        ),
                    ));
                }
                v.log2()
            } else {
                v
            };
            values.push(v);
        }
    }
    if gene_ids.is_empty() {
        return Err(parse_error(path, *header_line, "no gene rows"));
    }
    let n = gene_ids.len();
    let values = Array2::from_shape_vec((n, array_ids.len()), values).expect("row-major fill");
    ExpressionMatrix::new(gene_ids, array_ids, values)
}

pub fn matrix_to_tsv(m: &ExpressionMatrix) -> String {
    let mut out = String::from("gene");
    for a in m.array_ids() {
        out.push('\t');
        out.push_str(a);
    }
    out.push('\n');
    for (g, id) in m.gene_ids().iter().enumerate() {
        out.push_str(id);
        for v in m.values().row(g) {
            out.push('\t');
            out.push_str(&v.to_string());
        }
        out.push('\n');
    }
    out
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| io_error(path, e))
}

pub fn write_matrix(path: &Path, m: &ExpressionMatrix) -> Result<()> {
    write_text(path, &matrix_to_tsv(m))
}

pub fn create_dir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).map_err(|e| io_error(path, e))
}

/// Array labels from a table whose first column holds array ids and whose
/// header names the label columns. `column` selects one of them by name; the
/// second column is used when it is `None`.
pub fn read_labels(path: &Path, column: Option<&str>) -> Result<HashMap<String, String>> {
    let rows = records(path)?;
    let Some(((header_line, header), body)) = rows.split_first() else {
        return Err(parse_error(path, 1, "empty label file"));
    };
    if header.len() < 2 {
        return Err(parse_error(
            path,
            *header_line,
            "label file needs an array column and a label column",
        ));
    }
    let col = match column {
        None => 1,
        Some(name) => header
            .iter()
            .skip(1)
            .position(|h| h == name)
            .map(|p| p + 1)
            .ok_or_else(|| {
                parse_error(
                    path,
                    *header_line,
                    format!("no label column named '{name}'"),
                )
            })?,
    };
    let mut labels = HashMap::with_capacity(body.len());
    for (line, fields) in body {
        if fields.len() != header.len() {
            return Err(parse_error(
                path,
                *line,
                format!("expected {} fields, found {}", header.len(), fields.len()),
            ));
        }
        if labels
            .insert(fields[0].clone(), fields[col].clone())
            .is_some()
        {
            return Err(parse_error(
                path,
                *line,
                format!("duplicate array id '{}'", fields[0]),
            ));
        }
    }
    Ok(labels)
}

/// Labels of the arrays of `m`, in column order.
pub fn labels_for(
    m: &ExpressionMatrix,
    labels: &HashMap<String, String>,
    source: &Path,
) -> Result<Vec<String>> {
    m.array_ids()
        .iter()
        .map(|a| {
            labels.get(a).cloned().ok_or_else(|| {
                Error::Alignment(format!("array '{a}' has no label in {}", source.display()))
            })
        })
        .collect()
}

/// A flat `key = value` file. `#` starts a comment line; keys are
/// normalized to use underscores.
#[derive(Debug, Clone, Default)]
pub struct ConfigFile {
    pub path: String,
    /// Value and line number of each key.
    pub entries: BTreeMap<String, (String, usize)>,
}

pub fn normalize_key(key: &str) -> String {
    key.trim().replace('-', "_")
}

pub fn read_config(path: &Path) -> Result<ConfigFile> {
    let text = fs::read_to_string(path).map_err(|e| io_error(path, e))?;
    let mut entries = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(parse_error(
                path,
                i + 1,
                format!("expected 'key = value', found '{line}'"),
            ));
        };
        let key = normalize_key(key);
        if key.is_empty() {
            return Err(parse_error(path, i + 1, "empty key"));
        }
        if entries
            .insert(key.clone(), (value.trim().to_string(), i + 1))
            .is_some()
        {
            return Err(parse_error(path, i + 1, format!("duplicate key '{key}'")));
        }
    }
    Ok(ConfigFile {
        path: path.display().to_string(),
        entries,
    })
}

/// `key = value` lines in key order.
pub fn key_values(entries: &BTreeMap<String, String>) -> String {
    let mut out = String::new();
    for (k, v) in entries {
        out.push_str(k);
        out.push_str(" = ");
        out.push_str(v);
        out.push('\n');
    }
    out
}
