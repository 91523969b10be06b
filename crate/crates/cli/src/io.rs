//! Tab-separated text formats.
//!
//! A matrix file holds one row per line with tab-separated numbers. The first
//! non-empty line may be a header starting with `#`; it is ignored on input.
//! Numbers are written in the shortest form that parses back to the same `f64`.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use arsvd_core::lmm::GenotypeMatrix;
use arsvd_core::DenseMatrix;

use crate::error::{CliError, CliResult};

/// Formats `v` so that `v.to_string().parse::<f64>() == v` exactly.
pub fn format_f64(v: f64) -> String {
    let a = v.abs();
    if v == 0.0 || !v.is_finite() || (1e-4..1e15).contains(&a) {
        format!("{v}")
    } else {
        format!("{v:e}")
    }
}

fn read_text(path: &Path) -> CliResult<String> {
    fs::read_to_string(path).map_err(|e| CliError::io(path, e))
}

fn write_text(path: &Path, text: &str) -> CliResult<()> {
    fs::write(path, text).map_err(|e| CliError::io(path, e))
}

/// Non-empty data lines with their 1-based line numbers, header removed.
fn data_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    let mut seen_first = false;
    text.lines().enumerate().filter_map(move |(i, raw)| {
        let line = raw.strip_suffix('\r').unwrap_or(raw);
        if line.trim().is_empty() {
            return None;
        }
        let first = !seen_first;
        seen_first = true;
        if first && line.starts_with('#') {
            return None;
        }
        Some((i + 1, line))
    })
}

fn parse_number(source: &str, line: usize, col: usize, tok: &str) -> CliResult<f64> {
    let v: f64 = tok
        .trim()
        .parse()
        .map_err(|_| CliError::Data(format!("{source}:{line}:{col}: cannot parse {tok:?} as a number")))?;
    if !v.is_finite() {
        return Err(CliError::Data(format!("{source}:{line}:{col}: non-finite value {tok:?}")));
    }
    Ok(v)
}

/// Parses matrix text; `source` names the input in error messages.
pub fn parse_matrix(text: &str, source: &str) -> CliResult<DenseMatrix> {
    let mut width = None;
    let mut data = Vec::new();
    let mut rows = 0;
    for (line, content) in data_lines(text) {
        let fields: Vec<&str> = content.split('\t').collect();
        match width {
            None => width = Some(fields.len()),
            Some(w) if w != fields.len() => {
                return Err(CliError::Data(format!(
                    "{source}:{line}: expected {w} fields like the first row, found {}",
                    fields.len()
                )))
            }
            _ => {}
        }
        for (c, tok) in fields.iter().enumerate() {
            data.push(parse_number(source, line, c + 1, tok)?);
        }
        rows += 1;
    }
    let Some(cols) = width else {
        return Err(CliError::Data(format!("{source}: no data rows")));
    };
    Ok(DenseMatrix::new(rows, cols, data)?)
}

pub fn read_matrix(path: &Path) -> CliResult<DenseMatrix> {
    parse_matrix(&read_text(path)?, &path.display().to_string())
}

pub fn render_matrix(m: &DenseMatrix, header: Option<&[String]>) -> String {
    let mut out = String::new();
    if let Some(h) = header {
        let _ = writeln!(out, "#{}", h.join("\t"));
    }
    for row in m.rows_iter() {
        let fields: Vec<String> = row.iter().map(|&v| format_f64(v)).collect();
        out.push_str(&fields.join("\t"));
        out.push('\n');
    }
    out
}

pub fn write_matrix(path: &Path, m: &DenseMatrix, header: Option<&[String]>) -> CliResult<()> {
    write_text(path, &render_matrix(m, header))
}

/// Column header `prefix1 … prefixk`.
pub fn numbered(prefix: &str, k: usize) -> Vec<String> {
    (1..=k).map(|i| format!("{prefix}{i}")).collect()
}

/// Reads a single-column file into a vector.
pub fn read_vector(path: &Path) -> CliResult<Vec<f64>> {
    let m = read_matrix(path)?;
    if m.n_cols() != 1 {
        return Err(CliError::Data(format!("{}: expected one column, found {}", path.display(), m.n_cols())));
    }
    Ok(m.into_vec())
}

pub fn write_vector(path: &Path, v: &[f64], name: &str) -> CliResult<()> {
    write_matrix(path, &DenseMatrix::column(v), Some(&[name.to_string()]))
}

/// Genotypes stored variant-major: `variant_id` then one 0/1/2 entry per individual.
pub fn parse_genotypes(text: &str, source: &str) -> CliResult<GenotypeMatrix> {
    let mut ids = Vec::new();
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (line, content) in data_lines(text) {
        let mut fields = content.split('\t');
        let id = fields.next().unwrap_or_default().trim().to_string();
        if id.is_empty() {
            return Err(CliError::Data(format!("{source}:{line}:1: empty variant id")));
        }
        let mut row = Vec::new();
        for (c, tok) in fields.enumerate() {
            let v = parse_number(source, line, c + 2, tok)?;
            if v != 0.0 && v != 1.0 && v != 2.0 {
                return Err(CliError::Data(format!("{source}:{line}:{}: genotype {tok:?} is not 0, 1 or 2", c + 2)));
            }
            row.push(v);
        }
        if let Some(first) = rows.first() {
            if first.len() != row.len() {
                return Err(CliError::Data(format!(
                    "{source}:{line}: expected {} individuals like the first variant, found {}",
                    first.len(),
                    row.len()
                )));
            }
        }
        if row.is_empty() {
            return Err(CliError::Data(format!("{source}:{line}: variant {id} has no genotypes")));
        }
        ids.push(id);
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(CliError::Data(format!("{source}: no variants")));
    }
    let variant_major = DenseMatrix::from_rows(&rows)?;
    Ok(GenotypeMatrix::new(variant_major.transpose(), ids)?)
}

pub fn read_genotypes(path: &Path) -> CliResult<GenotypeMatrix> {
    parse_genotypes(&read_text(path)?, &path.display().to_string())
}

pub fn render_genotypes(g: &GenotypeMatrix) -> String {
    let raw = g.raw();
    let mut out = String::new();
    let _ = writeln!(out, "#variant_id\t{}", numbered("i", g.n_individuals()).join("\t"));
    for (j, id) in g.variant_ids().iter().enumerate() {
        out.push_str(id);
        for i in 0..g.n_individuals() {
            out.push('\t');
            out.push_str(&format_f64(raw[(i, j)]));
        }
        out.push('\n');
    }
    out
}

pub fn write_genotypes(path: &Path, g: &GenotypeMatrix) -> CliResult<()> {
    write_text(path, &render_genotypes(g))
}

/// `variant_id → group` pairs in file order.
pub fn read_groups(path: &Path) -> CliResult<Vec<(String, String)>> {
    let text = read_text(path)?;
    let source = path.display().to_string();
    let mut out = Vec::new();
    for (line, content) in data_lines(&text) {
        let fields: Vec<&str> = content.split('\t').map(str::trim).collect();
        if fields.len() != 2 || fields.iter().any(|f| f.is_empty()) {
            return Err(CliError::Data(format!("{source}:{line}: expected variant_id<TAB>group")));
        }
        out.push((fields[0].to_string(), fields[1].to_string()));
    }
    Ok(out)
}
