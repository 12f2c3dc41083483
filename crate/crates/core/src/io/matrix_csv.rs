//! Headerless, row-major numeric CSV. Lines starting with `#` are comments.
//!
//! Floats are written with 17 significant digits in scientific notation so
//! that every value reads back bit-exactly and output is byte-stable.

use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use nalgebra::DMatrix;

use crate::error::{Result, TomographyError};
use crate::network::{LinkFlowMatrix, RoutingMatrix, TrafficMatrix};

/// What a matrix file holds; decides the validation applied on load.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MatrixKind {
    /// Links x OD pairs, entries in {0, 1}.
    Routing,
    /// OD pairs x timestamps, entries >= 0.
    Traffic,
    /// Links x timestamps, entries >= 0.
    LinkFlow,
    /// Same shape as the traffic it masks, entries in {0, 1}.
    Mask,
}

/// Reads and validates a matrix file.
pub fn load_matrix_csv(path: &Path, kind: MatrixKind) -> Result<DMatrix<f64>> {
    let m = parse_matrix_csv(open(path)?, path)?;
    validate(&m, kind)?;
    Ok(m)
}

pub fn load_routing_csv(path: &Path) -> Result<RoutingMatrix> {
    RoutingMatrix::new(load_matrix_csv(path, MatrixKind::Routing)?)
}

pub fn load_link_flow_csv(path: &Path) -> Result<LinkFlowMatrix> {
    LinkFlowMatrix::new(load_matrix_csv(path, MatrixKind::LinkFlow)?)
}

/// Traffic with an optional mask. Masked-out cells may hold anything
/// numeric (including `nan`); they are not validated.
pub fn load_traffic_csv(path: &Path, mask: Option<&Path>) -> Result<TrafficMatrix> {
    match mask {
        None => TrafficMatrix::new(load_matrix_csv(path, MatrixKind::Traffic)?),
        Some(mask_path) => {
            let mask = load_matrix_csv(mask_path, MatrixKind::Mask)?;
            let entries = parse_matrix_csv(open(path)?, path)?;
            TrafficMatrix::with_mask(entries, mask)
        }
    }
}

fn open(path: &Path) -> Result<File> {
    File::open(path).map_err(|e| {
        TomographyError::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display())))
    })
}

/// Parses CSV text into a dense matrix. `source` only labels error messages.
pub fn parse_matrix_csv<R: Read>(reader: R, source: &Path) -> Result<DMatrix<f64>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .comment(Some(b'#'))
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let parse_err = |line: u64, column: usize, message: String| TomographyError::Parse {
        path: source.to_path_buf(),
        line,
        column,
        message,
    };

    let mut values = Vec::new();
    let mut width: Option<usize> = None;
    let mut rows = 0;
    for record in rdr.records() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            parse_err(line, 0, e.to_string())
        })?;
        let line = record.position().map_or(0, |p| p.line());
        if record.len() == 1 && record[0].is_empty() {
            continue;
        }
        match width {
            None => width = Some(record.len()),
            Some(w) if w != record.len() => {
                return Err(parse_err(
                    line,
                    w.min(record.len()) + 1,
                    format!("row has {} fields, expected {w}", record.len()),
                ));
            }
            _ => {}
        }
        for (j, field) in record.iter().enumerate() {
            let v: f64 = field
                .parse()
                .map_err(|_| parse_err(line, j + 1, format!("'{field}' is not a number")))?;
            values.push(v);
        }
        rows += 1;
    }
    let Some(cols) = width else {
        return Err(parse_err(0, 0, "no data rows".into()));
    };
    Ok(DMatrix::from_row_slice(rows, cols, &values))
}

fn validate(m: &DMatrix<f64>, kind: MatrixKind) -> Result<()> {
    match kind {
        MatrixKind::Routing => RoutingMatrix::new(m.clone()).map(|_| ()),
        MatrixKind::Traffic => TrafficMatrix::new(m.clone()).map(|_| ()),
        MatrixKind::LinkFlow => LinkFlowMatrix::new(m.clone()).map(|_| ()),
        MatrixKind::Mask => {
            let bad: Vec<String> = m
                .row_iter()
                .enumerate()
                .flat_map(|(i, row)| {
                    row.iter()
                        .enumerate()
                        .filter(|(_, &v)| v != 0.0 && v != 1.0)
                        .map(|(j, v)| format!("({},{})={v}", i + 1, j + 1))
                        .collect::<Vec<_>>()
                })
                .take(10)
                .collect();
            if bad.is_empty() {
                Ok(())
            } else {
                Err(TomographyError::Validation(format!(
                    "mask entries must be 0 or 1; offending cells: {}",
                    bad.join(", ")
                )))
            }
        }
    }
}

/// Formats one value with 17 significant digits.
pub fn format_value(v: f64) -> String {
    format!("{v:.16e}")
}

fn write_rows(path: &Path, m: &DMatrix<f64>, fmt: impl Fn(f64) -> String) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    for row in m.row_iter() {
        let cells: Vec<String> = row.iter().map(|&v| fmt(v)).collect();
        out.write_all(cells.join(",").as_bytes())?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}

pub fn write_matrix_csv(path: &Path, m: &DMatrix<f64>) -> Result<()> {
    write_rows(path, m, format_value)
}

/// Writes a 0/1 matrix as bare integers.
pub fn write_indicator_csv(path: &Path, m: &DMatrix<f64>) -> Result<()> {
    write_rows(path, m, |v| if v == 0.0 { "0".into() } else { "1".into() })
}
