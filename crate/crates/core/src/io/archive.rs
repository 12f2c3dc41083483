//! Single-file model container.
//!
//! A short line-oriented text header is followed by the matrices `W`, `H`,
//! `Omega` and the routing matrix, each stored as two little-endian `u64`
//! dimensions and then row-major little-endian `f64` values:
//!
//! ```text
//! ttnmf-model 1
//! od_pairs 30
//! links 24
//! rank 4
//! timestamps 300
//! lags 1,2
//! lambda_h 13.02...
//! lambda_a 1.58...e-5
//! beta_h 0.2
//! beta_a 0.2
//! config_sha256 <hex>
//! data_sha256 <hex>
//! end
//! <binary matrices>
//! ```
//!
//! Penalty values use Rust's shortest round-trip float formatting, so the
//! whole archive reloads bit-exactly.

use std::collections::HashMap;
use std::path::Path;

use nalgebra::DMatrix;
use sha2::{Digest, Sha256};

use crate::error::{Result, TomographyError};
use crate::lags::LagSet;
use crate::model::{FactorModel, RegularizationWeights};
use crate::network::{RoutingMatrix, TrafficMatrix};
use crate::trainer::TrainConfig;

const MAGIC: &str = "ttnmf-model";
pub const ARCHIVE_VERSION: u32 = 1;
const HEADER_END: &[u8] = b"end\n";

#[derive(Debug, Clone, PartialEq)]
pub struct ModelArchive {
    pub model: FactorModel,
    pub routing: RoutingMatrix,
    pub weights: RegularizationWeights,
    /// SHA-256 of the canonical training-configuration text.
    pub config_sha256: String,
    /// SHA-256 of the training data (dimensions, values and mask).
    pub data_sha256: String,
}

/// Canonical text of the settings that influence training.
pub fn config_fingerprint(config: &TrainConfig) -> String {
    let c = config;
    format!(
        "rank={};lags={};beta_h={};beta_a={};q_max={};w={},{};h={},{};omega={},{};delta={};missing={};step_safety={};completion={},{},{},{}",
        c.rank,
        c.lag_set,
        c.beta_h,
        c.beta_a,
        c.q_max,
        c.w_block.max_iter,
        c.w_block.delta,
        c.h_block.max_iter,
        c.h_block.delta,
        c.omega_block.max_iter,
        c.omega_block.delta,
        c.delta,
        c.missing_mode,
        c.step_safety,
        c.completion.max_outer,
        c.completion.block.max_iter,
        c.completion.block.delta,
        c.completion.delta,
    )
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Checksum over the dimensions, the values and, when present, the mask.
pub fn traffic_checksum(traffic: &TrafficMatrix) -> String {
    let mut buf = Vec::new();
    push_matrix(&mut buf, traffic.entries());
    if let Some(mask) = traffic.mask() {
        push_matrix(&mut buf, mask);
    }
    sha256_hex(&buf)
}

impl ModelArchive {
    pub fn from_training(
        model: FactorModel,
        routing: RoutingMatrix,
        weights: RegularizationWeights,
        config: &TrainConfig,
        traffic: &TrafficMatrix,
    ) -> Self {
        ModelArchive {
            model,
            routing,
            weights,
            config_sha256: sha256_hex(config_fingerprint(config).as_bytes()),
            data_sha256: traffic_checksum(traffic),
        }
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let m = &self.model;
        let header = format!(
            "{MAGIC} {ARCHIVE_VERSION}\nod_pairs {}\nlinks {}\nrank {}\ntimestamps {}\nlags {}\nlambda_h {}\nlambda_a {}\nbeta_h {}\nbeta_a {}\nconfig_sha256 {}\ndata_sha256 {}\n",
            m.w().nrows(),
            self.routing.links(),
            m.rank(),
            m.h().ncols(),
            m.lag_set(),
            self.weights.lambda_h,
            self.weights.lambda_a,
            self.weights.beta_h,
            self.weights.beta_a,
            self.config_sha256,
            self.data_sha256,
        );
        let mut buf = header.into_bytes();
        buf.extend_from_slice(HEADER_END);
        for mat in [m.w(), m.h(), m.omega(), self.routing.entries()] {
            push_matrix(&mut buf, mat);
        }
        buf
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let bad = |msg: String| TomographyError::Validation(format!("model archive: {msg}"));
        let end = find_header_end(bytes).ok_or_else(|| bad("header terminator not found".into()))?;
        let header = std::str::from_utf8(&bytes[..end]).map_err(|_| bad("header is not UTF-8".into()))?;
        let mut lines = header.lines();
        let first = lines.next().unwrap_or_default();
        match first.split_once(' ') {
            Some((MAGIC, v)) if v.parse::<u32>() == Ok(ARCHIVE_VERSION) => {}
            Some((MAGIC, v)) => return Err(bad(format!("unsupported version {v}"))),
            _ => return Err(bad("not a model archive".into())),
        }
        let fields: HashMap<&str, &str> = lines
            .map(|l| l.split_once(' ').unwrap_or((l, "")))
            .collect();
        let field = |k: &str| fields.get(k).copied().ok_or_else(|| bad(format!("missing field '{k}'")));
        let num = |k: &str| -> Result<f64> {
            field(k)?.parse().map_err(|_| bad(format!("field '{k}' is not a number")))
        };
        let count = |k: &str| -> Result<usize> {
            field(k)?.parse().map_err(|_| bad(format!("field '{k}' is not a count")))
        };
        let lag_set: LagSet = field("lags")?.parse()?;

        let mut cursor = &bytes[end + HEADER_END.len()..];
        let w = read_matrix(&mut cursor)?;
        let h = read_matrix(&mut cursor)?;
        let omega = read_matrix(&mut cursor)?;
        let a = read_matrix(&mut cursor)?;
        if !cursor.is_empty() {
            return Err(bad(format!("{} trailing bytes", cursor.len())));
        }
        let expect = [
            ("od_pairs", w.nrows()),
            ("links", a.nrows()),
            ("rank", w.ncols()),
            ("timestamps", h.ncols()),
        ];
        for (k, actual) in expect {
            if count(k)? != actual {
                return Err(bad(format!("header {k}={} disagrees with stored matrices ({actual})", count(k)?)));
            }
        }
        let routing = RoutingMatrix::new(a)?;
        let model = FactorModel::new(w, h, omega, lag_set, &routing)?;
        let weights = RegularizationWeights::new(
            num("lambda_h")?,
            num("lambda_a")?,
            num("beta_h")?,
            num("beta_a")?,
        )?;
        Ok(ModelArchive {
            model,
            routing,
            weights,
            config_sha256: field("config_sha256")?.to_string(),
            data_sha256: field("data_sha256")?.to_string(),
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_bytes())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        ModelArchive::from_bytes(&std::fs::read(path)?)
    }
}

fn find_header_end(bytes: &[u8]) -> Option<usize> {
    // The terminator must start a line.
    let mut start = 0;
    while start < bytes.len() {
        let rest = &bytes[start..];
        if rest.starts_with(HEADER_END) {
            return Some(start);
        }
        start += rest.iter().position(|&b| b == b'\n')? + 1;
    }
    None
}

fn push_matrix(buf: &mut Vec<u8>, m: &DMatrix<f64>) {
    buf.extend_from_slice(&(m.nrows() as u64).to_le_bytes());
    buf.extend_from_slice(&(m.ncols() as u64).to_le_bytes());
    for row in m.row_iter() {
        for v in row.iter() {
            buf.extend_from_slice(&v.to_le_bytes());
        }
    }
}

fn read_matrix(cursor: &mut &[u8]) -> Result<DMatrix<f64>> {
    let truncated = || TomographyError::Validation("model archive: truncated matrix data".into());
    let mut take = |n: usize| -> Result<&[u8]> {
        if cursor.len() < n {
            return Err(truncated());
        }
        let (head, tail) = cursor.split_at(n);
        *cursor = tail;
        Ok(head)
    };
    let rows = u64::from_le_bytes(take(8)?.try_into().expect("8 bytes")) as usize;
    let cols = u64::from_le_bytes(take(8)?.try_into().expect("8 bytes")) as usize;
    let len = rows.checked_mul(cols).and_then(|n| n.checked_mul(8)).ok_or_else(truncated)?;
    let data = take(len)?;
    let values: Vec<f64> = data
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
        .collect();
    Ok(DMatrix::from_row_slice(rows, cols, &values))
}
