//! Routing, OD traffic and link-flow matrices.
//!
//! Orientation is fixed throughout the crate: routing is links x OD pairs,
//! traffic is OD pairs x timestamps, link flows are links x timestamps.

use log::warn;
use nalgebra::DMatrix;

use crate::error::{Result, TomographyError};

/// Binary incidence of OD paths onto links: `A(i, j) = 1` iff OD pair `j`
/// is routed over link `i`.
#[derive(Debug, Clone, PartialEq)]
pub struct RoutingMatrix {
    entries: DMatrix<f64>,
}

impl RoutingMatrix {
    pub fn new(entries: DMatrix<f64>) -> Result<Self> {
        let mut bad = Vec::new();
        for i in 0..entries.nrows() {
            for j in 0..entries.ncols() {
                let v = entries[(i, j)];
                if v != 0.0 && v != 1.0 && bad.len() < 10 {
                    bad.push(format!("({},{})={}", i + 1, j + 1, v));
                }
            }
        }
        if !bad.is_empty() {
            return Err(TomographyError::Validation(format!(
                "routing entries must be 0 or 1; offending cells: {}",
                bad.join(", ")
            )));
        }
        let routing = RoutingMatrix { entries };
        let unrouted = routing.unrouted_pairs();
        if !unrouted.is_empty() {
            warn!(
                "{} OD pair(s) traverse no link (first: column {})",
                unrouted.len(),
                unrouted[0] + 1
            );
        }
        if routing.links() >= routing.od_pairs() {
            log::debug!(
                "routing has m={} >= n={}; the inverse problem is not underdetermined",
                routing.links(),
                routing.od_pairs()
            );
        }
        Ok(routing)
    }

    /// Number of links (`m`).
    pub fn links(&self) -> usize {
        self.entries.nrows()
    }

    /// Number of OD pairs (`n`).
    pub fn od_pairs(&self) -> usize {
        self.entries.ncols()
    }

    pub fn entries(&self) -> &DMatrix<f64> {
        &self.entries
    }

    /// Number of links traversed by each OD pair.
    pub fn path_lengths(&self) -> Vec<f64> {
        self.entries.column_iter().map(|c| c.sum()).collect()
    }

    /// OD pairs whose column is all zero.
    pub fn unrouted_pairs(&self) -> Vec<usize> {
        self.entries
            .column_iter()
            .enumerate()
            .filter(|(_, c)| c.iter().all(|&v| v == 0.0))
            .map(|(j, _)| j)
            .collect()
    }
}

/// OD flows, one row per OD pair and one column per timestamp, with an
/// optional observation mask (1 = observed).
#[derive(Debug, Clone, PartialEq)]
pub struct TrafficMatrix {
    entries: DMatrix<f64>,
    mask: Option<DMatrix<f64>>,
    first_timestamp: usize,
}

impl TrafficMatrix {
    pub fn new(entries: DMatrix<f64>) -> Result<Self> {
        validate_nonnegative("traffic", &entries, None)?;
        Ok(TrafficMatrix {
            entries,
            mask: None,
            first_timestamp: 0,
        })
    }

    /// Attaches an observation mask. Unobserved entries are not validated and
    /// are stored as 0.
    pub fn with_mask(entries: DMatrix<f64>, mask: DMatrix<f64>) -> Result<Self> {
        if mask.shape() != entries.shape() {
            return Err(TomographyError::shape(
                "observation mask",
                format!("{}x{}", entries.nrows(), entries.ncols()),
                format!("{}x{}", mask.nrows(), mask.ncols()),
            ));
        }
        if let Some(v) = mask.iter().find(|&&v| v != 0.0 && v != 1.0) {
            return Err(TomographyError::Validation(format!(
                "mask entries must be 0 or 1, found {v}"
            )));
        }
        validate_nonnegative("traffic", &entries, Some(&mask))?;
        let entries = entries.zip_map(&mask, |x, m| if m == 1.0 { x } else { 0.0 });
        Ok(TrafficMatrix {
            entries,
            mask: Some(mask),
            first_timestamp: 0,
        })
    }

    pub fn od_pairs(&self) -> usize {
        self.entries.nrows()
    }

    pub fn timestamps(&self) -> usize {
        self.entries.ncols()
    }

    pub fn entries(&self) -> &DMatrix<f64> {
        &self.entries
    }

    pub fn mask(&self) -> Option<&DMatrix<f64>> {
        self.mask.as_ref()
    }

    /// Index of the first column within the series this matrix was cut from.
    pub fn first_timestamp(&self) -> usize {
        self.first_timestamp
    }

    pub fn is_fully_observed(&self) -> bool {
        self.mask
            .as_ref()
            .is_none_or(|m| m.iter().all(|&v| v == 1.0))
    }

    fn columns(&self, start: usize, len: usize) -> TrafficMatrix {
        TrafficMatrix {
            entries: self.entries.columns(start, len).into_owned(),
            mask: self.mask.as_ref().map(|m| m.columns(start, len).into_owned()),
            first_timestamp: self.first_timestamp + start,
        }
    }
}

/// Aggregate flow per link and timestamp.
#[derive(Debug, Clone, PartialEq)]
pub struct LinkFlowMatrix {
    entries: DMatrix<f64>,
}

impl LinkFlowMatrix {
    pub fn new(entries: DMatrix<f64>) -> Result<Self> {
        validate_nonnegative("link flow", &entries, None)?;
        Ok(LinkFlowMatrix { entries })
    }

    pub fn links(&self) -> usize {
        self.entries.nrows()
    }

    pub fn timestamps(&self) -> usize {
        self.entries.ncols()
    }

    pub fn entries(&self) -> &DMatrix<f64> {
        &self.entries
    }
}

fn validate_nonnegative(
    kind: &str,
    m: &DMatrix<f64>,
    mask: Option<&DMatrix<f64>>,
) -> Result<()> {
    let mut bad = Vec::new();
    let mut count = 0usize;
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            if mask.is_some_and(|mk| mk[(i, j)] == 0.0) {
                continue;
            }
            let v = m[(i, j)];
            if !(v >= 0.0) || !v.is_finite() {
                count += 1;
                if bad.len() < 10 {
                    bad.push(format!("({},{})={}", i + 1, j + 1, v));
                }
            }
        }
    }
    if count > 0 {
        return Err(TomographyError::Validation(format!(
            "{count} {kind} entries are negative or non-finite; first offending cells: {}",
            bad.join(", ")
        )));
    }
    Ok(())
}

/// `Y = A X`.
pub fn compute_link_flows(
    routing: &RoutingMatrix,
    traffic: &TrafficMatrix,
) -> Result<LinkFlowMatrix> {
    if routing.od_pairs() != traffic.od_pairs() {
        return Err(TomographyError::shape(
            "link flow computation (OD pairs)",
            routing.od_pairs(),
            traffic.od_pairs(),
        ));
    }
    Ok(LinkFlowMatrix {
        entries: routing.entries() * traffic.entries(),
    })
}

/// Splits into a contiguous training prefix of `train_t` columns and the
/// remaining suffix.
pub fn split_train_test(
    traffic: &TrafficMatrix,
    train_t: usize,
) -> Result<(TrafficMatrix, TrafficMatrix)> {
    let t = traffic.timestamps();
    if train_t == 0 || train_t >= t {
        return Err(TomographyError::Config(format!(
            "training length {train_t} must lie strictly between 0 and T={t}"
        )));
    }
    Ok((traffic.columns(0, train_t), traffic.columns(train_t, t - train_t)))
}
