//! Temporal regularizer induced by the per-row autoregressive models.
//!
//! For a latent row `h` with AR weights `w` on lags `L`, the residual form
//!
//! ```text
//!   T(w, h) = 1/2 * sum_{t > maxlag} ( h(t) - sum_l w_l h(t - l) )^2
//! ```
//!
//! is rewritten as a quadratic form over a signed graph on timestamps:
//!
//! ```text
//!   T(w, h) = 1/2 * sum_{t1,t2} S(t1,t2) (h(t1) - h(t2))^2 + 1/2 * h D h^T
//!           = 1/2 * h (Lap + D) h^T
//! ```
//!
//! Expanding with the extended weights `w_0 = -1` over `L ∪ {0}`:
//!
//! ```text
//!   S(t, t+d) = -1/2 * sum_{l in delta(d)} w_l w_{l-d} [maxlag < t+l <= T]
//!   D(t, t)   = (sum_l w_l) * (sum_l w_l [maxlag < t+l <= T])
//! ```
//!
//! where `delta(d) = { l in L∪{0} : l-d in L∪{0} }`. The `1/2` accounts for
//! every unordered pair being visited twice by the ordered double sum, and the
//! indicator restricts each pair to AR equations that actually exist. Only
//! displacements `d > 0` are stored; `d = 0` terms cancel in the Laplacian.

use std::str::FromStr;

use nalgebra::DMatrix;

use crate::error::{Result, TomographyError};
use crate::lags::LagSet;
use crate::linalg::power_iteration_norm;

/// Dense materialization is refused above this horizon.
pub const DENSE_LIMIT: usize = 10_000;

const NORM_ITERATIONS: usize = 200;

/// Signed AR graph for one latent row, stored as symmetric bands.
#[derive(Debug, Clone, PartialEq)]
pub struct TemporalGraph {
    horizon: usize,
    displacements: Vec<usize>,
    /// `bands[b][i] = S(i, i + displacements[b])`, length `horizon - d`.
    bands: Vec<Vec<f64>>,
    /// `D(t, t)`.
    diag: Vec<f64>,
    /// `Lap(t, t) = sum_{t3 != t} S(t, t3)`.
    degree: Vec<f64>,
}

impl TemporalGraph {
    pub fn build(weights: &[f64], lag_set: &LagSet, horizon: usize) -> Result<Self> {
        if weights.len() != lag_set.len() {
            return Err(TomographyError::shape(
                "temporal graph weights",
                lag_set.len(),
                weights.len(),
            ));
        }
        if lag_set.is_empty() {
            return Ok(TemporalGraph {
                horizon,
                displacements: Vec::new(),
                bands: Vec::new(),
                diag: vec![0.0; horizon],
                degree: vec![0.0; horizon],
            });
        }
        lag_set.check_horizon(horizon)?;
        let max_lag = lag_set.max_lag();

        // Extended lags L ∪ {0} with the lag-0 weight fixed to -1.
        let mut ext: Vec<(usize, f64)> = vec![(0, -1.0)];
        ext.extend(lag_set.lags().iter().copied().zip(weights.iter().copied()));
        let weight_of = |lag: usize| ext.iter().find(|(l, _)| *l == lag).map(|(_, w)| *w);

        // 0-based timestamp s corresponds to an AR equation iff max_lag <= s < horizon.
        let equation_exists = |s: usize| s >= max_lag && s < horizon;

        let mut displacements: Vec<usize> = ext
            .iter()
            .flat_map(|&(a, _)| ext.iter().filter(move |&&(b, _)| b < a).map(move |&(b, _)| a - b))
            .collect();
        displacements.sort_unstable();
        displacements.dedup();

        let mut bands = Vec::with_capacity(displacements.len());
        for &d in &displacements {
            let len = horizon.saturating_sub(d);
            let mut band = vec![0.0; len];
            for &(l, wl) in ext.iter().filter(|(l, _)| *l >= d) {
                let Some(wld) = weight_of(l - d) else { continue };
                let coeff = -0.5 * wl * wld;
                for (i, slot) in band.iter_mut().enumerate() {
                    if equation_exists(i + l) {
                        *slot += coeff;
                    }
                }
            }
            bands.push(band);
        }

        let total: f64 = ext.iter().map(|(_, w)| w).sum();
        let diag = (0..horizon)
            .map(|s| {
                let reach: f64 = ext
                    .iter()
                    .filter(|(l, _)| equation_exists(s + l))
                    .map(|(_, w)| w)
                    .sum();
                total * reach
            })
            .collect();

        let mut degree = vec![0.0; horizon];
        for (band, &d) in bands.iter().zip(&displacements) {
            for (i, &s) in band.iter().enumerate() {
                degree[i] += s;
                degree[i + d] += s;
            }
        }

        Ok(TemporalGraph {
            horizon,
            displacements,
            bands,
            diag,
            degree,
        })
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    /// Positive displacements carrying nonzero structure.
    pub fn displacements(&self) -> &[usize] {
        &self.displacements
    }

    /// Graph weight `S(t1, t2)`; the diagonal is zero.
    pub fn similarity(&self, t1: usize, t2: usize) -> f64 {
        if t1 == t2 {
            return 0.0;
        }
        let (lo, hi) = if t1 < t2 { (t1, t2) } else { (t2, t1) };
        self.displacements
            .binary_search(&(hi - lo))
            .map(|b| self.bands[b][lo])
            .unwrap_or(0.0)
    }

    pub fn laplacian(&self, t1: usize, t2: usize) -> f64 {
        if t1 == t2 {
            self.degree[t1]
        } else {
            -self.similarity(t1, t2)
        }
    }

    pub fn diagonal_correction(&self) -> &[f64] {
        &self.diag
    }

    /// `out = (2 Lap + D) h`, the gradient of the penalty. The graph sum runs
    /// over ordered pairs, so the penalty is `h Lap h^T + 1/2 h D h^T`.
    pub fn apply_regularizer(&self, h: &[f64], out: &mut [f64]) {
        for (o, (&dg, &hv)) in out.iter_mut().zip(self.diag.iter().zip(h)) {
            *o = dg * hv;
        }
        self.add_laplacian(h, out, 2.0);
    }

    fn add_laplacian(&self, h: &[f64], out: &mut [f64], scale: f64) {
        for (band, &d) in self.bands.iter().zip(&self.displacements) {
            for (i, &s) in band.iter().enumerate() {
                let diff = scale * s * (h[i] - h[i + d]);
                out[i] += diff;
                out[i + d] -= diff;
            }
        }
    }

    /// Penalty evaluated through the graph form.
    pub fn laplacian_form_value(&self, h: &[f64]) -> f64 {
        // Each unordered pair appears twice in the ordered double sum, cancelling the 1/2.
        let graph: f64 = self
            .bands
            .iter()
            .zip(&self.displacements)
            .map(|(band, &d)| {
                band.iter()
                    .enumerate()
                    .map(|(i, &s)| s * (h[i] - h[i + d]).powi(2))
                    .sum::<f64>()
            })
            .sum();
        let diag: f64 = self.diag.iter().zip(h).map(|(d, v)| d * v * v).sum();
        graph + 0.5 * diag
    }

    /// Spectral norm of the Laplacian, by power iteration over the bands.
    pub fn laplacian_norm(&self) -> f64 {
        if self.bands.is_empty() {
            return 0.0;
        }
        power_iteration_norm(self.horizon, NORM_ITERATIONS, |x, y| {
            y.fill(0.0);
            self.add_laplacian(x, y, 1.0);
        })
    }

    /// Spectral norm of the diagonal correction.
    pub fn diagonal_norm(&self) -> f64 {
        self.diag.iter().fold(0.0_f64, |a, v| a.max(v.abs()))
    }

    fn check_dense(&self) -> Result<()> {
        if self.horizon > DENSE_LIMIT {
            return Err(TomographyError::Config(format!(
                "refusing dense {0}x{0} temporal matrix",
                self.horizon
            )));
        }
        Ok(())
    }

    pub fn dense_similarity(&self) -> Result<DMatrix<f64>> {
        self.check_dense()?;
        Ok(DMatrix::from_fn(self.horizon, self.horizon, |a, b| self.similarity(a, b)))
    }

    pub fn dense_laplacian(&self) -> Result<DMatrix<f64>> {
        self.check_dense()?;
        Ok(DMatrix::from_fn(self.horizon, self.horizon, |a, b| self.laplacian(a, b)))
    }

    pub fn dense_diagonal(&self) -> Result<DMatrix<f64>> {
        self.check_dense()?;
        Ok(DMatrix::from_fn(self.horizon, self.horizon, |a, b| {
            if a == b {
                self.diag[a]
            } else {
                0.0
            }
        }))
    }
}

/// Which algebraic route evaluates the temporal penalty.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PenaltyForm {
    Laplacian,
    Residual,
}

impl FromStr for PenaltyForm {
    type Err = TomographyError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "laplacian" => Ok(PenaltyForm::Laplacian),
            "residual" => Ok(PenaltyForm::Residual),
            other => Err(TomographyError::Usage(format!(
                "unknown penalty form '{other}' (expected laplacian or residual)"
            ))),
        }
    }
}

/// One temporal graph per latent row of `h`, using the matching row of `omega`.
pub fn build_temporal_graphs(
    h: &DMatrix<f64>,
    omega: &DMatrix<f64>,
    lag_set: &LagSet,
) -> Result<Vec<TemporalGraph>> {
    (0..h.nrows())
        .map(|p| {
            let w: Vec<f64> = omega.row(p).iter().copied().collect();
            TemporalGraph::build(&w, lag_set, h.ncols())
        })
        .collect()
}

/// AR residual `h(t) - sum_l w_l h(t-l)` of one row for every `t` past the largest lag.
pub(crate) fn ar_residuals(h: &[f64], weights: &[f64], lag_set: &LagSet) -> Vec<f64> {
    let max_lag = lag_set.max_lag();
    (max_lag..h.len())
        .map(|t| {
            h[t] - lag_set
                .lags()
                .iter()
                .zip(weights)
                .map(|(&l, &w)| w * h[t - l])
                .sum::<f64>()
        })
        .collect()
}

/// Sum over rows of the temporal penalty. The empty lag set contributes 0.
pub fn temporal_penalty_value(
    h: &DMatrix<f64>,
    omega: &DMatrix<f64>,
    lag_set: &LagSet,
    form: PenaltyForm,
) -> Result<f64> {
    if omega.nrows() != h.nrows() || omega.ncols() != lag_set.len() {
        return Err(TomographyError::shape(
            "temporal penalty weights",
            format!("{}x{}", h.nrows(), lag_set.len()),
            format!("{}x{}", omega.nrows(), omega.ncols()),
        ));
    }
    if lag_set.is_empty() {
        return Ok(0.0);
    }
    lag_set.check_horizon(h.ncols())?;
    let mut total = 0.0;
    for p in 0..h.nrows() {
        let row: Vec<f64> = h.row(p).iter().copied().collect();
        let w: Vec<f64> = omega.row(p).iter().copied().collect();
        total += match form {
            PenaltyForm::Residual => {
                0.5 * ar_residuals(&row, &w, lag_set).iter().map(|r| r * r).sum::<f64>()
            }
            PenaltyForm::Laplacian => {
                TemporalGraph::build(&w, lag_set, h.ncols())?.laplacian_form_value(&row)
            }
        };
    }
    Ok(total)
}
