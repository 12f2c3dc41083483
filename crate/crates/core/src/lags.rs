//! Autoregressive lag sets and the lagged design matrix of a latent row.

use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;

use crate::error::{Result, TomographyError};

/// Strictly increasing set of positive lags shared by all latent rows.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct LagSet {
    lags: Vec<usize>,
}

impl LagSet {
    pub fn new(mut lags: Vec<usize>) -> Result<Self> {
        if lags.contains(&0) {
            return Err(TomographyError::Config("lags must be >= 1".into()));
        }
        lags.sort_unstable();
        if lags.windows(2).any(|w| w[0] == w[1]) {
            return Err(TomographyError::Config(format!(
                "lags must be distinct: {lags:?}"
            )));
        }
        Ok(LagSet { lags })
    }

    pub fn empty() -> Self {
        LagSet { lags: Vec::new() }
    }

    /// Five-minute Abilene/Internet2 sampling: short-term, hourly, 8h and diurnal lags.
    pub fn internet2() -> Self {
        LagSet {
            lags: vec![1, 2, 3, 12, 24, 96, 102, 108, 288],
        }
    }

    /// Fifteen-minute GEANT sampling.
    pub fn geant() -> Self {
        LagSet {
            lags: vec![1, 4, 8, 32, 34, 36, 96],
        }
    }

    pub fn lags(&self) -> &[usize] {
        &self.lags
    }

    pub fn len(&self) -> usize {
        self.lags.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lags.is_empty()
    }

    /// Largest lag, or 0 for the empty set.
    pub fn max_lag(&self) -> usize {
        self.lags.last().copied().unwrap_or(0)
    }

    pub(crate) fn check_horizon(&self, t: usize) -> Result<()> {
        if self.max_lag() >= t {
            return Err(TomographyError::Config(format!(
                "largest lag {} must be smaller than the number of timestamps {t}",
                self.max_lag()
            )));
        }
        Ok(())
    }
}

impl FromStr for LagSet {
    type Err = TomographyError;

    /// Parses a comma-separated list such as `"1,2,24"`; an empty string is
    /// the empty lag set.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s.is_empty() {
            return Ok(LagSet::empty());
        }
        let lags = s
            .split(',')
            .map(|tok| {
                tok.trim()
                    .parse::<usize>()
                    .map_err(|_| TomographyError::Config(format!("invalid lag '{}'", tok.trim())))
            })
            .collect::<Result<Vec<_>>>()?;
        LagSet::new(lags)
    }
}

impl fmt::Display for LagSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.lags.iter().map(|l| l.to_string()).collect();
        f.write_str(&parts.join(","))
    }
}

/// Lagged copies of one latent time series.
///
/// Row `q` holds `h(t - lag_q)` at column `t` for every `t` past the largest
/// lag; the first `max_lag` columns are zero.
pub fn lag_design_row(h: &[f64], lag_set: &LagSet) -> Result<DMatrix<f64>> {
    let t = h.len();
    lag_set.check_horizon(t)?;
    let max_lag = lag_set.max_lag();
    let mut out = DMatrix::zeros(lag_set.len(), t);
    for (q, &lag) in lag_set.lags().iter().enumerate() {
        for col in max_lag..t {
            out[(q, col)] = h[col - lag];
        }
    }
    Ok(out)
}

/// Design matrix for row `p` of `h`.
pub fn build_lag_design_matrix(h: &DMatrix<f64>, p: usize, lag_set: &LagSet) -> Result<DMatrix<f64>> {
    if p >= h.nrows() {
        return Err(TomographyError::shape("lag design row index", format!("< {}", h.nrows()), p));
    }
    let row: Vec<f64> = h.row(p).iter().copied().collect();
    lag_design_row(&row, lag_set)
}
