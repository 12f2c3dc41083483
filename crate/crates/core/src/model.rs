//! The learned factorization and its regularized objective.

use nalgebra::DMatrix;

use crate::error::{Result, TomographyError};
use crate::lags::LagSet;
use crate::linalg::frobenius_sq;
use crate::network::RoutingMatrix;
use crate::temporal::{temporal_penalty_value, PenaltyForm};

/// Spatial features `W` (n x k), latent flows `H` (k x T), AR weights
/// `Omega` (k x |lags|) and the cached compact routing `A W` (m x k).
#[derive(Debug, Clone, PartialEq)]
pub struct FactorModel {
    w: DMatrix<f64>,
    h: DMatrix<f64>,
    omega: DMatrix<f64>,
    lag_set: LagSet,
    compact_routing: DMatrix<f64>,
}

impl FactorModel {
    pub fn new(
        w: DMatrix<f64>,
        h: DMatrix<f64>,
        omega: DMatrix<f64>,
        lag_set: LagSet,
        routing: &RoutingMatrix,
    ) -> Result<Self> {
        let k = w.ncols();
        if h.nrows() != k {
            return Err(TomographyError::shape("latent flow rows", k, h.nrows()));
        }
        if omega.shape() != (k, lag_set.len()) {
            return Err(TomographyError::shape(
                "AR weight matrix",
                format!("{}x{}", k, lag_set.len()),
                format!("{}x{}", omega.nrows(), omega.ncols()),
            ));
        }
        if routing.od_pairs() != w.nrows() {
            return Err(TomographyError::shape(
                "spatial feature rows",
                routing.od_pairs(),
                w.nrows(),
            ));
        }
        for (name, m) in [("W", &w), ("H", &h), ("Omega", &omega)] {
            if m.iter().any(|&v| !(v >= 0.0)) {
                return Err(TomographyError::Validation(format!(
                    "{name} must be entry-wise nonnegative"
                )));
            }
        }
        let compact_routing = routing.entries() * &w;
        Ok(FactorModel {
            w,
            h,
            omega,
            lag_set,
            compact_routing,
        })
    }

    pub fn rank(&self) -> usize {
        self.w.ncols()
    }

    pub fn w(&self) -> &DMatrix<f64> {
        &self.w
    }

    pub fn h(&self) -> &DMatrix<f64> {
        &self.h
    }

    pub fn omega(&self) -> &DMatrix<f64> {
        &self.omega
    }

    pub fn lag_set(&self) -> &LagSet {
        &self.lag_set
    }

    /// `A W`, kept in sync with every change of `W`.
    pub fn compact_routing(&self) -> &DMatrix<f64> {
        &self.compact_routing
    }

    pub(crate) fn set_w(&mut self, w: DMatrix<f64>, routing: &RoutingMatrix) {
        self.compact_routing = routing.entries() * &w;
        self.w = w;
    }

    pub(crate) fn set_h(&mut self, h: DMatrix<f64>) {
        self.h = h;
    }

    pub(crate) fn set_omega(&mut self, omega: DMatrix<f64>) {
        self.omega = omega;
    }

    pub(crate) fn is_finite(&self) -> bool {
        [&self.w, &self.h, &self.omega]
            .iter()
            .all(|m| m.iter().all(|v| v.is_finite()))
    }

    /// `W H`.
    pub fn reconstruction(&self) -> DMatrix<f64> {
        &self.w * &self.h
    }
}

/// Penalty multipliers and the balance factors they were tuned from.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegularizationWeights {
    pub lambda_h: f64,
    pub lambda_a: f64,
    pub beta_h: f64,
    pub beta_a: f64,
}

impl RegularizationWeights {
    /// Betas lie in `[0, 1]`; zero switches the corresponding regularizer off.
    pub fn new(lambda_h: f64, lambda_a: f64, beta_h: f64, beta_a: f64) -> Result<Self> {
        let ok_lambda = |v: f64| v.is_finite() && v >= 0.0;
        let ok_beta = |v: f64| (0.0..=1.0).contains(&v);
        if !ok_lambda(lambda_h) || !ok_lambda(lambda_a) {
            return Err(TomographyError::Config(format!(
                "penalties must be finite and nonnegative (lambda_h={lambda_h}, lambda_a={lambda_a})"
            )));
        }
        if !ok_beta(beta_h) || !ok_beta(beta_a) {
            return Err(TomographyError::Config(format!(
                "balance factors must lie in [0,1] (beta_h={beta_h}, beta_a={beta_a})"
            )));
        }
        Ok(RegularizationWeights {
            lambda_h,
            lambda_a,
            beta_h,
            beta_a,
        })
    }

    pub fn unregularized() -> Self {
        RegularizationWeights {
            lambda_h: 0.0,
            lambda_a: 0.0,
            beta_h: 0.0,
            beta_a: 0.0,
        }
    }
}

/// `||C^T C - I||_F^2` for the compact routing matrix `C`.
pub fn ortho_penalty_value(compact_routing: &DMatrix<f64>) -> f64 {
    let k = compact_routing.ncols();
    let gram = compact_routing.transpose() * compact_routing;
    frobenius_sq(&(gram - DMatrix::identity(k, k)))
}

/// `||X - WH||_F^2 + lambda_h * sum_p T(w_p, h_p) + lambda_a * ||(AW)^T AW - I||_F^2`,
/// with the temporal term in residual form.
pub fn objective_value(
    x: &DMatrix<f64>,
    model: &FactorModel,
    weights: &RegularizationWeights,
    routing: &RoutingMatrix,
) -> Result<f64> {
    if x.nrows() != model.w().nrows() || x.ncols() != model.h().ncols() {
        return Err(TomographyError::shape(
            "objective data matrix",
            format!("{}x{}", model.w().nrows(), model.h().ncols()),
            format!("{}x{}", x.nrows(), x.ncols()),
        ));
    }
    if routing.od_pairs() != x.nrows() {
        return Err(TomographyError::shape("objective routing", x.nrows(), routing.od_pairs()));
    }
    let fit = frobenius_sq(&(x - model.reconstruction()));
    let temporal = if weights.lambda_h == 0.0 {
        0.0
    } else {
        temporal_penalty_value(model.h(), model.omega(), model.lag_set(), PenaltyForm::Residual)?
    };
    let ortho = if weights.lambda_a == 0.0 {
        0.0
    } else {
        ortho_penalty_value(&(routing.entries() * model.w()))
    };
    Ok(fit + weights.lambda_h * temporal + weights.lambda_a * ortho)
}
