//! Deterministic starting point for training.

use nalgebra::DMatrix;

use crate::error::{Result, TomographyError};
use crate::lags::{lag_design_row, LagSet};
use crate::linalg::{pinv, sorted_svd};

/// SVD-based nonnegative seeding of `(W, H)`.
///
/// The leading singular pair of a nonnegative matrix can be taken
/// nonnegative, so it is used in absolute value. Every further pair is split
/// into its positive and negative parts and the part with the larger product
/// norm is kept. A final scalar rescaling makes `W0 H0` the best multiple of
/// itself, so the seed never fits worse than the zero factorization.
pub fn init_factors_svd(x: &DMatrix<f64>, k: usize) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let (n, t) = x.shape();
    if k == 0 || k > n.min(t) {
        return Err(TomographyError::Config(format!(
            "rank {k} must lie in 1..={}",
            n.min(t)
        )));
    }
    if x.iter().any(|&v| !(v >= 0.0) || !v.is_finite()) {
        return Err(TomographyError::Validation(
            "SVD seeding requires a finite nonnegative matrix".into(),
        ));
    }
    let mut w = DMatrix::zeros(n, k);
    let mut h = DMatrix::zeros(k, t);
    if x.iter().all(|&v| v == 0.0) {
        return Ok((w, h));
    }

    let (u, sigma, v) = sorted_svd(x);
    for c in 0..k {
        let s = sigma[c];
        if s <= 0.0 {
            break;
        }
        let uc = u.column(c);
        let vc = v.column(c);
        if c == 0 {
            let root = s.sqrt();
            w.set_column(0, &(uc.abs() * root));
            h.set_row(0, &(vc.abs() * root).transpose());
            continue;
        }
        let up = uc.map(|e| e.max(0.0));
        let un = uc.map(|e| (-e).max(0.0));
        let vp = vc.map(|e| e.max(0.0));
        let vn = vc.map(|e| (-e).max(0.0));
        let (nup, nun, nvp, nvn) = (up.norm(), un.norm(), vp.norm(), vn.norm());
        let (a, b, na, nb) = if nup * nvp >= nun * nvn {
            (up, vp, nup, nvp)
        } else {
            (un, vn, nun, nvn)
        };
        if na == 0.0 || nb == 0.0 {
            continue;
        }
        let scale = (s * na * nb).sqrt();
        w.set_column(c, &(a * (scale / na)));
        h.set_row(c, &(b * (scale / nb)).transpose());
    }

    let approx = &w * &h;
    let denom = approx.norm_squared();
    if denom > 0.0 {
        let s = x.dot(&approx) / denom;
        let root = s.max(0.0).sqrt();
        w *= root;
        h *= root;
    }
    Ok((w, h))
}

/// Least-squares AR fit of every latent row against its own lagged copies,
/// projected onto the nonnegative orthant.
pub fn init_lag_weights(h: &DMatrix<f64>, lag_set: &LagSet) -> Result<DMatrix<f64>> {
    let k = h.nrows();
    let mut omega = DMatrix::zeros(k, lag_set.len());
    if lag_set.is_empty() {
        return Ok(omega);
    }
    lag_set.check_horizon(h.ncols())?;
    for p in 0..k {
        let row: Vec<f64> = h.row(p).iter().copied().collect();
        let design = lag_design_row(&row, lag_set)?;
        let fit = h.row(p) * pinv(&design);
        for (q, &v) in fit.iter().enumerate() {
            omega[(p, q)] = v.max(0.0);
        }
    }
    Ok(omega)
}
