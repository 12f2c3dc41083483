//! Per-timestamp OD-flow estimation from observed link flows.
//!
//! The latent flow is seeded by back-projection through the compact routing
//! matrix, refined by restarted projected fast gradient on
//! `||y - (AW) h||^2`, mapped to OD space by `W`, and finally polished with
//! Vardi's multiplicative EM iteration against the full routing matrix.

use log::warn;
use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::error::{Result, TomographyError};
use crate::fastgrad::{accelerated_projected_descent, DescentSettings, Threshold};
use crate::linalg::spectral_norm_sym;
use crate::model::FactorModel;
use crate::network::{LinkFlowMatrix, RoutingMatrix};

/// Floor on predicted link loads in the EM ratio.
pub const EM_LOAD_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EstimatorConfig {
    pub q_max_gd: usize,
    pub r_max_em: usize,
    pub delta_gd: f64,
    pub delta_em: f64,
}

impl Default for EstimatorConfig {
    fn default() -> Self {
        EstimatorConfig {
            q_max_gd: 200,
            r_max_em: 200,
            delta_gd: 1e-3,
            delta_em: 1e-9,
        }
    }
}

impl EstimatorConfig {
    pub fn validate(&self) -> Result<()> {
        if self.q_max_gd == 0 || self.r_max_em == 0 || !(self.delta_gd > 0.0) || !(self.delta_em > 0.0) {
            return Err(TomographyError::Config(format!(
                "estimator settings must be positive: {self:?}"
            )));
        }
        Ok(())
    }
}

/// Nonnegative latent flow explaining `y` through the compact routing matrix.
pub fn estimate_latent(
    y: &DVector<f64>,
    model: &FactorModel,
    config: &EstimatorConfig,
) -> Result<DVector<f64>> {
    let compact = model.compact_routing();
    if y.len() != compact.nrows() {
        return Err(TomographyError::shape("link-flow vector", compact.nrows(), y.len()));
    }
    let k = compact.ncols();
    if compact.iter().all(|&v| v == 0.0) {
        warn!("compact routing matrix is zero; latent estimate is zero");
        return Ok(DVector::zeros(k));
    }
    let seed = (compact.transpose() * y).map(|v| v.max(0.0));
    let gram = compact.transpose() * compact;
    let y_col = DMatrix::from_column_slice(y.len(), 1, y.as_slice());
    let cty = compact.transpose() * &y_col;
    // The gradient below is that of ||y - C h||^2, whose curvature is 2 C^T C.
    let lipschitz = 2.0 * spectral_norm_sym(&gram);
    let settings = DescentSettings {
        max_iter: config.q_max_gd,
        threshold: Threshold::Absolute(config.delta_gd * y.norm_squared()),
    };
    let seed = DMatrix::from_column_slice(k, 1, seed.as_slice());
    let (h, _) = accelerated_projected_descent(
        seed,
        lipschitz,
        settings,
        |h| (&gram * h - &cty) * 2.0,
        |h| (&y_col - compact * h).norm_squared(),
    );
    Ok(DVector::from_column_slice(h.as_slice()))
}

/// Vardi's EM iteration for Poisson link counts, started from `x0`.
///
/// OD pairs that traverse no link keep their starting value. A link with
/// zero predicted load but positive observed flow uses a floored load.
pub fn refine_em(
    x0: &DVector<f64>,
    y: &DVector<f64>,
    routing: &RoutingMatrix,
    config: &EstimatorConfig,
) -> Result<DVector<f64>> {
    let a = routing.entries();
    if x0.len() != a.ncols() || y.len() != a.nrows() {
        return Err(TomographyError::shape(
            "EM refinement",
            format!("x: {}, y: {}", a.ncols(), a.nrows()),
            format!("x: {}, y: {}", x0.len(), y.len()),
        ));
    }
    let path_lengths = routing.path_lengths();
    let threshold = config.delta_em * x0.norm_squared();
    let mut x = x0.map(|v| v.max(0.0));
    let mut floored = false;
    for _ in 0..config.r_max_em {
        let load = a * &x;
        let ratio = DVector::from_iterator(
            y.len(),
            load.iter().zip(y.iter()).map(|(&l, &yi)| {
                if l > 0.0 {
                    yi / l
                } else if yi > 0.0 {
                    floored = true;
                    yi / EM_LOAD_FLOOR
                } else {
                    0.0
                }
            }),
        );
        let back = a.transpose() * ratio;
        let next = DVector::from_fn(x.len(), |j, _| {
            if path_lengths[j] == 0.0 {
                x[j]
            } else {
                x[j] / path_lengths[j] * back[j]
            }
        });
        let change = (&next - &x).norm_squared();
        x = next;
        if change < threshold {
            break;
        }
    }
    if floored {
        warn!("observed flow on a link with zero predicted load; ratio used a floored load");
    }
    Ok(x)
}

/// Full estimate for one timestamp: latent refinement, `W h`, then EM.
pub fn estimate_od_flow(
    y: &DVector<f64>,
    model: &FactorModel,
    routing: &RoutingMatrix,
    config: &EstimatorConfig,
) -> Result<DVector<f64>> {
    if routing.od_pairs() != model.w().nrows() {
        return Err(TomographyError::shape(
            "model OD pairs vs routing",
            model.w().nrows(),
            routing.od_pairs(),
        ));
    }
    let h = estimate_latent(y, model, config)?;
    let x0 = model.w() * h;
    refine_em(&x0, y, routing, config)
}

/// Estimates every column of a link-flow window independently. Columns are
/// processed in parallel; each column's result does not depend on the others.
pub fn estimate_window(
    links: &LinkFlowMatrix,
    model: &FactorModel,
    routing: &RoutingMatrix,
    config: &EstimatorConfig,
) -> Result<DMatrix<f64>> {
    config.validate()?;
    if links.links() != routing.links() {
        return Err(TomographyError::shape(
            "link-flow rows vs routing links",
            routing.links(),
            links.links(),
        ));
    }
    let columns: Vec<DVector<f64>> = (0..links.timestamps())
        .into_par_iter()
        .map(|t| {
            let y = links.entries().column(t).into_owned();
            estimate_od_flow(&y, model, routing, config)
        })
        .collect::<Result<_>>()?;
    let n = routing.od_pairs();
    let mut out = DMatrix::zeros(n, columns.len());
    for (t, c) in columns.iter().enumerate() {
        out.set_column(t, c);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lags::LagSet;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn model_from(w: DMatrix<f64>, routing: &RoutingMatrix) -> FactorModel {
        let k = w.ncols();
        FactorModel::new(w, DMatrix::zeros(k, 1), DMatrix::zeros(k, 0), LagSet::empty(), routing)
            .unwrap()
    }

    /// 3 links, 4 OD pairs; W picks disjoint OD supports so A W has
    /// orthonormal columns.
    fn orthonormal_setup() -> (RoutingMatrix, FactorModel) {
        let a = RoutingMatrix::new(DMatrix::from_row_slice(
            3,
            4,
            &[1., 0., 0., 0., 0., 1., 1., 0., 0., 0., 0., 1.],
        ))
        .unwrap();
        // columns of A W: e1 and (e2 + e3)/sqrt(2)
        let s = 1.0 / 2f64.sqrt();
        let w = DMatrix::from_row_slice(4, 2, &[1., 0., 0., s / 2.0, 0., s / 2.0, 0., s]);
        let m = model_from(w, &a);
        (a, m)
    }

    #[test]
    fn orthonormal_back_projection_is_kept() {
        let (_, m) = orthonormal_setup();
        let c = m.compact_routing();
        assert!((c.transpose() * c - DMatrix::identity(2, 2)).amax() < 1e-12);
        let h_true = DVector::from_vec(vec![2.0, 3.0]);
        let y = c * &h_true;
        let h = estimate_latent(&y, &m, &EstimatorConfig::default()).unwrap();
        assert!((h - h_true).amax() < 1e-12);
    }

    #[test]
    fn noiseless_consistent_case_recovers_od_flow() {
        let (a, m) = orthonormal_setup();
        let h_true = DVector::from_vec(vec![2.0, 3.0]);
        let x_true = m.w() * &h_true;
        let y = a.entries() * &x_true;
        let x = estimate_od_flow(&y, &m, &a, &EstimatorConfig::default()).unwrap();
        assert!((x - x_true).amax() < 1e-8);
    }

    #[test]
    fn zero_observation_gives_zero() {
        let (a, m) = orthonormal_setup();
        let y = DVector::zeros(3);
        assert!(estimate_latent(&y, &m, &EstimatorConfig::default()).unwrap().iter().all(|&v| v == 0.0));
        assert!(estimate_od_flow(&y, &m, &a, &EstimatorConfig::default()).unwrap().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn zero_compact_routing_returns_zero() {
        let a = RoutingMatrix::new(DMatrix::identity(2, 2)).unwrap();
        let m = model_from(DMatrix::zeros(2, 1), &a);
        let h = estimate_latent(&DVector::from_vec(vec![1.0, 2.0]), &m, &EstimatorConfig::default()).unwrap();
        assert_eq!(h, DVector::zeros(1));
    }

    /// Nonnegative least squares by enumerating every active set.
    fn nnls_by_enumeration(c: &DMatrix<f64>, y: &DVector<f64>) -> f64 {
        let k = c.ncols();
        let mut best = y.norm_squared();
        for mask in 1u32..(1 << k) {
            let cols: Vec<usize> = (0..k).filter(|j| mask & (1 << j) != 0).collect();
            let sub = DMatrix::from_fn(c.nrows(), cols.len(), |i, j| c[(i, cols[j])]);
            let Some(sol) = (sub.transpose() * &sub).cholesky().map(|ch| ch.solve(&(sub.transpose() * y)))
            else {
                continue;
            };
            if sol.iter().all(|&v| v >= 0.0) {
                best = best.min((y - &sub * sol).norm_squared());
            }
        }
        best
    }

    #[test]
    fn latent_refinement_reaches_nnls_optimum() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let cfg = EstimatorConfig {
            q_max_gd: 5000,
            delta_gd: 1e-300,
            ..Default::default()
        };
        for _ in 0..10 {
            let c = DMatrix::from_fn(6, 3, |_, _| rng.random_range(0.0..1.0));
            // lift into a model whose compact routing is exactly c
            let a = RoutingMatrix::new(DMatrix::identity(6, 6)).unwrap();
            let m = model_from(c.clone(), &a);
            let h_true = DVector::from_fn(3, |_, _| rng.random_range(0.0..2.0));
            let y = &c * h_true;
            let h = estimate_latent(&y, &m, &cfg).unwrap();
            let residual = (&y - &c * &h).norm_squared();
            let oracle = nnls_by_enumeration(&c, &y);
            assert!((residual - oracle).abs() < 1e-6, "{residual} vs {oracle}");
            let seed_res = (&y - &c * (c.transpose() * &y)).norm_squared();
            assert!(residual <= seed_res);
        }
    }

    #[test]
    fn em_fixed_point_on_consistent_data() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let a = RoutingMatrix::new(DMatrix::from_fn(5, 8, |i, j| {
            if (i + j) % 3 == 0 || j % 5 == i { 1.0 } else { 0.0 }
        }))
        .unwrap();
        let x0 = DVector::from_fn(8, |_, _| rng.random_range(0.1..3.0));
        let y = a.entries() * &x0;
        let cfg = EstimatorConfig { r_max_em: 1, ..Default::default() };
        let x1 = refine_em(&x0, &y, &a, &cfg).unwrap();
        assert!((&x1 - &x0).norm() <= 1e-12 * x0.norm());
    }

    #[test]
    fn em_zero_observation_drives_to_zero() {
        let a = RoutingMatrix::new(DMatrix::from_row_slice(2, 2, &[1., 1., 0., 1.])).unwrap();
        let x = refine_em(&DVector::from_vec(vec![1.0, 2.0]), &DVector::zeros(2), &a, &EstimatorConfig::default())
            .unwrap();
        assert!(x.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn em_matches_poisson_ml_grid_search() {
        // Links: {x1 + x2, x2}. Poisson log-likelihood
        //   sum_i y_i log((Ax)_i) - (Ax)_i
        let a = RoutingMatrix::new(DMatrix::from_row_slice(2, 2, &[1., 1., 0., 1.])).unwrap();
        let y = DVector::from_vec(vec![5.0, 2.0]);
        let loglik = |x1: f64, x2: f64| {
            let l1 = x1 + x2;
            let l2 = x2;
            y[0] * l1.ln() - l1 + y[1] * l2.ln() - l2
        };
        let mut best = (0.0, 0.0, f64::NEG_INFINITY);
        let step = 1e-3;
        for i in 1..6000 {
            for j in 1..6000 {
                let (x1, x2) = (i as f64 * step, j as f64 * step);
                let v = loglik(x1, x2);
                if v > best.2 {
                    best = (x1, x2, v);
                }
            }
        }
        let cfg = EstimatorConfig { r_max_em: 100_000, delta_em: 1e-30, ..Default::default() };
        let x = refine_em(&DVector::from_vec(vec![1.0, 1.0]), &y, &a, &cfg).unwrap();
        assert!((x[0] - best.0).abs() < 1e-3 && (x[1] - best.1).abs() < 1e-3, "{x:?} vs {best:?}");
        // The grid resolution is 1e-3; the EM limit itself satisfies the
        // likelihood equations, which the grid optimum brackets.
        assert!((x[0] - 3.0).abs() < 1e-4 && (x[1] - 2.0).abs() < 1e-4);
    }

    #[test]
    fn em_is_scale_equivariant() {
        let a = RoutingMatrix::new(DMatrix::from_row_slice(3, 4, &[1., 1., 0., 0., 0., 1., 1., 0., 1., 0., 0., 1.]))
            .unwrap();
        let x0 = DVector::from_vec(vec![1.0, 2.0, 0.5, 3.0]);
        let y = DVector::from_vec(vec![4.0, 1.0, 2.5]);
        let cfg = EstimatorConfig::default();
        let base = refine_em(&x0, &y, &a, &cfg).unwrap();
        let scaled = refine_em(&(&x0 * 7.0), &(&y * 7.0), &a, &cfg).unwrap();
        assert!((scaled - base * 7.0).norm() <= 1e-10 * 7.0 * x0.norm());
    }

    #[test]
    fn unrouted_pairs_are_held_fixed() {
        let a = RoutingMatrix::new(DMatrix::from_row_slice(1, 2, &[1., 0.])).unwrap();
        let x = refine_em(&DVector::from_vec(vec![1.0, 4.0]), &DVector::from_vec(vec![3.0]), &a, &EstimatorConfig::default())
            .unwrap();
        assert_eq!(x[1], 4.0);
        assert!((x[0] - 3.0).abs() < 1e-12);
    }
}
