//! Block-coordinate training of `(W, H, Omega)`.
//!
//! Each outer iteration updates `W`, then `H`, then every row of `Omega` with
//! the restarted accelerated projected gradient of [`crate::fastgrad`]. The
//! data-fit error `||X - WH||_F^2` is the monitored quantity for the `W` and
//! `H` blocks, so the recorded trace is nonincreasing.

use std::str::FromStr;
use std::time::{Duration, Instant};

use log::{debug, info, warn};
use nalgebra::DMatrix;

use crate::error::{Result, TomographyError};
use crate::fastgrad::{accelerated_projected_descent, DescentOutcome, DescentSettings, Threshold};
use crate::init::{init_factors_svd, init_lag_weights};
use crate::lags::{lag_design_row, LagSet};
use crate::linalg::{frobenius_sq, spectral_norm_sym};
use crate::model::{ortho_penalty_value, FactorModel, RegularizationWeights};
use crate::network::{RoutingMatrix, TrafficMatrix};
use crate::temporal::{build_temporal_graphs, TemporalGraph};

/// How unobserved training entries are handled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum MissingMode {
    /// Unobserved entries are taken as stored (zero).
    #[default]
    None,
    /// Complete the matrix with a masked NMF before training.
    WeightedFill,
    /// Re-impute unobserved entries from the current `WH` at every outer iteration.
    EmMask,
}

impl FromStr for MissingMode {
    type Err = TomographyError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(MissingMode::None),
            "weighted_fill" => Ok(MissingMode::WeightedFill),
            "em_mask" => Ok(MissingMode::EmMask),
            other => Err(TomographyError::Config(format!(
                "unknown missing mode '{other}' (expected none, weighted_fill or em_mask)"
            ))),
        }
    }
}

impl std::fmt::Display for MissingMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            MissingMode::None => "none",
            MissingMode::WeightedFill => "weighted_fill",
            MissingMode::EmMask => "em_mask",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Block {
    W,
    H,
    Omega,
}

/// Inner-loop limits for one block.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlockSettings {
    pub max_iter: usize,
    pub delta: f64,
}

/// Settings of the masked factorization used by [`fill_missing_weighted`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CompletionSettings {
    pub max_outer: usize,
    pub block: BlockSettings,
    pub delta: f64,
}

impl Default for CompletionSettings {
    fn default() -> Self {
        CompletionSettings {
            max_outer: 500,
            block: BlockSettings {
                max_iter: 10,
                delta: 1e-4,
            },
            delta: 1e-12,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub rank: usize,
    pub lag_set: LagSet,
    pub beta_h: f64,
    pub beta_a: f64,
    pub q_max: usize,
    pub w_block: BlockSettings,
    pub h_block: BlockSettings,
    pub omega_block: BlockSettings,
    /// Outer early-stop threshold, relative to the initial error.
    pub delta: f64,
    pub missing_mode: MissingMode,
    /// Multiplies every block Lipschitz constant (values > 1 shorten steps).
    pub step_safety: f64,
    pub completion: CompletionSettings,
}

impl TrainConfig {
    pub fn new(rank: usize, lag_set: LagSet) -> Self {
        TrainConfig {
            rank,
            lag_set,
            beta_h: 0.2,
            beta_a: 0.2,
            q_max: 50,
            w_block: BlockSettings {
                max_iter: 10,
                delta: 1e-3,
            },
            h_block: BlockSettings {
                max_iter: 10,
                delta: 1e-3,
            },
            omega_block: BlockSettings {
                max_iter: 10,
                delta: 1e-5,
            },
            delta: 1e-9,
            missing_mode: MissingMode::None,
            step_safety: 1.0,
            completion: CompletionSettings::default(),
        }
    }

    /// Internet2 experiment settings: rank 20, both balance factors 0.2.
    pub fn internet2() -> Self {
        TrainConfig::new(20, LagSet::internet2())
    }

    /// GEANT experiment settings: rank 20, both balance factors 0.1.
    pub fn geant() -> Self {
        TrainConfig {
            beta_h: 0.1,
            beta_a: 0.1,
            ..TrainConfig::new(20, LagSet::geant())
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(TomographyError::Config(msg));
        if self.rank == 0 {
            return bad("rank must be at least 1".into());
        }
        if self.q_max == 0 {
            return bad("q_max must be at least 1".into());
        }
        for (name, b) in [("beta_h", self.beta_h), ("beta_a", self.beta_a)] {
            if !(0.0..=1.0).contains(&b) {
                return bad(format!("{name}={b} must lie in [0,1]"));
            }
        }
        for (name, d) in [
            ("delta", self.delta),
            ("delta_w", self.w_block.delta),
            ("delta_h", self.h_block.delta),
            ("delta_omega", self.omega_block.delta),
        ] {
            if !(d > 0.0) {
                return bad(format!("{name}={d} must be positive"));
            }
        }
        if !(self.step_safety > 0.0) || !self.step_safety.is_finite() {
            return bad(format!("step_safety={} must be positive", self.step_safety));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainReport {
    /// `e(0), e(1), ...` where `e(q) = ||X - WH||_F^2` after outer iteration `q`.
    pub objective_trace: Vec<f64>,
    /// Milliseconds since the start of training at which each trace value was recorded.
    pub elapsed_ms: Vec<f64>,
    /// Inner iterations spent on `[W, H, Omega]` per outer iteration.
    pub block_iterations: Vec<[usize; 3]>,
    pub weights: RegularizationWeights,
    pub wall_time: Duration,
}

impl TrainReport {
    pub fn outer_iterations(&self) -> usize {
        self.block_iterations.len()
    }
}

const DEGENERATE_RATIO: f64 = 1e-15;

fn balance(beta: f64, numerator: f64, denominator: f64, name: &str) -> f64 {
    if beta == 0.0 || numerator == 0.0 {
        return 0.0;
    }
    if !(denominator >= DEGENERATE_RATIO * numerator) {
        warn!("{name}: initial penalty is negligible against the data fit; setting it to 0");
        return 0.0;
    }
    beta * numerator / denominator
}

/// Penalty multipliers balancing each regularizer against the data fit at
/// the initial iterate.
#[allow(clippy::too_many_arguments)]
pub fn tune_penalties(
    x: &DMatrix<f64>,
    w0: &DMatrix<f64>,
    h0: &DMatrix<f64>,
    omega0: &DMatrix<f64>,
    lag_set: &LagSet,
    beta_h: f64,
    beta_a: f64,
    routing: &RoutingMatrix,
) -> Result<RegularizationWeights> {
    let fit = frobenius_sq(&(x - w0 * h0));
    let lambda_h = if lag_set.is_empty() {
        0.0
    } else {
        let mut ar = 0.0;
        for p in 0..h0.nrows() {
            let row: Vec<f64> = h0.row(p).iter().copied().collect();
            let design = lag_design_row(&row, lag_set)?;
            ar += (h0.row(p) - omega0.row(p) * design).norm_squared();
        }
        balance(beta_h, fit, ar, "lambda_h")
    };
    let ortho = ortho_penalty_value(&(routing.entries() * w0));
    let lambda_a = balance(beta_a, fit, ortho, "lambda_a");
    RegularizationWeights::new(lambda_h, lambda_a, beta_h, beta_a)
}

fn grad_w(
    w: &DMatrix<f64>,
    hht: &DMatrix<f64>,
    xht: &DMatrix<f64>,
    routing: &RoutingMatrix,
    lambda_a: f64,
) -> DMatrix<f64> {
    let mut g = (w * hht - xht) * 2.0;
    if lambda_a != 0.0 {
        let a = routing.entries();
        let compact = a * w;
        let k = w.ncols();
        let gram = compact.transpose() * &compact - DMatrix::identity(k, k);
        g += (a.transpose() * compact) * gram * (4.0 * lambda_a);
    }
    g
}

fn grad_h(
    h: &DMatrix<f64>,
    wtw: &DMatrix<f64>,
    wtx: &DMatrix<f64>,
    graphs: &[TemporalGraph],
    lambda_h: f64,
) -> DMatrix<f64> {
    let mut g = (wtw * h - wtx) * 2.0;
    if lambda_h != 0.0 {
        let t = h.ncols();
        let mut row = vec![0.0; t];
        let mut out = vec![0.0; t];
        for (p, graph) in graphs.iter().enumerate() {
            for (c, v) in row.iter_mut().enumerate() {
                *v = h[(p, c)];
            }
            graph.apply_regularizer(&row, &mut out);
            for (c, v) in out.iter().enumerate() {
                g[(p, c)] += lambda_h * v;
            }
        }
    }
    g
}

/// Analytic gradient of the regularized objective with respect to one block,
/// the others held fixed.
pub fn block_gradient(
    block: Block,
    x: &DMatrix<f64>,
    model: &FactorModel,
    weights: &RegularizationWeights,
    routing: &RoutingMatrix,
) -> Result<DMatrix<f64>> {
    let (w, h) = (model.w(), model.h());
    Ok(match block {
        Block::W => {
            let hht = h * h.transpose();
            let xht = x * h.transpose();
            grad_w(w, &hht, &xht, routing, weights.lambda_a)
        }
        Block::H => {
            let graphs = if weights.lambda_h != 0.0 && !model.lag_set().is_empty() {
                build_temporal_graphs(h, model.omega(), model.lag_set())?
            } else {
                Vec::new()
            };
            let lambda_h = if graphs.is_empty() { 0.0 } else { weights.lambda_h };
            grad_h(h, &(w.transpose() * w), &(w.transpose() * x), &graphs, lambda_h)
        }
        Block::Omega => {
            let mut g = DMatrix::zeros(model.omega().nrows(), model.omega().ncols());
            if weights.lambda_h == 0.0 || model.lag_set().is_empty() {
                return Ok(g);
            }
            for p in 0..h.nrows() {
                let row: Vec<f64> = h.row(p).iter().copied().collect();
                let design = lag_design_row(&row, model.lag_set())?;
                let omega_p = model.omega().row(p);
                let gp = (omega_p * &design * design.transpose()
                    - h.row(p) * design.transpose())
                    * weights.lambda_h;
                g.set_row(p, &gp);
            }
            g
        }
    })
}

fn guard(l: f64) -> f64 {
    if l > 0.0 && l.is_finite() {
        l
    } else {
        1.0
    }
}

fn omega_row_lipschitz(design: &DMatrix<f64>) -> f64 {
    2.0 * spectral_norm_sym(&(design * design.transpose()))
}

/// Step-size denominator for a block: `2||HH^T||` for `W`,
/// `2||W^T W|| + lambda_h * sum_p (||Lap_p|| + ||D_p||)` for `H`, and the
/// largest `2||Hp Hp^T||` over the AR design matrices for `Omega`. A zero
/// constant is replaced by 1.
pub fn block_lipschitz(
    block: Block,
    model: &FactorModel,
    weights: &RegularizationWeights,
) -> Result<f64> {
    let (w, h) = (model.w(), model.h());
    Ok(match block {
        Block::W => guard(2.0 * spectral_norm_sym(&(h * h.transpose()))),
        Block::H => {
            let graphs = if weights.lambda_h != 0.0 && !model.lag_set().is_empty() {
                build_temporal_graphs(h, model.omega(), model.lag_set())?
            } else {
                Vec::new()
            };
            guard(h_lipschitz(&(w.transpose() * w), &graphs, weights.lambda_h))
        }
        Block::Omega => {
            let mut best: f64 = 0.0;
            if !model.lag_set().is_empty() {
                for p in 0..h.nrows() {
                    let row: Vec<f64> = h.row(p).iter().copied().collect();
                    best = best.max(omega_row_lipschitz(&lag_design_row(&row, model.lag_set())?));
                }
            }
            guard(best)
        }
    })
}

fn h_lipschitz(wtw: &DMatrix<f64>, graphs: &[TemporalGraph], lambda_h: f64) -> f64 {
    let temporal: f64 = graphs
        .iter()
        .map(|g| 2.0 * g.laplacian_norm() + g.diagonal_norm())
        .sum();
    2.0 * spectral_norm_sym(wtw) + lambda_h * temporal
}

/// Runs the accelerated update of one block in place and returns the inner
/// loop statistics. For `Omega` every row is updated independently against
/// its AR fit `||h_p - w_p Hp||^2`; rows whose design matrix is zero are left
/// unchanged and the reported outcome is the row with the most iterations.
pub fn fast_gradient_update(
    block: Block,
    x: &DMatrix<f64>,
    model: &mut FactorModel,
    weights: &RegularizationWeights,
    routing: &RoutingMatrix,
    settings: BlockSettings,
    step_safety: f64,
) -> Result<DescentOutcome> {
    let descent = DescentSettings {
        max_iter: settings.max_iter,
        threshold: Threshold::RelativeToInitial(settings.delta),
    };
    match block {
        Block::W => {
            let h = model.h().clone();
            let hht = &h * h.transpose();
            let xht = x * h.transpose();
            let lipschitz = guard(2.0 * spectral_norm_sym(&hht)) * step_safety;
            let (w, out) = accelerated_projected_descent(
                model.w().clone(),
                lipschitz,
                descent,
                |w| grad_w(w, &hht, &xht, routing, weights.lambda_a),
                |w| frobenius_sq(&(x - w * &h)),
            );
            model.set_w(w, routing);
            Ok(out)
        }
        Block::H => {
            let w = model.w().clone();
            let wtw = w.transpose() * &w;
            let wtx = w.transpose() * x;
            let active = weights.lambda_h != 0.0 && !model.lag_set().is_empty();
            let graphs = if active {
                build_temporal_graphs(model.h(), model.omega(), model.lag_set())?
            } else {
                Vec::new()
            };
            let lambda_h = if active { weights.lambda_h } else { 0.0 };
            let lipschitz = guard(h_lipschitz(&wtw, &graphs, lambda_h)) * step_safety;
            let (h, out) = accelerated_projected_descent(
                model.h().clone(),
                lipschitz,
                descent,
                |h| grad_h(h, &wtw, &wtx, &graphs, lambda_h),
                |h| frobenius_sq(&(x - &w * h)),
            );
            model.set_h(h);
            Ok(out)
        }
        Block::Omega => {
            let lag_set = model.lag_set().clone();
            let mut omega = model.omega().clone();
            let mut summary = DescentOutcome::default();
            if lag_set.is_empty() {
                return Ok(summary);
            }
            for p in 0..model.h().nrows() {
                let row: Vec<f64> = model.h().row(p).iter().copied().collect();
                let h_row = DMatrix::from_row_slice(1, row.len(), &row);
                let design = lag_design_row(&row, &lag_set)?;
                if design.iter().all(|&v| v == 0.0) {
                    continue;
                }
                let gram = &design * design.transpose();
                let target = &h_row * design.transpose();
                let lipschitz = guard(2.0 * spectral_norm_sym(&gram)) * step_safety;
                let start = DMatrix::from_iterator(1, lag_set.len(), omega.row(p).iter().copied());
                let (wp, out) = accelerated_projected_descent(
                    start,
                    lipschitz,
                    descent,
                    |wp| (wp * &gram - &target) * 2.0,
                    |wp| frobenius_sq(&(&h_row - wp * &design)),
                );
                omega.set_row(p, &wp.row(0));
                summary.initial_error += out.initial_error;
                summary.final_error += out.final_error;
                summary.restarts += out.restarts;
                summary.iterations = summary.iterations.max(out.iterations);
            }
            model.set_omega(omega);
            Ok(summary)
        }
    }
}

/// `M ∘ X + (1 - M) ∘ (W H)`.
pub fn em_mask_step(
    x: &DMatrix<f64>,
    mask: &DMatrix<f64>,
    w_prev: &DMatrix<f64>,
    h_prev: &DMatrix<f64>,
) -> Result<DMatrix<f64>> {
    if mask.shape() != x.shape() || w_prev.nrows() != x.nrows() || h_prev.ncols() != x.ncols() {
        return Err(TomographyError::shape(
            "EM imputation",
            format!("{}x{}", x.nrows(), x.ncols()),
            format!(
                "mask {}x{}, W {}x{}, H {}x{}",
                mask.nrows(),
                mask.ncols(),
                w_prev.nrows(),
                w_prev.ncols(),
                h_prev.nrows(),
                h_prev.ncols()
            ),
        ));
    }
    let approx = w_prev * h_prev;
    let mut out = x.clone();
    for ((o, &m), &a) in out.iter_mut().zip(mask.iter()).zip(approx.iter()) {
        if m == 0.0 {
            *o = a;
        }
    }
    Ok(out)
}

/// Replaces unobserved entries by their row mean over observed entries
/// (zero for rows with nothing observed).
fn row_mean_fill(x: &DMatrix<f64>, mask: &DMatrix<f64>) -> DMatrix<f64> {
    let mut out = x.clone();
    for i in 0..x.nrows() {
        let (sum, count) = (0..x.ncols())
            .filter(|&j| mask[(i, j)] == 1.0)
            .fold((0.0, 0usize), |(s, c), j| (s + x[(i, j)], c + 1));
        let mean = if count > 0 { sum / count as f64 } else { 0.0 };
        for j in 0..x.ncols() {
            if mask[(i, j)] == 0.0 {
                out[(i, j)] = mean;
            }
        }
    }
    out
}

/// Completes unobserved entries from a nonnegative factorization fitted to
/// the observed entries only (`min ||M ∘ (X - WH)||_F^2`).
///
/// Observed entries are returned unchanged. Rows or columns with no observed
/// entry, and rows whose observed entries are all zero, are filled with 0.
pub fn fill_missing_weighted(
    x: &DMatrix<f64>,
    mask: &DMatrix<f64>,
    rank: usize,
    settings: CompletionSettings,
) -> Result<DMatrix<f64>> {
    if mask.shape() != x.shape() {
        return Err(TomographyError::shape(
            "completion mask",
            format!("{}x{}", x.nrows(), x.ncols()),
            format!("{}x{}", mask.nrows(), mask.ncols()),
        ));
    }
    if mask.iter().all(|&m| m == 1.0) {
        return Ok(x.clone());
    }
    let (n, t) = x.shape();
    let rank = rank.min(n.min(t));
    let observed = x.component_mul(mask);

    let seed = row_mean_fill(x, mask);
    let (mut w, mut h) = init_factors_svd(&seed, rank)?;
    let masked_err = |w: &DMatrix<f64>, h: &DMatrix<f64>| {
        frobenius_sq(&(&observed - (w * h).component_mul(mask)))
    };
    let descent = DescentSettings {
        max_iter: settings.block.max_iter,
        threshold: Threshold::RelativeToInitial(settings.block.delta),
    };
    let e0 = masked_err(&w, &h);
    let mut e_prev = e0;
    for outer in 0..settings.max_outer {
        let lw = guard(2.0 * spectral_norm_sym(&(&h * h.transpose())));
        let h_fixed = h.clone();
        (w, _) = accelerated_projected_descent(
            w,
            lw,
            descent,
            |w| ((w * &h_fixed).component_mul(mask) - &observed) * h_fixed.transpose() * 2.0,
            |w| masked_err(w, &h_fixed),
        );
        let lh = guard(2.0 * spectral_norm_sym(&(w.transpose() * &w)));
        let w_fixed = w.clone();
        (h, _) = accelerated_projected_descent(
            h,
            lh,
            descent,
            |h| w_fixed.transpose() * ((&w_fixed * h).component_mul(mask) - &observed) * 2.0,
            |h| masked_err(&w_fixed, h),
        );
        let e = masked_err(&w, &h);
        if !e.is_finite() {
            return Err(TomographyError::Numerical {
                message: "non-finite error during weighted completion".into(),
                last_finite: None,
            });
        }
        let improvement = e_prev - e;
        e_prev = e;
        if improvement < settings.delta * e0 {
            debug!("weighted completion converged after {} sweeps", outer + 1);
            break;
        }
    }

    let approx = &w * &h;
    let mut out = x.clone();
    for i in 0..n {
        for j in 0..t {
            if mask[(i, j)] == 0.0 {
                out[(i, j)] = approx[(i, j)].max(0.0);
            }
        }
    }
    for i in 0..n {
        let row_obs: Vec<usize> = (0..t).filter(|&j| mask[(i, j)] == 1.0).collect();
        if row_obs.iter().all(|&j| x[(i, j)] == 0.0) {
            if row_obs.is_empty() {
                warn!("OD pair {} has no observed entry; filling with 0", i + 1);
            }
            for j in 0..t {
                if mask[(i, j)] == 0.0 {
                    out[(i, j)] = 0.0;
                }
            }
        }
    }
    for j in 0..t {
        if (0..n).all(|i| mask[(i, j)] == 0.0) {
            warn!("timestamp {} has no observed entry; filling with 0", j + 1);
            for i in 0..n {
                out[(i, j)] = 0.0;
            }
        }
    }
    Ok(out)
}

fn numerical_failure(what: &str, last: &FactorModel) -> TomographyError {
    TomographyError::Numerical {
        message: format!("non-finite values after the {what} update"),
        last_finite: Some(Box::new(last.clone())),
    }
}

/// Trains the factorization on `traffic` (OD pairs x timestamps).
pub fn train(
    traffic: &TrafficMatrix,
    routing: &RoutingMatrix,
    config: &TrainConfig,
) -> Result<(FactorModel, TrainReport)> {
    config.validate()?;
    let started = Instant::now();
    if routing.od_pairs() != traffic.od_pairs() {
        return Err(TomographyError::shape(
            "training routing (OD pairs)",
            traffic.od_pairs(),
            routing.od_pairs(),
        ));
    }
    config.lag_set.check_horizon(traffic.timestamps())?;

    let mask = traffic.mask().filter(|_| !traffic.is_fully_observed());
    let mode = if mask.is_none() { MissingMode::None } else { config.missing_mode };
    if mask.is_some() && mode == MissingMode::None {
        warn!("training data has unobserved entries but missing mode is none; they count as zeros");
    }
    let observed = traffic.entries();

    // Data matrix used for seeding and, outside EM mode, for all iterations.
    let mut data = match (mode, mask) {
        (MissingMode::WeightedFill, Some(m)) => {
            fill_missing_weighted(observed, m, config.rank, config.completion)?
        }
        (MissingMode::EmMask, Some(m)) => row_mean_fill(observed, m),
        _ => observed.clone(),
    };

    let (w0, h0) = init_factors_svd(&data, config.rank)?;
    let omega0 = init_lag_weights(&h0, &config.lag_set)?;
    if let (MissingMode::EmMask, Some(m)) = (mode, mask) {
        data = em_mask_step(observed, m, &w0, &h0)?;
    }
    let weights = tune_penalties(
        &data,
        &w0,
        &h0,
        &omega0,
        &config.lag_set,
        config.beta_h,
        config.beta_a,
        routing,
    )?;
    info!(
        "penalties: lambda_h={:.6e} lambda_a={:.6e}",
        weights.lambda_h, weights.lambda_a
    );

    let mut model = FactorModel::new(w0, h0, omega0, config.lag_set.clone(), routing)?;
    let e0 = frobenius_sq(&(&data - model.reconstruction()));
    let min_improvement = config.delta * e0;
    let mut report = TrainReport {
        objective_trace: vec![e0],
        elapsed_ms: vec![started.elapsed().as_secs_f64() * 1e3],
        block_iterations: Vec::new(),
        weights,
        wall_time: Duration::ZERO,
    };

    let mut q = 1;
    while q <= config.q_max {
        if let (MissingMode::EmMask, Some(m), true) = (mode, mask, q > 1) {
            data = em_mask_step(observed, m, model.w(), model.h())?;
        }
        let snapshot = model.clone();
        let mut iters = [0usize; 3];
        for (slot, (block, settings)) in [
            (Block::W, config.w_block),
            (Block::H, config.h_block),
            (Block::Omega, config.omega_block),
        ]
        .into_iter()
        .enumerate()
        {
            let out = fast_gradient_update(
                block,
                &data,
                &mut model,
                &weights,
                routing,
                settings,
                config.step_safety,
            )?;
            iters[slot] = out.iterations;
            if !model.is_finite() {
                return Err(numerical_failure(&format!("{block:?}"), &snapshot));
            }
        }
        let e = frobenius_sq(&(&data - model.reconstruction()));
        if !e.is_finite() {
            return Err(numerical_failure("error evaluation", &snapshot));
        }
        let improvement = report.objective_trace[q - 1] - e;
        report.objective_trace.push(e);
        report.elapsed_ms.push(started.elapsed().as_secs_f64() * 1e3);
        report.block_iterations.push(iters);
        debug!("outer {q}: e={e:.6e} blocks={iters:?}");
        q += 1;
        if !(improvement < 0.0 || improvement >= min_improvement) {
            break;
        }
    }
    report.wall_time = started.elapsed();
    Ok((model, report))
}
