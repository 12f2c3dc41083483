//! Restarted Nesterov projected gradient on the nonnegative orthant.
//!
//! Every block update in training, the weighted completion and the latent
//! estimate at test time run through [`accelerated_projected_descent`].

use nalgebra::DMatrix;

use crate::linalg::project_nonneg;

/// Early-stopping threshold on the per-iteration error decrease.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Threshold {
    /// Fraction of the error at entry.
    RelativeToInitial(f64),
    Absolute(f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DescentSettings {
    pub max_iter: usize,
    pub threshold: Threshold,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct DescentOutcome {
    pub iterations: usize,
    pub restarts: usize,
    pub initial_error: f64,
    pub final_error: f64,
}

/// Momentum recursion `(1 + sqrt(4 a^2 + 1)) / 2`.
pub fn next_momentum(alpha: f64) -> f64 {
    (1.0 + (4.0 * alpha * alpha + 1.0).sqrt()) / 2.0
}

/// Minimizes a block subproblem over `x >= 0`.
///
/// `gradient` is evaluated at the extrapolated point and a projected step of
/// length `1 / lipschitz` is taken. `error` is the monitored measure: a step
/// that increases it is discarded, the extrapolation is dropped and the next
/// iteration takes a plain projected gradient step from the last accepted
/// iterate. The returned iterate therefore never has a larger error than `x0`.
///
/// The loop runs while iterations remain and the last decrease was either
/// negative (a rejected step) or at least the threshold.
pub fn accelerated_projected_descent<G, E>(
    x0: DMatrix<f64>,
    lipschitz: f64,
    settings: DescentSettings,
    mut gradient: G,
    mut error: E,
) -> (DMatrix<f64>, DescentOutcome)
where
    G: FnMut(&DMatrix<f64>) -> DMatrix<f64>,
    E: FnMut(&DMatrix<f64>) -> f64,
{
    let step = if lipschitz.is_finite() && lipschitz > 0.0 {
        1.0 / lipschitz
    } else {
        1.0
    };
    let mut accepted = x0;
    let mut extrapolated = accepted.clone();
    let mut alpha = 1.0;
    let mut alpha_prev = 1.0;
    let mut e_prev = error(&accepted);
    let min_decrease = match settings.threshold {
        Threshold::RelativeToInitial(d) => d * e_prev,
        Threshold::Absolute(a) => a,
    };
    let mut outcome = DescentOutcome {
        initial_error: e_prev,
        ..Default::default()
    };

    let mut q = 1;
    while q <= settings.max_iter {
        alpha = next_momentum(alpha);
        let g = gradient(&extrapolated);
        let mut candidate = &extrapolated - g * step;
        project_nonneg(&mut candidate);
        let e_curr = error(&candidate);
        // NaN compares false, so a non-finite candidate is rejected as well.
        let decrease = if e_curr.is_nan() { f64::NEG_INFINITY } else { e_prev - e_curr };

        if decrease < 0.0 {
            extrapolated.copy_from(&accepted);
            alpha = 1.0;
            outcome.restarts += 1;
        } else {
            let beta = (alpha_prev - 1.0) / alpha;
            extrapolated = &candidate + (&candidate - &accepted) * beta;
            accepted = candidate;
            e_prev = e_curr;
        }
        alpha_prev = alpha;
        outcome.iterations = q;
        q += 1;

        if !(decrease < 0.0 || decrease >= min_decrease) {
            break;
        }
    }
    outcome.final_error = e_prev;
    (accepted, outcome)
}
