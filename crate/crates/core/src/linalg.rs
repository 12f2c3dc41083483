//! Small dense linear-algebra helpers shared by the solvers.

use nalgebra::{DMatrix, DVector};

/// Relative cutoff below which singular values are treated as zero.
pub const PINV_RCOND: f64 = 1e-12;

/// Entry-wise projection onto the nonnegative orthant, in place.
pub fn project_nonneg(m: &mut DMatrix<f64>) {
    m.apply(|v| {
        if *v < 0.0 {
            *v = 0.0
        }
    });
}

pub fn all_finite(m: &DMatrix<f64>) -> bool {
    m.iter().all(|v| v.is_finite())
}

pub fn frobenius_sq(m: &DMatrix<f64>) -> f64 {
    m.iter().map(|v| v * v).sum()
}

/// Spectral norm of a symmetric matrix (largest eigenvalue magnitude).
pub fn spectral_norm_sym(m: &DMatrix<f64>) -> f64 {
    if m.nrows() == 0 {
        return 0.0;
    }
    m.clone()
        .symmetric_eigenvalues()
        .iter()
        .fold(0.0_f64, |acc, v| acc.max(v.abs()))
}

/// Estimates the spectral norm of a symmetric linear operator by power
/// iteration on its square, which is positive semidefinite, so indefinite
/// operators with eigenvalues of both signs still converge. The start vector
/// is fixed so the estimate is deterministic.
pub fn power_iteration_norm<F>(dim: usize, iterations: usize, mut apply: F) -> f64
where
    F: FnMut(&[f64], &mut [f64]),
{
    if dim == 0 {
        return 0.0;
    }
    let norm = |x: &[f64]| x.iter().map(|v| v * v).sum::<f64>().sqrt();
    // A ramp avoids starting orthogonal to the dominant eigenvector of the
    // banded operators used here (their all-ones mode is often an eigenvector).
    let mut v: Vec<f64> = (0..dim).map(|i| 1.0 + (i as f64 + 1.0).sqrt()).collect();
    let n0 = norm(&v);
    v.iter_mut().for_each(|x| *x /= n0);
    let mut mid = vec![0.0; dim];
    let mut w = vec![0.0; dim];
    let mut estimate = 0.0;
    for _ in 0..iterations {
        apply(&v, &mut mid);
        apply(&mid, &mut w);
        let wn = norm(&w);
        if wn == 0.0 || !wn.is_finite() {
            return if wn.is_finite() { estimate } else { wn };
        }
        let next = wn.sqrt();
        let converged = (next - estimate).abs() <= 1e-12 * next;
        estimate = next;
        for (vi, wi) in v.iter_mut().zip(&w) {
            *vi = wi / wn;
        }
        if converged {
            break;
        }
    }
    estimate
}

/// Thin SVD with singular values sorted in decreasing order and each left
/// singular vector's sign fixed so its largest-magnitude entry is positive.
/// Returns `(u, sigma, v)` with `u: r x rank`, `v: c x rank`.
pub fn sorted_svd(m: &DMatrix<f64>) -> (DMatrix<f64>, DVector<f64>, DMatrix<f64>) {
    let svd = m.clone().svd(true, true);
    let u = svd.u.expect("u requested");
    let v_t = svd.v_t.expect("v_t requested");
    let s = svd.singular_values;
    let mut order: Vec<usize> = (0..s.len()).collect();
    // Stable sort keeps the factorization deterministic on ties.
    order.sort_by(|&a, &b| s[b].total_cmp(&s[a]));

    let mut uo = DMatrix::zeros(m.nrows(), order.len());
    let mut vo = DMatrix::zeros(m.ncols(), order.len());
    let mut so = DVector::zeros(order.len());
    for (dst, &src) in order.iter().enumerate() {
        let mut ucol = u.column(src).into_owned();
        let mut vcol = v_t.row(src).transpose();
        let pivot = ucol
            .iter()
            .copied()
            .fold(0.0_f64, |best, x| if x.abs() > best.abs() { x } else { best });
        if pivot < 0.0 {
            ucol.neg_mut();
            vcol.neg_mut();
        }
        uo.set_column(dst, &ucol);
        vo.set_column(dst, &vcol);
        so[dst] = s[src];
    }
    (uo, so, vo)
}

/// Moore-Penrose pseudoinverse; singular values below `PINV_RCOND * sigma_max`
/// are dropped, which yields the minimum-norm least-squares solution.
pub fn pinv(m: &DMatrix<f64>) -> DMatrix<f64> {
    if m.is_empty() {
        return DMatrix::zeros(m.ncols(), m.nrows());
    }
    let (u, s, v) = sorted_svd(m);
    let smax = s.iter().copied().fold(0.0, f64::max);
    let mut out = DMatrix::zeros(m.ncols(), m.nrows());
    if smax == 0.0 {
        return out;
    }
    for i in 0..s.len() {
        if s[i] > PINV_RCOND * smax {
            out += (v.column(i) / s[i]) * u.column(i).transpose();
        }
    }
    out
}
