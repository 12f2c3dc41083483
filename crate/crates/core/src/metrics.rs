//! Relative estimation errors per OD flow and per timestamp.

use nalgebra::DMatrix;

use crate::error::{Result, TomographyError};

/// Per-index relative errors. Indices whose reference norm is zero have no
/// defined error; they are listed in `undefined_indices`, hold `NaN` in
/// `values`, and are left out of every statistic.
#[derive(Debug, Clone, PartialEq)]
pub struct ErrorVector {
    pub values: Vec<f64>,
    pub undefined_indices: Vec<usize>,
}

impl ErrorVector {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Values at defined indices, in index order.
    pub fn defined(&self) -> Vec<f64> {
        self.values.iter().copied().filter(|v| !v.is_nan()).collect()
    }

    fn from_pairs(pairs: impl Iterator<Item = (f64, f64)>) -> Self {
        let mut values = Vec::new();
        let mut undefined_indices = Vec::new();
        for (i, (diff, reference)) in pairs.enumerate() {
            if reference == 0.0 {
                undefined_indices.push(i);
                values.push(f64::NAN);
            } else {
                values.push(diff / reference);
            }
        }
        ErrorVector {
            values,
            undefined_indices,
        }
    }
}

fn check_shapes(x_true: &DMatrix<f64>, x_est: &DMatrix<f64>) -> Result<()> {
    if x_true.shape() != x_est.shape() {
        return Err(TomographyError::shape(
            "error metric inputs",
            format!("{}x{}", x_true.nrows(), x_true.ncols()),
            format!("{}x{}", x_est.nrows(), x_est.ncols()),
        ));
    }
    Ok(())
}

/// Spatial relative error of each OD flow (row).
pub fn sre(x_true: &DMatrix<f64>, x_est: &DMatrix<f64>) -> Result<ErrorVector> {
    check_shapes(x_true, x_est)?;
    let diff = x_est - x_true;
    Ok(ErrorVector::from_pairs((0..x_true.nrows()).map(|i| {
        (diff.row(i).norm(), x_true.row(i).norm())
    })))
}

/// Temporal relative error of each timestamp (column).
pub fn tre(x_true: &DMatrix<f64>, x_est: &DMatrix<f64>) -> Result<ErrorVector> {
    check_shapes(x_true, x_est)?;
    let diff = x_est - x_true;
    Ok(ErrorVector::from_pairs((0..x_true.ncols()).map(|t| {
        (diff.column(t).norm(), x_true.column(t).norm())
    })))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SummaryStats {
    pub min: f64,
    pub max: f64,
    pub mean: f64,
    pub median: f64,
    /// Population standard deviation.
    pub std: f64,
    /// Number of defined values summarized.
    pub count: usize,
}

pub fn summary_stats(errors: &ErrorVector) -> Result<SummaryStats> {
    let mut v = errors.defined();
    if v.is_empty() {
        return Err(TomographyError::Usage(
            "no defined error values to summarize".into(),
        ));
    }
    v.sort_by(f64::total_cmp);
    let n = v.len();
    let mean = v.iter().sum::<f64>() / n as f64;
    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n as f64;
    let median = if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    };
    Ok(SummaryStats {
        min: v[0],
        max: v[n - 1],
        mean,
        median,
        std: var.sqrt(),
        count: n,
    })
}

/// Empirical CDF over the defined values: one `(value, fraction <= value)`
/// pair per distinct value, ascending.
pub fn cdf_points(errors: &ErrorVector) -> Vec<(f64, f64)> {
    let mut v = errors.defined();
    v.sort_by(f64::total_cmp);
    let n = v.len() as f64;
    let mut out: Vec<(f64, f64)> = Vec::new();
    for (i, &x) in v.iter().enumerate() {
        let frac = (i + 1) as f64 / n;
        match out.last_mut() {
            Some(last) if last.0 == x => last.1 = frac,
            _ => out.push((x, frac)),
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ev(values: &[f64]) -> ErrorVector {
        ErrorVector {
            values: values.to_vec(),
            undefined_indices: vec![],
        }
    }

    #[test]
    fn identical_inputs_give_zero() {
        let x = DMatrix::from_row_slice(2, 3, &[1., 2., 3., 0., 5., 1.]);
        assert!(sre(&x, &x).unwrap().values.iter().all(|&v| v == 0.0));
        assert!(tre(&x, &x).unwrap().values.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn doubled_estimate_has_unit_error() {
        let x = DMatrix::from_row_slice(2, 2, &[1., 2., 3., 4.]);
        let e = sre(&x, &(&x * 2.0)).unwrap();
        assert!(e.values.iter().all(|&v| (v - 1.0).abs() < 1e-15));
    }

    #[test]
    fn single_column_hand_value() {
        let x = DMatrix::from_column_slice(3, 1, &[3., 0., 4.]);
        let xh = DMatrix::from_column_slice(3, 1, &[3., 1., 2.]);
        // ||(0,1,-2)|| / ||(3,0,4)|| = sqrt(5) / 5
        let e = tre(&x, &xh).unwrap();
        assert!((e.values[0] - 5f64.sqrt() / 5.0).abs() < 1e-15);
    }

    #[test]
    fn zero_rows_are_excluded() {
        let x = DMatrix::from_row_slice(2, 2, &[0., 0., 1., 1.]);
        let xh = DMatrix::from_row_slice(2, 2, &[1., 0., 1., 1.]);
        let e = sre(&x, &xh).unwrap();
        assert_eq!(e.undefined_indices, vec![0]);
        assert_eq!(e.defined(), vec![0.0]);
        assert_eq!(summary_stats(&e).unwrap().count, 1);
    }

    #[test]
    fn shape_mismatch() {
        let r = sre(&DMatrix::zeros(2, 2), &DMatrix::zeros(2, 3));
        assert!(matches!(r, Err(TomographyError::Shape { .. })));
    }

    #[test]
    fn stats_of_constant() {
        let s = summary_stats(&ev(&[0.3; 5])).unwrap();
        assert_eq!((s.min, s.max, s.median), (0.3, 0.3, 0.3));
        assert!((s.mean - 0.3).abs() < 1e-15 && s.std < 1e-15);
    }

    #[test]
    fn stats_of_one_to_four() {
        let s = summary_stats(&ev(&[4., 1., 3., 2.])).unwrap();
        assert_eq!(s.mean, 2.5);
        assert_eq!(s.median, 2.5);
        assert!((s.std - 1.25f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn empty_stats_is_usage_error() {
        let e = ErrorVector {
            values: vec![f64::NAN],
            undefined_indices: vec![0],
        };
        assert!(matches!(summary_stats(&e), Err(TomographyError::Usage(_))));
    }

    #[test]
    fn cdf_collapses_duplicates() {
        assert_eq!(cdf_points(&ev(&[0.7])), vec![(0.7, 1.0)]);
        let c = cdf_points(&ev(&[2., 1., 1.]));
        assert_eq!(c.len(), 2);
        assert_eq!(c[0].0, 1.0);
        assert!((c[0].1 - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(c[1], (2.0, 1.0));
    }
}
