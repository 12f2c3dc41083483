//! Spatial and temporal relative errors of an estimate, with summary
//! statistics and empirical CDF points.
//!
//! cargo run --example evaluate_metrics -- [truth.csv estimate.csv]

use std::path::Path;

use nalgebra::DMatrix;
use ttnmf::io::matrix_csv::{load_matrix_csv, MatrixKind};
use ttnmf::{cdf_points, sre, summary_stats, tre};

fn main() -> ttnmf::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let (truth, estimate) = if let [t, e] = args.as_slice() {
        (
            load_matrix_csv(Path::new(t), MatrixKind::Traffic)?,
            load_matrix_csv(Path::new(e), MatrixKind::Traffic)?,
        )
    } else {
        let truth = DMatrix::from_row_slice(3, 4, &[
            4.0, 5.0, 6.0, 5.0,
            1.0, 0.0, 2.0, 1.0,
            0.0, 0.0, 0.0, 0.0,
        ]);
        let estimate = DMatrix::from_row_slice(3, 4, &[
            4.2, 4.6, 6.3, 5.0,
            0.8, 0.3, 2.1, 1.0,
            0.1, 0.0, 0.0, 0.0,
        ]);
        (truth, estimate)
    };

    for (name, errors) in [("SRE", sre(&truth, &estimate)?), ("TRE", tre(&truth, &estimate)?)] {
        println!("{name} per index {:?}", errors.values);
        if !errors.undefined_indices.is_empty() {
            println!("  undefined (zero truth): {:?}", errors.undefined_indices);
        }
        let s = summary_stats(&errors)?;
        println!(
            "  min {:.4} max {:.4} mean {:.4} median {:.4} std {:.4} over {}",
            s.min, s.max, s.mean, s.median, s.std, s.count
        );
        for (value, fraction) in cdf_points(&errors) {
            println!("  P(err <= {value:.4}) = {fraction:.3}");
        }
    }
    Ok(())
}
