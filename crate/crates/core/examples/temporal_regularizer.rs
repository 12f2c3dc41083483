//! Build the temporal graph induced by an AR model on one latent row and
//! check that the graph form of the penalty matches the sum of squared
//! AR residuals.
//!
//! cargo run --example temporal_regularizer -- [lags] [horizon]

use nalgebra::DMatrix;
use ttnmf::temporal::{temporal_penalty_value, PenaltyForm, TemporalGraph};
use ttnmf::LagSet;

fn main() -> ttnmf::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let lags: LagSet = args.first().map_or("1,2", String::as_str).parse()?;
    let horizon: usize = args.get(1).and_then(|s| s.parse().ok()).unwrap_or(12);

    let weights: Vec<f64> = (0..lags.len()).map(|i| 0.6 / (i + 1) as f64).collect();
    let graph = TemporalGraph::build(&weights, &lags, horizon)?;
    println!("lags {lags}, weights {weights:?}, T = {horizon}");
    println!("band offsets {:?}", graph.displacements());
    for t in 0..horizon.min(6) {
        let row: Vec<String> = (0..horizon.min(6)).map(|u| format!("{:7.3}", graph.similarity(t, u))).collect();
        println!("S[{t}] {}", row.join(" "));
    }
    println!("degree correction {:?}", graph.diagonal_correction());
    println!("||Lap||_2 ~ {:.4}, ||D||_2 = {:.4}", graph.laplacian_norm(), graph.diagonal_norm());

    let h = DMatrix::from_fn(1, horizon, |_, t| 1.0 + (t as f64 * 0.7).sin());
    let omega = DMatrix::from_row_slice(1, weights.len(), &weights);
    let lap = temporal_penalty_value(&h, &omega, &lags, PenaltyForm::Laplacian)?;
    let res = temporal_penalty_value(&h, &omega, &lags, PenaltyForm::Residual)?;
    println!("graph form {lap:.12}, residual form {res:.12}, gap {:.1e}", (lap - res).abs());
    Ok(())
}
