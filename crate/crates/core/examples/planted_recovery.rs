//! Train on a planted scenario and recover held-out OD flows from link counts.
//!
//! cargo run --release --example planted_recovery -- [seed] [noise] [beta]

use ttnmf::{
    compute_link_flows, estimate_window, generate_synthetic, split_train_test, summary_stats, sre,
    train, tre, EstimatorConfig, LagSet, TrainConfig,
};

fn main() -> ttnmf::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let seed: u64 = args.first().and_then(|s| s.parse().ok()).unwrap_or(42);
    let noise: f64 = args.get(1).and_then(|s| s.parse().ok()).unwrap_or(0.0);
    let beta: f64 = args.get(2).and_then(|s| s.parse().ok()).unwrap_or(0.2);

    let lags = LagSet::new(vec![1, 2])?;
    let scenario = generate_synthetic(6, 4, 400, &lags, noise, seed)?;
    let (train_x, test_x) = split_train_test(&scenario.traffic, 300)?;

    let mut config = TrainConfig::new(4, lags);
    config.beta_h = beta;
    config.beta_a = beta;
    let (model, report) = train(&train_x, &scenario.routing, &config)?;
    println!(
        "trained: {} outer iterations, e(0)={:.4e}, e(final)={:.4e}, lambda_h={:.3e}, lambda_a={:.3e}",
        report.outer_iterations(),
        report.objective_trace[0],
        report.objective_trace.last().unwrap(),
        report.weights.lambda_h,
        report.weights.lambda_a,
    );

    println!(
        "relative training fit {:.3e}",
        (train_x.entries() - model.reconstruction()).norm() / train_x.entries().norm()
    );

    let links = compute_link_flows(&scenario.routing, &test_x)?;
    let estimate = estimate_window(&links, &model, &scenario.routing, &EstimatorConfig::default())?;

    for (name, errors) in [
        ("SRE", sre(test_x.entries(), &estimate)?),
        ("TRE", tre(test_x.entries(), &estimate)?),
    ] {
        let s = summary_stats(&errors)?;
        println!(
            "{name}: min {:.3} max {:.3} mean {:.3} median {:.3} std {:.3}",
            s.min, s.max, s.mean, s.median, s.std
        );
    }
    Ok(())
}
