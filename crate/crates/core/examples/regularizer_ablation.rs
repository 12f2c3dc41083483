//! Mean held-out SRE with and without the two regularizers, over several
//! planted scenarios.
//!
//! cargo run --release --example regularizer_ablation -- [noise] [seeds] [beta_h] [beta_a] [q_max]

use ttnmf::{
    compute_link_flows, estimate_window, generate_synthetic, split_train_test, sre, summary_stats,
    train, EstimatorConfig, LagSet, TrainConfig,
};

fn mean_sre(seed: u64, noise: f64, beta_h: f64, beta_a: f64, q_max: usize) -> ttnmf::Result<f64> {
    let lags = LagSet::new(vec![1, 2])?;
    let scenario = generate_synthetic(6, 4, 400, &lags, noise, seed)?;
    let (train_x, test_x) = split_train_test(&scenario.traffic, 300)?;
    let mut config = TrainConfig::new(4, lags);
    config.beta_h = beta_h;
    config.beta_a = beta_a;
    config.q_max = q_max;
    let (model, _) = train(&train_x, &scenario.routing, &config)?;
    let links = compute_link_flows(&scenario.routing, &test_x)?;
    let estimate = estimate_window(&links, &model, &scenario.routing, &EstimatorConfig::default())?;
    Ok(summary_stats(&sre(test_x.entries(), &estimate)?)?.mean)
}

fn main() -> ttnmf::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let noise: f64 = args.first().and_then(|s| s.parse().ok()).unwrap_or(0.1);
    let seeds: u64 = args.get(1).and_then(|s| s.parse().ok()).unwrap_or(5);
    let beta_h: f64 = args.get(2).and_then(|s| s.parse().ok()).unwrap_or(0.5);
    let beta_a: f64 = args.get(3).and_then(|s| s.parse().ok()).unwrap_or(beta_h);
    let q_max: usize = args.get(4).and_then(|s| s.parse().ok()).unwrap_or(50);

    let (mut with, mut without) = (0.0, 0.0);
    for seed in 0..seeds {
        let r = mean_sre(seed, noise, beta_h, beta_a, q_max)?;
        let u = mean_sre(seed, noise, 0.0, 0.0, q_max)?;
        println!("seed {seed}: regularized {r:.4}  unregularized {u:.4}");
        with += r;
        without += u;
    }
    println!(
        "mean SRE over {seeds} seeds: regularized {:.4}  unregularized {:.4}",
        with / seeds as f64,
        without / seeds as f64
    );
    Ok(())
}
