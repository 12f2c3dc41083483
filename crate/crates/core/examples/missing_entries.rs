//! Train with a fraction of OD entries unobserved, using either the
//! completion-first strategy or the EM-style re-imputation at every outer
//! iteration, and compare against training on the full data.
//!
//! cargo run --release --example missing_entries -- [missing_fraction] [seed]

use ttnmf::{
    compute_link_flows, estimate_window, generate_synthetic, random_mask, split_train_test,
    summary_stats, train, tre, EstimatorConfig, LagSet, MissingMode, TrafficMatrix, TrainConfig,
};

fn main() -> ttnmf::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let fraction: f64 = args.first().and_then(|s| s.parse().ok()).unwrap_or(0.2);
    let seed: u64 = args.get(1).and_then(|s| s.parse().ok()).unwrap_or(42);

    let lags = LagSet::new(vec![1, 2])?;
    let scenario = generate_synthetic(6, 4, 400, &lags, 0.0, seed)?;
    let (full, test_x) = split_train_test(&scenario.traffic, 300)?;
    let mask = random_mask(full.od_pairs(), full.timestamps(), fraction, seed + 1)?;
    let partial = TrafficMatrix::with_mask(full.entries().clone(), mask)?;
    let links = compute_link_flows(&scenario.routing, &test_x)?;

    for (label, data, mode) in [
        ("full data", &full, MissingMode::None),
        ("weighted_fill", &partial, MissingMode::WeightedFill),
        ("em_mask", &partial, MissingMode::EmMask),
    ] {
        let mut config = TrainConfig::new(4, lags.clone());
        config.missing_mode = mode;
        let (model, report) = train(data, &scenario.routing, &config)?;
        let estimate =
            estimate_window(&links, &model, &scenario.routing, &EstimatorConfig::default())?;
        let stats = summary_stats(&tre(test_x.entries(), &estimate)?)?;
        println!(
            "{label:>13}: mean test TRE {:.4} ({} outer iterations, {:.0} ms)",
            stats.mean,
            report.outer_iterations(),
            report.wall_time.as_secs_f64() * 1e3
        );
    }
    Ok(())
}
