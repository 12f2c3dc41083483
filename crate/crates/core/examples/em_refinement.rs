//! Estimate one traffic vector from its link counts and show how the EM
//! refinement restores consistency with the observed counts.
//!
//! cargo run --release --example em_refinement -- [seed]

use ttnmf::{
    estimate_latent, generate_synthetic, refine_em, train, EstimatorConfig, LagSet, TrainConfig,
};

fn main() -> ttnmf::Result<()> {
    let seed: u64 = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(3);
    let lags = LagSet::new(vec![1, 2])?;
    let scenario = generate_synthetic(5, 3, 200, &lags, 0.1, seed)?;
    let (model, _) = train(&scenario.traffic, &scenario.routing, &TrainConfig::new(3, lags))?;

    let x_true = scenario.traffic.entries().column(199).into_owned();
    let y = scenario.routing.entries() * &x_true;
    let cfg = EstimatorConfig::default();

    let h = estimate_latent(&y, &model, &cfg)?;
    let x0 = model.w() * &h;
    let mut previous = x0.clone();
    println!("{:>5} {:>12} {:>12}", "iters", "||y - Ax||", "||x - x*||");
    for iters in [0, 1, 5, 20, 100, 200] {
        let x = if iters == 0 {
            x0.clone()
        } else {
            refine_em(&x0, &y, &scenario.routing, &EstimatorConfig { r_max_em: iters, ..cfg })?
        };
        println!(
            "{iters:>5} {:>12.4e} {:>12.4e}",
            (&y - scenario.routing.entries() * &x).norm(),
            (&x - &x_true).norm()
        );
        previous = x;
    }
    println!("all entries nonnegative: {}", previous.iter().all(|&v| v >= 0.0));
    Ok(())
}
