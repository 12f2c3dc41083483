//! File-based workflow: write a synthetic network to CSV, load it back,
//! train, save and reload the model archive, then estimate OD flows from a
//! link-count file.
//!
//! cargo run --release --example csv_pipeline -- [output dir]

use std::path::PathBuf;

use ttnmf::io::matrix_csv::{
    load_link_flow_csv, load_routing_csv, load_traffic_csv, write_indicator_csv, write_matrix_csv,
};
use ttnmf::{
    compute_link_flows, estimate_window, generate_synthetic, split_train_test, summary_stats, train,
    tre, EstimatorConfig, LagSet, ModelArchive, TrainConfig,
};

fn main() -> ttnmf::Result<()> {
    let dir = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| std::env::temp_dir().join("ttnmf_csv_pipeline"));
    std::fs::create_dir_all(&dir)?;

    let lags = LagSet::new(vec![1, 2])?;
    let scenario = generate_synthetic(5, 3, 240, &lags, 0.05, 7)?;
    let (train_x, test_x) = split_train_test(&scenario.traffic, 180)?;
    write_indicator_csv(&dir.join("routing.csv"), scenario.routing.entries())?;
    write_matrix_csv(&dir.join("traffic_train.csv"), train_x.entries())?;
    write_matrix_csv(&dir.join("traffic_test.csv"), test_x.entries())?;
    let links = compute_link_flows(&scenario.routing, &test_x)?;
    write_matrix_csv(&dir.join("links_test.csv"), links.entries())?;

    let routing = load_routing_csv(&dir.join("routing.csv"))?;
    let traffic = load_traffic_csv(&dir.join("traffic_train.csv"), None)?;
    println!(
        "loaded {} links x {} OD pairs, {} training timestamps",
        routing.links(),
        routing.od_pairs(),
        traffic.timestamps()
    );

    let config = TrainConfig::new(3, lags);
    let (model, report) = train(&traffic, &routing, &config)?;
    let archive = ModelArchive::from_training(model, routing, report.weights, &config, &traffic);
    let path = dir.join("model.ttnmf");
    archive.save(&path)?;
    let reloaded = ModelArchive::load(&path)?;
    assert_eq!(reloaded, archive);
    println!("archive {} ({} bytes), data sha256 {}", path.display(), archive.to_bytes().len(), &archive.data_sha256[..16]);

    let links = load_link_flow_csv(&dir.join("links_test.csv"))?;
    let estimate = estimate_window(&links, &reloaded.model, &reloaded.routing, &EstimatorConfig::default())?;
    write_matrix_csv(&dir.join("estimate.csv"), &estimate)?;
    let s = summary_stats(&tre(test_x.entries(), &estimate)?)?;
    println!("test TRE mean {:.4} median {:.4} max {:.4}", s.mean, s.median, s.max);
    Ok(())
}
