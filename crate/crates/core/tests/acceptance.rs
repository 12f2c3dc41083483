//! Acceptance suite. Runs every criterion in turn, prints one PASS/FAIL line
//! per criterion and exits non-zero if any failed.
//!
//! Criterion 8 needs real data: set TTNMF_INTERNET2_DIR to a directory
//! holding `routing.csv` (links x OD pairs) and `traffic.csv` (OD pairs x
//! 3168 five-minute slots). Without it the criterion is reported as SKIPPED.

use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use ttnmf::estimator::{estimate_od_flow, refine_em};
use ttnmf::io::matrix_csv::{load_routing_csv, load_traffic_csv};
use ttnmf::model::objective_value;
use ttnmf::temporal::{temporal_penalty_value, PenaltyForm};
use ttnmf::trainer::{block_gradient, Block};
use ttnmf::{
    compute_link_flows, estimate_window, generate_synthetic, random_mask, split_train_test, sre,
    summary_stats, train, tre, EstimatorConfig, FactorModel, LagSet, MissingMode,
    RegularizationWeights, RoutingMatrix, SyntheticScenario, TrafficMatrix, TrainConfig,
};

/// Planted scenario shared by criteria 3, 4, 6 and 7.
const PLANTED_ROUTERS: usize = 6; // 30 OD pairs
const PLANTED_RANK: usize = 4;
const PLANTED_TRAIN: usize = 300;
const PLANTED_TEST: usize = 100;
const PLANTED_SEED: u64 = 42;

/// Mean held-out TRE of the reference run on the noiseless planted scenario
/// (seed 42, default training and estimation settings), recorded when the
/// implementation was validated.
const PLANTED_TRE_ORACLE: f64 = 0.0509;
/// Frozen passing bound: the oracle value with 50% headroom, never looser
/// than the required 0.25.
const PLANTED_TRE_BOUND: f64 = if 1.5 * PLANTED_TRE_ORACLE < 0.25 { 1.5 * PLANTED_TRE_ORACLE } else { 0.25 };

enum Outcome {
    Pass(String),
    Fail(String),
    Skipped(String),
}

fn planted_lags() -> LagSet {
    LagSet::new(vec![1, 2]).unwrap()
}

fn planted(seed: u64) -> SyntheticScenario {
    generate_synthetic(
        PLANTED_ROUTERS,
        PLANTED_RANK,
        PLANTED_TRAIN + PLANTED_TEST,
        &planted_lags(),
        0.0,
        seed,
    )
    .unwrap()
}

fn random_routing(rng: &mut ChaCha8Rng, m: usize, n: usize) -> RoutingMatrix {
    let mut a = DMatrix::from_fn(m, n, |_, _| if rng.random_bool(0.4) { 1.0 } else { 0.0 });
    for j in 0..n {
        if a.column(j).sum() == 0.0 {
            a[(rng.random_range(0..m), j)] = 1.0;
        }
    }
    RoutingMatrix::new(a).unwrap()
}

fn random_nonneg(rng: &mut ChaCha8Rng, r: usize, c: usize) -> DMatrix<f64> {
    DMatrix::from_fn(r, c, |_, _| rng.random_range(0.0..1.0))
}

fn random_lags(rng: &mut ChaCha8Rng, t: usize) -> LagSet {
    let count = rng.random_range(1..=3);
    let mut lags = Vec::new();
    while lags.len() < count {
        let l = rng.random_range(1..t / 2);
        if !lags.contains(&l) {
            lags.push(l);
        }
    }
    LagSet::new(lags).unwrap()
}

/// Trains on the first `PLANTED_TRAIN` columns, estimates the rest from link
/// flows and returns (mean SRE, mean TRE) on the held-out block.
fn held_out_errors(scenario: &SyntheticScenario, train_x: &TrafficMatrix, config: &TrainConfig) -> (f64, f64) {
    let (_, test_x) = split_train_test(&scenario.traffic, PLANTED_TRAIN).unwrap();
    let (model, _) = train(train_x, &scenario.routing, config).unwrap();
    let links = compute_link_flows(&scenario.routing, &test_x).unwrap();
    let est = estimate_window(&links, &model, &scenario.routing, &EstimatorConfig::default()).unwrap();
    let s = summary_stats(&sre(test_x.entries(), &est).unwrap()).unwrap().mean;
    let t = summary_stats(&tre(test_x.entries(), &est).unwrap()).unwrap().mean;
    (s, t)
}

fn full_training_block(scenario: &SyntheticScenario) -> TrafficMatrix {
    split_train_test(&scenario.traffic, PLANTED_TRAIN).unwrap().0
}

fn within(limit_s: u64, elapsed: Duration) -> bool {
    elapsed <= Duration::from_secs(limit_s)
}

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst = 0.0f64;
    for _ in 0..200 {
        let k = rng.random_range(1..=3);
        let t = rng.random_range(8..=30);
        let lags = random_lags(&mut rng, t);
        let h = random_nonneg(&mut rng, k, t);
        let om = random_nonneg(&mut rng, k, lags.len());
        let lap = temporal_penalty_value(&h, &om, &lags, PenaltyForm::Laplacian).unwrap();
        let res = temporal_penalty_value(&h, &om, &lags, PenaltyForm::Residual).unwrap();
        worst = worst.max((lap - res).abs() / res.abs().max(f64::MIN_POSITIVE));
    }
    let elapsed = start.elapsed();
    let detail = format!("worst relative gap {worst:.2e} over 200 instances in {elapsed:.2?}");
    if worst <= 1e-8 && within(5, elapsed) {
        Outcome::Pass(detail)
    } else {
        Outcome::Fail(detail)
    }
}

fn criterion_2() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst = 0.0f64;
    for _ in 0..20 {
        let n = rng.random_range(2..=8);
        let m = rng.random_range(2..=6);
        let k = rng.random_range(1..=3);
        let t = rng.random_range(8..=20);
        let lags = random_lags(&mut rng, t);
        let routing = random_routing(&mut rng, m, n);
        let x = random_nonneg(&mut rng, n, t);
        let w = random_nonneg(&mut rng, n, k);
        let h = random_nonneg(&mut rng, k, t);
        let om = random_nonneg(&mut rng, k, lags.len());
        let weights = RegularizationWeights::new(
            rng.random_range(0.1..2.0),
            rng.random_range(0.01..0.5),
            0.5,
            0.5,
        )
        .unwrap();
        let build = |w: &DMatrix<f64>, h: &DMatrix<f64>, om: &DMatrix<f64>| {
            FactorModel::new(w.clone(), h.clone(), om.clone(), lags.clone(), &routing).unwrap()
        };
        let model = build(&w, &h, &om);
        for block in [Block::W, Block::H, Block::Omega] {
            let g = block_gradient(block, &x, &model, &weights, &routing).unwrap();
            let base = match block {
                Block::W => w.clone(),
                Block::H => h.clone(),
                Block::Omega => om.clone(),
            };
            let step = 1e-6;
            let mut fd = DMatrix::zeros(base.nrows(), base.ncols());
            for i in 0..base.nrows() {
                for j in 0..base.ncols() {
                    let f = |delta: f64| {
                        let mut b = base.clone();
                        b[(i, j)] += delta;
                        let m = match block {
                            Block::W => build(&b, &h, &om),
                            Block::H => build(&w, &b, &om),
                            Block::Omega => build(&w, &h, &b),
                        };
                        objective_value(&x, &m, &weights, &routing).unwrap()
                    };
                    fd[(i, j)] = (f(step) - f(-step)) / (2.0 * step);
                }
            }
            let rel = (&g - &fd).norm() / fd.norm().max(f64::MIN_POSITIVE);
            worst = worst.max(rel);
        }
    }
    let elapsed = start.elapsed();
    let detail = format!("worst relative error {worst:.2e} over 20 points x 3 blocks in {elapsed:.2?}");
    if worst <= 1e-5 && within(10, elapsed) {
        Outcome::Pass(detail)
    } else {
        Outcome::Fail(detail)
    }
}

fn criterion_3() -> Outcome {
    let start = Instant::now();
    let scenario = generate_synthetic(PLANTED_ROUTERS, PLANTED_RANK, PLANTED_TRAIN, &planted_lags(), 0.0, PLANTED_SEED)
        .unwrap();
    let masked = TrafficMatrix::with_mask(
        scenario.traffic.entries().clone(),
        random_mask(30, PLANTED_TRAIN, 0.2, 7).unwrap(),
    )
    .unwrap();
    let mut worst_rise = f64::NEG_INFINITY;
    let mut runs = Vec::new();
    for (beta, data, mode) in [
        (0.2, &scenario.traffic, MissingMode::None),
        (0.5, &scenario.traffic, MissingMode::None),
        (0.0, &scenario.traffic, MissingMode::None),
        (0.2, &masked, MissingMode::EmMask),
    ] {
        let mut config = TrainConfig::new(PLANTED_RANK, planted_lags());
        config.beta_h = beta;
        config.beta_a = beta;
        config.missing_mode = mode;
        let (_, report) = train(data, &scenario.routing, &config).unwrap();
        for pair in report.objective_trace.windows(2) {
            worst_rise = worst_rise.max(pair[1] - pair[0]);
        }
        runs.push(report.outer_iterations());
    }
    let elapsed = start.elapsed();
    let detail = format!(
        "largest e(q) increase {worst_rise:.2e} over runs with {runs:?} outer iterations (cap 50) in {elapsed:.2?}"
    );
    if worst_rise <= 1e-12 && within(30, elapsed) {
        Outcome::Pass(detail)
    } else {
        Outcome::Fail(detail)
    }
}

fn criterion_4() -> (Outcome, f64) {
    let start = Instant::now();
    let scenario = planted(PLANTED_SEED);
    let config = TrainConfig::new(PLANTED_RANK, planted_lags());
    let (_, mean_tre) = held_out_errors(&scenario, &full_training_block(&scenario), &config);
    let elapsed = start.elapsed();
    let detail = format!(
        "mean test TRE {mean_tre:.4} (bound {PLANTED_TRE_BOUND:.4}, oracle {PLANTED_TRE_ORACLE}) in {elapsed:.2?}"
    );
    let outcome = if mean_tre <= PLANTED_TRE_BOUND && within(60, elapsed) {
        Outcome::Pass(detail)
    } else {
        Outcome::Fail(detail)
    };
    (outcome, mean_tre)
}

fn criterion_5() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut worst_shift = 0.0f64;
    let mut min_entry = f64::INFINITY;
    let one_step = EstimatorConfig { r_max_em: 1, ..Default::default() };
    for _ in 0..100 {
        let n = rng.random_range(2..=12);
        let m = rng.random_range(2..=10);
        let k = rng.random_range(1..=n.min(4));
        let routing = random_routing(&mut rng, m, n);

        let x = DVector::from_fn(n, |_, _| rng.random_range(0.01..5.0));
        let y = routing.entries() * &x;
        let x1 = refine_em(&x, &y, &routing, &one_step).unwrap();
        worst_shift = worst_shift.max((&x1 - &x).norm() / x.norm());

        let model = FactorModel::new(
            random_nonneg(&mut rng, n, k),
            random_nonneg(&mut rng, k, 3),
            DMatrix::zeros(k, 0),
            LagSet::empty(),
            &routing,
        )
        .unwrap();
        let y_any = DVector::from_fn(m, |_, _| rng.random_range(0.0..10.0));
        let est = estimate_od_flow(&y_any, &model, &routing, &EstimatorConfig::default()).unwrap();
        min_entry = min_entry.min(est.min());
    }
    let detail = format!("largest one-step relative change {worst_shift:.2e}; smallest estimate entry {min_entry:.2e}");
    if worst_shift < 1e-12 && min_entry >= 0.0 {
        Outcome::Pass(detail)
    } else {
        Outcome::Fail(detail)
    }
}

fn criterion_6(full_tre: f64) -> Outcome {
    let start = Instant::now();
    let scenario = planted(PLANTED_SEED);
    let full = full_training_block(&scenario);
    let mask = random_mask(full.od_pairs(), full.timestamps(), 0.2, PLANTED_SEED + 1).unwrap();
    let partial = TrafficMatrix::with_mask(full.entries().clone(), mask).unwrap();
    let mut parts = Vec::new();
    let mut ok = true;
    for mode in [MissingMode::EmMask, MissingMode::WeightedFill] {
        let mut config = TrainConfig::new(PLANTED_RANK, planted_lags());
        config.missing_mode = mode;
        let (_, t) = held_out_errors(&scenario, &partial, &config);
        let degradation = (t - full_tre) / full_tre;
        ok &= degradation <= 0.5;
        parts.push(format!("{mode}: TRE {t:.4} ({:+.1}%)", 100.0 * degradation));
    }
    let detail = format!("full-data TRE {full_tre:.4}; {} in {:.2?}", parts.join(", "), start.elapsed());
    if ok {
        Outcome::Pass(detail)
    } else {
        Outcome::Fail(detail)
    }
}

fn criterion_7() -> Outcome {
    let start = Instant::now();
    let (mut with, mut without) = (0.0, 0.0);
    let seeds = 0..5u64;
    for seed in seeds.clone() {
        let scenario = planted(seed);
        let data = full_training_block(&scenario);
        let mut config = TrainConfig::new(PLANTED_RANK, planted_lags());
        config.beta_h = 0.5;
        config.beta_a = 0.5;
        with += held_out_errors(&scenario, &data, &config).0;
        config.beta_h = 0.0;
        config.beta_a = 0.0;
        without += held_out_errors(&scenario, &data, &config).0;
    }
    let count = seeds.count() as f64;
    let (with, without) = (with / count, without / count);
    let detail = format!(
        "mean SRE over seeds 0-4: both regularizers (beta 0.5) {with:.4}, none {without:.4} in {:.2?}",
        start.elapsed()
    );
    if with <= without {
        Outcome::Pass(detail)
    } else {
        Outcome::Fail(detail)
    }
}

fn criterion_8() -> Outcome {
    let Some(dir) = std::env::var_os("TTNMF_INTERNET2_DIR").map(PathBuf::from) else {
        return Outcome::Skipped("TTNMF_INTERNET2_DIR not set".into());
    };
    let routing = load_routing_csv(&dir.join("routing.csv")).unwrap();
    let traffic = load_traffic_csv(&dir.join("traffic.csv"), None).unwrap();
    if traffic.timestamps() < 3168 {
        return Outcome::Fail(format!("expected 3168 timestamps, found {}", traffic.timestamps()));
    }
    let (train_x, rest) = split_train_test(&traffic, 2016).unwrap();
    let (test_x, _) = if rest.timestamps() > 1152 {
        split_train_test(&rest, 1152).unwrap()
    } else {
        (rest.clone(), rest)
    };
    let config = TrainConfig::internet2();
    let (model, _) = train(&train_x, &routing, &config).unwrap();
    let links = compute_link_flows(&routing, &test_x).unwrap();
    let est = estimate_window(&links, &model, &routing, &EstimatorConfig::default()).unwrap();
    let s = summary_stats(&sre(test_x.entries(), &est).unwrap()).unwrap().mean;
    let t = summary_stats(&tre(test_x.entries(), &est).unwrap()).unwrap().mean;
    let detail = format!("mean TRE {t:.3} (target 0.18 +/- 0.05), mean SRE {s:.3} (target 0.39 +/- 0.10)");
    if (t - 0.18).abs() <= 0.05 && (s - 0.39).abs() <= 0.10 {
        Outcome::Pass(detail)
    } else {
        Outcome::Fail(detail)
    }
}

fn ttnmf(args: &[&str]) -> i32 {
    Command::new(env!("CARGO_BIN_EXE_ttnmf"))
        .args(args)
        .status()
        .expect("binary runs")
        .code()
        .unwrap_or(-1)
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

/// synth -> split -> train -> estimate -> evaluate in `root`; returns every
/// exit code in order.
fn pipeline(root: &Path) -> Vec<i32> {
    let data = root.join("data");
    let model = root.join("model");
    let est = root.join("estimate");
    let eval = root.join("eval");
    let self_eval = root.join("self_eval");
    vec![
        ttnmf(&["synth", "--seed", "42", "--out", p(&data)]),
        ttnmf(&["split", "--input", p(&data.join("traffic.csv")), "--train-t", "300", "--out", p(&data)]),
        ttnmf(&["split", "--input", p(&data.join("linkflows.csv")), "--train-t", "300", "--out", p(&data)]),
        ttnmf(&[
            "train", "--routing", p(&data.join("routing.csv")), "--traffic", p(&data.join("traffic_train.csv")),
            "--rank", "4", "--lags", "1,2", "--beta-h", "0.2", "--beta-a", "0.2", "--out", p(&model),
        ]),
        ttnmf(&["estimate", "--model", p(&model.join("model.ttnmf")), "--links", p(&data.join("linkflows_test.csv")), "--out", p(&est)]),
        ttnmf(&["evaluate", "--truth", p(&data.join("traffic_test.csv")), "--estimate", p(&est.join("estimate.csv")), "--out", p(&eval)]),
        ttnmf(&["evaluate", "--truth", p(&data.join("traffic_test.csv")), "--estimate", p(&data.join("traffic_test.csv")), "--out", p(&self_eval)]),
    ]
}

const REPORTS: [&str; 5] = ["sre.csv", "tre.csv", "stats.csv", "cdf_sre.csv", "cdf_tre.csv"];

/// Every output except the wall-clock column of the training trace.
fn deterministic_outputs(root: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files = vec![
        "data/routing.csv", "data/traffic.csv", "data/linkflows.csv", "data/traffic_train.csv",
        "data/traffic_test.csv", "data/linkflows_test.csv", "model/model.ttnmf", "estimate/estimate.csv",
    ]
    .into_iter()
    .map(String::from)
    .collect::<Vec<_>>();
    files.extend(REPORTS.iter().map(|r| format!("eval/{r}")));
    let mut out: Vec<(String, Vec<u8>)> =
        files.into_iter().map(|f| { let b = std::fs::read(root.join(&f)).unwrap_or_default(); (f, b) }).collect();
    let trace = std::fs::read_to_string(root.join("model/trace.csv")).unwrap_or_default();
    let q_and_e: String = trace
        .lines()
        .map(|l| l.rsplit_once(',').map_or(l, |(head, _)| head).to_string() + "\n")
        .collect();
    out.push(("model/trace.csv[q,e_q]".into(), q_and_e.into_bytes()));
    out
}

fn criterion_9() -> Outcome {
    let tmp = tempfile::tempdir().unwrap();
    let (a, b) = (tmp.path().join("run_a"), tmp.path().join("run_b"));
    let codes_a = pipeline(&a);
    let codes_b = pipeline(&b);
    if codes_a.iter().chain(&codes_b).any(|&c| c != 0) {
        return Outcome::Fail(format!("exit codes {codes_a:?} / {codes_b:?}"));
    }
    let missing: Vec<&str> = REPORTS.iter().copied().filter(|r| !a.join("eval").join(r).is_file()).collect();
    if !missing.is_empty() {
        return Outcome::Fail(format!("missing reports {missing:?}"));
    }
    let all_zero = ["sre.csv", "tre.csv"].iter().all(|f| {
        std::fs::read_to_string(a.join("self_eval").join(f))
            .unwrap()
            .lines()
            .all(|l| l.parse::<f64>() == Ok(0.0))
    });
    if !all_zero {
        return Outcome::Fail("evaluate(X, X) produced non-zero errors".into());
    }
    let differing: Vec<String> = deterministic_outputs(&a)
        .into_iter()
        .zip(deterministic_outputs(&b))
        .filter(|(x, y)| x.1.is_empty() || x.1 != y.1)
        .map(|(x, _)| x.0)
        .collect();
    if !differing.is_empty() {
        return Outcome::Fail(format!("outputs differ between runs: {differing:?}"));
    }
    Outcome::Pass("pipeline exits 0, five reports written, self-evaluation all zero, rerun byte-identical".into())
}

fn main() {
    let (c4, full_tre) = criterion_4();
    let results: Vec<(u32, &str, Outcome)> = vec![
        (1, "regularizer-form equivalence", criterion_1()),
        (2, "gradient correctness", criterion_2()),
        (3, "training monotonicity", criterion_3()),
        (4, "planted recovery", c4),
        (5, "EM fixed point and nonnegativity", criterion_5()),
        (6, "missing-entry robustness", criterion_6(full_tre)),
        (7, "ablation direction", criterion_7()),
        (8, "dataset reproduction", criterion_8()),
        (9, "CLI round trip", criterion_9()),
    ];
    let mut failed = Vec::new();
    for (id, name, outcome) in &results {
        let (tag, detail) = match outcome {
            Outcome::Pass(d) => ("PASS", d),
            Outcome::Fail(d) => {
                failed.push(*id);
                ("FAIL", d)
            }
            Outcome::Skipped(d) => ("SKIPPED", d),
        };
        println!("criterion {id} [{tag}] {name}: {detail}");
    }
    if !failed.is_empty() {
        eprintln!("failed criteria: {failed:?}");
        std::process::exit(1);
    }
}
