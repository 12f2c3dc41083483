//! Command-line workflow: synth -> split -> train -> estimate -> evaluate.
//!
//! Exit codes: 0 success, 1 usage or configuration error, 2 data validation
//! error, 3 numerical failure.

use std::ffi::OsString;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use log::info;

use crate::error::{Result, TomographyError};
use crate::estimator::{estimate_window, EstimatorConfig};
use crate::io::archive::ModelArchive;
use crate::io::config::{Profile, RunConfig};
use crate::io::matrix_csv::{
    format_value, load_link_flow_csv, load_matrix_csv, load_routing_csv, load_traffic_csv,
    write_indicator_csv, write_matrix_csv, MatrixKind,
};
use crate::lags::LagSet;
use crate::metrics::{cdf_points, sre, summary_stats, tre, ErrorVector};
use crate::network::{compute_link_flows, split_train_test, TrafficMatrix};
use crate::synth::{generate_synthetic, random_mask};
use crate::trainer::{train, MissingMode};

const AFTER_HELP: &str = "\
Matrix files are headerless row-major CSV ('#' starts a comment line):
  routing   links x OD pairs, entries 0 or 1
  traffic   OD pairs x timestamps, entries >= 0
  mask      same shape as traffic, 1 = observed
  links     links x timestamps, entries >= 0

Every flag can also be set in a --config file as `key = value`
(dashes become underscores). Flags override the file.
Set TTNMF_LOG=error|warn|info|debug for diagnostics on stderr.

Exit codes: 0 ok, 1 usage/config, 2 data validation, 3 numerical failure.";

#[derive(Debug, Parser)]
#[command(name = "ttnmf", version, about = "Traffic-matrix estimation from link counts", after_help = AFTER_HELP)]
pub struct Cli {
    /// Flat key = value configuration file.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a planted scenario: routing.csv, traffic.csv, linkflows.csv and optionally mask.csv.
    Synth(SynthArgs),
    /// Cut a matrix into a leading training block and the remaining test block.
    Split(SplitArgs),
    /// Train a model; writes model.ttnmf and trace.csv.
    Train(TrainArgs),
    /// Estimate OD flows from link flows; writes estimate.csv.
    Estimate(EstimateArgs),
    /// Compare estimated and true OD flows; writes sre.csv, tre.csv, stats.csv, cdf_sre.csv, cdf_tre.csv.
    Evaluate(EvaluateArgs),
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Number of routers; the scenario has routers * (routers - 1) OD pairs.
    #[arg(long)]
    pub routers: Option<usize>,
    #[arg(long)]
    pub rank: Option<usize>,
    #[arg(long)]
    pub timestamps: Option<usize>,
    #[arg(long)]
    pub lags: Option<String>,
    /// Relative standard deviation of multiplicative noise.
    #[arg(long)]
    pub noise: Option<f64>,
    /// Also write mask.csv hiding this fraction of entries.
    #[arg(long)]
    pub missing_fraction: Option<f64>,
}

#[derive(Debug, Args)]
pub struct SplitArgs {
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// Number of leading columns in the training block.
    #[arg(long)]
    pub train_t: Option<usize>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub routing: Option<PathBuf>,
    #[arg(long)]
    pub traffic: Option<PathBuf>,
    #[arg(long)]
    pub mask: Option<PathBuf>,
    /// Preset: internet2, geant or none.
    #[arg(long)]
    pub profile: Option<String>,
    #[arg(long)]
    pub rank: Option<usize>,
    /// Comma-separated lags, e.g. 1,2,24.
    #[arg(long)]
    pub lags: Option<String>,
    #[arg(long)]
    pub beta_h: Option<f64>,
    #[arg(long)]
    pub beta_a: Option<f64>,
    /// none, weighted_fill or em_mask.
    #[arg(long)]
    pub missing_mode: Option<String>,
    #[arg(long)]
    pub q_max: Option<usize>,
    /// Accepted for uniformity; training is deterministic.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EstimateArgs {
    #[arg(long)]
    pub model: Option<PathBuf>,
    #[arg(long)]
    pub links: Option<PathBuf>,
    #[arg(long)]
    pub q_max_gd: Option<usize>,
    #[arg(long)]
    pub r_max_em: Option<usize>,
    #[arg(long)]
    pub delta_gd: Option<f64>,
    #[arg(long)]
    pub delta_em: Option<f64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub truth: Option<PathBuf>,
    #[arg(long)]
    pub estimate: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Parses `args` (including the program name), runs the command and
/// returns the process exit code. Errors are reported on stderr.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    match execute(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("ttnmf: {e}");
            e.exit_code()
        }
    }
}

pub fn execute(cli: Cli) -> Result<()> {
    let file = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    match cli.command {
        Command::Synth(a) => synth(a, file),
        Command::Split(a) => split(a, file),
        Command::Train(a) => train_cmd(a, file),
        Command::Estimate(a) => estimate(a, file),
        Command::Evaluate(a) => evaluate(a, file),
    }
}

fn required<T>(flag: Option<T>, file: Option<T>, name: &str) -> Result<T> {
    flag.or(file)
        .ok_or_else(|| TomographyError::Usage(format!("--{name} is required")))
}

fn input_path(flag: Option<PathBuf>, file: Option<PathBuf>, name: &str) -> Result<PathBuf> {
    let p = required(flag, file, name)?;
    if !p.is_file() {
        return Err(TomographyError::Config(format!(
            "--{name}: {} does not exist",
            p.display()
        )));
    }
    Ok(p)
}

fn output_dir(flag: Option<PathBuf>, file: Option<PathBuf>) -> Result<PathBuf> {
    let dir = required(flag, file, "out")?;
    std::fs::create_dir_all(&dir)?;
    Ok(dir)
}

fn synth(a: SynthArgs, f: RunConfig) -> Result<()> {
    let out = output_dir(a.out, f.out)?;
    let seed = a.seed.or(f.seed).unwrap_or(42);
    let lags: LagSet = a.lags.or(f.lags).as_deref().unwrap_or("1,2").parse()?;
    let scenario = generate_synthetic(
        a.routers.or(f.routers).unwrap_or(6),
        a.rank.or(f.rank).unwrap_or(4),
        a.timestamps.or(f.timestamps).unwrap_or(400),
        &lags,
        a.noise.or(f.noise).unwrap_or(0.0),
        seed,
    )?;
    write_indicator_csv(&out.join("routing.csv"), scenario.routing.entries())?;
    write_matrix_csv(&out.join("traffic.csv"), scenario.traffic.entries())?;
    let links = compute_link_flows(&scenario.routing, &scenario.traffic)?;
    write_matrix_csv(&out.join("linkflows.csv"), links.entries())?;
    if let Some(fraction) = a.missing_fraction.or(f.missing_fraction) {
        let x = scenario.traffic.entries();
        // Offset the seed so the mask is not correlated with the scenario draws.
        let mask = random_mask(x.nrows(), x.ncols(), fraction, seed.wrapping_add(1))?;
        write_indicator_csv(&out.join("mask.csv"), &mask)?;
    }
    info!("wrote scenario to {}", out.display());
    Ok(())
}

fn split(a: SplitArgs, f: RunConfig) -> Result<()> {
    let input = input_path(a.input, f.input, "input")?;
    let train_t = required(a.train_t, f.train_t, "train-t")?;
    let out = output_dir(a.out, f.out)?;
    let m = TrafficMatrix::new(load_matrix_csv(&input, MatrixKind::Traffic)?)?;
    let (head, tail) = split_train_test(&m, train_t)?;
    let stem = input
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "matrix".into());
    write_matrix_csv(&out.join(format!("{stem}_train.csv")), head.entries())?;
    write_matrix_csv(&out.join(format!("{stem}_test.csv")), tail.entries())?;
    Ok(())
}

fn train_cmd(a: TrainArgs, f: RunConfig) -> Result<()> {
    let routing_path = input_path(a.routing, f.routing, "routing")?;
    let traffic_path = input_path(a.traffic, f.traffic, "traffic")?;
    let mask_path = match a.mask.or(f.mask) {
        Some(p) => Some(input_path(Some(p), None, "mask")?),
        None => None,
    };
    let profile: Profile = a.profile.or(f.profile).as_deref().unwrap_or("none").parse()?;
    let mut config = profile.train_config();
    if let Some(k) = a.rank.or(f.rank) {
        config.rank = k;
    }
    if let Some(l) = a.lags.or(f.lags) {
        config.lag_set = l.parse()?;
    }
    if let Some(b) = a.beta_h.or(f.beta_h) {
        config.beta_h = b;
    }
    if let Some(b) = a.beta_a.or(f.beta_a) {
        config.beta_a = b;
    }
    if let Some(m) = a.missing_mode.or(f.missing_mode) {
        config.missing_mode = m.parse::<MissingMode>()?;
    }
    if let Some(q) = a.q_max.or(f.q_max) {
        config.q_max = q;
    }
    let out = output_dir(a.out, f.out)?;

    let routing = load_routing_csv(&routing_path)?;
    let traffic = load_traffic_csv(&traffic_path, mask_path.as_deref())?;
    let (model, report) = train(&traffic, &routing, &config)?;

    let archive = ModelArchive::from_training(model, routing, report.weights, &config, &traffic);
    archive.save(&out.join("model.ttnmf"))?;

    let mut trace = BufWriter::new(File::create(out.join("trace.csv"))?);
    writeln!(trace, "q,e_q,wall_ms")?;
    for (q, (e, ms)) in report.objective_trace.iter().zip(&report.elapsed_ms).enumerate() {
        writeln!(trace, "{q},{},{ms:.3}", format_value(*e))?;
    }
    trace.flush()?;
    info!(
        "trained rank {} in {} outer iterations",
        config.rank,
        report.outer_iterations()
    );
    Ok(())
}

fn estimate(a: EstimateArgs, f: RunConfig) -> Result<()> {
    let model_path = input_path(a.model, f.model, "model")?;
    let links_path = input_path(a.links, f.links, "links")?;
    let defaults = EstimatorConfig::default();
    let config = EstimatorConfig {
        q_max_gd: a.q_max_gd.or(f.q_max_gd).unwrap_or(defaults.q_max_gd),
        r_max_em: a.r_max_em.or(f.r_max_em).unwrap_or(defaults.r_max_em),
        delta_gd: a.delta_gd.or(f.delta_gd).unwrap_or(defaults.delta_gd),
        delta_em: a.delta_em.or(f.delta_em).unwrap_or(defaults.delta_em),
    };
    let out = output_dir(a.out, f.out)?;
    let archive = ModelArchive::load(&model_path)?;
    let links = load_link_flow_csv(&links_path)?;
    if links.links() != archive.routing.links() {
        return Err(TomographyError::shape(
            "link-flow rows vs model links",
            archive.routing.links(),
            links.links(),
        ));
    }
    let x = estimate_window(&links, &archive.model, &archive.routing, &config)?;
    write_matrix_csv(&out.join("estimate.csv"), &x)
}

fn write_errors(path: &Path, e: &ErrorVector) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    for &v in &e.values {
        writeln!(w, "{}", format_value(v))?;
    }
    w.flush()?;
    Ok(())
}

fn write_cdf(path: &Path, e: &ErrorVector) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "value,fraction")?;
    for (v, p) in cdf_points(e) {
        writeln!(w, "{},{}", format_value(v), format_value(p))?;
    }
    w.flush()?;
    Ok(())
}

fn evaluate(a: EvaluateArgs, f: RunConfig) -> Result<()> {
    let truth_path = input_path(a.truth, f.truth, "truth")?;
    let est_path = input_path(a.estimate, f.estimate, "estimate")?;
    let out = output_dir(a.out, f.out)?;
    let truth = load_matrix_csv(&truth_path, MatrixKind::Traffic)?;
    let est = load_matrix_csv(&est_path, MatrixKind::Traffic)?;
    let s = sre(&truth, &est)?;
    let t = tre(&truth, &est)?;
    write_errors(&out.join("sre.csv"), &s)?;
    write_errors(&out.join("tre.csv"), &t)?;
    write_cdf(&out.join("cdf_sre.csv"), &s)?;
    write_cdf(&out.join("cdf_tre.csv"), &t)?;

    let ss = summary_stats(&s)?;
    let ts = summary_stats(&t)?;
    let mut w = BufWriter::new(File::create(out.join("stats.csv"))?);
    writeln!(w, "# defined values: sre {} of {}, tre {} of {}", ss.count, s.len(), ts.count, t.len())?;
    writeln!(w, "statistic,sre,tre")?;
    for (name, a, b) in [
        ("min", ss.min, ts.min),
        ("max", ss.max, ts.max),
        ("mean", ss.mean, ts.mean),
        ("median", ss.median, ts.median),
        ("std", ss.std, ts.std),
    ] {
        writeln!(w, "{name},{},{}", format_value(a), format_value(b))?;
    }
    w.flush()?;
    Ok(())
}
