//! `ntfcast`: run the factorization + GA-ARIMA forecasting pipeline, its
//! baselines and seed studies from a TOML config.
//!
//! Exit codes: 0 success, 1 config or dataset validation error, 2 runtime
//! failure.

mod config;
mod output;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use ntfcast_core::ntf::{self, RankPoint};
use ntfcast_core::pipeline::{self, EnsembleReport, RunOutcome};
use ntfcast_core::synthetic::{self, PlantedSpec};
use ntfcast_core::{dataset, DemandTensor, Error as CoreError, EvaluationReport};

use config::{Format, RunConfig};
use output::Artifacts;

/// Long-term demand forecasting with tensor factorization and GA-tuned ARIMA.
#[derive(Debug, Parser)]
#[command(name = "ntfcast", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct ConfigArg {
    /// Path to the TOML run config.
    #[arg(short, long)]
    config: PathBuf,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Factorize the whole dataset and emit the accuracy trace and factors.
    Factorize(ConfigArg),
    /// Reconstruction accuracy for each rank in `[rank_sweep]` (default 1..=12).
    RankSweep(ConfigArg),
    /// The full method: NTF on training years, GA over per-factor ARIMA orders.
    Run(ConfigArg),
    /// One fixed-order ARIMA per (utility, industry) series.
    BaselineNoNtf(ConfigArg),
    /// NTF with every factor forecast by the fixed `[baseline]` orders.
    BaselineNoGa(ConfigArg),
    /// The full method once per seed, sorted by validation accuracy.
    Seeds(ConfigArg),
    /// Top-k average of the seed runs.
    Ensemble(ConfigArg),
    /// Print a summary table of one or more report.json files or output directories.
    Report {
        #[arg(required = true)]
        paths: Vec<PathBuf>,
    },
    /// Write a planted low-rank dataset (trend + AR(1) factors, multiplicative noise).
    Synth(SynthArgs),
}

#[derive(Debug, Args)]
struct SynthArgs {
    /// Destination CSV file.
    #[arg(short, long)]
    out: PathBuf,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[arg(long, default_value_t = 10)]
    utilities: usize,
    #[arg(long, default_value_t = 10)]
    industries: usize,
    #[arg(long, default_value_t = 42)]
    years: usize,
    #[arg(long, default_value_t = 2)]
    rank: usize,
    #[arg(long, default_value_t = 1974)]
    first_year: i32,
    /// Standard deviation of the multiplicative noise.
    #[arg(long, default_value_t = 0.05)]
    noise: f64,
}

enum Failure {
    Config(anyhow::Error),
    Runtime(anyhow::Error),
}

trait Phase<T> {
    fn invalid(self) -> Result<T, Failure>;
    fn runtime(self) -> Result<T, Failure>;
}

impl<T, E: Into<anyhow::Error>> Phase<T> for Result<T, E> {
    fn invalid(self) -> Result<T, Failure> {
        self.map_err(|e| Failure::Config(e.into()))
    }

    fn runtime(self) -> Result<T, Failure> {
        self.map_err(|e| Failure::Runtime(e.into()))
    }
}

/// Pipeline errors that mean the inputs were wrong rather than a fit failing.
fn classify(e: CoreError) -> Failure {
    match e {
        CoreError::InvalidConfig(_)
        | CoreError::YearOutOfRange { .. }
        | CoreError::SeriesTooShort { .. }
        | CoreError::Dataset { .. }
        | CoreError::IncompleteGrid { .. }
        | CoreError::DatasetFormat(_) => Failure::Config(e.into()),
        _ => Failure::Runtime(e.into()),
    }
}

fn checked<T>(r: ntfcast_core::Result<T>) -> Result<T, Failure> {
    r.map_err(classify)
}

#[derive(Debug, Serialize, Deserialize)]
struct FactorizationReport {
    dims: [usize; 3],
    rank: usize,
    iterations: usize,
    seed: u64,
    epsilon: f64,
    final_accuracy: f64,
    final_kl: f64,
}

#[derive(Debug, Serialize, Deserialize)]
struct RankSweepReport {
    iterations: usize,
    seed: u64,
    points: Vec<RankPoint>,
}

#[derive(Debug, Serialize, Deserialize)]
struct SeedsReport {
    pattern_label: String,
    /// Best validation accuracy first.
    runs: Vec<EvaluationReport>,
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum AnyReport {
    Evaluation(Box<EvaluationReport>),
    Ensemble(EnsembleReport),
    Seeds(SeedsReport),
    Factorization(FactorizationReport),
    RankSweep(RankSweepReport),
}

struct Loaded {
    cfg: RunConfig,
    data: DemandTensor,
}

fn load(arg: &ConfigArg) -> Result<Loaded, Failure> {
    let cfg = RunConfig::load(&arg.config).invalid()?;
    let path = cfg.data_path().invalid()?;
    let data = dataset::read_csv_path(&path)
        .with_context(|| format!("reading dataset {}", path.display()))
        .invalid()?;
    log::info!("loaded {} with dims {:?}", path.display(), data.dims());
    Ok(Loaded { cfg, data })
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
        Err(Failure::Runtime(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn dispatch(command: Command) -> Result<(), Failure> {
    let (cfg, out) = match command {
        Command::Report { paths } => return print_reports(&paths),
        Command::Synth(args) => return synth(&args),
        Command::Factorize(arg) => factorize(load(&arg)?)?,
        Command::RankSweep(arg) => rank_sweep(load(&arg)?)?,
        Command::Run(arg) => run(load(&arg)?)?,
        Command::BaselineNoNtf(arg) => baseline_no_ntf(load(&arg)?)?,
        Command::BaselineNoGa(arg) => baseline_no_ga(load(&arg)?)?,
        Command::Seeds(arg) => seeds(load(&arg)?)?,
        Command::Ensemble(arg) => ensemble(load(&arg)?)?,
    };
    let dir = cfg.output_dir();
    let written: Vec<String> = out.names().map(str::to_string).collect();
    out.commit(&dir).runtime()?;
    for name in written {
        println!("{}", dir.join(name).display());
    }
    Ok(())
}

fn factorize(Loaded { cfg, data }: Loaded) -> Result<(RunConfig, Artifacts), Failure> {
    let ntf_cfg = cfg.ntf_config().invalid()?;
    let result = checked(ntf::factorize(&data, &ntf_cfg))?;
    let (ni, nj, nk) = data.dims();
    let report = FactorizationReport {
        dims: [ni, nj, nk],
        rank: ntf_cfg.rank,
        iterations: ntf_cfg.iterations,
        seed: ntf_cfg.seed,
        epsilon: ntf_cfg.epsilon,
        final_accuracy: result.final_accuracy,
        final_kl: result.kl_trace.last().copied().unwrap_or(f64::NAN),
    };
    let mut out = Artifacts::default();
    if cfg.wants(Format::Json) {
        out.json("report.json", &report).runtime()?;
    }
    if cfg.wants(Format::Csv) {
        trace_csv(&mut out, &result).runtime()?;
        let year_labels: Vec<String> = data.year_labels().iter().map(i32::to_string).collect();
        let mut rows = Vec::new();
        let modes = [
            ("utility", data.utility_labels(), result.model.factor_a()),
            ("industry", data.industry_labels(), result.model.factor_b()),
            ("year", year_labels.as_slice(), result.model.factor_c()),
        ];
        for (mode, labels, factor) in modes {
            for ((i, r), v) in factor.indexed_iter() {
                rows.push(vec![mode.to_string(), labels[i].clone(), r.to_string(), v.to_string()]);
            }
        }
        out.csv("factors.csv", &["mode", "label", "component", "value"], rows)
            .runtime()?;
    }
    Ok((cfg, out))
}

fn rank_sweep(Loaded { cfg, data }: Loaded) -> Result<(RunConfig, Artifacts), Failure> {
    let sweep = cfg.rank_sweep().invalid()?;
    let seed = cfg
        .ntf
        .map(|n| n.seed)
        .unwrap_or(ntfcast_core::NtfConfig::default().seed);
    let points = checked(ntf::rank_sweep(&data, &sweep.ranks, sweep.iterations, seed))?;
    let mut out = Artifacts::default();
    if cfg.wants(Format::Csv) {
        let rows = points.iter().map(|p| [p.rank.to_string(), p.accuracy.to_string()]);
        out.csv("rank_sweep.csv", &["rank", "accuracy"], rows).runtime()?;
    }
    if cfg.wants(Format::Json) {
        let report = RankSweepReport {
            iterations: sweep.iterations,
            seed,
            points,
        };
        out.json("report.json", &report).runtime()?;
    }
    Ok((cfg, out))
}

fn run(Loaded { cfg, data }: Loaded) -> Result<(RunConfig, Artifacts), Failure> {
    let pattern = cfg.pattern_config().invalid()?;
    let ntf_cfg = cfg.ntf_config().invalid()?;
    let ga_cfg = cfg.ga_config().invalid()?;
    checked(pattern.split.validate_for(&data))?;
    let outcome = checked(pipeline::run_proposed(&data, &pattern, &ntf_cfg, &ga_cfg))?;
    let out = outcome_artifacts(&cfg, &outcome).runtime()?;
    Ok((cfg, out))
}

fn baseline_no_ntf(Loaded { cfg, data }: Loaded) -> Result<(RunConfig, Artifacts), Failure> {
    let pattern = cfg.pattern_config().invalid()?;
    let spec = cfg.baseline_spec().invalid()?;
    checked(pattern.split.validate_for(&data))?;
    let outcome = checked(pipeline::run_without_ntf(&data, &pattern, spec))?;
    let out = outcome_artifacts(&cfg, &outcome).runtime()?;
    Ok((cfg, out))
}

fn baseline_no_ga(Loaded { cfg, data }: Loaded) -> Result<(RunConfig, Artifacts), Failure> {
    let pattern = cfg.pattern_config().invalid()?;
    let ntf_cfg = cfg.ntf_config().invalid()?;
    let spec = cfg.baseline_spec().invalid()?;
    checked(pattern.split.validate_for(&data))?;
    let outcome = checked(pipeline::run_without_ga(&data, &pattern, &ntf_cfg, spec))?;
    let out = outcome_artifacts(&cfg, &outcome).runtime()?;
    Ok((cfg, out))
}

fn seed_runs(cfg: &RunConfig, data: &DemandTensor) -> Result<Vec<pipeline::SeedRun>, Failure> {
    let pattern = cfg.pattern_config().invalid()?;
    let ntf_cfg = cfg.ntf_config().invalid()?;
    let ga_cfg = cfg.ga_config().invalid()?;
    checked(pattern.split.validate_for(data))?;
    checked(pipeline::seed_sensitivity(
        data,
        &pattern,
        &ntf_cfg,
        &ga_cfg,
        &cfg.seed_list(),
    ))
}

fn seeds_csv(out: &mut Artifacts, runs: &[pipeline::SeedRun]) -> anyhow::Result<()> {
    let rows = runs.iter().map(|r| {
        [
            r.seed.to_string(),
            r.validation_accuracy.to_string(),
            r.outcome.report.mse_total.to_string(),
            r.outcome.report.reconstruction_accuracy.to_string(),
            r.outcome.report.dof.to_string(),
        ]
    });
    out.csv(
        "seeds.csv",
        &[
            "seed",
            "validation_accuracy",
            "mse_total",
            "reconstruction_accuracy",
            "dof",
        ],
        rows,
    )
}

fn seeds(Loaded { cfg, data }: Loaded) -> Result<(RunConfig, Artifacts), Failure> {
    let runs = seed_runs(&cfg, &data)?;
    let mut out = Artifacts::default();
    if cfg.wants(Format::Json) {
        let report = SeedsReport {
            pattern_label: cfg.pattern_config().invalid()?.label,
            runs: runs.iter().map(|r| r.outcome.report.clone()).collect(),
        };
        out.json("report.json", &report).runtime()?;
    }
    if cfg.wants(Format::Csv) {
        seeds_csv(&mut out, &runs).runtime()?;
    }
    Ok((cfg, out))
}

fn ensemble(Loaded { cfg, data }: Loaded) -> Result<(RunConfig, Artifacts), Failure> {
    let runs = seed_runs(&cfg, &data)?;
    let ens = checked(pipeline::ensemble_topk(&runs, cfg.top_k()))?;
    let mut out = Artifacts::default();
    if cfg.wants(Format::Json) {
        out.json("report.json", &ens.report).runtime()?;
    }
    if cfg.wants(Format::Csv) {
        let totals = ens.report.per_year.iter().map(totals_row);
        out.csv("totals.csv", &TOTALS_HEADER, totals).runtime()?;
        seeds_csv(&mut out, &runs).runtime()?;
        let years: Vec<i32> = ens.report.per_year.iter().map(|y| y.year).collect();
        let (us, is) = (data.utility_labels(), data.industry_labels());
        out.tensor_csv("forecast.csv", us, is, &years, &ens.predicted_test)
            .runtime()?;
        for seed in &ens.report.seeds {
            let member = runs
                .iter()
                .find(|r| r.seed == *seed)
                .expect("ensemble seeds come from the runs");
            out.tensor_csv(
                &format!("member_seed_{seed}.csv"),
                us,
                is,
                &years,
                &member.outcome.predicted_test,
            )
            .runtime()?;
        }
    }
    Ok((cfg, out))
}

const TOTALS_HEADER: [&str; 3] = ["year", "actual_total", "predicted_total"];

fn totals_row(y: &pipeline::YearTotals) -> [String; 3] {
    [
        y.year.to_string(),
        y.actual_total.to_string(),
        y.predicted_total.to_string(),
    ]
}

fn trace_csv(out: &mut Artifacts, result: &ntf::NtfResult) -> anyhow::Result<()> {
    let rows = result
        .accuracy_trace
        .iter()
        .zip(&result.kl_trace)
        .enumerate()
        .map(|(i, (a, kl))| [(i + 1).to_string(), a.to_string(), kl.to_string()]);
    out.csv("trace.csv", &["iteration", "accuracy", "kl_divergence"], rows)
}

fn outcome_artifacts(cfg: &RunConfig, outcome: &RunOutcome) -> anyhow::Result<Artifacts> {
    let mut out = Artifacts::default();
    if cfg.wants(Format::Json) {
        out.json("report.json", &outcome.report)?;
    }
    if cfg.wants(Format::Csv) {
        out.csv(
            "totals.csv",
            &TOTALS_HEADER,
            outcome.report.per_year.iter().map(totals_row),
        )?;
        if let Some(result) = &outcome.ntf {
            trace_csv(&mut out, result)?;
        }
        if let Some(history) = &outcome.ga_history {
            let rows = history.iter().map(|g| {
                [
                    g.generation.to_string(),
                    g.best.to_string(),
                    g.mean.to_string(),
                    g.best_ever.to_string(),
                ]
            });
            out.csv("ga_history.csv", &["generation", "best", "mean", "best_ever"], rows)?;
        }
    }
    Ok(out)
}

fn synth(args: &SynthArgs) -> Result<(), Failure> {
    if args.utilities == 0 || args.industries == 0 || args.years == 0 || args.rank == 0 {
        return Err(Failure::Config(anyhow!("synth dimensions and rank must be positive")));
    }
    if !(args.noise >= 0.0 && args.noise.is_finite()) {
        return Err(Failure::Config(anyhow!("synth noise must be finite and non-negative")));
    }
    let spec = PlantedSpec {
        utilities: args.utilities,
        industries: args.industries,
        years: args.years,
        rank: args.rank,
        first_year: args.first_year,
        noise: args.noise,
        ..PlantedSpec::default()
    };
    let (tensor, _) = checked(synthetic::planted(&spec, args.seed))?;
    let mut bytes = Vec::new();
    checked(dataset::write_csv(&tensor, &mut bytes))?;
    let name = args.out.file_name().and_then(|n| n.to_str()).unwrap_or("dataset.csv");
    let mut out = Artifacts::default();
    out.raw(name, bytes);
    let dir = match args.out.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    };
    out.commit(&dir).runtime()?;
    println!("{}", args.out.display());
    Ok(())
}

/// MSE is stored in raw squared units and shown in units of 10^13.
fn mse_e13(mse: f64) -> String {
    let scaled = mse / 1e13;
    if scaled == 0.0 || scaled.abs() >= 1e-3 {
        format!("{scaled:.3}")
    } else {
        format!("{scaled:.3e}")
    }
}

fn print_reports(paths: &[PathBuf]) -> Result<(), Failure> {
    println!(
        "{:<10} {:<12} {:>14} {:>10} {:>5}  detail",
        "pattern", "method", "MSE (x10^13)", "accuracy", "DOF"
    );
    for path in paths {
        let file = if path.is_dir() {
            path.join("report.json")
        } else {
            path.clone()
        };
        let report = read_report(&file).invalid()?;
        match report {
            AnyReport::Evaluation(r) => println!("{}", evaluation_line(&r)),
            AnyReport::Seeds(s) => {
                for r in &s.runs {
                    println!("{}", evaluation_line(r));
                }
            }
            AnyReport::Ensemble(e) => println!(
                "{:<10} {:<12} {:>14} {:>10.4} {:>5}  top-{} of seeds {:?}",
                e.pattern_label,
                "ensemble",
                mse_e13(e.mse_total),
                e.reconstruction_accuracy,
                "-",
                e.k,
                e.seeds
            ),
            AnyReport::Factorization(f) => println!(
                "{:<10} {:<12} {:>14} {:>10.4} {:>5}  rank {} dims {:?}",
                "-", "factorize", "-", f.final_accuracy, "-", f.rank, f.dims
            ),
            AnyReport::RankSweep(s) => {
                for p in &s.points {
                    println!(
                        "{:<10} {:<12} {:>14} {:>10.4} {:>5}  rank {}",
                        "-", "rank-sweep", "-", p.accuracy, "-", p.rank
                    );
                }
            }
        }
    }
    Ok(())
}

fn evaluation_line(r: &EvaluationReport) -> String {
    let method = serde_json::to_value(r.method)
        .ok()
        .and_then(|v| v.as_str().map(str::to_string))
        .unwrap_or_default();
    let mut detail = Vec::new();
    if let Some(seed) = r.seed {
        detail.push(format!("seed {seed}"));
    }
    if let Some(c) = &r.chromosome {
        detail.push(c.to_string());
    }
    if !r.fallbacks.is_empty() {
        detail.push(format!("{} fallbacks", r.fallbacks.len()));
    }
    format!(
        "{:<10} {:<12} {:>14} {:>10.4} {:>5}  {}",
        r.pattern_label,
        method,
        mse_e13(r.mse_total),
        r.reconstruction_accuracy,
        r.dof,
        detail.join(", ")
    )
}

fn read_report(path: &Path) -> anyhow::Result<AnyReport> {
    let text = std::fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
    serde_json::from_str(&text).map_err(|e| anyhow!("{} is not an ntfcast report: {e}", path.display()))
}
