//! Command-line front end: train, infer, sweep-alpha and chebyshev.
//!
//! Exit codes: 0 success, 1 validation or malformed input, 2 numeric
//! abort during training, 3 I/O failure.

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Deserialize;

use varqnn::config::{DatasetConfig, PreparedData, RegularizationConfig, ShotsConfig, TrainConfig};
use varqnn::error::Error;
use varqnn::experiments::{
    self, confidence_interval, gen_inference_grid, r2_score, FunctionKind, PesRescale,
};
use varqnn::observable::std_of_mean;
use varqnn::output::{
    self, InferRow, PesInferRow, RunSummary, SavedModel, SeedSummary,
};
use varqnn::qnn::{self, Entangling, EvalMode};
use varqnn::rng::RngStream;
use varqnn::train::{train, AlphaSchedule, TrainLog};

#[derive(Parser)]
#[command(name = "varqnn", version, about = "Variance-regularized QNN regression")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train one or more seeds and write logs, models and a summary.
    Train(TrainArgs),
    /// Evaluate a saved model over an inference grid.
    Infer(InferArgs),
    /// Train once per alpha schedule and write aligned trajectories.
    SweepAlpha(SweepArgs),
    /// Tabulate the single-qubit encoding curves T_phi(x).
    Chebyshev(ChebArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum DatasetName {
    Log,
    Abs,
    Oscillation,
    PesSynthetic,
}

#[derive(Clone, Copy, ValueEnum)]
enum EntanglingName {
    Circular,
    Linear,
}

#[derive(Args)]
struct TrainArgs {
    /// TOML config file; flags below override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Seed list; repeat the flag for a multi-seed batch.
    #[arg(long)]
    seed: Vec<u64>,
    #[arg(long)]
    n_qubits: Option<usize>,
    #[arg(long)]
    n_layers: Option<usize>,
    #[arg(long)]
    entangling: Option<EntanglingName>,
    #[arg(long)]
    dataset: Option<DatasetName>,
    /// Train on PES records from this CSV instead of a built-in dataset.
    #[arg(long, conflicts_with = "dataset")]
    pes_csv: Option<PathBuf>,
    #[arg(long)]
    n_points: Option<usize>,
    #[arg(long)]
    n_train: Option<usize>,
    #[arg(long)]
    max_iters: Option<u64>,
    #[arg(long)]
    learning_rate: Option<f64>,
    #[arg(long)]
    beta_encoding: Option<f64>,
    /// Evaluate from exact distributions instead of sampled shots.
    #[arg(long)]
    exact: bool,
    #[arg(long)]
    min_shots: Option<u64>,
    #[arg(long)]
    max_shots: Option<u64>,
    #[arg(long)]
    rsd_bound: Option<f64>,
    /// Constant regularization strength instead of the schedule.
    #[arg(long, conflicts_with = "no_reg")]
    alpha: Option<f64>,
    /// Disable variance regularization.
    #[arg(long)]
    no_reg: bool,
    #[arg(long)]
    output_dir: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum InferMode {
    Exact,
    Shots,
}

#[derive(Args)]
struct InferArgs {
    /// Model file written by `train`.
    #[arg(long)]
    model: PathBuf,
    /// Built-in inference grid for single-feature models.
    #[arg(long)]
    grid: Option<DatasetName>,
    /// PES points to evaluate; requires --rescale.
    #[arg(long, conflicts_with = "grid")]
    pes_csv: Option<PathBuf>,
    /// Rescale file written alongside a PES model.
    #[arg(long)]
    rescale: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = InferMode::Exact)]
    mode: InferMode,
    #[arg(long, default_value_t = 5000)]
    shots: u64,
    /// Repeated evaluations for the PES confidence interval.
    #[arg(long, default_value_t = 100)]
    repeats: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    output_dir: Option<PathBuf>,
}

#[derive(Args)]
struct SweepArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    /// TOML file with a [[schedules]] table per alpha schedule.
    #[arg(long)]
    schedules: PathBuf,
    #[arg(long)]
    output_dir: Option<PathBuf>,
}

#[derive(Args)]
struct ChebArgs {
    /// Chebyshev degree phi; repeat for a family of curves.
    #[arg(long, required = true)]
    phi: Vec<f64>,
    #[arg(long, default_value_t = -1.0, allow_hyphen_values = true)]
    min: f64,
    #[arg(long, default_value_t = 1.0, allow_hyphen_values = true)]
    max: f64,
    #[arg(long, default_value_t = 0.01)]
    step: f64,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    output_dir: Option<PathBuf>,
}

fn exit_code(err: &Error) -> u8 {
    match err {
        Error::Io { .. } => 3,
        Error::NonFinite { .. } => 2,
        _ => 1,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Train(args) => cmd_train(args),
        Command::Infer(args) => cmd_infer(args),
        Command::SweepAlpha(args) => cmd_sweep_alpha(args),
        Command::Chebyshev(args) => cmd_chebyshev(args),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(exit_code(&err))
        }
    }
}

fn load_config(path: Option<&PathBuf>) -> Result<TrainConfig, Error> {
    match path {
        Some(p) => TrainConfig::from_file(p),
        None => Ok(TrainConfig::default()),
    }
}

fn apply_overrides(cfg: &mut TrainConfig, args: &TrainArgs) {
    if !args.seed.is_empty() {
        cfg.seeds = Some(args.seed.clone());
        cfg.seed = args.seed[0];
    }
    if let Some(n) = args.n_qubits {
        cfg.layout.n_qubits = n;
    }
    if let Some(n) = args.n_layers {
        cfg.layout.n_layers = n;
    }
    if let Some(e) = args.entangling {
        cfg.layout.entangling = match e {
            EntanglingName::Circular => Entangling::Circular,
            EntanglingName::Linear => Entangling::Linear,
        };
    }
    if let Some(path) = &args.pes_csv {
        cfg.dataset = DatasetConfig::PesCsv {
            path: path.clone(),
            n_train: 50,
        };
    } else if let Some(name) = args.dataset {
        cfg.dataset = match name {
            DatasetName::Log => DatasetConfig::Log { n_points: 20 },
            DatasetName::Abs => DatasetConfig::Abs { n_points: 20 },
            DatasetName::Oscillation => DatasetConfig::Oscillation { n_points: 20 },
            DatasetName::PesSynthetic => DatasetConfig::PesSynthetic {
                n_samples: 97,
                n_train: 50,
            },
        };
    }
    if let Some(n) = args.n_points {
        match &mut cfg.dataset {
            DatasetConfig::Log { n_points }
            | DatasetConfig::Abs { n_points }
            | DatasetConfig::Oscillation { n_points } => *n_points = n,
            DatasetConfig::PesSynthetic { n_samples, .. } => *n_samples = n,
            DatasetConfig::PesCsv { .. } => {}
        }
    }
    if let Some(n) = args.n_train {
        match &mut cfg.dataset {
            DatasetConfig::PesCsv { n_train, .. }
            | DatasetConfig::PesSynthetic { n_train, .. } => *n_train = n,
            _ => {}
        }
    }
    if let Some(n) = args.max_iters {
        cfg.optimizer.max_iters = n;
    }
    if let Some(lr) = args.learning_rate {
        cfg.optimizer.learning_rate = Some(lr);
    }
    if let Some(b) = args.beta_encoding {
        cfg.beta_encoding = b;
    }
    if args.exact {
        cfg.shots = ShotsConfig::Exact;
    } else if args.min_shots.is_some() || args.max_shots.is_some() || args.rsd_bound.is_some() {
        let (mut rsd, mut min, mut max) = match cfg.shots {
            ShotsConfig::Sampled {
                rsd_bound,
                min_shots,
                max_shots,
            } => (rsd_bound, min_shots, max_shots),
            ShotsConfig::Exact => (0.1, 100, 5000),
        };
        if let Some(v) = args.rsd_bound {
            rsd = v;
        }
        if let Some(v) = args.min_shots {
            min = v;
        }
        if let Some(v) = args.max_shots {
            max = v;
        }
        cfg.shots = ShotsConfig::Sampled {
            rsd_bound: rsd,
            min_shots: min,
            max_shots: max,
        };
    }
    if args.no_reg {
        cfg.regularization = RegularizationConfig::None;
    } else if let Some(alpha) = args.alpha {
        cfg.regularization = RegularizationConfig::Constant { alpha };
    }
    if let Some(dir) = &args.output_dir {
        cfg.output_dir = Some(dir.clone());
    }
}

/// Exact model predictions for every input of a dataset.
fn predict_exact(
    layout: &varqnn::qnn::CircuitLayout,
    params: &varqnn::qnn::ModelParams,
    inputs: &[Vec<f64>],
) -> Result<Vec<f64>, Error> {
    inputs
        .iter()
        .map(|x| Ok(qnn::evaluate(layout, params, x, EvalMode::Exact)?.value))
        .collect()
}

fn cmd_train(args: TrainArgs) -> Result<u8, Error> {
    let mut cfg = load_config(args.config.as_ref())?;
    apply_overrides(&mut cfg, &args);
    let seeds = cfg.seed_list();

    // Validate every seed's settings and data before touching the disk,
    // so an invalid config leaves no partial outputs behind.
    let mut runs = Vec::new();
    for &seed in &seeds {
        let settings = cfg.settings(seed)?;
        let data = cfg.build_data(seed)?;
        runs.push((seed, settings, data));
    }

    let out_dir = cfg.output_dir();
    let learning_rate = cfg.resolved_learning_rate();
    let mut logs: Vec<TrainLog> = Vec::new();
    let mut seed_summaries = Vec::new();
    let mut any_abort = false;

    for (seed, settings, data) in runs {
        let started = Instant::now();
        let outcome = train(&settings, data.train())?;
        let wall_time_s = started.elapsed().as_secs_f64();

        output::write_train_log(&out_dir.join(format!("train_log_seed{seed}.csv")), &outcome.log)?;
        let model = SavedModel {
            layout: settings.layout.clone(),
            beta_encoding: settings.beta_encoding,
            params: outcome.params.clone(),
        };
        output::write_model(&out_dir.join(format!("model_seed{seed}.txt")), &model)?;

        let (mut r2_train, mut r2_test) = (None, None);
        if let PreparedData::Pes { split } = &data {
            let rescale_path = out_dir.join(format!("rescale_seed{seed}.json"));
            let text = serde_json::to_string_pretty(&split.rescale)
                .map_err(|e| Error::InvalidConfig(e.to_string()))?;
            std::fs::write(&rescale_path, text + "\n")
                .map_err(|e| Error::io(rescale_path.display().to_string(), e))?;
            let preds = predict_exact(&settings.layout, &outcome.params, &split.train.inputs)?;
            r2_train = Some(r2_score(&preds, &split.train.labels)?);
            let preds = predict_exact(&settings.layout, &outcome.params, &split.test.inputs)?;
            r2_test = Some(r2_score(&preds, &split.test.labels)?);
        }

        let summary = SeedSummary {
            seed,
            iterations: outcome.log.records.len() as u64,
            final_l_fit: outcome.log.final_fit_loss(10),
            final_l_var: outcome.log.final_var_loss(10),
            wall_time_s,
            r2_train,
            r2_test,
            aborted: outcome.aborted.clone(),
        };
        match &outcome.aborted {
            Some(info) => {
                any_abort = true;
                eprintln!(
                    "seed {seed}: aborted at iteration {} ({})",
                    info.iteration, info.what
                );
            }
            None => {
                print!(
                    "seed {seed}: L_fit {:.6} L_var {:.6} ({:.1}s)",
                    summary.final_l_fit, summary.final_l_var, wall_time_s
                );
                match (r2_train, r2_test) {
                    (Some(tr), Some(te)) => println!("  R2 train {tr:.4} test {te:.4}"),
                    _ => println!(),
                }
            }
        }
        logs.push(outcome.log);
        seed_summaries.push(summary);
    }

    if logs.len() > 1 {
        output::write_aggregate(&out_dir.join("aggregate.csv"), &logs)?;
    }
    output::write_summary(
        &out_dir.join("summary.json"),
        &RunSummary {
            config: cfg,
            learning_rate,
            seeds: seed_summaries,
        },
    )?;
    Ok(if any_abort { 2 } else { 0 })
}

fn default_out(dir_flag: Option<&PathBuf>, name: &str) -> PathBuf {
    let mut cfg = TrainConfig::default();
    cfg.output_dir = dir_flag.cloned();
    cfg.output_dir().join(name)
}

fn cmd_infer(args: InferArgs) -> Result<u8, Error> {
    let model = output::read_model(&args.model)?;
    let out = args
        .out
        .clone()
        .unwrap_or_else(|| default_out(args.output_dir.as_ref(), "inference.csv"));

    if let Some(csv) = &args.pes_csv {
        let rescale_path = args.rescale.as_ref().ok_or_else(|| {
            Error::InvalidConfig("--pes-csv requires --rescale".into())
        })?;
        let text = std::fs::read_to_string(rescale_path)
            .map_err(|e| Error::io(rescale_path.display().to_string(), e))?;
        let rescale: PesRescale = serde_json::from_str(&text)
            .map_err(|e| Error::format(rescale_path.display().to_string(), e.line(), e.to_string()))?;
        let records = experiments::load_pes_csv(csv)?;

        let mut rows = Vec::with_capacity(records.len());
        let mut preds = Vec::with_capacity(records.len());
        for (i, rec) in records.iter().enumerate() {
            let x = rescale.features(rec);
            let row = match args.mode {
                InferMode::Exact => {
                    let r = qnn::evaluate(&model.layout, &model.params, &x, EvalMode::Exact)?;
                    PesInferRow {
                        r1: rec.r1,
                        r2: rec.r2,
                        angle_rad: rec.angle,
                        f: r.value,
                        sigma2: r.variance,
                        std_mean: 0.0,
                        energy_hartree: rescale.to_hartree(r.value),
                        ci_half_width: 0.0,
                    }
                }
                InferMode::Shots => {
                    let stream = RngStream::new(args.seed, (1 << 32, 0));
                    let (mean, half) = confidence_interval(
                        &model.layout,
                        &model.params,
                        &x,
                        args.repeats,
                        args.shots,
                        stream.offset((i * args.repeats) as u64),
                    )?;
                    let r = qnn::evaluate(&model.layout, &model.params, &x, EvalMode::Exact)?;
                    PesInferRow {
                        r1: rec.r1,
                        r2: rec.r2,
                        angle_rad: rec.angle,
                        f: mean,
                        sigma2: r.variance,
                        std_mean: std_of_mean(r.variance, args.shots),
                        energy_hartree: rescale.to_hartree(mean),
                        ci_half_width: half * (rescale.to_hartree(1.0) - rescale.to_hartree(0.0)),
                    }
                }
            };
            preds.push(row.f);
            rows.push(row);
        }
        output::write_pes_inference(&out, &rows)?;
        let labels: Vec<f64> = records.iter().map(|r| rescale.energy(r.energy)).collect();
        println!("R2 over {} points: {:.4}", rows.len(), r2_score(&preds, &labels)?);
        return Ok(0);
    }

    let kind = match args.grid {
        Some(DatasetName::Log) => FunctionKind::Log,
        Some(DatasetName::Abs) => FunctionKind::Abs,
        Some(DatasetName::Oscillation) => FunctionKind::Oscillation,
        Some(DatasetName::PesSynthetic) | None => {
            return Err(Error::InvalidConfig(
                "need --grid (log|abs|oscillation) or --pes-csv with --rescale".into(),
            ))
        }
    };
    let grid = gen_inference_grid(kind);
    let mut rows = Vec::with_capacity(grid.len());
    for (i, &x) in grid.iter().enumerate() {
        let row = match args.mode {
            InferMode::Exact => {
                let r = qnn::evaluate(&model.layout, &model.params, &[x], EvalMode::Exact)?;
                InferRow {
                    x,
                    f: r.value,
                    sigma2: r.variance,
                    std_mean: 0.0,
                }
            }
            InferMode::Shots => {
                let stream = RngStream::new(args.seed, (1 << 32, 0));
                let mode = EvalMode::Shots {
                    shots: args.shots,
                    stream: stream.offset(i as u64),
                };
                let r = qnn::evaluate(&model.layout, &model.params, &[x], mode)?;
                InferRow {
                    x,
                    f: r.value,
                    sigma2: r.variance,
                    std_mean: std_of_mean(r.variance, args.shots),
                }
            }
        };
        rows.push(row);
    }
    output::write_inference(&out, &rows)?;
    println!("wrote {} rows to {}", rows.len(), out.display());
    Ok(0)
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct SchedulesFile {
    #[serde(default)]
    schedules: Vec<ScheduleEntry>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ScheduleEntry {
    #[serde(default = "sched_a")]
    a: f64,
    #[serde(default = "sched_b")]
    b: f64,
    #[serde(default = "sched_v")]
    v: f64,
}

fn sched_a() -> f64 {
    AlphaSchedule::DEFAULT.a
}
fn sched_b() -> f64 {
    AlphaSchedule::DEFAULT.b
}
fn sched_v() -> f64 {
    AlphaSchedule::DEFAULT.v
}

fn cmd_sweep_alpha(args: SweepArgs) -> Result<u8, Error> {
    let mut cfg = load_config(args.config.as_ref())?;
    if let Some(dir) = &args.output_dir {
        cfg.output_dir = Some(dir.clone());
    }
    let text = std::fs::read_to_string(&args.schedules)
        .map_err(|e| Error::io(args.schedules.display().to_string(), e))?;
    let parsed: SchedulesFile =
        toml::from_str(&text).map_err(|e| Error::InvalidConfig(e.to_string()))?;
    let schedules: Vec<AlphaSchedule> = parsed
        .schedules
        .iter()
        .map(|s| {
            let schedule = AlphaSchedule {
                a: s.a,
                b: s.b,
                v: s.v,
            };
            schedule.validate()?;
            Ok(schedule)
        })
        .collect::<Result<_, Error>>()?;

    let settings = cfg.settings(cfg.seed)?;
    let data = cfg.build_data(cfg.seed)?;
    let out_dir = cfg.output_dir();
    let logs = experiments::alpha_sweep(&settings, data.train(), &schedules)?;
    for (i, (schedule, log)) in schedules.iter().zip(&logs).enumerate() {
        let path = out_dir.join(format!("sweep_{i}.csv"));
        output::write_train_log(&path, log)?;
        println!(
            "schedule {i} (a={} b={} v={}) -> {}",
            schedule.a,
            schedule.b,
            schedule.v,
            path.display()
        );
    }
    Ok(0)
}

fn cmd_chebyshev(args: ChebArgs) -> Result<u8, Error> {
    if !(args.step > 0.0) || args.max < args.min {
        return Err(Error::InvalidConfig(
            "need step > 0 and max >= min".into(),
        ));
    }
    let n = ((args.max - args.min) / args.step).round() as usize;
    let grid: Vec<f64> = (0..=n)
        .map(|i| (args.min + i as f64 * args.step).clamp(-1.0, 1.0))
        .collect();
    let values: Vec<Vec<f64>> = args
        .phi
        .iter()
        .map(|&phi| qnn::chebyshev_curve(phi, &grid))
        .collect::<Result<_, Error>>()?;
    let out = args
        .out
        .clone()
        .unwrap_or_else(|| default_out(args.output_dir.as_ref(), "chebyshev.csv"));
    output::write_chebyshev(&out, &args.phi, &grid, &values)?;
    println!("wrote {} curves to {}", args.phi.len(), out.display());
    Ok(0)
}
