//! `aoi`: closed-form AoI statistics, simulation, validation and sweeps for
//! the multi-source preemptive M/M/1/1 queue.
//!
//! Exit codes: 0 success, 1 validation exceedance, 2 usage or config error.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use aoi_core::analytics;
use aoi_core::estimators::{default_s_grid, ReplicationSummary, SimEstimates, MIN_UPDATE_EPOCHS};
use aoi_core::simulator::{self, SimConfig, DEFAULT_ARRIVALS, DEFAULT_WARMUP_FRACTION, GENERATOR};
use aoi_core::sweep::{self, GridScale, SweepCsvWriter, SweepMode, SweepSpec};
use aoi_core::validation::{self, DEFAULT_Z_THRESHOLD};
use aoi_core::{report, AoiError, ModelParams};

const DEFAULT_REPS: usize = 30;

#[derive(Parser, Debug)]
#[command(name = "aoi", version, about = "Age of Information in multi-source preemptive M/M/1/1 queues")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Evaluate the closed forms and print a JSON report.
    Analytic(AnalyticArgs),
    /// Run seeded replications and print JSON estimates.
    Simulate(SimArgs),
    /// Compare every closed form with simulation; CSV table, exit 1 on exceedance.
    Validate(ValidateArgs),
    /// Sweep ρ over λ₁ for several service rates; CSV rows.
    Sweep(SweepArgs),
}

#[derive(Args, Debug, Clone)]
struct ModelArgs {
    /// Per-source arrival rates, comma separated.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    lambdas: Option<Vec<f64>>,
    /// Service rate.
    #[arg(long, allow_hyphen_values = true)]
    mu: Option<f64>,
    /// JSON config file; flags take precedence over its values.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Transform arguments (absolute); defaults to {0.1,...,5}/E[A_k].
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    s_grid: Option<Vec<f64>>,
}

#[derive(Args, Debug, Clone)]
struct AnalyticArgs {
    #[command(flatten)]
    model: ModelArgs,
    /// Restrict per-source output to source k (1-based).
    #[arg(long)]
    k: Option<usize>,
}

#[derive(Args, Debug, Clone)]
struct RunArgs {
    /// Arrivals per replication.
    #[arg(long)]
    arrivals: Option<u64>,
    #[arg(long)]
    reps: Option<usize>,
    /// Base seed; drawn from entropy and printed when omitted.
    #[arg(long)]
    seed: Option<u64>,
    /// Fraction of each run discarded as warm-up.
    #[arg(long)]
    warmup_fraction: Option<f64>,
}

#[derive(Args, Debug, Clone)]
struct SimArgs {
    #[command(flatten)]
    model: ModelArgs,
    #[command(flatten)]
    run: RunArgs,
    /// Dump replication 0's sample path as CSV here (metadata goes to <out>.json).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug, Clone)]
struct ValidateArgs {
    #[command(flatten)]
    model: ModelArgs,
    #[command(flatten)]
    run: RunArgs,
    #[arg(long)]
    z_threshold: Option<f64>,
    /// Write the comparison CSV here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum ModeArg {
    Analytic,
    Simulate,
    Both,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum ScaleArg {
    Linear,
    Log,
}

#[derive(Args, Debug, Clone)]
struct SweepArgs {
    #[arg(long, allow_hyphen_values = true)]
    lambda2: Option<f64>,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    mus: Option<Vec<f64>>,
    #[arg(long, allow_hyphen_values = true)]
    lambda1_min: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    lambda1_max: Option<f64>,
    #[arg(long)]
    points: Option<usize>,
    #[arg(long, value_enum)]
    scale: Option<ScaleArg>,
    #[arg(long, value_enum)]
    mode: Option<ModeArg>,
    #[arg(long)]
    arrivals: Option<u64>,
    #[arg(long)]
    reps: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    config: Option<PathBuf>,
    /// CSV destination (stdout when omitted); metadata goes to <out>.json.
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Every field a JSON config file may set.
#[derive(Debug, Default, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    lambdas: Option<Vec<f64>>,
    mu: Option<f64>,
    s_grid: Option<Vec<f64>>,
    arrivals: Option<u64>,
    reps: Option<usize>,
    seed: Option<u64>,
    warmup_fraction: Option<f64>,
    z_threshold: Option<f64>,
    lambda2: Option<f64>,
    mus: Option<Vec<f64>>,
    lambda1_min: Option<f64>,
    lambda1_max: Option<f64>,
    points: Option<usize>,
    scale: Option<GridScale>,
    mode: Option<SweepMode>,
}

/// Errors mapped to exit code 2.
#[derive(Debug)]
struct UsageError(String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

impl From<AoiError> for UsageError {
    fn from(e: AoiError) -> Self {
        UsageError(format!("{}: {e}", e.kind()))
    }
}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

fn load_config(path: Option<&Path>) -> anyhow::Result<FileConfig> {
    let Some(path) = path else {
        return Ok(FileConfig::default());
    };
    let text = std::fs::read_to_string(path).map_err(|e| usage(format!("cannot read config {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| usage(format!("bad config {}: {e}", path.display())))
}

fn resolve_params(args: &ModelArgs, file: &FileConfig) -> anyhow::Result<ModelParams> {
    let lambdas = args
        .lambdas
        .clone()
        .or_else(|| file.lambdas.clone())
        .ok_or_else(|| usage("missing --lambdas"))?;
    let mu = args.mu.or(file.mu).ok_or_else(|| usage("missing --mu"))?;
    ModelParams::new(lambdas, mu).map_err(|e| UsageError::from(e).into())
}

fn resolve_s_grids(args: &ModelArgs, file: &FileConfig, p: &ModelParams) -> anyhow::Result<Vec<Vec<f64>>> {
    match args.s_grid.clone().or_else(|| file.s_grid.clone()) {
        Some(grid) => {
            if let Some(bad) = grid.iter().find(|s| !(**s > 0.0)) {
                return Err(UsageError::from(AoiError::NegativeTransformArgument(*bad)).into());
            }
            Ok(vec![grid; p.sources()])
        }
        None => Ok(default_s_grid(p)),
    }
}

/// Effective run settings, echoed into output metadata.
#[derive(Debug, Clone, Serialize)]
struct RunSettings {
    params: ModelParams,
    arrivals: u64,
    reps: usize,
    seed: u64,
    seed_from_entropy: bool,
    warmup_fraction: f64,
    s_grids: Vec<Vec<f64>>,
    generator: &'static str,
}

fn resolve_run(model: &ModelArgs, run: &RunArgs, file: &FileConfig) -> anyhow::Result<RunSettings> {
    let params = resolve_params(model, file)?;
    let s_grids = resolve_s_grids(model, file, &params)?;
    let (seed, seed_from_entropy) = match run.seed.or(file.seed) {
        Some(s) => (s, false),
        None => {
            let s = rand::random::<u64>();
            eprintln!("seed: {s}");
            (s, true)
        }
    };
    let settings = RunSettings {
        params,
        arrivals: run.arrivals.or(file.arrivals).unwrap_or(DEFAULT_ARRIVALS),
        reps: run.reps.or(file.reps).unwrap_or(DEFAULT_REPS),
        seed,
        seed_from_entropy,
        warmup_fraction: run
            .warmup_fraction
            .or(file.warmup_fraction)
            .unwrap_or(DEFAULT_WARMUP_FRACTION),
        s_grids,
        generator: GENERATOR,
    };
    if settings.reps == 0 {
        return Err(usage("--reps must be at least 1"));
    }
    settings.sim_config().validate().map_err(UsageError::from)?;
    Ok(settings)
}

impl RunSettings {
    fn sim_config(&self) -> SimConfig {
        SimConfig::new(self.params.clone(), self.seed)
            .with_arrivals(self.arrivals)
            .with_warmup_fraction(self.warmup_fraction)
    }

    /// Runs all replications and keeps the summaries of those with a usable
    /// window; the others are reported as warnings.
    fn summarize(&self, warnings: &mut Vec<String>) -> anyhow::Result<Vec<ReplicationSummary>> {
        let outcomes = simulator::run_replications(&self.sim_config(), self.reps, |path| {
            match path.coverage_error() {
                Some(e) => Err(e),
                None => ReplicationSummary::from_path(path, &self.s_grids),
            }
        })
        .map_err(UsageError::from)?;
        let mut kept = Vec::new();
        for (stream, outcome) in outcomes.into_iter().enumerate() {
            match outcome {
                Ok(s) => kept.push(s),
                Err(e) => warnings.push(format!("replication {stream} skipped: {e}")),
            }
        }
        if kept.is_empty() {
            anyhow::bail!(UsageError(format!(
                "no replication produced a usable measurement window ({} arrivals is too small)",
                self.arrivals
            )));
        }
        let short = kept.iter().filter(|s| s.window_updates < MIN_UPDATE_EPOCHS).count();
        if short > 0 {
            warnings.push(format!(
                "{short} replication(s) have fewer than {MIN_UPDATE_EPOCHS} update epochs in the window; estimates are noisy"
            ));
        }
        if kept.len() < 2 {
            warnings.push("fewer than two usable replications: standard errors are unavailable".into());
        }
        Ok(kept)
    }
}

fn emit_warnings(warnings: &[String]) {
    for w in warnings {
        eprintln!("warning: {w}");
    }
}

fn write_json<T: Serialize>(value: &T) -> anyhow::Result<()> {
    let stdout = io::stdout();
    let mut lock = stdout.lock();
    serde_json::to_writer_pretty(&mut lock, value)?;
    writeln!(lock)?;
    Ok(())
}

#[derive(Serialize)]
struct LstPoint {
    s: f64,
    value: f64,
}

#[derive(Serialize)]
struct SourceReport {
    source: usize,
    lambda: f64,
    effective_update_rate: f64,
    mean_aoi: f64,
    var_aoi: f64,
    update_interval_mean: f64,
    distribution: analytics::AoiDistribution,
    lst: Vec<LstPoint>,
}

#[derive(Serialize)]
struct PostUpdateReport {
    mean1: f64,
    mean2: f64,
    cross_moment: f64,
}

#[derive(Serialize)]
struct AnalyticReport {
    params: ModelParams,
    valid_packet_probability: f64,
    valid_service_mean: f64,
    interval_moments: analytics::IntervalMoments,
    sources: Vec<SourceReport>,
    post_update: Option<PostUpdateReport>,
    correlation: Option<analytics::CorrelationReport>,
}

fn cmd_analytic(args: &AnalyticArgs) -> anyhow::Result<ExitCode> {
    let file = load_config(args.model.config.as_deref())?;
    let p = resolve_params(&args.model, &file)?;
    let grids = resolve_s_grids(&args.model, &file, &p)?;
    let ks: Vec<usize> = match args.k {
        Some(k) => {
            p.check_index(k).map_err(UsageError::from)?;
            vec![k]
        }
        None => (1..=p.sources()).collect(),
    };
    let mut sources = Vec::new();
    for k in ks {
        let lst = grids[k - 1]
            .iter()
            .map(|&s| Ok(LstPoint { s, value: analytics::aoi_lst(&p, k, s)? }))
            .collect::<Result<Vec<_>, AoiError>>()?;
        sources.push(SourceReport {
            source: k,
            lambda: p.lambda(k)?,
            effective_update_rate: p.effective_update_rate(k)?,
            mean_aoi: analytics::mean_aoi(&p, k)?,
            var_aoi: analytics::var_aoi(&p, k)?,
            update_interval_mean: analytics::update_interval_mean_per_source(&p, k)?,
            distribution: analytics::aoi_distribution(&p, k)?,
            lst,
        });
    }
    let two = p.sources() == 2;
    let report = AnalyticReport {
        valid_packet_probability: p.valid_packet_probability(),
        valid_service_mean: analytics::valid_service_mean(&p),
        interval_moments: analytics::update_interval_moments(&p),
        sources,
        post_update: if two {
            Some(PostUpdateReport {
                mean1: analytics::post_update_age_mean(&p, 1)?,
                mean2: analytics::post_update_age_mean(&p, 2)?,
                cross_moment: analytics::post_update_cross_moment(&p)?,
            })
        } else {
            None
        },
        correlation: if two { Some(analytics::correlation_coefficient(&p)?) } else { None },
        params: p,
    };
    write_json(&report)?;
    Ok(ExitCode::SUCCESS)
}

#[derive(Serialize)]
struct SimulateOutput {
    settings: RunSettings,
    streams: Vec<u64>,
    warnings: Vec<String>,
    estimates: SimEstimates,
}

#[derive(Serialize)]
struct PathMetadata<'a> {
    seed: u64,
    stream: u64,
    generator: &'static str,
    config: &'a SimConfig,
}

fn dump_path(settings: &RunSettings, out: &Path) -> anyhow::Result<()> {
    let cfg = settings.sim_config().with_stream(0);
    let path = simulator::run(&cfg)?;
    let file = File::create(out).with_context(|| format!("creating {}", out.display()))?;
    path.write_csv(BufWriter::new(file))?;
    let meta = PathMetadata {
        seed: cfg.seed,
        stream: cfg.stream,
        generator: GENERATOR,
        config: &cfg,
    };
    let meta_path = sidecar(out);
    std::fs::write(&meta_path, serde_json::to_string_pretty(&meta)? + "\n")
        .with_context(|| format!("writing {}", meta_path.display()))?;
    Ok(())
}

fn sidecar(out: &Path) -> PathBuf {
    let mut name = out.as_os_str().to_owned();
    name.push(".json");
    PathBuf::from(name)
}

fn cmd_simulate(args: &SimArgs) -> anyhow::Result<ExitCode> {
    let file = load_config(args.model.config.as_deref())?;
    let settings = resolve_run(&args.model, &args.run, &file)?;
    let mut warnings = Vec::new();
    let reps = settings.summarize(&mut warnings)?;
    if settings.params.sources() > 2 {
        warnings.push("pairwise correlations for more than two sources have no closed form; reported as extrapolation".into());
    }
    let estimates = SimEstimates::aggregate(&reps)?;
    if let Some(out) = &args.out {
        dump_path(&settings, out)?;
    }
    emit_warnings(&warnings);
    write_json(&SimulateOutput {
        streams: (0..settings.reps as u64).collect(),
        settings,
        warnings,
        estimates,
    })?;
    Ok(ExitCode::SUCCESS)
}

fn cmd_validate(args: &ValidateArgs) -> anyhow::Result<ExitCode> {
    let file = load_config(args.model.config.as_deref())?;
    let settings = resolve_run(&args.model, &args.run, &file)?;
    let threshold = args.z_threshold.or(file.z_threshold).unwrap_or(DEFAULT_Z_THRESHOLD);
    if !(threshold > 0.0) {
        return Err(usage("--z-threshold must be positive"));
    }
    let mut warnings = Vec::new();
    let reps = settings.summarize(&mut warnings)?;
    if settings.params.sources() > 2 {
        warnings.push("joint rows omitted: closed forms exist only for two sources".into());
    }
    let rows = validation::compare(&settings.params, &reps)?;
    match &args.out {
        Some(out) => {
            let file = File::create(out).with_context(|| format!("creating {}", out.display()))?;
            report::write_comparisons_csv(&rows, BufWriter::new(file))?;
        }
        None => report::write_comparisons_csv(&rows, io::stdout().lock())?,
    }
    emit_warnings(&warnings);
    let bad = validation::exceedances(&rows, threshold);
    if bad.is_empty() {
        return Ok(ExitCode::SUCCESS);
    }
    for r in &bad {
        eprintln!(
            "exceedance: {} analytic={} simulated={} z={}",
            r.quantity,
            r.analytic,
            r.simulated,
            r.z_score.unwrap_or(f64::NAN)
        );
    }
    Ok(ExitCode::from(1))
}

fn cmd_sweep(args: &SweepArgs) -> anyhow::Result<ExitCode> {
    let file = load_config(args.config.as_deref())?;
    let defaults = SweepSpec::default();
    let mut spec = SweepSpec {
        lambda2: args.lambda2.or(file.lambda2).unwrap_or(defaults.lambda2),
        mus: args.mus.clone().or_else(|| file.mus.clone()).unwrap_or(defaults.mus),
        lambda1_min: args.lambda1_min.or(file.lambda1_min).unwrap_or(defaults.lambda1_min),
        lambda1_max: args.lambda1_max.or(file.lambda1_max).unwrap_or(defaults.lambda1_max),
        points: args.points.or(file.points).unwrap_or(defaults.points),
        scale: match args.scale {
            Some(ScaleArg::Linear) => GridScale::Linear,
            Some(ScaleArg::Log) => GridScale::Log,
            None => file.scale.unwrap_or(defaults.scale),
        },
        mode: match args.mode {
            Some(ModeArg::Analytic) => SweepMode::Analytic,
            Some(ModeArg::Simulate) => SweepMode::Simulate,
            Some(ModeArg::Both) => SweepMode::Both,
            None => file.mode.unwrap_or(defaults.mode),
        },
        arrivals: args.arrivals.or(file.arrivals).unwrap_or(defaults.arrivals),
        reps: args.reps.or(file.reps).unwrap_or(defaults.reps),
        seed: defaults.seed,
    };
    // Analytic sweeps consume no randomness.
    spec.seed = match args.seed.or(file.seed) {
        Some(s) => s,
        None if spec.mode.simulates() => {
            let s = rand::random::<u64>();
            eprintln!("seed: {s}");
            s
        }
        None => defaults.seed,
    };
    spec.validate().map_err(UsageError::from)?;
    let sink: Box<dyn Write> = match &args.out {
        Some(out) => Box::new(BufWriter::new(
            File::create(out).with_context(|| format!("creating {}", out.display()))?,
        )),
        None => Box::new(io::stdout()),
    };
    let mut writer = SweepCsvWriter::new(sink, spec.mode.simulates())?;
    let result = sweep::run_sweep(&spec, |rows| writer.write_rows(rows))?;
    drop(writer);
    let summary = serde_json::to_string_pretty(&serde_json::json!({
        "minima": result.minima,
        "meta": result.meta,
    }))?;
    match &args.out {
        Some(out) => {
            std::fs::write(sidecar(out), summary + "\n")?;
            for m in &result.minima {
                eprintln!("mu={}: min rho={} at lambda1={}", m.mu, m.rho, m.lambda1);
            }
        }
        None => eprintln!("{summary}"),
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match &cli.command {
        Command::Analytic(a) => cmd_analytic(a),
        Command::Simulate(a) => cmd_simulate(a),
        Command::Validate(a) => cmd_validate(a),
        Command::Sweep(a) => cmd_sweep(a),
    };
    match outcome {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.downcast_ref::<UsageError>().is_some() {
                ExitCode::from(2)
            } else if let Some(ae) = e.downcast_ref::<AoiError>() {
                // Model and config problems surface as AoiError too.
                match ae {
                    AoiError::Io(_) => ExitCode::FAILURE,
                    _ => ExitCode::from(2),
                }
            } else {
                ExitCode::FAILURE
            }
        }
    }
}
