//! Command-line front end. The `relcontrol` binary only calls [`main`].
//!
//! Exit codes: 0 success, 2 configuration error, 3 data error, 4 internal
//! invariant violation.

use std::fmt::{self, Write as _};
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use chrono::NaiveDate;
use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::bootstrap::{block_bootstrap, DEFAULT_LEVEL, DEFAULT_REPLICATES};
use crate::data::{load_csv, ColumnTypes, WindowedDataset};
use crate::drift::{DEFAULT_ALPHA, DEFAULT_TOP_K};
use crate::error::Error;
use crate::metrics::DEFAULT_ECE_BINS;
use crate::morc::{run_morc, DEFAULT_BUDGET};
use crate::policy::{
    summarize, CostTable, Deployment, DeploymentConfig, DeploymentSettings, Learner, PolicySpec, ThresholdConfig,
    DEFAULT_ROLLING_WINDOW,
};
use crate::predictor::{ExternalScores, TrainConfig};
use crate::report::{
    run_label, summary_table, write_plot_data, write_sweep_csv, BootstrapReport, DataSource, PolicyIntervals,
    RunConfigEcho, RunLog,
};
use crate::synthetic::{generate_synthetic, SyntheticConfig};

#[derive(Debug)]
pub struct CliError {
    pub code: u8,
    pub message: String,
}

impl CliError {
    pub const CONFIG: u8 = 2;
    pub const DATA: u8 = 3;
    pub const INVARIANT: u8 = 4;

    fn config(message: impl Into<String>) -> Self {
        Self { code: Self::CONFIG, message: message.into() }
    }

    /// Classifies a library error raised while loading or processing data.
    fn from_data(context: &str, e: Error) -> Self {
        let code = match e {
            Error::Invariant(_) => Self::INVARIANT,
            Error::Unsupported(_) => Self::CONFIG,
            _ => Self::DATA,
        };
        Self { code, message: format!("{context}: {e}") }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

// Command output is assembled in a String; formatting into it cannot fail.
macro_rules! outln {
    ($out:expr, $($arg:tt)*) => {{
        let _ = writeln!($out, $($arg)*);
    }};
}

macro_rules! outw {
    ($out:expr, $($arg:tt)*) => {{
        let _ = write!($out, $($arg)*);
    }};
}

#[derive(Debug, Parser)]
#[command(name = "relcontrol", version, about = "Reliability control for deployed binary classifiers")]
pub struct Cli {
    /// Worker threads for parallel sections (0 = one per core). Results do not
    /// depend on this.
    #[arg(long, global = true, default_value_t = 0)]
    pub workers: usize,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Deploy one policy over the evaluation windows and write its run log.
    Run(RunArgs),
    /// Sweep drift thresholds, write the operating points and pick the knee.
    Sweep(SweepArgs),
    /// Percentile bootstrap intervals for the volatility of logged runs.
    Bootstrap(BootstrapArgs),
    /// Tidy plot-data CSVs from run logs and/or a sweep table.
    Report(ReportArgs),
    /// Write a synthetic dataset as CSV plus its schema file.
    Generate(GenerateArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PolicyName {
    /// Static: train once, never update.
    P0,
    /// Recalibrate on the previous window at every boundary.
    P1,
    /// Retrain on the last W windows at every boundary.
    P2,
    /// Drift-triggered control; needs --thresholds.
    Dtrc,
}

#[derive(Debug, Args)]
#[group(skip)]
#[command(group(clap::ArgGroup::new("source").required(true).args(["data", "synthetic"])))]
pub struct DataArgs {
    /// Input CSV with one date column, one binary label column and features.
    #[arg(long, requires_all = ["schema", "cutoff"], conflicts_with = "synthetic")]
    pub data: Option<PathBuf>,
    /// Sidecar JSON mapping each column to numeric|categorical|date|label.
    #[arg(long, requires = "data")]
    pub schema: Option<PathBuf>,
    /// Last pre-horizon date (YYYY-MM-DD); later rows form the evaluation windows.
    #[arg(long, requires = "data")]
    pub cutoff: Option<String>,
    /// Synthetic generator configuration (JSON).
    #[arg(long)]
    pub synthetic: Option<PathBuf>,
    /// Replay stored probabilities (window_id,row_index,probability) instead
    /// of training the built-in learner. Only policies that never retrain.
    #[arg(long)]
    pub scores: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SettingsArgs {
    /// Rolling length W for retraining and the drift reference.
    #[arg(long, default_value_t = DEFAULT_ROLLING_WINDOW)]
    pub window: usize,
    /// Weight of mean KS against mean JSD in the combined drift score.
    #[arg(long, default_value_t = DEFAULT_ALPHA)]
    pub alpha: f64,
    /// Categories kept per categorical feature before pooling into OTHER.
    #[arg(long, default_value_t = DEFAULT_TOP_K)]
    pub topk: usize,
    /// Equal-width bins for ECE.
    #[arg(long = "ece-bins", default_value_t = DEFAULT_ECE_BINS)]
    pub ece_bins: usize,
    /// Action costs as recalibrate,retrain,both,train_init.
    #[arg(long, default_value = "1,5,6,5", value_parser = parse_costs)]
    pub costs: CostTable,
    /// Seed for the built-in learner's mini-batch shuffle.
    #[arg(long, default_value_t = TrainConfig::default().seed)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[arg(long, value_enum)]
    pub policy: PolicyName,
    /// Drift-triggered thresholds as d1,d2,C,A.
    #[arg(long, value_parser = parse_thresholds)]
    pub thresholds: Option<ThresholdConfig>,
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub settings: SettingsArgs,
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    /// Knee cost budget.
    #[arg(long, default_value_t = DEFAULT_BUDGET)]
    pub budget: u32,
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub settings: SettingsArgs,
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct BootstrapArgs {
    /// Run logs written by `run` or `sweep`.
    #[arg(required = true)]
    pub logs: Vec<PathBuf>,
    #[arg(long, default_value_t = DEFAULT_REPLICATES)]
    pub replicates: usize,
    /// Two-sided confidence level.
    #[arg(long, default_value_t = DEFAULT_LEVEL)]
    pub level: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// Run logs to turn into per-window series.
    pub logs: Vec<PathBuf>,
    /// Sweep table for the cost-volatility scatter.
    #[arg(long)]
    pub sweep: Option<PathBuf>,
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    #[arg(long)]
    pub synthetic: PathBuf,
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
}

fn parse_floats(s: &str, n: usize) -> std::result::Result<Vec<f64>, String> {
    let v: Vec<f64> = s
        .split(',')
        .map(|p| p.trim().parse::<f64>().map_err(|_| format!("`{p}` is not a number")))
        .collect::<std::result::Result<_, _>>()?;
    if v.len() != n {
        return Err(format!("expected {n} comma-separated values, found {}", v.len()));
    }
    Ok(v)
}

fn parse_thresholds(s: &str) -> std::result::Result<ThresholdConfig, String> {
    let v = parse_floats(s, 4)?;
    ThresholdConfig::new(v[0], v[1], v[2], v[3]).map_err(|e| e.to_string())
}

fn parse_costs(s: &str) -> std::result::Result<CostTable, String> {
    let v: Vec<u32> = s
        .split(',')
        .map(|p| p.trim().parse::<u32>().map_err(|_| format!("`{p}` is not a non-negative integer")))
        .collect::<std::result::Result<_, _>>()?;
    match v[..] {
        [recalibrate, retrain, both, train_init] => Ok(CostTable { recalibrate, retrain, both, train_init }),
        _ => Err(format!("expected 4 costs, found {}", v.len())),
    }
}

fn require_file(path: &Path, what: &str) -> CliResult<()> {
    if path.is_file() {
        Ok(())
    } else {
        Err(CliError::config(format!("{what} file not found: {}", path.display())))
    }
}

struct Loaded {
    data: WindowedDataset,
    source: DataSource,
    external: Option<Arc<ExternalScores>>,
}

fn load_data(args: &DataArgs) -> CliResult<Loaded> {
    let (data, source) = match (&args.data, &args.synthetic) {
        (Some(path), None) => {
            let schema = args.schema.as_ref().ok_or_else(|| CliError::config("--schema is required with --data"))?;
            let cutoff = args.cutoff.as_ref().ok_or_else(|| CliError::config("--cutoff is required with --data"))?;
            require_file(path, "--data")?;
            require_file(schema, "--schema")?;
            let date = NaiveDate::parse_from_str(cutoff, "%Y-%m-%d")
                .map_err(|_| CliError::config(format!("--cutoff `{cutoff}` is not a YYYY-MM-DD date")))?;
            let types = ColumnTypes::from_json_file(schema)
                .map_err(|e| CliError::config(format!("--schema {}: {e}", schema.display())))?;
            let data = load_csv(path, &types, date).map_err(|e| CliError::from_data("--data", e))?;
            let source = DataSource::Csv { data: path.clone(), schema: schema.clone(), cutoff: cutoff.clone() };
            (data, source)
        }
        (None, Some(path)) => {
            require_file(path, "--synthetic")?;
            let cfg = SyntheticConfig::from_json_file(path)
                .map_err(|e| CliError::config(format!("--synthetic {}: {e}", path.display())))?;
            let data = generate_synthetic(&cfg).map_err(|e| CliError::config(format!("--synthetic: {e}")))?;
            (data, DataSource::Synthetic { config: cfg })
        }
        _ => return Err(CliError::config("give exactly one of --data or --synthetic")),
    };
    let external = match &args.scores {
        Some(path) => {
            require_file(path, "--scores")?;
            Some(Arc::new(ExternalScores::load(path).map_err(|e| CliError::from_data("--scores", e))?))
        }
        None => None,
    };
    Ok(Loaded { data, source, external })
}

fn deployment_config(settings: &SettingsArgs, loaded: &Loaded) -> CliResult<(DeploymentConfig, RunConfigEcho)> {
    if settings.window == 0 {
        return Err(CliError::config("--window must be at least 1"));
    }
    if !(0.0..=1.0).contains(&settings.alpha) {
        return Err(CliError::config("--alpha must lie in [0, 1]"));
    }
    if settings.topk == 0 || settings.ece_bins == 0 {
        return Err(CliError::config("--topk and --ece-bins must be at least 1"));
    }
    let deployment_settings = DeploymentSettings {
        window: settings.window,
        alpha: settings.alpha,
        top_k: settings.topk,
        ece_bins: settings.ece_bins,
        costs: settings.costs,
        ..Default::default()
    };
    let train = TrainConfig { seed: settings.seed, ..Default::default() };
    let learner = match &loaded.external {
        Some(ext) => Learner::External(ext.clone()),
        None => Learner::Builtin(train),
    };
    let echo = RunConfigEcho {
        data_source: loaded.source.clone(),
        external_scores: None,
        train: loaded.external.is_none().then_some(train),
        settings: deployment_settings,
    };
    Ok((DeploymentConfig { settings: deployment_settings, learner }, echo))
}

fn prepare_out(dir: &Path) -> CliResult<()> {
    fs::create_dir_all(dir).map_err(|e| CliError::config(format!("--out {}: {e}", dir.display())))
}

fn write_err(path: &Path, e: Error) -> CliError {
    CliError { code: CliError::DATA, message: format!("writing {}: {e}", path.display()) }
}

fn cmd_run(args: &RunArgs) -> CliResult<String> {
    let mut out = String::new();
    let policy = match args.policy {
        PolicyName::P0 => PolicySpec::Static,
        PolicyName::P1 => PolicySpec::PeriodicRecalibration,
        PolicyName::P2 => PolicySpec::RollingRetrain,
        PolicyName::Dtrc => PolicySpec::Dtrc(
            args.thresholds.ok_or_else(|| CliError::config("--thresholds d1,d2,C,A is required for --policy dtrc"))?,
        ),
    };
    if args.thresholds.is_some() && args.policy != PolicyName::Dtrc {
        return Err(CliError::config("--thresholds only applies to --policy dtrc"));
    }
    let loaded = load_data(&args.data)?;
    let (config, mut echo) = deployment_config(&args.settings, &loaded)?;
    echo.external_scores = args.data.scores.clone();
    prepare_out(&args.out)?;

    let deployment = Deployment::new(&loaded.data, config).map_err(|e| CliError::from_data("dataset", e))?;
    let traj = deployment.run(&policy).map_err(|e| CliError::from_data("deployment", e))?;
    let outcome = summarize(&traj).map_err(|e| CliError::from_data("summary", e))?;
    let path = args.out.join(format!("run_{}.json", policy.short_name()));
    RunLog::new(echo, &traj, outcome.clone()).write(&path).map_err(|e| write_err(&path, e))?;

    outw!(out, "{}", summary_table(&[(policy.short_name().to_string(), outcome)]));
    outln!(out, "actions: {}", traj.action_signature());
    outln!(out, "run log: {}", path.display());
    Ok(out)
}

fn cmd_sweep(args: &SweepArgs) -> CliResult<String> {
    let mut out = String::new();
    let loaded = load_data(&args.data)?;
    if loaded.external.is_some() {
        return Err(CliError::config("--scores cannot be used with sweep: drift-triggered runs retrain"));
    }
    let (config, echo) = deployment_config(&args.settings, &loaded)?;
    prepare_out(&args.out)?;

    let deployment = Deployment::new(&loaded.data, config).map_err(|e| CliError::from_data("dataset", e))?;
    let morc = run_morc(&deployment, args.budget).map_err(|e| CliError::from_data("sweep", e))?;
    let sweep_path = args.out.join("sweep.csv");
    write_sweep_csv(&sweep_path, &morc).map_err(|e| write_err(&sweep_path, e))?;

    let knee = &morc.knee.point;
    let traj = deployment.run(&PolicySpec::Dtrc(knee.config)).map_err(|e| CliError::from_data("knee deployment", e))?;
    let log_path = args.out.join("run_dtrc_knee.json");
    RunLog::new(echo, &traj, knee.outcome.clone()).write(&log_path).map_err(|e| write_err(&log_path, e))?;

    outln!(out, "alarms: theta_C = {:.6} (ECE), theta_A = {:.6} (AUC)", morc.theta_c, morc.theta_a);
    outln!(
        out,
        "{} candidate thresholds, {} pairs, {} distinct action sequences, {} on the frontier",
        morc.candidates.len(),
        morc.points.len(),
        morc.distinct.len(),
        morc.frontier.points.len()
    );
    outln!(out, "{:>6} {:>10} {:>10} {:>10}  actions", "cost", "V_L1", "theta_d1", "theta_d2");
    for p in &morc.frontier.points {
        outln!(
            out,
            "{:>6} {:>10.6} {:>10.6} {:>10.6}  {}",
            p.cost(),
            p.v_l1(),
            p.config.theta_d1,
            p.config.theta_d2,
            p.action_signature
        );
    }
    if !morc.knee.within_budget {
        outln!(out, "warning: no frontier point costs <= {}; falling back to the cheapest", args.budget);
    }
    outln!(
        out,
        "knee: theta_d1 = {:.6}, theta_d2 = {:.6}, cost {}, V_L1 {:.6}, actions {}",
        knee.config.theta_d1,
        knee.config.theta_d2,
        knee.cost(),
        knee.v_l1(),
        knee.action_signature
    );
    outln!(out, "sweep table: {}\nknee run log: {}", sweep_path.display(), log_path.display());
    Ok(out)
}

fn read_log(path: &Path) -> CliResult<RunLog> {
    require_file(path, "run log")?;
    RunLog::read(path).map_err(|e| CliError { code: CliError::DATA, message: e.to_string() })
}

fn cmd_bootstrap(args: &BootstrapArgs) -> CliResult<String> {
    let mut out = String::new();
    if args.replicates == 0 {
        return Err(CliError::config("--replicates must be at least 1"));
    }
    if !(args.level > 0.0 && args.level < 1.0) {
        return Err(CliError::config("--level must lie in (0, 1)"));
    }
    let mut policies = Vec::with_capacity(args.logs.len());
    for path in &args.logs {
        let log = read_log(path)?;
        let states: Vec<_> = log.records.iter().map(|r| r.pre_metrics).collect();
        let mode = log.config.settings.downside_mode;
        let (v, d) = block_bootstrap(&states, args.replicates, args.level, args.seed, mode)
            .map_err(|e| CliError::from_data(&path.display().to_string(), e))?;
        policies.push(PolicyIntervals {
            policy: log.policy.short_name().to_string(),
            source: path.clone(),
            v_l1: v,
            v_l1_downside: d,
        });
    }
    prepare_out(&args.out)?;
    let report = BootstrapReport::new(policies);
    let path = args.out.join("bootstrap.json");
    report.write(&path).map_err(|e| write_err(&path, e))?;
    outw!(out, "{}", report.table());
    outln!(out, "intervals: {}", path.display());
    Ok(out)
}

fn cmd_report(args: &ReportArgs) -> CliResult<String> {
    let mut out = String::new();
    if args.logs.is_empty() && args.sweep.is_none() {
        return Err(CliError::config("give at least one run log or --sweep"));
    }
    let logs = args.logs.iter().map(|p| Ok((run_label(p), read_log(p)?))).collect::<CliResult<Vec<_>>>()?;
    if let Some(sweep) = &args.sweep {
        require_file(sweep, "--sweep")?;
    }
    prepare_out(&args.out)?;
    let written =
        write_plot_data(&logs, args.sweep.as_deref(), &args.out).map_err(|e| CliError::from_data("report", e))?;
    for path in written {
        outln!(out, "{}", path.display());
    }
    Ok(out)
}

fn cmd_generate(args: &GenerateArgs) -> CliResult<String> {
    let mut out = String::new();
    require_file(&args.synthetic, "--synthetic")?;
    let cfg = SyntheticConfig::from_json_file(&args.synthetic)
        .map_err(|e| CliError::config(format!("--synthetic {}: {e}", args.synthetic.display())))?;
    let data = generate_synthetic(&cfg).map_err(|e| CliError::config(format!("--synthetic: {e}")))?;
    prepare_out(&args.out)?;
    let csv_path = args.out.join("data.csv");
    let schema_path = args.out.join("schema.json");
    crate::data::write_csv(&data, &csv_path, "date").map_err(|e| write_err(&csv_path, e))?;
    data.column_types("date").write_json(&schema_path).map_err(|e| write_err(&schema_path, e))?;
    let cutoff = data
        .history_cutoff()
        .ok_or_else(|| CliError { code: CliError::INVARIANT, message: "generated data has no history".into() })?;
    outln!(out, "data: {}\nschema: {}\ncutoff: {cutoff}", csv_path.display(), schema_path.display());
    Ok(out)
}

/// Runs a parsed command and returns what it would print.
pub fn execute(cli: &Cli) -> CliResult<String> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cli.workers)
        .build()
        .map_err(|e| CliError::config(format!("--workers: {e}")))?;
    pool.install(|| match &cli.command {
        Command::Run(a) => cmd_run(a),
        Command::Sweep(a) => cmd_sweep(a),
        Command::Bootstrap(a) => cmd_bootstrap(a),
        Command::Report(a) => cmd_report(a),
        Command::Generate(a) => cmd_generate(a),
    })
}

pub fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(text) => {
            // A closed pipe (e.g. `| head`) is not an error worth reporting.
            let _ = std::io::stdout().lock().write_all(text.as_bytes());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code)
        }
    }
}
