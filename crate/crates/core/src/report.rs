//! On-disk artefacts: run logs, sweep tables, bootstrap records and the
//! tidy plot-data CSVs derived from them.
//!
//! JSON documents carry a `schema_version`; the only field allowed to differ
//! between two runs of the same command is `metadata.generated_at`.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::bootstrap::BootstrapResult;
use crate::error::{Error, Result};
use crate::morc::MorcResult;
use crate::policy::{DeploymentSettings, PolicyOutcome, PolicySpec, Trajectory, WindowRecord};
use crate::predictor::TrainConfig;
use crate::synthetic::SyntheticConfig;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Metadata {
    pub generated_at: String,
    pub tool: String,
}

impl Metadata {
    pub fn now() -> Self {
        Self {
            generated_at: chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true),
            tool: format!("relcontrol {}", env!("CARGO_PKG_VERSION")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DataSource {
    Csv { data: PathBuf, schema: PathBuf, cutoff: String },
    Synthetic { config: SyntheticConfig },
    InMemory { description: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfigEcho {
    pub data_source: DataSource,
    /// Stored scores replayed instead of the built-in learner.
    pub external_scores: Option<PathBuf>,
    pub train: Option<TrainConfig>,
    pub settings: DeploymentSettings,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunLog {
    pub schema_version: u32,
    pub metadata: Metadata,
    pub config: RunConfigEcho,
    pub policy: PolicySpec,
    pub records: Vec<WindowRecord>,
    pub outcome: PolicyOutcome,
}

impl RunLog {
    pub fn new(config: RunConfigEcho, traj: &Trajectory, outcome: PolicyOutcome) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            metadata: Metadata::now(),
            config,
            policy: traj.policy,
            records: traj.records.clone(),
            outcome,
        }
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        write_json(path, self)
    }

    pub fn read(path: &Path) -> Result<Self> {
        read_versioned(path, "run log")
    }
}

/// Reads a JSON document, checking `schema_version` before the body so that
/// logs from other versions fail with a clear hint.
fn read_versioned<T: for<'de> Deserialize<'de>>(path: &Path, what: &str) -> Result<T> {
    let text = fs::read_to_string(path)?;
    let hint = |detail: String| {
        Error::invalid(format!(
            "{} is not a valid {what} (expected schema_version {SCHEMA_VERSION}): {detail}",
            path.display()
        ))
    };
    let value: serde_json::Value = serde_json::from_str(&text).map_err(|e| hint(e.to_string()))?;
    match value.get("schema_version").and_then(serde_json::Value::as_u64) {
        Some(v) if v == u64::from(SCHEMA_VERSION) => {}
        Some(v) => return Err(hint(format!("found schema_version {v}"))),
        None => return Err(hint("missing schema_version".into())),
    }
    serde_json::from_value(value).map_err(|e| hint(e.to_string()))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

pub const SWEEP_HEADER: [&str; 16] = [
    "theta_d1",
    "theta_d2",
    "theta_c",
    "theta_a",
    "mean_auc",
    "mean_ece",
    "mean_brier",
    "v_l1",
    "v_l1_downside",
    "cost",
    "retrains",
    "recalibrations",
    "train_inits",
    "action_signature",
    "on_frontier",
    "is_knee",
];

/// One row per evaluated threshold pair.
pub fn write_sweep_csv(path: &Path, morc: &MorcResult) -> Result<()> {
    let mut wtr = csv::Writer::from_path(path)?;
    wtr.write_record(SWEEP_HEADER)?;
    for p in &morc.points {
        let c = &p.config;
        let o = &p.outcome;
        wtr.write_record([
            c.theta_d1.to_string(),
            c.theta_d2.to_string(),
            c.theta_c.to_string(),
            c.theta_a.to_string(),
            o.mean_auc.to_string(),
            o.mean_ece.to_string(),
            o.mean_brier.to_string(),
            o.v_l1.to_string(),
            o.v_l1_downside.to_string(),
            o.total_cost.to_string(),
            o.retrains.to_string(),
            o.recalibrations.to_string(),
            o.train_inits.to_string(),
            p.action_signature.clone(),
            morc.on_frontier(p).to_string(),
            morc.is_knee(p).to_string(),
        ])?;
    }
    wtr.flush()?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyIntervals {
    pub policy: String,
    pub source: PathBuf,
    pub v_l1: BootstrapResult,
    pub v_l1_downside: BootstrapResult,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BootstrapReport {
    pub schema_version: u32,
    pub metadata: Metadata,
    pub policies: Vec<PolicyIntervals>,
}

impl BootstrapReport {
    pub fn new(policies: Vec<PolicyIntervals>) -> Self {
        Self { schema_version: SCHEMA_VERSION, metadata: Metadata::now(), policies }
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        write_json(path, self)
    }

    pub fn read(path: &Path) -> Result<Self> {
        read_versioned(path, "bootstrap report")
    }

    pub fn table(&self) -> String {
        let mut s = format!("{:<10} {:>24} {:>24}\n", "policy", "V_L1 95% CI", "V_L1- 95% CI");
        for p in &self.policies {
            let ci = |r: &BootstrapResult| format!("[{:.4}, {:.4}]", r.lower, r.upper);
            let _ = writeln!(s, "{:<10} {:>24} {:>24}", p.policy, ci(&p.v_l1), ci(&p.v_l1_downside));
        }
        s
    }
}

/// Fixed-width summary with one row per policy.
pub fn summary_table(rows: &[(String, PolicyOutcome)]) -> String {
    let mut s = format!(
        "{:<10} {:>8} {:>8} {:>8} {:>9} {:>9} {:>5} {:>8} {:>8}\n",
        "policy", "AUC", "ECE", "Brier", "V_L1", "V_L1-", "cost", "retrain", "recalib"
    );
    for (name, o) in rows {
        let _ = writeln!(
            s,
            "{:<10} {:>8.4} {:>8.4} {:>8.4} {:>9.5} {:>9.5} {:>5} {:>8} {:>8}",
            name,
            o.mean_auc,
            o.mean_ece,
            o.mean_brier,
            o.v_l1,
            o.v_l1_downside,
            o.total_cost,
            o.retrains + o.train_inits,
            o.recalibrations
        );
    }
    s
}

/// Files produced by [`write_plot_data`].
pub const AUC_SERIES: &str = "auc_series.csv";
pub const ECE_SERIES: &str = "ece_series.csv";
pub const DRIFT_SERIES: &str = "drift_series.csv";
pub const COST_VOLATILITY: &str = "cost_volatility.csv";

/// Tidy CSVs for per-window AUC, ECE and drift (one row per run and window)
/// and, given a sweep table, the cost-volatility scatter. Returns the paths
/// written.
pub fn write_plot_data(logs: &[(String, RunLog)], sweep_csv: Option<&Path>, out_dir: &Path) -> Result<Vec<PathBuf>> {
    if logs.is_empty() && sweep_csv.is_none() {
        return Err(Error::Empty("no run logs or sweep table to report on"));
    }
    if let Some((name, log)) = logs.iter().find(|(_, l)| l.schema_version != SCHEMA_VERSION) {
        return Err(Error::invalid(format!(
            "mixed schema versions: {name} has {}, expected {SCHEMA_VERSION}",
            log.schema_version
        )));
    }
    fs::create_dir_all(out_dir)?;
    let mut written = Vec::new();
    if !logs.is_empty() {
        let series = |file: &str, header: &[&str], value: &dyn Fn(&WindowRecord) -> Vec<String>| -> Result<PathBuf> {
            let path = out_dir.join(file);
            let mut wtr = csv::Writer::from_path(&path)?;
            let mut h = vec!["run", "policy", "window_id"];
            h.extend_from_slice(header);
            wtr.write_record(&h)?;
            for (name, log) in logs {
                for r in &log.records {
                    let mut rec = vec![name.clone(), log.policy.short_name().to_string(), r.window_id.to_string()];
                    rec.extend(value(r));
                    wtr.write_record(&rec)?;
                }
            }
            wtr.flush()?;
            Ok(path)
        };
        let opt = |v: Option<f64>| v.map_or_else(String::new, |x| x.to_string());
        written.push(series(AUC_SERIES, &["auc", "action"], &|r| {
            vec![r.pre_metrics.auc.to_string(), r.action.to_string()]
        })?);
        written.push(series(ECE_SERIES, &["ece", "action"], &|r| {
            vec![r.pre_metrics.ece.to_string(), r.action.to_string()]
        })?);
        written.push(series(DRIFT_SERIES, &["ks_mean", "jsd_mean", "drift"], &|r| {
            vec![opt(r.drift.ks_mean), opt(r.drift.jsd_mean), r.drift.combined.to_string()]
        })?);
    }
    if let Some(sweep) = sweep_csv {
        written.push(scatter_from_sweep(sweep, &out_dir.join(COST_VOLATILITY))?);
    }
    Ok(written)
}

fn scatter_from_sweep(sweep: &Path, out: &Path) -> Result<PathBuf> {
    const KEEP: [&str; 8] =
        ["cost", "v_l1", "v_l1_downside", "on_frontier", "is_knee", "theta_d1", "theta_d2", "action_signature"];
    let mut rdr = csv::Reader::from_path(sweep)?;
    let headers = rdr.headers()?.clone();
    if headers.iter().ne(SWEEP_HEADER) {
        return Err(Error::Parse {
            source_name: sweep.display().to_string(),
            line: 1,
            message: format!("expected sweep header `{}`", SWEEP_HEADER.join(",")),
        });
    }
    let cols: Vec<usize> =
        KEEP.iter().map(|k| headers.iter().position(|h| h == *k).expect("header checked above")).collect();
    let mut wtr = csv::Writer::from_path(out)?;
    wtr.write_record(KEEP)?;
    for rec in rdr.records() {
        let rec = rec?;
        wtr.write_record(cols.iter().map(|&i| &rec[i]))?;
    }
    wtr.flush()?;
    Ok(out.to_path_buf())
}

/// Short run label: the file stem.
pub fn run_label(path: &Path) -> String {
    path.file_stem().map_or_else(|| path.display().to_string(), |s| s.to_string_lossy().into_owned())
}
