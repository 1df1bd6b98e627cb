//! The deployment loop and its intervention policies.
//!
//! Window boundaries are numbered `b = 0..T`. Boundary 0 precedes the first
//! evaluation window; boundary `b >= 1` follows evaluation window `b`, whose
//! labels and drift are then known. The action chosen at boundary `b` shapes
//! the model deployed for window `b + 1`, so each [`WindowRecord`] carries the
//! action applied on entry to its window together with that window's
//! realised metrics, drift and alarm flags. Nothing at boundary `b` reads a
//! window later than `b`.
//!
//! Action effects:
//! - `Recalibrate` fits an isotonic map on the current model's raw scores for
//!   the most recent labelled window.
//! - `Retrain` refits the model on the last `W` labelled windows and drops
//!   any calibrator.
//! - `Both` retrains, then recalibrates the new model on the most recent
//!   window (in-sample scores).
//! - `TrainInit` trains on every labelled window available so far.

use std::collections::HashMap;
use std::fmt;
use std::sync::{Arc, Mutex, OnceLock};

use serde::{Deserialize, Serialize};

use crate::calibration::{fit_isotonic, IsotonicCalibrator};
use crate::data::{partition_reference, Window, WindowedDataset};
use crate::drift::{drift_signal, DriftSignal, DEFAULT_ALPHA, DEFAULT_TOP_K};
use crate::error::{Error, Result};
use crate::metrics::{downside_volatility, volatility_l1, DownsideMode, ReliabilityState, DEFAULT_ECE_BINS};
use crate::predictor::{train_builtin, ExternalScores, Scorer, TrainConfig};

pub const DEFAULT_ROLLING_WINDOW: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Action {
    NoOp,
    Recalibrate,
    Retrain,
    Both,
    TrainInit,
}

impl Action {
    /// One-letter code used in action signatures.
    pub fn code(self) -> char {
        match self {
            Action::NoOp => 'N',
            Action::Recalibrate => 'C',
            Action::Retrain => 'R',
            Action::Both => 'B',
            Action::TrainInit => 'I',
        }
    }

    pub fn retrains(self) -> bool {
        matches!(self, Action::Retrain | Action::Both)
    }

    pub fn recalibrates(self) -> bool {
        matches!(self, Action::Recalibrate | Action::Both)
    }
}

impl fmt::Display for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

/// Per-action intervention charges.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct CostTable {
    pub recalibrate: u32,
    pub retrain: u32,
    pub both: u32,
    pub train_init: u32,
}

impl Default for CostTable {
    fn default() -> Self {
        Self { recalibrate: 1, retrain: 5, both: 6, train_init: 5 }
    }
}

impl CostTable {
    pub fn cost(&self, action: Action) -> u32 {
        match action {
            Action::NoOp => 0,
            Action::Recalibrate => self.recalibrate,
            Action::Retrain => self.retrain,
            Action::Both => self.both,
            Action::TrainInit => self.train_init,
        }
    }
}

/// Cost of an action under the default table.
pub fn action_cost(action: Action) -> u32 {
    CostTable::default().cost(action)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThresholdConfig {
    pub theta_d1: f64,
    pub theta_d2: f64,
    /// ECE alarm level.
    pub theta_c: f64,
    /// AUC alarm level.
    pub theta_a: f64,
}

impl ThresholdConfig {
    pub fn new(theta_d1: f64, theta_d2: f64, theta_c: f64, theta_a: f64) -> Result<Self> {
        let cfg = Self { theta_d1, theta_d2, theta_c, theta_a };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let all = [self.theta_d1, self.theta_d2, self.theta_c, self.theta_a];
        if all.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("thresholds must be finite"));
        }
        if !(self.theta_d2 > self.theta_d1) {
            return Err(Error::invalid(format!(
                "theta_d2 ({}) must exceed theta_d1 ({})",
                self.theta_d2, self.theta_d1
            )));
        }
        Ok(())
    }

    pub fn calib_fail(&self, state: &ReliabilityState) -> bool {
        state.ece >= self.theta_c
    }

    pub fn disc_fail(&self, state: &ReliabilityState) -> bool {
        state.auc <= self.theta_a
    }
}

/// Drift-first hierarchical decision rule.
pub fn dtrc_decide(pre: &ReliabilityState, drift: f64, cfg: &ThresholdConfig, model_exists: bool) -> Action {
    if !model_exists {
        return Action::TrainInit;
    }
    let calib_fail = cfg.calib_fail(pre);
    let disc_fail = cfg.disc_fail(pre);
    if drift <= cfg.theta_d1 {
        Action::NoOp
    } else if drift <= cfg.theta_d2 {
        if calib_fail {
            Action::Recalibrate
        } else {
            Action::NoOp
        }
    } else if calib_fail || disc_fail {
        Action::Both
    } else {
        Action::Retrain
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PolicySpec {
    /// Train once before the horizon, never update.
    Static,
    /// Train once, recalibrate on the previous window at every boundary.
    PeriodicRecalibration,
    /// Retrain on the last `W` windows at every boundary.
    RollingRetrain,
    /// Drift-triggered control with the given thresholds.
    Dtrc(ThresholdConfig),
}

impl PolicySpec {
    pub fn short_name(&self) -> &'static str {
        match self {
            PolicySpec::Static => "p0",
            PolicySpec::PeriodicRecalibration => "p1",
            PolicySpec::RollingRetrain => "p2",
            PolicySpec::Dtrc(_) => "dtrc",
        }
    }
}

/// Knobs shared by every policy in a run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DeploymentSettings {
    /// Rolling length `W` for retraining and the drift reference.
    pub window: usize,
    pub alpha: f64,
    pub top_k: usize,
    pub ece_bins: usize,
    pub costs: CostTable,
    pub downside_mode: DownsideMode,
}

impl Default for DeploymentSettings {
    fn default() -> Self {
        Self {
            window: DEFAULT_ROLLING_WINDOW,
            alpha: DEFAULT_ALPHA,
            top_k: DEFAULT_TOP_K,
            ece_bins: DEFAULT_ECE_BINS,
            costs: CostTable::default(),
            downside_mode: DownsideMode::PerComponent,
        }
    }
}

#[derive(Debug, Clone)]
pub enum Learner {
    Builtin(TrainConfig),
    /// Replays stored scores; the model cannot be refitted.
    External(Arc<ExternalScores>),
}

impl Default for Learner {
    fn default() -> Self {
        Learner::Builtin(TrainConfig::default())
    }
}

#[derive(Debug, Clone, Default)]
pub struct DeploymentConfig {
    pub settings: DeploymentSettings,
    pub learner: Learner,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowRecord {
    pub window_id: i64,
    /// Action applied at the boundary entering this window.
    pub action: Action,
    pub cost: u32,
    pub drift: DriftSignal,
    pub pre_metrics: ReliabilityState,
    /// Alarm flags from this window's metrics; only set for threshold policies.
    pub calib_fail: Option<bool>,
    pub disc_fail: Option<bool>,
    /// First and last window ids the deployed model was trained on.
    pub trained_on: Option<(i64, i64)>,
    /// Window the active calibrator was fitted on, if any.
    pub calibrated_on: Option<i64>,
    /// Calibrator fitted at the boundary entering this window.
    pub new_calibrator: Option<IsotonicCalibrator>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub policy: PolicySpec,
    pub settings: DeploymentSettings,
    pub records: Vec<WindowRecord>,
}

impl Trajectory {
    pub fn states(&self) -> Vec<ReliabilityState> {
        self.records.iter().map(|r| r.pre_metrics).collect()
    }

    pub fn actions(&self) -> Vec<Action> {
        self.records.iter().map(|r| r.action).collect()
    }

    pub fn action_signature(&self) -> String {
        self.records.iter().map(|r| r.action.code()).collect()
    }

    pub fn total_cost(&self) -> u32 {
        self.records.iter().map(|r| r.cost).sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyOutcome {
    pub mean_auc: f64,
    pub mean_ece: f64,
    pub mean_brier: f64,
    pub v_l1: f64,
    pub v_l1_downside: f64,
    pub total_cost: u32,
    pub action_sequence: Vec<Action>,
    /// Retrain and Both actions; initial training is counted separately.
    pub retrains: usize,
    /// Recalibrate and Both actions.
    pub recalibrations: usize,
    pub train_inits: usize,
}

pub fn summarize(traj: &Trajectory) -> Result<PolicyOutcome> {
    let states = traj.states();
    let v_l1 = volatility_l1(&states)?;
    let v_l1_downside = downside_volatility(&states, traj.settings.downside_mode)?;
    let n = states.len() as f64;
    let mean = |f: fn(&ReliabilityState) -> f64| states.iter().map(f).sum::<f64>() / n;
    let actions = traj.actions();
    Ok(PolicyOutcome {
        mean_auc: mean(|s| s.auc),
        mean_ece: mean(|s| s.ece),
        mean_brier: mean(|s| s.brier),
        v_l1,
        v_l1_downside,
        total_cost: traj.total_cost(),
        retrains: actions.iter().filter(|a| a.retrains()).count(),
        recalibrations: actions.iter().filter(|a| a.recalibrates()).count(),
        train_inits: actions.iter().filter(|&&a| a == Action::TrainInit).count(),
        action_sequence: actions,
    })
}

type ModelKey = (usize, usize);

/// Shared state for running many policies over one dataset.
///
/// The drift series, fitted models and their window scores depend only on
/// the data and the training range, so they are computed once and shared
/// across runs (and threads).
/// A fitted model's scores on one window.
type ScoreKey = (ModelKey, usize);

pub struct Deployment<'a> {
    data: &'a WindowedDataset,
    config: DeploymentConfig,
    drift: OnceLock<Vec<DriftSignal>>,
    models: Mutex<HashMap<ModelKey, Scorer>>,
    scores: Mutex<HashMap<ScoreKey, Arc<Vec<f64>>>>,
}

#[derive(Clone)]
struct Deployed {
    key: Option<ModelKey>,
    scorer: Scorer,
    calibrator: Option<(i64, Arc<IsotonicCalibrator>)>,
}

impl<'a> Deployment<'a> {
    pub fn new(data: &'a WindowedDataset, config: DeploymentConfig) -> Result<Self> {
        if data.n_eval() == 0 {
            return Err(Error::Empty("dataset has no evaluation windows"));
        }
        if data.n_history == 0 {
            return Err(Error::invalid("dataset has no pre-horizon history windows"));
        }
        if let Some(w) = data.windows.iter().find(|w| w.is_empty()) {
            return Err(Error::invalid(format!("window {} is empty", w.id)));
        }
        let s = &config.settings;
        if s.window == 0 || s.ece_bins == 0 || !(0.0..=1.0).contains(&s.alpha) {
            return Err(Error::invalid("window and ece_bins must be >= 1, alpha in [0, 1]"));
        }
        Ok(Self {
            data,
            config,
            drift: OnceLock::new(),
            models: Mutex::new(HashMap::new()),
            scores: Mutex::new(HashMap::new()),
        })
    }

    pub fn data(&self) -> &WindowedDataset {
        self.data
    }

    pub fn settings(&self) -> &DeploymentSettings {
        &self.config.settings
    }

    /// Drift of every evaluation window against its reference period.
    pub fn drift_series(&self) -> Result<&[DriftSignal]> {
        if let Some(d) = self.drift.get() {
            return Ok(d);
        }
        let s = &self.config.settings;
        let series = (1..=self.data.n_eval())
            .map(|t| {
                let reference = partition_reference(self.data, t, s.window)?;
                let abs = self.data.eval_index(t);
                let evaluation = self.data.slice(abs..abs + 1);
                drift_signal(&self.data.schema, &reference, &evaluation, s.alpha, s.top_k)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(self.drift.get_or_init(|| series))
    }

    fn fit(&self, start: usize, end: usize) -> Result<Deployed> {
        let key = (start, end);
        let windows = &self.data.windows[start..end];
        let range_name = || {
            let first = windows.first().map_or(0, |w| w.id);
            let last = windows.last().map_or(0, |w| w.id);
            if first == last {
                format!("window {first}")
            } else {
                format!("windows {first}..={last}")
            }
        };
        let train = match &self.config.learner {
            Learner::External(_) => {
                return Err(Error::Unsupported(
                    "external scores cannot be retrained; use a policy without Retrain/TrainInit".into(),
                ))
            }
            Learner::Builtin(cfg) => *cfg,
        };
        if let Some(scorer) = self.models.lock().expect("model cache poisoned").get(&key) {
            return Ok(Deployed { key: Some(key), scorer: scorer.clone(), calibrator: None });
        }
        let rows: Vec<_> = windows.iter().flat_map(|w| w.rows.iter()).collect();
        let labels: Vec<u8> = windows.iter().flat_map(|w| w.labels.iter().copied()).collect();
        let model = train_builtin(&self.data.schema, &rows, &labels, train).map_err(|e| match e {
            Error::SingleClass(_) => Error::SingleClass(range_name()),
            other => other,
        })?;
        let scorer = Scorer::Builtin(Arc::new(model));
        let scorer = self.models.lock().expect("model cache poisoned").entry(key).or_insert(scorer).clone();
        Ok(Deployed { key: Some(key), scorer, calibrator: None })
    }

    /// Model used before the horizon by policies that do not pay for it.
    fn initial(&self) -> Result<Deployed> {
        match &self.config.learner {
            Learner::External(ext) => {
                Ok(Deployed { key: None, scorer: Scorer::External(ext.clone()), calibrator: None })
            }
            Learner::Builtin(_) => self.fit(0, self.data.n_history),
        }
    }

    fn raw_scores(&self, model: &Deployed, window: usize) -> Result<Arc<Vec<f64>>> {
        let w: &Window = &self.data.windows[window];
        let Some(key) = model.key else {
            return Ok(Arc::new(model.scorer.score(w)?));
        };
        if let Some(s) = self.scores.lock().expect("score cache poisoned").get(&(key, window)) {
            return Ok(s.clone());
        }
        let s = Arc::new(model.scorer.score(w)?);
        self.scores.lock().expect("score cache poisoned").insert((key, window), s.clone());
        Ok(s)
    }

    fn recalibrate(&self, model: &mut Deployed, window: usize) -> Result<Arc<IsotonicCalibrator>> {
        let scores = self.raw_scores(model, window)?;
        let cal = Arc::new(fit_isotonic(&scores, &self.data.windows[window].labels)?);
        model.calibrator = Some((self.data.windows[window].id, cal.clone()));
        Ok(cal)
    }

    fn retrain_range(&self, last_labelled: usize) -> (usize, usize) {
        let end = last_labelled + 1;
        (end.saturating_sub(self.config.settings.window), end)
    }

    /// Runs one policy over the full horizon.
    pub fn run(&self, policy: &PolicySpec) -> Result<Trajectory> {
        if let PolicySpec::Dtrc(cfg) = policy {
            cfg.validate()?;
        }
        let settings = self.config.settings;
        let drift = self.drift_series()?;
        let n_hist = self.data.n_history;
        let mut deployed: Option<Deployed> = None;
        let mut records: Vec<WindowRecord> = Vec::with_capacity(self.data.n_eval());

        for (b, &signal) in drift.iter().enumerate() {
            // Most recent window whose labels are known at this boundary.
            let last = n_hist + b - 1;
            let action = match policy {
                PolicySpec::Static => {
                    if deployed.is_none() {
                        deployed = Some(self.initial()?);
                    }
                    Action::NoOp
                }
                PolicySpec::PeriodicRecalibration => {
                    if deployed.is_none() {
                        deployed = Some(self.initial()?);
                    }
                    Action::Recalibrate
                }
                PolicySpec::RollingRetrain => Action::Retrain,
                PolicySpec::Dtrc(cfg) => match records.last() {
                    Some(prev) => dtrc_decide(&prev.pre_metrics, prev.drift.combined, cfg, deployed.is_some()),
                    None => {
                        dtrc_decide(&ReliabilityState { auc: 0.5, ece: 0.0, brier: 0.0 }, 0.0, cfg, deployed.is_some())
                    }
                },
            };

            let mut new_calibrator = None;
            match action {
                Action::NoOp => {}
                Action::TrainInit => deployed = Some(self.fit(0, last + 1)?),
                Action::Retrain => {
                    let (s, e) = self.retrain_range(last);
                    deployed = Some(self.fit(s, e)?);
                }
                Action::Recalibrate => {
                    let model = deployed
                        .as_mut()
                        .ok_or_else(|| Error::Invariant("recalibration requested without a model".into()))?;
                    new_calibrator = Some(self.recalibrate(model, last)?);
                }
                Action::Both => {
                    let (s, e) = self.retrain_range(last);
                    let mut model = self.fit(s, e)?;
                    new_calibrator = Some(self.recalibrate(&mut model, last)?);
                    deployed = Some(model);
                }
            }
            let model =
                deployed.as_ref().ok_or_else(|| Error::Invariant(format!("no model deployed at boundary {b}")))?;

            let current = n_hist + b;
            let window = &self.data.windows[current];
            let raw = self.raw_scores(model, current)?;
            let probs = match &model.calibrator {
                Some((_, cal)) => cal.apply(&raw),
                None => raw.to_vec(),
            };
            let pre_metrics =
                ReliabilityState::evaluate(&probs, &window.labels, settings.ece_bins).map_err(|e| match e {
                    Error::UndefinedAuc => {
                        Error::invalid(format!("window {} has a single label class; AUC is undefined", window.id))
                    }
                    other => other,
                })?;
            let (calib_fail, disc_fail) = match policy {
                PolicySpec::Dtrc(cfg) => (Some(cfg.calib_fail(&pre_metrics)), Some(cfg.disc_fail(&pre_metrics))),
                _ => (None, None),
            };
            records.push(WindowRecord {
                window_id: window.id,
                action,
                cost: settings.costs.cost(action),
                drift: signal,
                pre_metrics,
                calib_fail,
                disc_fail,
                trained_on: model.key.map(|(s, e)| (self.data.windows[s].id, self.data.windows[e - 1].id)),
                calibrated_on: model.calibrator.as_ref().map(|(id, _)| *id),
                new_calibrator: new_calibrator.map(|c| (*c).clone()),
            });
        }
        Ok(Trajectory { policy: *policy, settings, records })
    }
}

pub fn run_deployment(data: &WindowedDataset, policy: &PolicySpec, config: &DeploymentConfig) -> Result<Trajectory> {
    Deployment::new(data, config.clone())?.run(policy)
}
