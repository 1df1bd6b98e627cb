//! Threshold search for the drift-triggered policy, and the cost-volatility
//! trade-off it exposes.
//!
//! Alarm levels are fixed from the static policy's trajectory; every ordered
//! pair of candidate drift thresholds is deployed, runs with identical action
//! sequences collapse to one representative, and the non-dominated points in
//! (total cost, V_L1) form the frontier from which a budgeted knee is chosen.

use std::collections::HashMap;

use log::warn;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::quantile;
use crate::policy::{summarize, Deployment, PolicyOutcome, PolicySpec, ThresholdConfig, Trajectory};

pub const DEFAULT_BUDGET: u32 = 15;
pub const ECE_ALARM_QUANTILE: f64 = 0.8;
pub const AUC_ALARM_QUANTILE: f64 = 0.2;

/// Midpoints between consecutive sorted unique drift values, bracketed by
/// `min - 1` and `max + 1` so that always-on and always-off regimes are
/// reachable.
pub fn candidate_drift_thresholds(drift_values: &[f64]) -> Result<Vec<f64>> {
    if drift_values.is_empty() {
        return Err(Error::Empty("no drift values to build candidates from"));
    }
    if drift_values.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("drift values must be finite"));
    }
    let mut unique = drift_values.to_vec();
    unique.sort_by(f64::total_cmp);
    unique.dedup();
    let mut out = Vec::with_capacity(unique.len() + 1);
    out.push(unique[0] - 1.0);
    out.extend(unique.windows(2).map(|w| 0.5 * (w[0] + w[1])));
    out.push(unique[unique.len() - 1] + 1.0);
    Ok(out)
}

/// `(theta_c, theta_a)`: upper ECE and lower AUC quantiles of a reference
/// trajectory, normally the static policy's.
pub fn reliability_alarm_thresholds(reference: &Trajectory) -> Result<(f64, f64)> {
    if reference.records.len() < 2 {
        return Err(Error::invalid("alarm thresholds need at least two windows"));
    }
    let ece: Vec<f64> = reference.records.iter().map(|r| r.pre_metrics.ece).collect();
    let auc: Vec<f64> = reference.records.iter().map(|r| r.pre_metrics.auc).collect();
    Ok((quantile(&ece, ECE_ALARM_QUANTILE)?, quantile(&auc, AUC_ALARM_QUANTILE)?))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OperatingPoint {
    pub config: ThresholdConfig,
    pub outcome: PolicyOutcome,
    /// One code per window, e.g. `INNRCNNNN`.
    pub action_signature: String,
}

impl OperatingPoint {
    pub fn new(config: ThresholdConfig, outcome: PolicyOutcome) -> Self {
        let action_signature = outcome.action_sequence.iter().map(|a| a.code()).collect();
        Self { config, outcome, action_signature }
    }

    pub fn cost(&self) -> u32 {
        self.outcome.total_cost
    }

    pub fn v_l1(&self) -> f64 {
        self.outcome.v_l1
    }

    fn threshold_key(&self) -> (f64, f64) {
        (self.config.theta_d1, self.config.theta_d2)
    }
}

fn by_thresholds(a: &OperatingPoint, b: &OperatingPoint) -> std::cmp::Ordering {
    let (a1, a2) = a.threshold_key();
    let (b1, b2) = b.threshold_key();
    a1.total_cmp(&b1).then(a2.total_cmp(&b2))
}

/// All `(d1, d2)` pairs with `d2 > d1` from sorted candidates.
pub fn threshold_pairs(candidates: &[f64]) -> Vec<(f64, f64)> {
    let mut pairs = Vec::new();
    for (i, &d1) in candidates.iter().enumerate() {
        for &d2 in &candidates[i + 1..] {
            if d2 > d1 {
                pairs.push((d1, d2));
            }
        }
    }
    pairs
}

/// One drift-triggered deployment per candidate pair, in pair order.
pub fn sweep(
    deployment: &Deployment<'_>,
    candidates: &[f64],
    theta_c: f64,
    theta_a: f64,
) -> Result<Vec<OperatingPoint>> {
    if candidates.windows(2).any(|w| w[0] > w[1]) {
        return Err(Error::invalid("candidate thresholds must be sorted"));
    }
    // Fill the shared drift cache once rather than racing on it.
    deployment.drift_series()?;
    threshold_pairs(candidates)
        .into_par_iter()
        .map(|(d1, d2)| {
            let cfg = ThresholdConfig::new(d1, d2, theta_c, theta_a)?;
            let traj = deployment.run(&PolicySpec::Dtrc(cfg))?;
            Ok(OperatingPoint::new(cfg, summarize(&traj)?))
        })
        .collect()
}

/// Keeps one point per action signature: the one with the smallest
/// `(theta_d1, theta_d2)`. Output is ordered by that key.
pub fn dedup_by_action_signature(points: &[OperatingPoint]) -> Vec<OperatingPoint> {
    let mut best: HashMap<&str, &OperatingPoint> = HashMap::new();
    for p in points {
        best.entry(p.action_signature.as_str())
            .and_modify(|cur| {
                if by_thresholds(p, cur).is_lt() {
                    *cur = p;
                }
            })
            .or_insert(p);
    }
    let mut out: Vec<OperatingPoint> = best.into_values().cloned().collect();
    out.sort_by(by_thresholds);
    out
}

/// Non-dominated points in (cost, V_L1), sorted by cost with strictly
/// decreasing V_L1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParetoFrontier {
    pub points: Vec<OperatingPoint>,
}

pub fn pareto_frontier(points: &[OperatingPoint]) -> Result<ParetoFrontier> {
    if let Some(p) = points.iter().find(|p| !p.v_l1().is_finite()) {
        return Err(Error::invalid(format!("operating point {} has non-finite volatility", p.action_signature)));
    }
    let mut sorted: Vec<&OperatingPoint> = points.iter().collect();
    sorted.sort_by(|a, b| a.cost().cmp(&b.cost()).then(a.v_l1().total_cmp(&b.v_l1())).then(by_thresholds(a, b)));
    let mut frontier: Vec<OperatingPoint> = Vec::new();
    for p in sorted {
        if frontier.last().is_none_or(|last| p.v_l1() < last.v_l1()) {
            frontier.push(p.clone());
        }
    }
    Ok(ParetoFrontier { points: frontier })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KneeChoice {
    pub point: OperatingPoint,
    pub budget: u32,
    /// False when no frontier point fits the budget and the cheapest was taken.
    pub within_budget: bool,
}

/// Lowest-volatility frontier point costing at most `budget`, falling back to
/// the cheapest point with a warning.
pub fn knee_select(frontier: &ParetoFrontier, budget: u32) -> Result<KneeChoice> {
    let cheapest = frontier.points.first().ok_or(Error::Empty("cannot select a knee from an empty frontier"))?;
    let feasible = frontier
        .points
        .iter()
        .filter(|p| p.cost() <= budget)
        .min_by(|a, b| a.v_l1().total_cmp(&b.v_l1()).then(a.cost().cmp(&b.cost())));
    Ok(match feasible {
        Some(p) => KneeChoice { point: p.clone(), budget, within_budget: true },
        None => {
            warn!("no frontier point within budget {budget}; using the cheapest (cost {})", cheapest.cost());
            KneeChoice { point: cheapest.clone(), budget, within_budget: false }
        }
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MorcResult {
    pub theta_c: f64,
    pub theta_a: f64,
    pub candidates: Vec<f64>,
    /// Every evaluated pair, in pair order.
    pub points: Vec<OperatingPoint>,
    /// One representative per action signature.
    pub distinct: Vec<OperatingPoint>,
    pub frontier: ParetoFrontier,
    pub knee: KneeChoice,
}

impl MorcResult {
    pub fn on_frontier(&self, p: &OperatingPoint) -> bool {
        self.frontier.points.iter().any(|f| f.config == p.config)
    }

    pub fn is_knee(&self, p: &OperatingPoint) -> bool {
        self.knee.point.config == p.config
    }
}

/// The full search: alarms from the static policy, candidates from the
/// observed drift, sweep, dedup, frontier and knee.
pub fn run_morc(deployment: &Deployment<'_>, budget: u32) -> Result<MorcResult> {
    let p0 = deployment.run(&PolicySpec::Static)?;
    let (theta_c, theta_a) = reliability_alarm_thresholds(&p0)?;
    let drift: Vec<f64> = deployment.drift_series()?.iter().map(|d| d.combined).collect();
    let candidates = candidate_drift_thresholds(&drift)?;
    let points = sweep(deployment, &candidates, theta_c, theta_a)?;
    let distinct = dedup_by_action_signature(&points);
    let frontier = pareto_frontier(&distinct)?;
    let knee = knee_select(&frontier, budget)?;
    Ok(MorcResult { theta_c, theta_a, candidates, points, distinct, frontier, knee })
}
