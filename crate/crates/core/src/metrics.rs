//! Per-window reliability metrics and trajectory volatility.
//!
//! A window's reliability state is the triple (AUC, ECE, Brier). Volatility
//! summarises how much the (AUC, ECE) pair moves between consecutive windows.

use serde::{Deserialize, Serialize};

use crate::error::{check_lengths, Error, Result};

/// Default number of equal-width probability bins for ECE.
pub const DEFAULT_ECE_BINS: usize = 15;

/// Discrimination, calibration error and Brier score of one window.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReliabilityState {
    pub auc: f64,
    pub ece: f64,
    pub brier: f64,
}

impl ReliabilityState {
    pub fn new(auc: f64, ece: f64, brier: f64) -> Result<Self> {
        for (name, v) in [("auc", auc), ("ece", ece), ("brier", brier)] {
            if !v.is_finite() || !(0.0..=1.0).contains(&v) {
                return Err(Error::invalid(format!("{name} = {v} is outside [0, 1]")));
            }
        }
        Ok(Self { auc, ece, brier })
    }

    /// Computes all three metrics for one window of predictions.
    pub fn evaluate(probs: &[f64], labels: &[u8], ece_bins: usize) -> Result<Self> {
        Ok(Self { auc: roc_auc(probs, labels)?, ece: ece(probs, labels, ece_bins)?, brier: brier(probs, labels)? })
    }
}

/// Which steps count as degradations in [`downside_volatility`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DownsideMode {
    /// AUC drops and ECE rises are each counted independently.
    #[default]
    PerComponent,
    /// The whole step counts when AUC drops, nothing otherwise.
    JointAuc,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VolatilitySummary {
    pub v_l1: f64,
    pub v_l1_downside: f64,
    pub horizon: usize,
}

impl VolatilitySummary {
    pub fn from_states(states: &[ReliabilityState], mode: DownsideMode) -> Result<Self> {
        Ok(Self {
            v_l1: volatility_l1(states)?,
            v_l1_downside: downside_volatility(states, mode)?,
            horizon: states.len(),
        })
    }
}

fn check_labels(labels: &[u8]) -> Result<()> {
    if let Some(bad) = labels.iter().find(|&&y| y > 1) {
        return Err(Error::invalid(format!("label {bad} is not binary")));
    }
    Ok(())
}

/// Area under the ROC curve, computed as the Mann-Whitney rank statistic.
///
/// Tied scores contribute one half. Single-class labels are an error.
pub fn roc_auc(scores: &[f64], labels: &[u8]) -> Result<f64> {
    check_lengths(scores.len(), labels.len())?;
    check_labels(labels)?;
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::invalid("NaN score"));
    }
    let n_pos = labels.iter().filter(|&&y| y == 1).count();
    let n_neg = labels.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::UndefinedAuc);
    }

    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));

    // Sum of midranks (1-based) of the positives.
    let mut pos_rank_sum = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        let midrank = (i + j) as f64 / 2.0 + 1.0;
        let pos_in_group = order[i..=j].iter().filter(|&&k| labels[k] == 1).count();
        pos_rank_sum += midrank * pos_in_group as f64;
        i = j + 1;
    }

    let n_pos = n_pos as f64;
    let u = pos_rank_sum - n_pos * (n_pos + 1.0) / 2.0;
    Ok(u / (n_pos * n_neg as f64))
}

/// Expected calibration error over `n_bins` equal-width bins on [0, 1].
///
/// Bin `k` holds probabilities in `[k/n, (k+1)/n)`; the top bin is closed so
/// that 1.0 lands in it. Empty bins contribute nothing.
pub fn ece(probs: &[f64], labels: &[u8], n_bins: usize) -> Result<f64> {
    check_lengths(probs.len(), labels.len())?;
    check_labels(labels)?;
    if probs.is_empty() {
        return Err(Error::Empty("ece needs at least one prediction"));
    }
    if n_bins == 0 {
        return Err(Error::invalid("ece needs at least one bin"));
    }
    let mut count = vec![0usize; n_bins];
    let mut prob_sum = vec![0.0; n_bins];
    let mut label_sum = vec![0.0; n_bins];
    for (&p, &y) in probs.iter().zip(labels) {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::invalid(format!("probability {p} outside [0, 1]")));
        }
        let bin = ((p * n_bins as f64) as usize).min(n_bins - 1);
        count[bin] += 1;
        prob_sum[bin] += p;
        label_sum[bin] += f64::from(y);
    }
    let n = probs.len() as f64;
    let total = (0..n_bins)
        .filter(|&b| count[b] > 0)
        .map(|b| {
            let c = count[b] as f64;
            (c / n) * (label_sum[b] / c - prob_sum[b] / c).abs()
        })
        .sum::<f64>();
    Ok(total.clamp(0.0, 1.0))
}

/// Mean squared difference between predicted probability and outcome.
pub fn brier(probs: &[f64], labels: &[u8]) -> Result<f64> {
    check_lengths(probs.len(), labels.len())?;
    check_labels(labels)?;
    if probs.is_empty() {
        return Err(Error::Empty("brier needs at least one prediction"));
    }
    let sse: f64 = probs.iter().zip(labels).map(|(&p, &y)| (p - f64::from(y)).powi(2)).sum();
    Ok(sse / probs.len() as f64)
}

fn check_horizon(states: &[ReliabilityState]) -> Result<()> {
    if states.len() < 2 {
        return Err(Error::invalid(format!("volatility needs at least 2 windows, got {}", states.len())));
    }
    Ok(())
}

/// Mean absolute step change of (AUC, ECE) across consecutive windows.
pub fn volatility_l1(states: &[ReliabilityState]) -> Result<f64> {
    check_horizon(states)?;
    let total: f64 = states.windows(2).map(|w| (w[1].auc - w[0].auc).abs() + (w[1].ece - w[0].ece).abs()).sum();
    Ok(total / (states.len() - 1) as f64)
}

/// Like [`volatility_l1`] but only counting degrading movement.
pub fn downside_volatility(states: &[ReliabilityState], mode: DownsideMode) -> Result<f64> {
    check_horizon(states)?;
    let total: f64 = states
        .windows(2)
        .map(|w| {
            let d_auc = w[1].auc - w[0].auc;
            let d_ece = w[1].ece - w[0].ece;
            match mode {
                DownsideMode::PerComponent => (-d_auc).max(0.0) + d_ece.max(0.0),
                DownsideMode::JointAuc if d_auc < 0.0 => d_auc.abs() + d_ece.abs(),
                DownsideMode::JointAuc => 0.0,
            }
        })
        .sum();
    Ok(total / (states.len() - 1) as f64)
}

/// Sample quantile with linear interpolation between order statistics
/// (position `(n - 1) * p` in the sorted sample).
pub fn quantile(values: &[f64], p: f64) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::Empty("quantile of an empty sample"));
    }
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::invalid(format!("quantile level {p} outside [0, 1]")));
    }
    if values.iter().any(|v| v.is_nan()) {
        return Err(Error::invalid("quantile of a sample containing NaN"));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    Ok(sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo]))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn quantile_interpolates() {
        let ece: Vec<f64> = (1..=9).map(|i| f64::from(i) / 100.0).collect();
        // Position 6.4 between 0.07 and 0.08.
        assert!((quantile(&ece, 0.8).unwrap() - 0.074).abs() < 1e-15);
        assert!((quantile(&ece, 0.2).unwrap() - 0.026).abs() < 1e-15);
        assert_eq!(quantile(&[0.3; 5], 0.8).unwrap(), 0.3);
        assert_eq!(quantile(&[2.0, 1.0], 0.0).unwrap(), 1.0);
        assert_eq!(quantile(&[2.0, 1.0], 1.0).unwrap(), 2.0);
        assert!(quantile(&[], 0.5).is_err());
    }

    fn brute_auc(scores: &[f64], labels: &[u8]) -> f64 {
        let mut wins = 0.0;
        let mut pairs = 0.0;
        for (i, &yi) in labels.iter().enumerate() {
            for (j, &yj) in labels.iter().enumerate() {
                if yi == 1 && yj == 0 {
                    pairs += 1.0;
                    if scores[i] > scores[j] {
                        wins += 1.0;
                    } else if scores[i] == scores[j] {
                        wins += 0.5;
                    }
                }
            }
        }
        wins / pairs
    }

    fn st(auc: f64, ece: f64) -> ReliabilityState {
        ReliabilityState { auc, ece, brier: 0.1 }
    }

    #[test]
    fn auc_examples() {
        assert_eq!(roc_auc(&[0.9, 0.8, 0.2, 0.1], &[1, 1, 0, 0]).unwrap(), 1.0);
        assert_eq!(roc_auc(&[0.3; 6], &[1, 0, 1, 0, 0, 1]).unwrap(), 0.5);
        let s = [0.1, 0.4, 0.35, 0.8];
        let y = [0, 0, 1, 1];
        let expected = brute_auc(&s, &y);
        assert_eq!(expected, 0.75);
        assert!((roc_auc(&s, &y).unwrap() - expected).abs() < 1e-12);
    }

    #[test]
    fn auc_single_class_is_error() {
        assert!(matches!(roc_auc(&[0.1, 0.2], &[1, 1]), Err(Error::UndefinedAuc)));
        assert!(matches!(roc_auc(&[0.1, 0.2], &[0, 0]), Err(Error::UndefinedAuc)));
        assert!(roc_auc(&[0.1], &[0, 1]).is_err());
    }

    #[test]
    fn ece_examples() {
        let half = vec![0.5; 10];
        let labels: Vec<u8> = (0..10).map(|i| (i % 2) as u8).collect();
        assert!(ece(&half, &labels, 15).unwrap().abs() < 1e-15);
        assert_eq!(ece(&[1.0; 4], &[0; 4], 15).unwrap(), 1.0);
        // bin 1 (0.1): |0.5 - 0.1| * 0.5; bin 13 (0.9): |1.0 - 0.9| * 0.5
        let e = ece(&[0.1, 0.1, 0.9, 0.9], &[0, 1, 1, 1], 15).unwrap();
        assert!((e - 0.25).abs() < 1e-12);
        assert!(ece(&[], &[], 15).is_err());
        assert!(ece(&[0.5], &[1], 0).is_err());
    }

    #[test]
    fn ece_top_bin_is_closed() {
        // 1.0 shares the last bin with 0.95 (bin 14 of 15).
        let e = ece(&[1.0, 0.95], &[1, 1], 15).unwrap();
        assert!((e - 0.025).abs() < 1e-12);
    }

    #[test]
    fn brier_examples() {
        assert_eq!(brier(&[0.0, 1.0, 1.0], &[0, 1, 1]).unwrap(), 0.0);
        assert_eq!(brier(&[0.5; 3], &[0, 1, 1]).unwrap(), 0.25);
        assert!((brier(&[0.2, 0.7], &[0, 1]).unwrap() - 0.065).abs() < 1e-15);
        assert!(brier(&[], &[]).is_err());
    }

    #[test]
    fn volatility_examples() {
        let constant = vec![st(0.7, 0.05); 5];
        assert_eq!(volatility_l1(&constant).unwrap(), 0.0);
        let v = volatility_l1(&[st(0.6, 0.10), st(0.7, 0.12)]).unwrap();
        assert!((v - 0.12).abs() < 1e-12);
        assert!(volatility_l1(&[st(0.6, 0.1)]).is_err());
    }

    #[test]
    fn downside_examples() {
        let improving = [st(0.6, 0.1), st(0.65, 0.08), st(0.7, 0.05)];
        for mode in [DownsideMode::PerComponent, DownsideMode::JointAuc] {
            assert_eq!(downside_volatility(&improving, mode).unwrap(), 0.0);
            let d = downside_volatility(&[st(0.7, 0.1), st(0.6, 0.1)], mode).unwrap();
            assert!((d - 0.1).abs() < 1e-12);
        }
        let diverge = [st(0.6, 0.10), st(0.7, 0.15)];
        let per = downside_volatility(&diverge, DownsideMode::PerComponent).unwrap();
        let joint = downside_volatility(&diverge, DownsideMode::JointAuc).unwrap();
        assert!((per - 0.05).abs() < 1e-12);
        assert_eq!(joint, 0.0);
        assert!(downside_volatility(&[], DownsideMode::PerComponent).is_err());
    }

    #[test]
    fn brier_constant_probability_decomposition() {
        let labels = [1u8, 0, 0, 1, 0];
        let p = 0.3;
        let direct: f64 = labels.iter().map(|&y| (p - f64::from(y)).powi(2)).sum::<f64>() / labels.len() as f64;
        assert!((brier(&[p; 5], &labels).unwrap() - direct).abs() < 1e-15);
    }

    fn scored_labels() -> impl Strategy<Value = (Vec<f64>, Vec<u8>)> {
        (2usize..60).prop_flat_map(|n| (prop::collection::vec(0.0f64..1.0, n), prop::collection::vec(0u8..2, n)))
    }

    fn trajectory() -> impl Strategy<Value = Vec<ReliabilityState>> {
        prop::collection::vec((0.0f64..1.0, 0.0f64..1.0), 2..15)
            .prop_map(|v| v.into_iter().map(|(a, c)| st(a, c)).collect())
    }

    proptest! {
        #[test]
        fn auc_rank_invariant((s, y) in scored_labels()) {
            prop_assume!(y.contains(&0) && y.contains(&1));
            let base = roc_auc(&s, &y).unwrap();
            let transformed: Vec<f64> = s.iter().map(|v| (3.0 * v).exp() - 7.0).collect();
            prop_assert!((roc_auc(&transformed, &y).unwrap() - base).abs() < 1e-12);
        }

        #[test]
        fn auc_label_flip_complements((s, y) in scored_labels()) {
            prop_assume!(y.contains(&0) && y.contains(&1));
            let mut sorted = s.clone();
            sorted.sort_by(f64::total_cmp);
            prop_assume!(sorted.windows(2).all(|w| w[0] < w[1]));
            let flipped: Vec<u8> = y.iter().map(|v| 1 - v).collect();
            let total = roc_auc(&s, &y).unwrap() + roc_auc(&s, &flipped).unwrap();
            prop_assert!((total - 1.0).abs() < 1e-12);
        }

        #[test]
        fn downside_bounded_by_total(states in trajectory()) {
            let v = volatility_l1(&states).unwrap();
            for mode in [DownsideMode::PerComponent, DownsideMode::JointAuc] {
                prop_assert!(downside_volatility(&states, mode).unwrap() <= v + 1e-15);
            }
        }

        #[test]
        fn downside_equals_total_when_every_step_degrades(
            steps in prop::collection::vec((0.001f64..0.05, 0.001f64..0.05), 1..10)
        ) {
            let mut states = vec![st(0.9, 0.01)];
            for (da, dc) in steps {
                let last = *states.last().unwrap();
                states.push(st(last.auc - da, last.ece + dc));
            }
            let v = volatility_l1(&states).unwrap();
            for mode in [DownsideMode::PerComponent, DownsideMode::JointAuc] {
                prop_assert!((downside_volatility(&states, mode).unwrap() - v).abs() < 1e-12);
            }
        }

        #[test]
        fn ece_zero_when_bins_calibrated(
            groups in prop::collection::vec((0usize..5, 1usize..6), 1..6)
        ) {
            // Each group is a block of 4*reps predictions at k/4 with exactly k/4 positives,
            // so every non-empty bin has mean label == mean probability.
            let mut probs = Vec::new();
            let mut labels = Vec::new();
            for (k, reps) in groups {
                for i in 0..4 * reps {
                    probs.push(k as f64 / 4.0);
                    labels.push(u8::from(i % 4 < k));
                }
            }
            prop_assert!(ece(&probs, &labels, 15).unwrap().abs() < 1e-12);
        }
    }
}
