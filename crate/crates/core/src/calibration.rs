//! Isotonic post-hoc calibration.
//!
//! Fitting aggregates duplicate scores into weighted points and runs weighted
//! pool-adjacent-violators. The fitted map keeps each pooled block's lowest
//! and highest score as breakpoints; evaluation interpolates linearly between
//! breakpoints and clamps outside them.

use serde::{Deserialize, Serialize};

use crate::error::{check_lengths, Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IsotonicCalibrator {
    breakpoints: Vec<f64>,
    values: Vec<f64>,
}

impl IsotonicCalibrator {
    /// Rebuilds a calibrator from serialized arrays, checking its invariants.
    pub fn from_parts(breakpoints: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        check_lengths(breakpoints.len(), values.len())?;
        if breakpoints.is_empty() {
            return Err(Error::Empty("calibrator has no breakpoints"));
        }
        if breakpoints.iter().any(|b| !b.is_finite()) || breakpoints.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::invalid("breakpoints must be finite and strictly increasing"));
        }
        if values.iter().any(|v| !(0.0..=1.0).contains(v)) || values.windows(2).any(|w| w[0] > w[1]) {
            return Err(Error::invalid("plateau values must be non-decreasing in [0, 1]"));
        }
        Ok(Self { breakpoints, values })
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Calibrated probability for one score. NaN maps to the lowest plateau.
    pub fn apply_one(&self, score: f64) -> f64 {
        let bp = &self.breakpoints;
        let last = bp.len() - 1;
        if score.is_nan() || score <= bp[0] {
            return self.values[0];
        }
        if score >= bp[last] {
            return self.values[last];
        }
        // First breakpoint strictly greater than score; 1..=last here.
        let hi = bp.partition_point(|&b| b <= score);
        let lo = hi - 1;
        if bp[lo] == score {
            return self.values[lo];
        }
        let frac = (score - bp[lo]) / (bp[hi] - bp[lo]);
        self.values[lo] + frac * (self.values[hi] - self.values[lo])
    }

    pub fn apply(&self, scores: &[f64]) -> Vec<f64> {
        scores.iter().map(|&s| self.apply_one(s)).collect()
    }
}

/// Least-squares non-decreasing fit of binary labels on scores.
pub fn fit_isotonic(scores: &[f64], labels: &[u8]) -> Result<IsotonicCalibrator> {
    check_lengths(scores.len(), labels.len())?;
    if scores.is_empty() {
        return Err(Error::Empty("isotonic fit needs at least one point"));
    }
    if scores.iter().any(|s| !s.is_finite()) {
        return Err(Error::invalid("isotonic fit needs finite scores"));
    }
    if labels.iter().any(|&y| y > 1) {
        return Err(Error::invalid("isotonic fit needs binary labels"));
    }
    let targets: Vec<f64> = labels.iter().map(|&y| f64::from(y)).collect();
    fit_isotonic_weighted(scores, &targets)
}

/// Same as [`fit_isotonic`] for real targets in [0, 1].
pub fn fit_isotonic_weighted(scores: &[f64], targets: &[f64]) -> Result<IsotonicCalibrator> {
    check_lengths(scores.len(), targets.len())?;
    if scores.is_empty() {
        return Err(Error::Empty("isotonic fit needs at least one point"));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));

    // (score, mean target, weight) per unique score.
    let mut points: Vec<(f64, f64, f64)> = Vec::new();
    for &i in &order {
        match points.last_mut() {
            Some(last) if last.0 == scores[i] => {
                last.1 = (last.1 * last.2 + targets[i]) / (last.2 + 1.0);
                last.2 += 1.0;
            }
            _ => points.push((scores[i], targets[i], 1.0)),
        }
    }

    let blocks = pava(&points);
    let mut breakpoints = Vec::with_capacity(2 * blocks.len());
    let mut values = Vec::with_capacity(2 * blocks.len());
    for b in &blocks {
        let v = b.value.clamp(0.0, 1.0);
        breakpoints.push(points[b.start].0);
        values.push(v);
        if b.end > b.start {
            breakpoints.push(points[b.end].0);
            values.push(v);
        }
    }
    // Neighbouring block means are increasing up to rounding; keep the output monotone.
    for i in 1..values.len() {
        if values[i] < values[i - 1] {
            values[i] = values[i - 1];
        }
    }
    Ok(IsotonicCalibrator { breakpoints, values })
}

struct Block {
    start: usize,
    end: usize,
    value: f64,
    weight: f64,
}

/// Weighted pool-adjacent-violators over points sorted by score.
fn pava(points: &[(f64, f64, f64)]) -> Vec<Block> {
    let mut stack: Vec<Block> = Vec::with_capacity(points.len());
    for (i, &(_, y, w)) in points.iter().enumerate() {
        let mut cur = Block { start: i, end: i, value: y, weight: w };
        while let Some(prev) = stack.last() {
            if prev.value <= cur.value {
                break;
            }
            let prev = stack.pop().expect("checked non-empty");
            let weight = prev.weight + cur.weight;
            cur = Block {
                start: prev.start,
                end: cur.end,
                value: (prev.value * prev.weight + cur.value * cur.weight) / weight,
                weight,
            };
        }
        stack.push(cur);
    }
    stack
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Exhaustive search over all contiguous partitions of score-sorted points
    /// whose block means are non-decreasing; returns fitted values per point.
    fn brute_force_isotonic(scores: &[f64], labels: &[u8]) -> Vec<f64> {
        let n = scores.len();
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
        let y: Vec<f64> = order.iter().map(|&i| f64::from(labels[i])).collect();
        let mut best: Option<(f64, Vec<f64>)> = None;
        for mask in 0u32..(1 << (n - 1)) {
            let mut fitted = vec![0.0; n];
            let mut start = 0;
            let mut prev_mean = f64::NEG_INFINITY;
            let mut feasible = true;
            for end in 0..n {
                let cut = end == n - 1 || mask & (1 << end) != 0;
                if cut {
                    let mean = y[start..=end].iter().sum::<f64>() / (end - start + 1) as f64;
                    if mean < prev_mean {
                        feasible = false;
                        break;
                    }
                    fitted[start..=end].iter_mut().for_each(|v| *v = mean);
                    prev_mean = mean;
                    start = end + 1;
                }
            }
            if !feasible {
                continue;
            }
            let sse: f64 = fitted.iter().zip(&y).map(|(f, t)| (f - t).powi(2)).sum();
            if best.as_ref().is_none_or(|(b, _)| sse < *b - 1e-15) {
                best = Some((sse, fitted));
            }
        }
        let sorted_fit = best.expect("the single-block partition is always feasible").1;
        let mut out = vec![0.0; n];
        for (rank, &i) in order.iter().enumerate() {
            out[i] = sorted_fit[rank];
        }
        out
    }

    #[test]
    fn monotone_labels_fit_exactly() {
        let s = [0.1, 0.2, 0.3, 0.4];
        let y = [0, 0, 1, 1];
        let cal = fit_isotonic(&s, &y).unwrap();
        assert_eq!(cal.apply(&s), vec![0.0, 0.0, 1.0, 1.0]);
    }

    #[test]
    fn two_point_violation_pools() {
        let cal = fit_isotonic(&[1.0, 2.0], &[1, 0]).unwrap();
        assert_eq!(cal.apply(&[1.0, 2.0]), vec![0.5, 0.5]);
    }

    #[test]
    fn duplicate_scores_aggregate() {
        let cal = fit_isotonic(&[0.5, 0.5, 0.5, 0.9], &[1, 0, 0, 1]).unwrap();
        let out = cal.apply(&[0.5, 0.9]);
        assert!((out[0] - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(out[1], 1.0);
    }

    #[test]
    fn apply_clamps_and_interpolates() {
        let cal = IsotonicCalibrator::from_parts(vec![0.2, 0.4, 0.8], vec![0.1, 0.3, 0.9]).unwrap();
        assert_eq!(cal.apply_one(0.4), 0.3);
        assert_eq!(cal.apply_one(-5.0), 0.1);
        assert_eq!(cal.apply_one(3.0), 0.9);
        assert!((cal.apply_one(0.6) - 0.6).abs() < 1e-15);
        assert!((cal.apply_one(0.3) - 0.2).abs() < 1e-15);
    }

    #[test]
    fn from_parts_validates() {
        assert!(IsotonicCalibrator::from_parts(vec![0.2, 0.2], vec![0.1, 0.2]).is_err());
        assert!(IsotonicCalibrator::from_parts(vec![0.1, 0.2], vec![0.5, 0.2]).is_err());
        assert!(IsotonicCalibrator::from_parts(vec![], vec![]).is_err());
    }

    #[test]
    fn empty_fit_is_error() {
        assert!(fit_isotonic(&[], &[]).is_err());
    }

    #[test]
    fn serializes_as_arrays() {
        let cal = fit_isotonic(&[0.1, 0.3, 0.2], &[0, 1, 1]).unwrap();
        let json = serde_json::to_string(&cal).unwrap();
        assert!(json.starts_with("{\"breakpoints\":["));
        let back: IsotonicCalibrator = serde_json::from_str(&json).unwrap();
        assert_eq!(back, cal);
    }

    proptest! {
        #[test]
        fn pava_matches_partition_search(
            points in prop::collection::vec((0.0f64..1.0, 0u8..2), 1..=8)
        ) {
            let scores: Vec<f64> = points.iter().map(|p| p.0).collect();
            let mut sorted = scores.clone();
            sorted.sort_by(f64::total_cmp);
            prop_assume!(sorted.windows(2).all(|w| w[0] < w[1]));
            let labels: Vec<u8> = points.iter().map(|p| p.1).collect();
            let fitted = fit_isotonic(&scores, &labels).unwrap().apply(&scores);
            let oracle = brute_force_isotonic(&scores, &labels);
            for (f, o) in fitted.iter().zip(&oracle) {
                prop_assert!((f - o).abs() < 1e-9);
            }
        }

        #[test]
        fn fitted_mean_equals_label_mean(
            points in prop::collection::vec((0.0f64..1.0, 0u8..2), 1..200)
        ) {
            let scores: Vec<f64> = points.iter().map(|p| p.0).collect();
            let labels: Vec<u8> = points.iter().map(|p| p.1).collect();
            let fitted = fit_isotonic(&scores, &labels).unwrap().apply(&scores);
            let n = scores.len() as f64;
            let fit_mean = fitted.iter().sum::<f64>() / n;
            let label_mean = labels.iter().map(|&y| f64::from(y)).sum::<f64>() / n;
            prop_assert!((fit_mean - label_mean).abs() < 1e-9);
        }

        #[test]
        fn calibrated_output_monotone(
            points in prop::collection::vec((0.0f64..1.0, 0u8..2), 1..100),
            mut probes in prop::collection::vec(-0.5f64..1.5, 2..50),
        ) {
            let scores: Vec<f64> = points.iter().map(|p| p.0).collect();
            let labels: Vec<u8> = points.iter().map(|p| p.1).collect();
            let cal = fit_isotonic(&scores, &labels).unwrap();
            probes.sort_by(f64::total_cmp);
            let out = cal.apply(&probes);
            prop_assert!(out.windows(2).all(|w| w[0] <= w[1]));
            prop_assert!(out.iter().all(|v| (0.0..=1.0).contains(v)));
        }
    }
}
