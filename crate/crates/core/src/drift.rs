//! Distributional drift between a reference period and an evaluation window.
//!
//! Numeric features are compared with the two-sample Kolmogorov-Smirnov
//! statistic, categorical features with the base-2 Jensen-Shannon divergence
//! of top-k compressed histograms. Both live in [0, 1] and are blended as
//! `alpha * mean_ks + (1 - alpha) * mean_jsd`.

use std::collections::BTreeMap;

use log::warn;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{FeatureKind, Schema, WindowSlice};
use crate::error::{Error, Result};

pub const DEFAULT_ALPHA: f64 = 0.5;
pub const DEFAULT_TOP_K: usize = 50;

const MASS_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DriftSignal {
    /// Mean KS statistic over numeric features; `None` when there are none.
    pub ks_mean: Option<f64>,
    /// Mean JSD over categorical features; `None` when there are none.
    pub jsd_mean: Option<f64>,
    pub combined: f64,
    pub alpha: f64,
}

impl DriftSignal {
    /// Blends the two components. A missing component leaves the other one as
    /// the combined value.
    pub fn combine(ks_mean: Option<f64>, jsd_mean: Option<f64>, alpha: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&alpha) {
            return Err(Error::invalid(format!("alpha = {alpha} outside [0, 1]")));
        }
        let combined = match (ks_mean, jsd_mean) {
            (Some(ks), Some(js)) => alpha * ks + (1.0 - alpha) * js,
            (Some(ks), None) => ks,
            (None, Some(js)) => js,
            (None, None) => {
                return Err(Error::DriftUndefined("no numeric or categorical feature could be compared".into()))
            }
        };
        Ok(Self { ks_mean, jsd_mean, combined, alpha })
    }
}

/// Two-sample KS statistic: the largest gap between the empirical CDFs,
/// evaluated at every observed value.
pub fn ks_statistic(sample_a: &[f64], sample_b: &[f64]) -> Result<f64> {
    if sample_a.is_empty() || sample_b.is_empty() {
        return Err(Error::Empty("KS needs two non-empty samples"));
    }
    if sample_a.iter().chain(sample_b).any(|v| v.is_nan()) {
        return Err(Error::invalid("KS sample contains NaN"));
    }
    let mut a = sample_a.to_vec();
    let mut b = sample_b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (n, m) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0, 0);
    let mut sup: f64 = 0.0;
    while i < a.len() || j < b.len() {
        let x = match (a.get(i), b.get(j)) {
            (Some(&x), Some(&y)) => x.min(y),
            (Some(&x), None) => x,
            (None, Some(&y)) => y,
            (None, None) => unreachable!(),
        };
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        sup = sup.max((i as f64 / n - j as f64 / m).abs());
    }
    Ok(sup)
}

/// Category probabilities after keeping the top-k categories and pooling the
/// rest into an OTHER bucket.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompressedHistogram {
    named: BTreeMap<String, f64>,
    other: f64,
}

impl CompressedHistogram {
    /// Builds a histogram from explicit probabilities, checking normalisation.
    pub fn from_probabilities(named: BTreeMap<String, f64>, other: f64) -> Result<Self> {
        let h = Self { named, other };
        h.check_normalized()?;
        Ok(h)
    }

    pub fn named(&self) -> &BTreeMap<String, f64> {
        &self.named
    }

    pub fn other(&self) -> f64 {
        self.other
    }

    pub fn get(&self, category: &str) -> f64 {
        self.named.get(category).copied().unwrap_or(0.0)
    }

    pub fn total_mass(&self) -> f64 {
        self.named.values().sum::<f64>() + self.other
    }

    fn check_normalized(&self) -> Result<()> {
        if self.named.values().chain(std::iter::once(&self.other)).any(|&p| !(p >= 0.0)) {
            return Err(Error::invalid("histogram has a negative or NaN probability"));
        }
        let mass = self.total_mass();
        if (mass - 1.0).abs() > MASS_TOLERANCE {
            return Err(Error::invalid(format!("histogram mass {mass} is not 1")));
        }
        Ok(())
    }
}

/// Keeps the `k` most frequent categories (ties broken by name) and pools
/// the remainder into OTHER.
pub fn compress_histogram<'a, I>(counts: I, k: usize) -> Result<CompressedHistogram>
where
    I: IntoIterator<Item = (&'a String, &'a u64)>,
{
    let mut entries: Vec<(&str, u64)> = counts.into_iter().map(|(c, &n)| (c.as_str(), n)).collect();
    let total: u64 = entries.iter().map(|(_, n)| n).sum();
    if total == 0 {
        return Err(Error::Empty("histogram has zero total count"));
    }
    entries.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
    let total_f = total as f64;
    let named: BTreeMap<String, f64> =
        entries.iter().take(k).map(|&(c, n)| (c.to_string(), n as f64 / total_f)).collect();
    let pooled: u64 = entries.iter().skip(k).map(|(_, n)| n).sum();
    Ok(CompressedHistogram { named, other: pooled as f64 / total_f })
}

/// Jensen-Shannon divergence with base-2 logarithms, so the value is in [0, 1].
/// Keys absent on one side count as zero probability there.
pub fn jsd(h_a: &CompressedHistogram, h_b: &CompressedHistogram) -> Result<f64> {
    h_a.check_normalized()?;
    h_b.check_normalized()?;
    let mut pairs: Vec<(f64, f64)> = h_a
        .named
        .keys()
        .chain(h_b.named.keys().filter(|k| !h_a.named.contains_key(*k)))
        .map(|k| (h_a.get(k), h_b.get(k)))
        .collect();
    pairs.push((h_a.other, h_b.other));

    let kl_term = |p: f64, m: f64| if p > 0.0 { p * (p / m).log2() } else { 0.0 };
    let value: f64 = pairs
        .iter()
        .map(|&(p, q)| {
            let m = 0.5 * (p + q);
            0.5 * kl_term(p, m) + 0.5 * kl_term(q, m)
        })
        .sum();
    Ok(value.clamp(0.0, 1.0))
}

/// Drift of `evaluation` relative to `reference` over every schema feature.
///
/// Numeric features with no observed value on either side are skipped.
pub fn drift_signal(
    schema: &Schema,
    reference: &WindowSlice<'_>,
    evaluation: &WindowSlice<'_>,
    alpha: f64,
    k: usize,
) -> Result<DriftSignal> {
    if reference.n_rows() == 0 || evaluation.n_rows() == 0 {
        return Err(Error::Empty("drift needs rows on both sides"));
    }
    let numeric: Vec<usize> = schema.indices_of(FeatureKind::Numeric).collect();
    let categorical: Vec<usize> = schema.indices_of(FeatureKind::Categorical).collect();

    let ks_values: Vec<Option<f64>> = numeric
        .par_iter()
        .map(|&f| {
            let a = reference.numeric_values(f);
            let b = evaluation.numeric_values(f);
            if a.is_empty() || b.is_empty() {
                return Ok(None);
            }
            ks_statistic(&a, &b).map(Some)
        })
        .collect::<Result<_>>()?;
    let jsd_values: Vec<f64> = categorical
        .par_iter()
        .map(|&f| {
            let a = compress_histogram(&reference.category_counts(f), k)?;
            let b = compress_histogram(&evaluation.category_counts(f), k)?;
            jsd(&a, &b)
        })
        .collect::<Result<_>>()?;

    let observed_ks: Vec<f64> = ks_values.iter().flatten().copied().collect();
    if observed_ks.len() < numeric.len() {
        warn!("{} numeric feature(s) had no observed values and were skipped", numeric.len() - observed_ks.len());
    }
    let ks_mean = mean(&observed_ks);
    let jsd_mean = mean(&jsd_values);
    match (ks_mean, jsd_mean) {
        (None, Some(_)) => warn!("no numeric features to compare; drift uses JSD alone"),
        (Some(_), None) => warn!("no categorical features to compare; drift uses KS alone"),
        _ => {}
    }
    DriftSignal::combine(ks_mean, jsd_mean, alpha)
}

fn mean(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        None
    } else {
        Some(values.iter().sum::<f64>() / values.len() as f64)
    }
}
