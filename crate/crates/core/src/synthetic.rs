//! Seeded generator of drifting tabular classification data.
//!
//! Each window draws `n_numeric` Gaussian features (unit variance, mean set by
//! the covariate schedule) and one categorical `segment` feature whose
//! category probabilities can be tilted per window. Labels come from a
//! logistic model whose coefficients are perturbed additively by the concept
//! schedule. Schedules index all windows, history first.

use std::path::Path;

use rand::distr::{weighted::WeightedIndex, Distribution};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::data::{Cell, Feature, FeatureKind, Schema, Window, WindowedDataset};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CovariateShift {
    /// Added to the mean of each numeric feature; empty means no offset.
    pub numeric_offsets: Vec<f64>,
    /// Exponential tilt toward higher-index categories.
    pub category_tilt: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SyntheticConfig {
    pub n_history: usize,
    pub n_windows: usize,
    pub rows_per_window: usize,
    pub first_window_id: i64,
    /// Logistic coefficients of the numeric features; its length sets their count.
    pub coefficients: Vec<f64>,
    pub n_categories: usize,
    /// Logit effect of the highest-index category; effects are linear in the index
    /// and centred on zero.
    pub category_effect: f64,
    pub covariate_shift: Vec<CovariateShift>,
    pub concept_shift: Vec<Vec<f64>>,
    pub base_default_rate: f64,
    pub missing_rate: f64,
    pub seed: u64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        Self {
            n_history: 3,
            n_windows: 9,
            rows_per_window: 5_000,
            first_window_id: 2007,
            coefficients: vec![0.8, -0.6, 0.4],
            n_categories: 6,
            category_effect: 0.6,
            covariate_shift: Vec::new(),
            concept_shift: Vec::new(),
            base_default_rate: 0.2,
            missing_rate: 0.0,
            seed: 42,
        }
    }
}

impl SyntheticConfig {
    pub fn total_windows(&self) -> usize {
        self.n_history + self.n_windows
    }

    pub fn n_numeric(&self) -> usize {
        self.coefficients.len()
    }

    pub fn from_json_file(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path)?;
        Ok(serde_json::from_reader(std::io::BufReader::new(file))?)
    }

    /// Shifts every numeric mean by `magnitude` and tilts the categorical
    /// distribution in 1-based evaluation window `t` only.
    pub fn with_covariate_spike(mut self, t: usize, magnitude: f64) -> Self {
        let total = self.total_windows();
        self.covariate_shift.resize(total, CovariateShift::default());
        let idx = self.n_history + t - 1;
        if idx < total {
            self.covariate_shift[idx] =
                CovariateShift { numeric_offsets: vec![magnitude; self.n_numeric()], category_tilt: magnitude };
        }
        self
    }

    /// Adds a persistent coefficient perturbation from evaluation window `t` on.
    pub fn with_concept_shift_from(mut self, t: usize, delta: Vec<f64>) -> Self {
        let total = self.total_windows();
        self.concept_shift.resize(total, Vec::new());
        for w in (self.n_history + t - 1)..total {
            self.concept_shift[w] = delta.clone();
        }
        self
    }

    pub fn validate(&self) -> Result<()> {
        let total = self.total_windows();
        if self.rows_per_window == 0 {
            return Err(Error::invalid("rows_per_window must be at least 1"));
        }
        if self.n_windows == 0 {
            return Err(Error::invalid("n_windows must be at least 1"));
        }
        if self.n_categories == 0 && self.coefficients.is_empty() {
            return Err(Error::invalid("config has no features"));
        }
        if !(self.base_default_rate > 0.0 && self.base_default_rate < 1.0) {
            return Err(Error::invalid("base_default_rate must lie in (0, 1)"));
        }
        if !(0.0..1.0).contains(&self.missing_rate) {
            return Err(Error::invalid("missing_rate must lie in [0, 1)"));
        }
        if !self.covariate_shift.is_empty() && self.covariate_shift.len() != total {
            return Err(Error::invalid(format!(
                "covariate_shift has {} entries, expected 0 or {total}",
                self.covariate_shift.len()
            )));
        }
        if !self.concept_shift.is_empty() && self.concept_shift.len() != total {
            return Err(Error::invalid(format!(
                "concept_shift has {} entries, expected 0 or {total}",
                self.concept_shift.len()
            )));
        }
        let n = self.n_numeric();
        for (i, s) in self.covariate_shift.iter().enumerate() {
            if !s.numeric_offsets.is_empty() && s.numeric_offsets.len() != n {
                return Err(Error::invalid(format!(
                    "covariate_shift[{i}] has {} offsets, expected {n}",
                    s.numeric_offsets.len()
                )));
            }
        }
        for (i, d) in self.concept_shift.iter().enumerate() {
            if !d.is_empty() && d.len() != n {
                return Err(Error::invalid(format!("concept_shift[{i}] has {} entries, expected {n}", d.len())));
            }
        }
        Ok(())
    }

    fn category_effects(&self) -> Vec<f64> {
        let k = self.n_categories;
        (0..k)
            .map(|i| if k <= 1 { 0.0 } else { self.category_effect * (2.0 * i as f64 / (k - 1) as f64 - 1.0) })
            .collect()
    }

    fn category_weights(&self, tilt: f64) -> Vec<f64> {
        let k = self.n_categories;
        (0..k)
            .map(|i| {
                let pos = if k <= 1 { 0.0 } else { i as f64 / (k - 1) as f64 };
                (tilt * pos).exp() / (i + 1) as f64
            })
            .collect()
    }

    /// Intercept giving the configured default rate with no shift applied.
    fn intercept(&self) -> f64 {
        let scale = self.coefficients.iter().map(|b| b * b).sum::<f64>().sqrt();
        let effects = self.category_effects();
        let weights = self.category_weights(0.0);
        let total_w: f64 = weights.iter().sum();
        let rate = |a: f64| -> f64 {
            let mixture = |z: f64| -> f64 {
                if effects.is_empty() {
                    return sigmoid(a + scale * z);
                }
                effects.iter().zip(&weights).map(|(g, w)| w / total_w * sigmoid(a + g + scale * z)).sum()
            };
            expect_standard_normal(mixture)
        };
        let (mut lo, mut hi) = (-30.0, 30.0);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if rate(mid) < self.base_default_rate {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }
}

fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

/// E[f(Z)] for standard normal Z by composite Simpson on [-10, 10].
fn expect_standard_normal(f: impl Fn(f64) -> f64) -> f64 {
    const STEPS: usize = 2000;
    let (a, b) = (-10.0, 10.0);
    let h = (b - a) / STEPS as f64;
    let density = |z: f64| (-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI).sqrt();
    let mut acc = 0.0;
    for i in 0..=STEPS {
        let z = a + i as f64 * h;
        let w = if i == 0 || i == STEPS {
            1.0
        } else if i % 2 == 1 {
            4.0
        } else {
            2.0
        };
        acc += w * f(z) * density(z);
    }
    acc * h / 3.0
}

pub const SEGMENT_FEATURE: &str = "segment";
pub const LABEL_COLUMN: &str = "default";

pub fn generate_synthetic(cfg: &SyntheticConfig) -> Result<WindowedDataset> {
    cfg.validate()?;
    let n_num = cfg.n_numeric();
    let mut features: Vec<Feature> =
        (1..=n_num).map(|j| Feature { name: format!("x{j}"), kind: FeatureKind::Numeric }).collect();
    if cfg.n_categories > 0 {
        features.push(Feature { name: SEGMENT_FEATURE.into(), kind: FeatureKind::Categorical });
    }
    let category_names: Vec<String> = (0..cfg.n_categories).map(|i| format!("s{i}")).collect();
    let effects = cfg.category_effects();
    let intercept = cfg.intercept();

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut windows = Vec::with_capacity(cfg.total_windows());
    for w in 0..cfg.total_windows() {
        let shift = cfg.covariate_shift.get(w);
        let offsets: Vec<f64> = match shift {
            Some(s) if !s.numeric_offsets.is_empty() => s.numeric_offsets.clone(),
            _ => vec![0.0; n_num],
        };
        let tilt = shift.map_or(0.0, |s| s.category_tilt);
        let coefs: Vec<f64> = match cfg.concept_shift.get(w) {
            Some(d) if !d.is_empty() => cfg.coefficients.iter().zip(d).map(|(b, d)| b + d).collect(),
            _ => cfg.coefficients.clone(),
        };
        let cat_dist = if cfg.n_categories > 0 {
            Some(
                WeightedIndex::new(cfg.category_weights(tilt))
                    .map_err(|e| Error::invalid(format!("category weights: {e}")))?,
            )
        } else {
            None
        };

        let mut rows = Vec::with_capacity(cfg.rows_per_window);
        let mut labels = Vec::with_capacity(cfg.rows_per_window);
        for _ in 0..cfg.rows_per_window {
            let mut logit = intercept;
            let mut row = Vec::with_capacity(features.len());
            for j in 0..n_num {
                let z: f64 = rng.sample(StandardNormal);
                let x = offsets[j] + z;
                logit += coefs[j] * x;
                let missing = cfg.missing_rate > 0.0 && rng.random::<f64>() < cfg.missing_rate;
                row.push(if missing { Cell::Missing } else { Cell::Num(x) });
            }
            if let Some(dist) = &cat_dist {
                let c = dist.sample(&mut rng);
                logit += effects[c];
                row.push(Cell::Cat(category_names[c].clone()));
            }
            let y = u8::from(rng.random::<f64>() < sigmoid(logit));
            rows.push(row);
            labels.push(y);
        }
        windows.push(Window { id: cfg.first_window_id + w as i64, rows, labels });
    }
    WindowedDataset::new(Schema::new(features), LABEL_COLUMN, windows, cfg.n_history)
}
