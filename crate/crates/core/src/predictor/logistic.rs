//! L2-regularised logistic regression trained by mini-batch gradient descent.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::preprocess::Preprocessor;
use crate::data::{Row, Schema};
use crate::error::{check_lengths, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    pub l2: f64,
    /// Rows per gradient step; 0 means full batch.
    pub batch_size: usize,
    /// Seeds the per-epoch row shuffle.
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self { epochs: 20, learning_rate: 0.05, l2: 1e-4, batch_size: 256, seed: 42 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogisticModel {
    pub preprocessor: Preprocessor,
    pub weights: Vec<f64>,
    pub bias: f64,
    pub config: TrainConfig,
    /// Full-data training loss before the first epoch and after each epoch.
    pub loss_history: Vec<f64>,
}

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// log(1 + e^z) without overflow.
fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

/// Mean log-loss plus `l2 / 2 * |w|^2` over a row-major design `x`, with its
/// gradient. The bias is not regularised.
pub fn logistic_loss_and_grad(x: &[f64], y: &[f64], weights: &[f64], bias: f64, l2: f64) -> (f64, Vec<f64>, f64) {
    let d = weights.len();
    let n = y.len();
    let mut grad = vec![0.0; d];
    let mut grad_b = 0.0;
    let mut loss = 0.0;
    for (i, &yi) in y.iter().enumerate() {
        let row = &x[i * d..(i + 1) * d];
        let z = bias + row.iter().zip(weights).map(|(a, b)| a * b).sum::<f64>();
        loss += softplus(z) - yi * z;
        let r = sigmoid(z) - yi;
        grad.iter_mut().zip(row).for_each(|(g, &v)| *g += r * v);
        grad_b += r;
    }
    let inv_n = 1.0 / n.max(1) as f64;
    loss *= inv_n;
    loss += 0.5 * l2 * weights.iter().map(|w| w * w).sum::<f64>();
    grad.iter_mut().zip(weights).for_each(|(g, w)| *g = *g * inv_n + l2 * w);
    (loss, grad, grad_b * inv_n)
}

pub fn train_builtin(schema: &Schema, rows: &[&Row], labels: &[u8], cfg: TrainConfig) -> Result<LogisticModel> {
    check_lengths(rows.len(), labels.len())?;
    let positives = labels.iter().filter(|&&y| y == 1).count();
    if positives == 0 || positives == labels.len() {
        return Err(Error::SingleClass("the training rows".into()));
    }
    if !(cfg.learning_rate > 0.0) || cfg.l2 < 0.0 {
        return Err(Error::invalid("learning_rate must be positive and l2 non-negative"));
    }
    let preprocessor = Preprocessor::fit(schema, rows.iter().copied())?;
    let d = preprocessor.width();
    let x = preprocessor.transform(rows.iter().copied());
    let y: Vec<f64> = labels.iter().map(|&v| f64::from(v)).collect();
    let n = y.len();

    let mut weights = vec![0.0; d];
    let mut bias = 0.0;
    let mut loss_history = Vec::with_capacity(cfg.epochs + 1);
    loss_history.push(logistic_loss_and_grad(&x, &y, &weights, bias, cfg.l2).0);

    let batch = if cfg.batch_size == 0 { n } else { cfg.batch_size.min(n) };
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut xb = Vec::with_capacity(batch * d);
    let mut yb = Vec::with_capacity(batch);
    for _ in 0..cfg.epochs {
        order.shuffle(&mut rng);
        for chunk in order.chunks(batch) {
            xb.clear();
            yb.clear();
            for &i in chunk {
                xb.extend_from_slice(&x[i * d..(i + 1) * d]);
                yb.push(y[i]);
            }
            let (_, grad, grad_b) = logistic_loss_and_grad(&xb, &yb, &weights, bias, cfg.l2);
            weights.iter_mut().zip(&grad).for_each(|(w, g)| *w -= cfg.learning_rate * g);
            bias -= cfg.learning_rate * grad_b;
        }
        loss_history.push(logistic_loss_and_grad(&x, &y, &weights, bias, cfg.l2).0);
    }

    Ok(LogisticModel { preprocessor, weights, bias, config: cfg, loss_history })
}

impl LogisticModel {
    pub fn predict<'a>(&self, rows: impl IntoIterator<Item = &'a Row>) -> Vec<f64> {
        let mut buf = vec![0.0; self.preprocessor.width()];
        rows.into_iter()
            .map(|row| {
                self.preprocessor.transform_into(row, &mut buf);
                let z = self.bias + buf.iter().zip(&self.weights).map(|(a, b)| a * b).sum::<f64>();
                sigmoid(z)
            })
            .collect()
    }
}
