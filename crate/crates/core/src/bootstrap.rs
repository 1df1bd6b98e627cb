//! Percentile bootstrap intervals for trajectory volatility.
//!
//! Each replicate draws `T` window states with replacement and treats the
//! draw order as its temporal order, then recomputes both volatility
//! metrics. Window indices come from ChaCha8 seeded with the user seed:
//! every index is `(next_u64() * T) >> 64` (128-bit product), all drawn up
//! front, so results do not depend on thread scheduling or float rounding.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::{downside_volatility, quantile, volatility_l1, DownsideMode, ReliabilityState};

pub const DEFAULT_REPLICATES: usize = 1000;
pub const DEFAULT_LEVEL: f64 = 0.95;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BootstrapResult {
    pub metric: String,
    pub point_estimate: f64,
    pub lower: f64,
    pub upper: f64,
    pub n_replicates: usize,
    pub level: f64,
    pub seed: u64,
}

/// Index sequences for `replicates` resamples of `t` windows.
pub fn resample_indices(t: usize, replicates: usize, seed: u64) -> Vec<Vec<usize>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..replicates)
        .map(|_| (0..t).map(|_| ((u128::from(rng.next_u64()) * t as u128) >> 64) as usize).collect())
        .collect()
}

/// Intervals for `v_l1` and the downside variant, in that order.
pub fn block_bootstrap(
    states: &[ReliabilityState],
    replicates: usize,
    level: f64,
    seed: u64,
    mode: DownsideMode,
) -> Result<(BootstrapResult, BootstrapResult)> {
    if states.len() < 2 {
        return Err(Error::invalid("bootstrap needs at least two windows"));
    }
    if replicates == 0 {
        return Err(Error::invalid("bootstrap needs at least one replicate"));
    }
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::invalid(format!("confidence level {level} must lie in (0, 1)")));
    }
    let draws: Vec<(f64, f64)> = resample_indices(states.len(), replicates, seed)
        .into_par_iter()
        .map(|idx| {
            let replicate: Vec<ReliabilityState> = idx.iter().map(|&i| states[i]).collect();
            Ok((volatility_l1(&replicate)?, downside_volatility(&replicate, mode)?))
        })
        .collect::<Result<_>>()?;

    let tail = (1.0 - level) / 2.0;
    let interval = |metric: &str, point: f64, values: Vec<f64>| -> Result<BootstrapResult> {
        Ok(BootstrapResult {
            metric: metric.to_string(),
            point_estimate: point,
            lower: quantile(&values, tail)?,
            upper: quantile(&values, 1.0 - tail)?,
            n_replicates: replicates,
            level,
            seed,
        })
    };
    let (v, down): (Vec<f64>, Vec<f64>) = draws.into_iter().unzip();
    Ok((
        interval("v_l1", volatility_l1(states)?, v)?,
        interval("v_l1_downside", downside_volatility(states, mode)?, down)?,
    ))
}
