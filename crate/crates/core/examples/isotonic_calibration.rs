//! Post-hoc isotonic recalibration of a deliberately overconfident scorer.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use relcontrol::calibration::fit_isotonic;
use relcontrol::metrics::{ece, roc_auc};

fn sample(rng: &mut ChaCha8Rng, n: usize) -> (Vec<f64>, Vec<u8>) {
    let mut scores = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    for _ in 0..n {
        let p: f64 = rng.random_range(0.05..0.95);
        labels.push(u8::from(rng.random::<f64>() < p));
        // Push scores toward the extremes without changing their order.
        scores.push(p.powf(3.0) / (p.powf(3.0) + (1.0 - p).powf(3.0)));
    }
    (scores, labels)
}

fn main() -> relcontrol::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let (fit_s, fit_y) = sample(&mut rng, 4000);
    let (test_s, test_y) = sample(&mut rng, 4000);

    let cal = fit_isotonic(&fit_s, &fit_y)?;
    let calibrated = cal.apply(&test_s);
    println!("breakpoints: {}", cal.breakpoints().len());
    println!("ECE raw        {:.4}", ece(&test_s, &test_y, 15)?);
    println!("ECE calibrated {:.4}", ece(&calibrated, &test_y, 15)?);
    // Monotone maps can only merge ranks, so AUC moves at most through ties.
    println!("AUC raw {:.4} / calibrated {:.4}", roc_auc(&test_s, &test_y)?, roc_auc(&calibrated, &test_y)?);
    Ok(())
}
