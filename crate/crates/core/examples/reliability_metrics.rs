//! Per-window reliability state and trajectory volatility on hand-made data.

use relcontrol::metrics::{brier, downside_volatility, ece, roc_auc, volatility_l1, DownsideMode, ReliabilityState};

fn main() -> relcontrol::Result<()> {
    let probs = [0.1, 0.4, 0.35, 0.8];
    let labels = [0, 0, 1, 1];
    println!("AUC   {:.4}", roc_auc(&probs, &labels)?);
    println!("ECE   {:.4}", ece(&probs, &labels, 15)?);
    println!("Brier {:.4}", brier(&probs, &labels)?);

    // A model that slowly loses discrimination while its calibration wobbles.
    let trajectory: Vec<ReliabilityState> = [(0.78, 0.020), (0.77, 0.025), (0.75, 0.040), (0.76, 0.030), (0.72, 0.060)]
        .iter()
        .map(|&(auc, ece)| ReliabilityState::new(auc, ece, 0.15))
        .collect::<Result<_, _>>()?;

    println!("\nV_L1            {:.4}", volatility_l1(&trajectory)?);
    println!("V_L1- per-part  {:.4}", downside_volatility(&trajectory, DownsideMode::PerComponent)?);
    println!("V_L1- joint-AUC {:.4}", downside_volatility(&trajectory, DownsideMode::JointAuc)?);
    Ok(())
}
