//! One drift-triggered deployment with hand-picked thresholds, printing the
//! per-window log: what was done on entry, what was observed, which alarms
//! fired.

use relcontrol::policy::{summarize, Deployment, DeploymentConfig, PolicySpec, ThresholdConfig};
use relcontrol::synthetic::{generate_synthetic, SyntheticConfig};

fn main() -> relcontrol::Result<()> {
    let cfg = SyntheticConfig::default().with_covariate_spike(5, 1.5).with_concept_shift_from(4, vec![-0.5, 0.4, 0.3]);
    let data = generate_synthetic(&cfg)?;
    let deployment = Deployment::new(&data, DeploymentConfig::default())?;

    let thresholds = ThresholdConfig::new(0.02, 0.2, 0.02, 0.75)?;
    let traj = deployment.run(&PolicySpec::Dtrc(thresholds))?;
    println!("window  action       cost  drift    AUC     ECE    calib  disc  model     calibrator");
    for r in &traj.records {
        let model = r.trained_on.map_or("-".into(), |(a, b)| format!("{a}-{b}"));
        let cal = r.calibrated_on.map_or("-".into(), |w| w.to_string());
        println!(
            "{:>6}  {:<11} {:>5}  {:.4}  {:.4}  {:.4}  {:<5}  {:<5} {:<9} {}",
            r.window_id,
            r.action.to_string(),
            r.cost,
            r.drift.combined,
            r.pre_metrics.auc,
            r.pre_metrics.ece,
            r.calib_fail.unwrap_or(false),
            r.disc_fail.unwrap_or(false),
            model,
            cal
        );
    }
    let o = summarize(&traj)?;
    println!(
        "\ntotal cost {}  V_L1 {:.5}  retrains {}  recalibrations {}",
        o.total_cost, o.v_l1, o.retrains, o.recalibrations
    );
    Ok(())
}
