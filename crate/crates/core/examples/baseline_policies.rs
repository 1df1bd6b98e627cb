//! The three fixed schedules on one synthetic horizon: never update,
//! recalibrate every window, retrain every window.

use relcontrol::policy::{summarize, Deployment, DeploymentConfig, PolicySpec};
use relcontrol::report::summary_table;
use relcontrol::synthetic::{generate_synthetic, SyntheticConfig};

fn main() -> relcontrol::Result<()> {
    // Label mechanism changes from window 4 on; inputs spike in window 5.
    let cfg = SyntheticConfig::default().with_covariate_spike(5, 1.5).with_concept_shift_from(4, vec![-0.5, 0.4, 0.3]);
    let data = generate_synthetic(&cfg)?;
    let deployment = Deployment::new(&data, DeploymentConfig::default())?;

    let mut rows = Vec::new();
    for policy in [PolicySpec::Static, PolicySpec::PeriodicRecalibration, PolicySpec::RollingRetrain] {
        let traj = deployment.run(&policy)?;
        println!("{:<4} {}", policy.short_name(), traj.action_signature());
        rows.push((policy.short_name().to_string(), summarize(&traj)?));
    }
    println!();
    print!("{}", summary_table(&rows));
    Ok(())
}
