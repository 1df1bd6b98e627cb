//! Percentile intervals for volatility by resampling whole windows.

use relcontrol::bootstrap::block_bootstrap;
use relcontrol::metrics::DownsideMode;
use relcontrol::policy::{Deployment, DeploymentConfig, PolicySpec};
use relcontrol::synthetic::{generate_synthetic, SyntheticConfig};

fn main() -> relcontrol::Result<()> {
    let data = generate_synthetic(&SyntheticConfig::default().with_covariate_spike(5, 1.5))?;
    let deployment = Deployment::new(&data, DeploymentConfig::default())?;

    println!("policy        V_L1  [95% CI]              V_L1-  [95% CI]");
    for policy in [PolicySpec::Static, PolicySpec::PeriodicRecalibration, PolicySpec::RollingRetrain] {
        let states = deployment.run(&policy)?.states();
        let (v, d) = block_bootstrap(&states, 1000, 0.95, 2024, DownsideMode::PerComponent)?;
        println!(
            "{:<6} {:>11.5} [{:.5}, {:.5}] {:>9.5} [{:.5}, {:.5}]",
            policy.short_name(),
            v.point_estimate,
            v.lower,
            v.upper,
            d.point_estimate,
            d.lower,
            d.upper
        );
    }
    Ok(())
}
