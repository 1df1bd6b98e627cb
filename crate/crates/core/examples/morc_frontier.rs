//! Threshold sweep for the drift-triggered policy: every candidate pair is
//! deployed, duplicate behaviours collapse, and the cost-volatility frontier
//! yields a budgeted knee.

use relcontrol::morc::{run_morc, DEFAULT_BUDGET};
use relcontrol::policy::{summarize, Deployment, DeploymentConfig, PolicySpec};
use relcontrol::synthetic::{generate_synthetic, SyntheticConfig};

fn main() -> relcontrol::Result<()> {
    let cfg = SyntheticConfig::default().with_covariate_spike(5, 1.5).with_concept_shift_from(4, vec![-0.5, 0.4, 0.3]);
    let data = generate_synthetic(&cfg)?;
    let deployment = Deployment::new(&data, DeploymentConfig::default())?;

    let morc = run_morc(&deployment, DEFAULT_BUDGET)?;
    println!("theta_C = {:.4}, theta_A = {:.4}", morc.theta_c, morc.theta_a);
    println!(
        "{} pairs -> {} distinct action sequences -> {} on the frontier\n",
        morc.points.len(),
        morc.distinct.len(),
        morc.frontier.points.len()
    );
    println!("cost   V_L1     actions");
    for p in &morc.distinct {
        let mark = if morc.is_knee(p) {
            "  <- knee"
        } else if morc.on_frontier(p) {
            "  *"
        } else {
            ""
        };
        println!("{:>4}  {:.5}  {}{}", p.cost(), p.v_l1(), p.action_signature, mark);
    }

    let p2 = summarize(&deployment.run(&PolicySpec::RollingRetrain)?)?;
    let knee = &morc.knee.point;
    println!(
        "\nknee: d1={:.4} d2={:.4} cost {} V_L1 {:.5}   (always-retrain: cost {} V_L1 {:.5})",
        knee.config.theta_d1,
        knee.config.theta_d2,
        knee.cost(),
        knee.v_l1(),
        p2.total_cost,
        p2.v_l1
    );
    Ok(())
}
