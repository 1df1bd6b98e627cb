use relcontrol::morc::{
    candidate_drift_thresholds, dedup_by_action_signature, knee_select, pareto_frontier, reliability_alarm_thresholds,
    run_morc, sweep,
};
use relcontrol::policy::{Deployment, DeploymentConfig, PolicySpec};
use relcontrol::synthetic::{generate_synthetic, SyntheticConfig};

fn data() -> relcontrol::data::WindowedDataset {
    let cfg = SyntheticConfig { rows_per_window: 600, seed: 5, ..Default::default() }
        .with_covariate_spike(6, 1.2)
        .with_concept_shift_from(3, vec![-0.4, 0.3, 0.2]);
    generate_synthetic(&cfg).unwrap()
}

#[test]
fn pipeline_shapes() {
    let data = data();
    let dep = Deployment::new(&data, DeploymentConfig::default()).unwrap();
    let morc = run_morc(&dep, 15).unwrap();
    assert_eq!(morc.candidates.len(), 10);
    assert_eq!(morc.points.len(), 45);
    assert!(morc.distinct.len() <= morc.points.len());
    let signatures: std::collections::HashSet<_> = morc.points.iter().map(|p| &p.action_signature).collect();
    assert_eq!(signatures.len(), morc.distinct.len());
    assert!(morc.frontier.points.contains(&morc.knee.point));
    for p in &morc.points {
        assert!(p.action_signature.starts_with('I'));
        assert_eq!(p.config.theta_c, morc.theta_c);
        assert!(p.config.theta_d2 > p.config.theta_d1);
    }

    let p0 = dep.run(&PolicySpec::Static).unwrap();
    assert_eq!(reliability_alarm_thresholds(&p0).unwrap(), (morc.theta_c, morc.theta_a));
}

#[test]
fn thresholds_above_all_drift_never_act() {
    let data = data();
    let dep = Deployment::new(&data, DeploymentConfig::default()).unwrap();
    let max = dep.drift_series().unwrap().iter().map(|d| d.combined).fold(0.0, f64::max);
    let pts = sweep(&dep, &[max + 0.1, max + 0.2, max + 0.3], 0.05, 0.6).unwrap();
    assert_eq!(pts.len(), 3);
    assert!(pts.iter().all(|p| p.action_signature == "INNNNNNNN"));
    let d = dedup_by_action_signature(&pts);
    assert_eq!(d.len(), 1);
    assert_eq!((d[0].config.theta_d1, d[0].config.theta_d2), (max + 0.1, max + 0.2));
}

#[test]
fn sweep_independent_of_thread_count() {
    let data = data();
    let run = |threads: usize| {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
        pool.install(|| {
            let dep = Deployment::new(&data, DeploymentConfig::default()).unwrap();
            serde_json::to_string(&run_morc(&dep, 15).unwrap()).unwrap()
        })
    };
    assert_eq!(run(1), run(4));
}

#[test]
fn sweep_order_does_not_matter() {
    let data = data();
    let dep = Deployment::new(&data, DeploymentConfig::default()).unwrap();
    let drift: Vec<f64> = dep.drift_series().unwrap().iter().map(|d| d.combined).collect();
    let c = candidate_drift_thresholds(&drift).unwrap();
    let mut pts = sweep(&dep, &c, 0.03, 0.7).unwrap();
    let forward = pareto_frontier(&dedup_by_action_signature(&pts)).unwrap();
    pts.reverse();
    let backward = pareto_frontier(&dedup_by_action_signature(&pts)).unwrap();
    assert_eq!(forward, backward);
    assert_eq!(knee_select(&forward, 15).unwrap(), knee_select(&backward, 15).unwrap());
}
