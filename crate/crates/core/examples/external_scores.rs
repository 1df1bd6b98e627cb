//! Plugging in a model trained elsewhere: its per-row probabilities are
//! written to the scores CSV format and replayed by the non-retraining
//! policies.

use std::collections::BTreeMap;
use std::sync::Arc;

use relcontrol::data::Row;
use relcontrol::policy::{summarize, Deployment, DeploymentConfig, Learner, PolicySpec};
use relcontrol::predictor::{train_builtin, ExternalScores, TrainConfig};
use relcontrol::synthetic::{generate_synthetic, SyntheticConfig};

fn main() -> relcontrol::Result<()> {
    let data = generate_synthetic(&SyntheticConfig { rows_per_window: 2000, ..Default::default() })?;

    // Stand-in for an outside model: trained on the first history window only.
    let first = &data.windows[0];
    let rows: Vec<&Row> = first.rows.iter().collect();
    let model = train_builtin(&data.schema, &rows, &first.labels, TrainConfig::default())?;
    let scores: BTreeMap<i64, Vec<f64>> = data.windows.iter().map(|w| (w.id, model.predict(&w.rows))).collect();

    let dir = std::env::temp_dir().join("relcontrol-external-example");
    std::fs::create_dir_all(&dir)?;
    let path = dir.join("scores.csv");
    ExternalScores::from_windows(scores)?.write(&path)?;
    let replay = Arc::new(ExternalScores::load(&path)?);
    println!("replaying {} windows from {}", replay.n_windows(), path.display());

    let config = DeploymentConfig { learner: Learner::External(replay), ..Default::default() };
    let deployment = Deployment::new(&data, config)?;
    for policy in [PolicySpec::Static, PolicySpec::PeriodicRecalibration] {
        let o = summarize(&deployment.run(&policy)?)?;
        println!(
            "{:<3} mean AUC {:.4}  mean ECE {:.4}  cost {}",
            policy.short_name(),
            o.mean_auc,
            o.mean_ece,
            o.total_cost
        );
    }
    // Retraining needs the built-in learner.
    let err = deployment.run(&PolicySpec::RollingRetrain).unwrap_err();
    println!("p2: {err}");
    Ok(())
}
