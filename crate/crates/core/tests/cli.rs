use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use relcontrol::report::RunLog;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_relcontrol"))
}

fn synthetic_config(dir: &Path) -> PathBuf {
    let path = dir.join("synthetic.json");
    let cfg = relcontrol::synthetic::SyntheticConfig { rows_per_window: 400, ..Default::default() }
        .with_covariate_spike(5, 1.5);
    std::fs::write(&path, serde_json::to_string(&cfg).unwrap()).unwrap();
    path
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

/// The run log with its one volatile field blanked.
fn without_timestamp(path: &Path) -> String {
    let mut v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap();
    v["metadata"]["generated_at"] = serde_json::Value::Null;
    v.to_string()
}

#[test]
fn baseline_costs_from_cli() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = synthetic_config(dir.path());
    let out = dir.path().join("out");
    for (policy, cost) in [("p0", 0), ("p1", 9), ("p2", 45)] {
        let o = run(&["run", "--policy", policy, "--window", "3", "--synthetic", s(&cfg), "--out", s(&out)]);
        assert!(o.status.success(), "{}", stderr(&o));
        let log = RunLog::read(&out.join(format!("run_{policy}.json"))).unwrap();
        assert_eq!(log.outcome.total_cost, cost);
        assert_eq!(log.records.len(), 9);
        assert!(stdout(&o).contains(&format!(" {cost} ")));
    }
}

#[test]
fn run_log_is_deterministic_apart_from_timestamp() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = synthetic_config(dir.path());
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for out in [&a, &b] {
        let o = run(&[
            "run",
            "--policy",
            "dtrc",
            "--thresholds",
            "0.01,0.2,0.02,0.7",
            "--synthetic",
            s(&cfg),
            "--out",
            s(out),
        ]);
        assert!(o.status.success(), "{}", stderr(&o));
    }
    assert_eq!(without_timestamp(&a.join("run_dtrc.json")), without_timestamp(&b.join("run_dtrc.json")));
}

#[test]
fn config_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("nope.json");
    let csv = dir.path().join("d.csv");
    std::fs::write(&csv, "date,y,x\n").unwrap();

    let o = run(&["run", "--policy", "p0", "--data", s(&csv), "--schema", s(&missing), "--cutoff", "2010-12-31"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("nope.json"), "{}", stderr(&o));

    let cfg = synthetic_config(dir.path());
    let o = run(&["run", "--policy", "dtrc", "--synthetic", s(&cfg), "--out", s(dir.path())]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("--thresholds"));

    let o = run(&["run", "--policy", "p0", "--synthetic", s(&cfg), "--alpha", "1.5", "--out", s(dir.path())]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("--alpha"));

    let o = run(&["run", "--policy", "p0"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn data_errors_exit_3() {
    let dir = tempfile::tempdir().unwrap();
    let schema = dir.path().join("s.json");
    std::fs::write(&schema, r#"{"date":"date","y":"label","x":"numeric"}"#).unwrap();
    let csv = dir.path().join("d.csv");
    std::fs::write(&csv, "date,y,x\n2009-01-01,0,1.0\n2009-02-01,1,2.0\nnot-a-date,0,1.0\n").unwrap();
    let o = run(&[
        "run",
        "--policy",
        "p0",
        "--data",
        s(&csv),
        "--schema",
        s(&schema),
        "--cutoff",
        "2009-12-31",
        "--out",
        s(dir.path()),
    ]);
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
    assert!(stderr(&o).contains("line 4"), "{}", stderr(&o));

    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, "{ corrupt").unwrap();
    let o = run(&["bootstrap", s(&bad), "--out", s(dir.path())]);
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).contains("schema_version"));
}

#[test]
fn sweep_bootstrap_report_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = synthetic_config(dir.path());
    let out = dir.path().join("out");

    let o = run(&["sweep", "--synthetic", s(&cfg), "--out", s(&out), "--workers", "2"]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("knee:"));
    let sweep_csv = out.join("sweep.csv");
    let first = std::fs::read_to_string(&sweep_csv).unwrap();
    assert_eq!(first.lines().count(), 46);
    assert_eq!(first.lines().filter(|l| l.ends_with(",true")).count(), 1);

    let o = run(&["sweep", "--synthetic", s(&cfg), "--out", s(&out), "--workers", "1", "--budget", "0"]);
    assert!(o.status.success());
    assert!(stdout(&o).contains("warning"));
    assert_eq!(std::fs::read_to_string(&sweep_csv).unwrap().lines().count(), 46);

    let o = run(&["run", "--policy", "p0", "--synthetic", s(&cfg), "--out", s(&out)]);
    assert!(o.status.success());
    let p0 = out.join("run_p0.json");
    let knee = out.join("run_dtrc_knee.json");

    let boot = |seed: &str, reps: &str| {
        let o = run(&["bootstrap", s(&p0), s(&knee), "--replicates", reps, "--seed", seed, "--out", s(&out)]);
        assert!(o.status.success(), "{}", stderr(&o));
        without_timestamp(&out.join("bootstrap.json"))
    };
    assert_eq!(boot("3", "1000"), boot("3", "1000"));
    let single: serde_json::Value = serde_json::from_str(&boot("3", "1")).unwrap();
    for p in single["policies"].as_array().unwrap() {
        assert_eq!(p["v_l1"]["lower"], p["v_l1"]["upper"]);
    }

    let plots = dir.path().join("plots");
    let o = run(&["report", s(&p0), "--sweep", s(&sweep_csv), "--out", s(&plots)]);
    assert!(o.status.success(), "{}", stderr(&o));
    for f in ["auc_series.csv", "ece_series.csv", "drift_series.csv"] {
        assert_eq!(std::fs::read_to_string(plots.join(f)).unwrap().lines().count(), 10, "{f}");
    }
    let scatter = std::fs::read_to_string(plots.join("cost_volatility.csv")).unwrap();
    assert!(scatter.starts_with("cost,v_l1,v_l1_downside,on_frontier,is_knee"));

    let o = run(&["report", "--out", s(&plots)]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn generate_then_load_csv() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = synthetic_config(dir.path());
    let gen = dir.path().join("gen");
    let o = run(&["generate", "--synthetic", s(&cfg), "--out", s(&gen)]);
    assert!(o.status.success());
    assert!(stdout(&o).contains("cutoff: 2009-12-31"));
    let out = dir.path().join("out");
    let o = run(&[
        "run",
        "--policy",
        "p2",
        "--data",
        s(&gen.join("data.csv")),
        "--schema",
        s(&gen.join("schema.json")),
        "--cutoff",
        "2009-12-31",
        "--out",
        s(&out),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(RunLog::read(&out.join("run_p2.json")).unwrap().outcome.total_cost, 45);
}

#[test]
fn external_scores_refuse_retraining() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = synthetic_config(dir.path());
    let scores = dir.path().join("scores.csv");
    let mut body = String::from("window_id,row_index,probability\n");
    for year in 2007..=2018 {
        for i in 0..400 {
            body.push_str(&format!("{year},{i},{}\n", (i % 10) as f64 / 10.0 + 0.05));
        }
    }
    std::fs::write(&scores, body).unwrap();
    let out = dir.path().join("out");
    let o = run(&["run", "--policy", "p1", "--synthetic", s(&cfg), "--scores", s(&scores), "--out", s(&out)]);
    assert!(o.status.success(), "{}", stderr(&o));
    let o = run(&["run", "--policy", "p2", "--synthetic", s(&cfg), "--scores", s(&scores), "--out", s(&out)]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
}

#[test]
fn help_lists_defaults() {
    let o = run(&["run", "--help"]);
    let text = stdout(&o);
    for d in ["[default: 3]", "[default: 0.5]", "[default: 50]", "[default: 15]", "[default: 1,5,6,5]"] {
        assert!(text.contains(d), "missing {d}");
    }
    let text = stdout(&run(&["sweep", "--help"]));
    assert!(text.contains("[default: 15]"));
    let text = stdout(&run(&["bootstrap", "--help"]));
    assert!(text.contains("[default: 1000]") && text.contains("[default: 0.95]"));
}
