use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::{json, Value};
use tempfile::TempDir;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_crowdfront"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn simulate(dir: &Path, configs: Value) {
    let cfg = dir.join("sim.json");
    fs::write(&cfg, configs.to_string()).unwrap();
    let o = run(&["simulate", "--config", p(&cfg), "--out", p(&dir.join("data"))]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
}

fn crowd(n_rounds: usize, n_agents: usize) -> Value {
    Value::Array(
        (0..n_rounds)
            .map(|k| {
                json!({
                    "n_agents": n_agents,
                    "seed": k,
                    "history_days": 40,
                    "gbm": { "initial_price": 100.0, "drift": if k % 2 == 0 { 0.003 } else { -0.003 }, "volatility": 0.01 },
                    "agent_mix": { "social_gaussian": 0.6, "price_gaussian": 0.4 }
                })
            })
            .collect(),
    )
}

fn error_record(o: &Output) -> Value {
    let stderr = String::from_utf8_lossy(&o.stderr);
    let line = stderr.lines().last().expect("stderr has an error record");
    serde_json::from_str(line).expect("last stderr line is JSON")
}

#[test]
fn validate_reports_violations() {
    let t = TempDir::new().unwrap();
    simulate(t.path(), crowd(2, 20));
    let data = t.path().join("data");
    let o = run(&["validate", "--input", p(&data)]);
    assert_eq!(o.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&o.stdout).contains("0 violations"));

    // corrupt one record's prior belief
    let preds = fs::read_to_string(data.join("predictions.jsonl")).unwrap();
    let mut lines: Vec<Value> = preds.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    lines[3]["b_pre"] = json!(-5.0);
    let bad_id = lines[3]["id"].as_str().unwrap().to_string();
    let text: String = lines.iter().map(|l| format!("{l}\n")).collect();
    fs::write(data.join("predictions.jsonl"), text).unwrap();
    let out = t.path().join("report");
    let o = run(&["validate", "--input", p(&data), "--out", p(&out)]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stdout).contains(&bad_id));
    let report: Value = serde_json::from_str(&fs::read_to_string(out.join("validation.json")).unwrap()).unwrap();
    assert_eq!(report["violations"][0]["record"], json!(bad_id));
    assert_eq!(report["violations"][0]["kind"], json!("NonPositivePrice"));

    // analysis commands refuse the same dataset
    let o = run(&["summarize", "--input", p(&data), "--out", p(&out)]);
    assert_eq!(o.status.code(), Some(1));
    assert_eq!(error_record(&o)["record"], json!(bad_id));
}

#[test]
fn empty_directory_fails_validation() {
    let t = TempDir::new().unwrap();
    let o = run(&["validate", "--input", p(t.path())]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stdout).contains("MissingField"));
}

#[test]
fn summary_rows_match_crowd_size() {
    let t = TempDir::new().unwrap();
    simulate(t.path(), crowd(3, 25));
    let out = t.path().join("out");
    let o = run(&["summarize", "--input", p(&t.path().join("data")), "--out", p(&out)]);
    assert!(o.status.success());
    let csv = fs::read_to_string(out.join("summary.csv")).unwrap();
    let rows: Vec<&str> = csv.lines().skip(1).collect();
    assert_eq!(rows.len(), 3);
    for r in rows {
        let cells: Vec<&str> = r.split(',').collect();
        assert_eq!(cells[3], "25");
        assert_eq!(cells[7], "", "futures column must be empty, not zero");
    }
}

#[test]
fn social_crowd_without_noise_has_zero_social_residual() {
    let t = TempDir::new().unwrap();
    simulate(
        t.path(),
        json!([{ "n_agents": 30, "history_days": 30, "update_noise_std": 0.0,
                 "agent_mix": { "social_gaussian": 1.0, "price_gaussian": 0.0 } }]),
    );
    let out = t.path().join("out");
    let o = run(&["fit-models", "--input", p(&t.path().join("data")), "--out", p(&out)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = fs::read_to_string(out.join("residuals.csv")).unwrap();
    let social = csv.lines().find(|l| l.starts_with("GaussianSocial,")).unwrap();
    let cells: Vec<&str> = social.split(',').collect();
    assert_eq!(cells[4], "0");
    assert_eq!(csv.lines().count(), 1 + 6);
}

#[test]
fn pareto_outputs_are_reproducible() {
    let t = TempDir::new().unwrap();
    simulate(t.path(), crowd(4, 40));
    let data = t.path().join("data");
    let go = |name: &str| {
        let out = t.path().join(name);
        let o = run(&["pareto", "--input", p(&data), "--out", p(&out), "--seed", "7", "--n-boot", "30", "--n-bins", "5"]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        out
    };
    let (a, b) = (go("a"), go("b"));
    for f in ["alphas.csv", "pareto.csv", "improvement.csv", "pareto_smooth.csv", "pareto_run.json"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f}");
    }
    let pareto = fs::read_to_string(a.join("pareto.csv")).unwrap();
    assert_eq!(pareto.lines().count(), 1 + 6);
    let alphas = fs::read_to_string(a.join("alphas.csv")).unwrap();
    assert!(alphas.starts_with("prediction_set_id,round_id,epsilon_h,epsilon_t,alpha_raw,alpha_scaled\n"));
}

#[test]
fn windowed_run_with_explicit_grid_and_config() {
    let t = TempDir::new().unwrap();
    simulate(t.path(), crowd(3, 40));
    let data = t.path().join("data");
    let cfg = t.path().join("run.json");
    fs::write(&cfg, json!({ "n_boot": 10, "grid": "linspace:3", "seed": 1 }).to_string()).unwrap();
    let out = t.path().join("out");
    let o = run(&[
        "pareto", "--input", p(&data), "--out", p(&out), "--config", p(&cfg),
        "--grid", "-1,-0.2,0.2,0.6,1", "--window", "2016-06-06:2016-06-20",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let imp = fs::read_to_string(out.join("improvement.csv")).unwrap();
    let alphas: Vec<&str> = imp.lines().skip(1).map(|l| l.split(',').next().unwrap()).collect();
    assert_eq!(alphas, ["-1", "-0.2", "0.2", "0.6", "1"]);
    let run_cfg: Value = serde_json::from_str(&fs::read_to_string(out.join("pareto_run.json")).unwrap()).unwrap();
    assert_eq!(run_cfg["config"]["n_boot"], json!(10));
    assert_eq!(run_cfg["config"]["window"], json!("2016-06-06:2016-06-20"));
}

#[test]
fn runtime_failures_exit_two_with_record() {
    let t = TempDir::new().unwrap();
    simulate(t.path(), crowd(2, 10));
    let o = run(&["pareto", "--input", p(&t.path().join("data")), "--out", p(t.path()), "--window", "2030-01-01:2030-01-31"]);
    assert_eq!(o.status.code(), Some(2));
    assert_eq!(error_record(&o)["error"], json!("EmptyWindow"));

    let o = run(&["pareto", "--grid=-1,x"]);
    assert_eq!(o.status.code(), Some(2));
    assert_eq!(error_record(&o)["error"], json!("Usage"));

    let bad = t.path().join("bad.json");
    fs::write(&bad, r#"{"n_agents": 10, "agent_mix": {"social_gaussian": 0.3}}"#).unwrap();
    let o = run(&["simulate", "--config", p(&bad), "--out", p(&t.path().join("x"))]);
    assert_eq!(o.status.code(), Some(2));
    assert_eq!(error_record(&o)["error"], json!("Simulation"));
}
