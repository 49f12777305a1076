use std::fs;
use std::io::Write;
use std::process::{Command, Output, Stdio};

fn qfb(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qfb")).args(args).env_remove("QFB_THREADS").output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn last_stderr_json(o: &Output) -> serde_json::Value {
    let err = String::from_utf8_lossy(&o.stderr);
    serde_json::from_str(err.lines().last().unwrap()).unwrap()
}

#[test]
fn oracle_prints_the_sandwich() {
    let o = qfb(&["oracle", "--k-db", "10", "--regions", "3", "--grid", "64", "--variant", "power-domain"]);
    assert!(o.status.success());
    let text = stdout(&o);
    let value = |key: &str| -> f64 {
        let line = text.lines().find(|l| l.starts_with(key)).unwrap();
        line.split_whitespace().nth(1).unwrap().parse().unwrap()
    };
    let (g1, bf, ginf) = (value("G_1"), value("G_bruteforce"), value("G_inf"));
    assert!(g1 < bf && bf < ginf, "{text}");
    assert!(text.contains("thresholds"));
}

#[test]
fn bad_arguments_exit_with_usage() {
    let o = qfb(&["oracle", "--k-db", "10", "--regions", "zero"]);
    assert_eq!(o.status.code(), Some(2));
    assert_eq!(last_stderr_json(&o)["error"], "usage");

    let o = qfb(&["oracle", "--k-db", "10", "--regions", "0"]);
    assert_eq!(o.status.code(), Some(2));
    assert_eq!(last_stderr_json(&o)["error"], "usage");

    let o = qfb(&["kest", "eval", "--model", "/nonexistent/model.json"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(last_stderr_json(&o)["message"].as_str().unwrap().contains("model.json"));
}

#[test]
fn estimate_reads_samples_from_stdin() {
    let mut child = Command::new(env!("CARGO_BIN_EXE_qfb"))
        .args(["kest", "estimate", "-"])
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .spawn()
        .unwrap();
    // a constant envelope looks like a very strong line of sight
    let samples = "1.0 1.0 1.0 1.0\n1.0 1.0 1.0 1.0\n";
    child.stdin.take().unwrap().write_all(samples.as_bytes()).unwrap();
    let o = child.wait_with_output().unwrap();
    assert!(o.status.success());
    let v: serde_json::Value = serde_json::from_str(stdout(&o).trim()).unwrap();
    assert_eq!(v["samples"], 8);
    assert_eq!(v["estimates"].as_array().unwrap().len(), 3);

    let o = qfb(&["kest", "estimate", "/dev/null"]);
    assert_eq!(o.status.code(), Some(1));
    assert_eq!(last_stderr_json(&o)["error"], "estimation");
}

#[test]
fn train_then_estimate_with_the_model() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let o = qfb(&["--out", out, "--seed", "3", "kest", "train", "--rows", "400", "--samples", "50"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let model = dir.path().join("model.json");
    let text = fs::read_to_string(&model).unwrap();
    assert!(text.contains("qfb-gbdt-v1"));

    let data = dir.path().join("g.txt");
    fs::write(&data, "0.3 1.2 0.8 1.9 0.4 1.1 0.7 0.2 1.5 0.9").unwrap();
    let o = qfb(&["kest", "estimate", "--model", model.to_str().unwrap(), data.to_str().unwrap()]);
    assert!(o.status.success());
    let v: serde_json::Value = serde_json::from_str(stdout(&o).trim()).unwrap();
    let est = v["estimates"].as_array().unwrap();
    assert_eq!(est.len(), 4);
    let k = est[3]["k_hat"].as_f64().unwrap();
    assert!((0.0..=100.0).contains(&k));
}

#[test]
fn rl_run_writes_summary_and_traces() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("drift.toml");
    fs::write(
        &config,
        r#"
name = "tiny"
repetitions = 2
seed = 5

[estimator]
kind = "moment-1"

[[schedule]]
k_db = 0.0
dwell = { iterations = 40 }

[[schedule]]
k_db = 12.0
dwell = { realizations = 1000 }

[rl]
samples_per_iteration = 50
"#,
    )
    .unwrap();
    let out = dir.path().join("out");
    let o = qfb(&["--config", config.to_str().unwrap(), "--out", out.to_str().unwrap(), "rl", "run", "--traces"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let summary: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["mean"].as_array().unwrap().len(), 60);
    assert_eq!(summary["segments"].as_array().unwrap().len(), 2);
    for r in 0..2 {
        let trace = fs::read_to_string(out.join(format!("trace_rep{r}.ndjson"))).unwrap();
        assert_eq!(trace.lines().count(), 60);
    }

    fs::write(&config, "name = \"x\"\nunknown_field = 1\n").unwrap();
    let o = qfb(&["--config", config.to_str().unwrap(), "rl", "run"]);
    assert_eq!(o.status.code(), Some(1));
    assert_eq!(last_stderr_json(&o)["error"], "format");
}
