use std::path::Path;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_deepthermal"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

#[test]
fn run_aggregate_plot_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    let o = run(&["run", "--dA", "2", "--dB1", "2", "--q", "4", "--tmax", "3", "--kmax", "3", "--realizations", "4", "--seed", "12", "--out", p(&out)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let records = std::fs::read_to_string(out.join("records.csv")).unwrap();
    assert_eq!(records.lines().count(), 1 + 4 * 4 * 3);

    let agg = dir.path().join("agg.csv");
    let o = run(&["aggregate", "--in", p(&out), "--out", p(&agg)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));

    let plots = dir.path().join("plots");
    let o = run(&["plot-data", "--in", p(&agg), "--panels", "a,d", "--out", p(&plots)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(plots.join("panel_a.csv").exists() && plots.join("panel_d.csv").exists());

    let o = run(&["plot-data", "--in", p(&agg), "--panels", "a,x", "--out", p(&plots)]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn config_file_with_flag_override() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    let out = dir.path().join("run");
    std::fs::write(&cfg, format!(r#"{{"L": 4, "tmax": 9, "kmax": 2, "realizations": 2, "seed": 3, "out": "{}"}}"#, p(&out))).unwrap();
    let o = run(&["run", "--config", p(&cfg), "--tmax", "1"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let written: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(out.join("config.json")).unwrap()).unwrap();
    assert_eq!(written["t_max"], 1);
    assert_eq!(written["q"], 4);
    assert_eq!(written["k_max"], 2);
}

#[test]
fn exit_codes() {
    assert_eq!(run(&["verify", "--suite", "nonsense"]).status.code(), Some(2));
    assert_eq!(run(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(run(&["run", "--L", "12", "--q", "4", "--out", "x"]).status.code(), Some(2));
    // over-large states are resource errors
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["run", "--q", "4611686018427387904", "--tmax", "1", "--realizations", "1", "--out", p(dir.path())]);
    assert_eq!(o.status.code(), Some(3), "{}", String::from_utf8_lossy(&o.stderr));

    let o = run(&["verify", "--suite", "oracle-small"]);
    assert_eq!(o.status.code(), Some(0));
    let report: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(report["suite"], "oracle-small");
    assert_eq!(report["passed"], true);
}
