use std::process::{Command, Output};

fn teb(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_teb")).args(args).output().expect("teb runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn layouts_lists_every_builtin() {
    let o = teb(&["layouts"]);
    assert!(o.status.success());
    for name in teb::envs::layout_names() {
        assert!(stdout(&o).contains(name), "{name} missing");
    }
}

#[test]
fn export_then_metric_reports_collapse() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    assert!(teb(&["export", "--out-dir", out]).status.success());
    let chain = dir.path().join("reward_free_chain.mdp");
    let o = teb(&["metric", chain.to_str().unwrap()]);
    assert!(o.status.success());
    assert!(stdout(&o).contains("# diameter 0.000000000000"));
    assert!(String::from_utf8_lossy(&o.stderr).contains("collapsed"));

    let o = teb(&["metric", chain.to_str().unwrap(), "--mode", "predictive", "--out-dir", out]);
    assert!(o.status.success());
    assert!(dir.path().join("metric/reward_free_chain_reward_model.txt").exists());

    let cfg = dir.path().join("teb.toml");
    let o = teb(&["metric", dir.path().join("sparse_chain.mdp").to_str().unwrap(), "--config", cfg.to_str().unwrap(), "--policy", "1,1,1,1,1,1"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn verify_single_suite_writes_csv() {
    let dir = tempfile::tempdir().unwrap();
    let o = teb(&["verify", "--suite", "transport", "--seeds", "5", "--out-dir", dir.path().to_str().unwrap()]);
    assert!(o.status.success());
    let csv = std::fs::read_to_string(dir.path().join("verify/transport.csv")).unwrap();
    assert_eq!(csv.lines().count(), 2 + 10);
    assert!(!dir.path().join("verify/failures.json").exists());
}

#[test]
fn bad_input_exits_with_an_error() {
    let o = teb(&["run-maze", "--mode", "sideways"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("unknown run mode"));
    assert_eq!(teb(&["verify", "--suite", "nope"]).status.code(), Some(2));
    assert_eq!(teb(&["run-maze", "--layout", "missing"]).status.code(), Some(2));
}
