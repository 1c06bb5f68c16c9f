use std::path::Path;
use std::process::{Command, Output};

fn predmarket(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_predmarket"))
        .args(args)
        .current_dir(dir)
        .output()
        .unwrap()
}

fn write(dir: &Path, name: &str, body: &str) {
    std::fs::write(dir.join(name), body).unwrap();
}

#[test]
fn trajectory_scenario_writes_tables() {
    let dir = tempfile::tempdir().unwrap();
    write(
        dir.path(),
        "s.json",
        r#"{"simulation": {"horizon": 40, "n_agents": 30}, "replications": 3}"#,
    );
    let out = predmarket(&["run", "s.json", "--out", "res"], dir.path());
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let res = dir.path().join("res");
    for f in [
        "config.json",
        "schema.md",
        "trajectory.csv",
        "agents.csv",
        "metrics.csv",
        "misclassification.csv",
        "trajectory.svg",
    ] {
        assert!(res.join(f).exists(), "missing {f}");
    }
    let traj = std::fs::read_to_string(res.join("trajectory.csv")).unwrap();
    assert_eq!(traj.lines().count(), 41);
    assert!(traj.starts_with("t,m,eta,D,K,mean_valuation,total_contracts"));
    let agents = std::fs::read_to_string(res.join("agents.csv")).unwrap();
    assert_eq!(agents.lines().count(), 31);
    let metrics = std::fs::read_to_string(res.join("metrics.csv")).unwrap();
    assert_eq!(metrics.lines().filter(|l| l.contains(",mse,")).count(), 3);

    let config: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(res.join("config.json")).unwrap()).unwrap();
    assert_eq!(config["replications"], 3);
    assert_eq!(config["settings"]["simulation"]["horizon"], 40);
}

#[test]
fn seed_flag_overrides_the_scenario() {
    let dir = tempfile::tempdir().unwrap();
    write(
        dir.path(),
        "s.json",
        r#"{"simulation": {"horizon": 30, "master_seed": 1}, "plots": false}"#,
    );
    let run = |seed: &str, out: &str| {
        assert!(
            predmarket(&["run", "s.json", "--seed", seed, "--out", out], dir.path())
                .status
                .success()
        );
        std::fs::read(dir.path().join(out).join("trajectory.csv")).unwrap()
    };
    assert_eq!(run("5", "a"), run("5", "b"));
    assert_ne!(run("5", "a"), run("6", "c"));
    assert!(!dir.path().join("a/trajectory.svg").exists());
}

#[test]
fn sweep_scenario() {
    let dir = tempfile::tempdir().unwrap();
    write(
        dir.path(),
        "s.json",
        r#"{"simulation": {"horizon": 40, "n_agents": 20}, "experiment": "sweep",
            "sweep": {"parameter": "expertise", "values": [0.2, 0.8]}, "replications": 2}"#,
    );
    let out = predmarket(&["run", "s.json", "--out", "res"], dir.path());
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let summary = std::fs::read_to_string(dir.path().join("res/summary.csv")).unwrap();
    assert!(summary.starts_with("parameter,value,metric,mean,lower,upper"));
    assert!(summary.contains("expertise,0.8,mse,"));
    assert!(dir.path().join("res/sweep.csv").exists());
}

#[test]
fn malformed_scenarios_exit_with_2() {
    let dir = tempfile::tempdir().unwrap();
    write(
        dir.path(),
        "typo.json",
        r#"{"simulation": {"n_agent": 10}}"#,
    );
    write(dir.path(), "bad.json", r#"{"simulation": {"lambda": -1}}"#);
    write(dir.path(), "broken.json", "{");
    for (file, needle) in [
        ("typo.json", "n_agent"),
        ("bad.json", "lambda"),
        ("broken.json", "scenario"),
        ("missing.json", "missing.json"),
    ] {
        let out = predmarket(&["run", file], dir.path());
        assert_eq!(out.status.code(), Some(2), "{file}");
        let err = String::from_utf8_lossy(&out.stderr);
        assert!(err.contains(needle), "{file}: {err}");
    }
    let out = predmarket(&["sweep-whale", "--reps", "0"], dir.path());
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn unwritable_output_exits_with_3() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "s.json", r#"{"simulation": {"horizon": 10}}"#);
    write(dir.path(), "blocker", "");
    let out = predmarket(&["run", "s.json", "--out", "blocker/res"], dir.path());
    assert_eq!(
        out.status.code(),
        Some(3),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
}

#[test]
fn stability_region_command() {
    let dir = tempfile::tempdir().unwrap();
    let out = predmarket(
        &[
            "stability-region",
            "--alphas",
            "0.1,0.5",
            "--resolution",
            "11",
            "--out",
            "r",
        ],
        dir.path(),
    );
    assert!(out.status.success());
    let csv = std::fs::read_to_string(dir.path().join("r/region_alpha_0.1.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 121);
    assert!(csv.starts_with("H_B,S_w,stable_flag"));
    let summary = std::fs::read_to_string(dir.path().join("r/region_summary.csv")).unwrap();
    assert_eq!(summary.lines().count(), 3);
    assert!(dir.path().join("r/region_alpha_0.5.svg").exists());
}

#[test]
fn herding_recovery_small() {
    let dir = tempfile::tempdir().unwrap();
    let out = predmarket(
        &[
            "herding-recovery",
            "--reps",
            "2",
            "--out",
            "h",
            "--no-plots",
        ],
        dir.path(),
    );
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let snaps = std::fs::read_to_string(dir.path().join("h/snapshots.csv")).unwrap();
    assert_eq!(snaps.lines().count(), 1 + 15);
    let theory = std::fs::read_to_string(dir.path().join("h/herding_theory.csv")).unwrap();
    assert!(theory.lines().last().unwrap().ends_with("marginal"));
}
