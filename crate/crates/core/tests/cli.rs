use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn isslab(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_isslab"))
        .args(args)
        .arg("--out")
        .arg(out)
        .env("ISSLAB_THREADS", "2")
        .output()
        .expect("binary runs")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn manifest(dir: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(dir.join("manifest.json")).unwrap()).unwrap()
}

#[test]
fn divergence_claim_writes_csv_and_exits_zero() {
    let tmp = tempfile::tempdir().unwrap();
    let o = isslab(&["reproduce", "--scenario", "scalar_toy", "--claim", "not-infinite-L2-L1"], tmp.path());
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let csv = std::fs::read_to_string(tmp.path().join("not-infinite-L2-L1.divergence.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("horizon,ratio,input_l1,input_l1_closed_form"));
    let ratios: Vec<f64> = lines.map(|l| l.split(',').nth(1).unwrap().parse().unwrap()).collect();
    assert!(ratios.windows(2).all(|w| w[1] > w[0]));
    let m = manifest(tmp.path());
    assert_eq!(m["command"], "reproduce");
    assert_eq!(m["diagnostics"]["results"]["failed"], 0);
    assert!(m["files"].as_array().unwrap().iter().any(|f| f == "not-infinite-L2-L1.divergence.csv"));
}

#[test]
fn failing_claim_exits_one() {
    // Horizons far below the decay time cannot show a plateau.
    let tmp = tempfile::tempdir().unwrap();
    let o = isslab(
        &["reproduce", "--scenario", "scalar_toy", "--claim", "infinite-lp-lq-p-le-q", "--horizons", "0.01,0.02,0.04,0.08"],
        tmp.path(),
    );
    assert_eq!(o.status.code(), Some(1), "{}", stderr(&o));
    assert!(String::from_utf8_lossy(&o.stdout).starts_with("FAIL"));
}

#[test]
fn heat_simulation_approaches_the_linear_profile() {
    let tmp = tempfile::tempdir().unwrap();
    let o = isslab(
        &["simulate", "--scenario", "heat_dirichlet", "--dt", "1e-3", "--t-final", "5", "--format", "csv"],
        tmp.path(),
    );
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let traj = std::fs::read_to_string(tmp.path().join("trajectory.csv")).unwrap();
    assert_eq!(traj.lines().count(), 5002);
    assert!(traj.lines().next().unwrap().starts_with("time,x_1,"));
    let profile = std::fs::read_to_string(tmp.path().join("profile.csv")).unwrap();
    for line in profile.lines().skip(1) {
        let v: Vec<f64> = line.split(',').map(|s| s.parse().unwrap()).collect();
        // Away from the boundary jump the truncated series is close to ξ.
        if v[0] <= 0.5 {
            assert!((v[1] - v[0]).abs() < 0.02, "ξ = {}: {}", v[0], v[1]);
        }
        assert!((v[1] - v[2]).abs() < 1e-6);
    }
}

#[test]
fn invalid_configurations_exit_two() {
    let tmp = tempfile::tempdir().unwrap();
    let cases: [&[&str]; 6] = [
        &["iss", "--scenario", "no_such_scenario"],
        &["admissibility", "--scenario", "scalar_toy", "--p", "0.5"],
        &["reproduce", "--scenario", "scalar_toy", "--claim", "no-such-claim"],
        &["iss", "--scenario", "scalar_toy", "--horizons", "1,2"],
        &["lyapunov", "--scenario", "scalar_toy", "--construction", "heat"],
        &["simulate"],
    ];
    let mut messages = Vec::new();
    for args in cases {
        let o = isslab(args, tmp.path());
        assert_eq!(o.status.code(), Some(2), "{args:?}: {}", stderr(&o));
        let msg = stderr(&o);
        assert!(!msg.is_empty());
        messages.push(msg);
    }
    messages.sort();
    messages.dedup();
    assert_eq!(messages.len(), cases.len(), "error messages should be distinct");
}

#[test]
fn malformed_scenario_json_exits_two() {
    let tmp = tempfile::tempdir().unwrap();
    let path = tmp.path().join("bad.json");
    std::fs::write(&path, "{ \"id\": \"scalar_toy\", \"unknown_field\": 1 }").unwrap();
    let o = isslab(&["norms", "--scenario", path.to_str().unwrap()], &tmp.path().join("out"));
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
}

#[test]
fn scenario_file_round_trips_through_the_manifest() {
    let tmp = tempfile::tempdir().unwrap();
    let first = tmp.path().join("first");
    let o = isslab(&["norms", "--scenario", "diagonal_minus_n", "--modes", "32"], &first);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let spec = manifest(&first)["scenario"].clone();
    let path = tmp.path().join("scenario.json");
    std::fs::write(&path, serde_json::to_string(&spec["spec"]).unwrap()).unwrap();
    let second = tmp.path().join("second");
    let o = isslab(&["norms", "--scenario", path.to_str().unwrap()], &second);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert_eq!(manifest(&second)["scenario"], spec);
}

#[test]
fn infinite_exponent_literal_is_accepted() {
    let tmp = tempfile::tempdir().unwrap();
    let o = isslab(&["admissibility", "--scenario", "scalar_toy", "--p", "2", "--q", "inf"], tmp.path());
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert_eq!(manifest(tmp.path())["config"]["arguments"]["q"], "inf");
}
