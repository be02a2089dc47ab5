//! End-to-end checks of the binary: determinism of outputs, exit-code
//! contract, and sidecar files.

use std::process::{Command, Output};

fn pmlab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pmlab"))
        .args(args)
        .output()
        .expect("binary runs")
}

#[test]
fn identical_specs_produce_byte_identical_output() {
    let args = [
        "coupling",
        "--n",
        "6",
        "--d",
        "2",
        "--mode",
        "exact",
        "--q",
        "1/10",
        "--steps",
        "500",
        "--marginal",
        "--seed",
        "11",
        "--streams",
        "2",
    ];
    let a = pmlab(&args);
    let b = pmlab(&args);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);

    let sample_args = [
        "sample",
        "--n",
        "10",
        "--d",
        "3",
        "--samples",
        "8",
        "--seed",
        "4",
    ];
    let a = pmlab(&sample_args);
    let b = pmlab(&sample_args);
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn count_k4_reports_y3_x4_z0() {
    let out = pmlab(&["count", "--graph", "C~"]);
    assert!(out.status.success());
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let row = &v["results"]["counts"][0];
    assert_eq!(row["y"], "3");
    assert_eq!(row["x"], 4);
    assert_eq!(row["z"], "0");
}

#[test]
fn exit_codes_follow_the_contract() {
    // Infeasible asymptotic regime: exit 3.
    let out = pmlab(&[
        "coupling",
        "--n",
        "10000",
        "--d",
        "10",
        "--mode",
        "asymptotic",
        "--alpha",
        "0.1",
    ]);
    assert_eq!(out.status.code(), Some(3));

    // Invalid spec: exit 1.
    let out = pmlab(&["count"]);
    assert_eq!(out.status.code(), Some(1));
    let out = pmlab(&["verify", "no-such-suite"]);
    assert_eq!(out.status.code(), Some(1));

    // Passing suite: exit 0, one line per criterion.
    let out = pmlab(&["verify", "egf"]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("[PASS] criterion  3"));
}

#[test]
fn enumerate_writes_graph6_and_csv_sidecars() {
    let dir = tempfile::tempdir().unwrap();
    let out_path = dir.path().join("ens");
    let out = pmlab(&[
        "enumerate",
        "--n",
        "6",
        "--d",
        "2",
        "--out",
        out_path.to_str().unwrap(),
    ]);
    assert!(out.status.success());

    let g6 = std::fs::read_to_string(dir.path().join("ens.g6")).unwrap();
    assert_eq!(g6.lines().count(), 70);
    let csv = std::fs::read_to_string(dir.path().join("ens.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("index,y,z,x"));
    assert_eq!(csv.lines().count(), 71);

    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&out_path).unwrap()).unwrap();
    assert_eq!(report["results"]["count"], 70);
    assert_eq!(report["results"]["sum_z"], "300");
}

#[test]
fn coupling_steps_csv_sidecar_has_branch_rows() {
    let dir = tempfile::tempdir().unwrap();
    let out_path = dir.path().join("run");
    let out = pmlab(&[
        "coupling",
        "--n",
        "4",
        "--d",
        "0",
        "--mode",
        "exact",
        "--steps",
        "20",
        "--seed",
        "2",
        "--out",
        out_path.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    let csv = std::fs::read_to_string(dir.path().join("run.steps.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("branch,contained,g_d,g_next"));
    // (4,0->1) always accepts and always contains.
    for line in lines {
        assert!(line.starts_with("accept-G',true,"), "line: {line}");
    }
}

#[test]
fn cap_exceeded_is_an_error_never_truncation() {
    let out = pmlab(&["enumerate", "--n", "12", "--d", "3"]);
    assert_eq!(out.status.code(), Some(1));
    let msg = String::from_utf8(out.stderr).unwrap();
    assert!(msg.contains("cap"), "stderr: {msg}");
}
