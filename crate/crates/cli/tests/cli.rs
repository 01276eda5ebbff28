use std::path::Path;
use std::process::Command;

use bellman_grid_cli::{read_report, run, Results, RunOptions, RunStatus};

fn write_config(dir: &Path, name: &str, body: &str) -> std::path::PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, body).unwrap();
    path
}

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_bellman-grid"))
}

#[test]
fn verify_identities_is_byte_identical_across_runs() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "v.json", r#"{"kind": "verify-identities", "seed": 7, "trials": 20}"#);
    let mut reports = Vec::new();
    for name in ["a", "b"] {
        let out = tmp.path().join(name);
        let outcome = run(&cfg, &RunOptions { out: Some(out.clone()), seed: None }).unwrap();
        assert_eq!(outcome.status, RunStatus::Ok);
        reports.push((std::fs::read(out.join("report.json")).unwrap(), std::fs::read(out.join("manifest.json")).unwrap()));
    }
    assert_eq!(reports[0], reports[1]);

    let report = read_report(&tmp.path().join("a/report.json")).unwrap();
    let Results::VerifyIdentities { cases, mixed, conjugation } = report.results else { panic!() };
    assert_eq!(cases.len(), 20);
    assert!(cases.iter().all(|c| c.product_rules.max() <= 1e-12 && c.laplace_bound_slack >= -1e-12));
    assert!(mixed.iter().all(|m| m.slack >= -1e-12));
    assert_eq!(conjugation.len(), 6);
    assert!(conjugation.iter().all(|c| c.scaled_residual <= 1e-12));
}

#[test]
fn seed_flag_changes_the_sampling() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "v.json", r#"{"kind": "verify-identities", "seed": 7, "trials": 5}"#);
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    run(&cfg, &RunOptions { out: Some(a.clone()), seed: None }).unwrap();
    run(&cfg, &RunOptions { out: Some(b.clone()), seed: Some(8) }).unwrap();
    assert_ne!(std::fs::read(a.join("report.json")).unwrap(), std::fs::read(b.join("report.json")).unwrap());
}

#[test]
fn report_reads_back_to_the_emitted_structure() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        "c.json",
        r#"{"kind": "convergence", "problem": "const1d", "ladder": [0.1, 0.05, 0.025], "tau": {"proportional": 1.0}}"#,
    );
    let out = tmp.path().join("out");
    run(&cfg, &RunOptions { out: Some(out.clone()), seed: None }).unwrap();
    let report = read_report(&out.join("report.json")).unwrap();
    let again = serde_json::to_string_pretty(&report).unwrap() + "\n";
    assert_eq!(again, std::fs::read_to_string(out.join("report.json")).unwrap());

    let csv = std::fs::read_to_string(out.join("rates.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("h,error,lhs,rhs,ratio"));
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 3);
    for (row, table_row) in rows.iter().zip(&report.tables[0].rows) {
        let cells: Vec<&str> = row.split(',').collect();
        assert_eq!(cells[0].parse::<f64>().unwrap(), table_row.h);
        assert_eq!(cells[1].parse::<f64>().unwrap(), table_row.error.unwrap());
    }
}

#[test]
fn empty_result_set_is_valid_json_with_empty_arrays() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        "e.json",
        r#"{"kind": "validate-assumptions", "problem": {"catalog": "const1d"}, "h": 0.25, "tau": 0.25, "assumptions": []}"#,
    );
    let out = tmp.path().join("out");
    let outcome = run(&cfg, &RunOptions { out: Some(out.clone()), seed: None }).unwrap();
    assert_eq!(outcome.exit_code(), 0);
    let value: serde_json::Value = serde_json::from_slice(&std::fs::read(out.join("report.json")).unwrap()).unwrap();
    assert_eq!(value["tables"], serde_json::json!([]));
    assert_eq!(value["results"]["validation"]["checks"], serde_json::json!([]));
    assert_eq!(value["schema_version"], 1);
    assert!(!out.join("rates.csv").exists());
}

#[test]
fn decompose_reproduces_the_identity_worked_case() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "d.json", r#"{"kind": "decompose", "rows": [[0.0, 0.0, 1.0, 0.0, 1.0]]}"#);
    let out = tmp.path().join("out");
    run(&cfg, &RunOptions { out: Some(out.clone()), seed: None }).unwrap();
    let report = read_report(&out.join("report.json")).unwrap();
    let Results::Decompose { coefficients, max_reconstruction_error, .. } = report.results else { panic!() };
    assert_eq!(coefficients[0].values(), [7.0 / 16.0, 7.0 / 16.0, 1.0 / 16.0, 1.0 / 16.0]);
    assert!(max_reconstruction_error <= 1e-15);
    let csv = std::fs::read_to_string(out.join("decomposed.csv")).unwrap();
    assert!(csv.starts_with("x0,x1,a11hat,a22hat,a12hat,a1m2hat\n"));
}

#[test]
fn exit_codes_follow_the_outcome() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    let status = |cfg: &Path| {
        let out = bin()
            .args(["run", "--quiet", "--config"])
            .arg(cfg)
            .arg("--out")
            .arg(dir.join("out"))
            .output()
            .unwrap();
        (out.status.code().unwrap(), String::from_utf8_lossy(&out.stderr).to_string())
    };

    let ok = write_config(dir, "ok.json", r#"{"kind": "solve", "problem": {"catalog": "affine1d"}, "h": 0.25, "tau": 0.25}"#);
    assert_eq!(status(&ok).0, 0);
    let report = read_report(&dir.join("out/report.json")).unwrap();
    let Results::Solve { sup_error, .. } = report.results else { panic!() };
    assert!(sup_error.unwrap() <= 1e-10);

    let missing = write_config(dir, "missing.json", r#"{"kind": "solve", "problem": {"catalog": "affine1d"}, "tau": 0.25}"#);
    let (code, stderr) = status(&missing);
    assert_eq!(code, 1);
    assert!(stderr.contains("`h`"), "{stderr}");

    let unknown = write_config(dir, "unknown.json", r#"{"kind": "solve", "problem": {"catalog": "nope"}, "h": 0.25, "tau": 0.25}"#);
    assert_eq!(status(&unknown).0, 1);

    let violated = write_config(
        dir,
        "violated.json",
        r#"{"kind": "validate-assumptions", "problem": {"catalog": "violation1d"}, "h": 0.25, "tau": 0.25, "assumptions": ["upwind-balance"]}"#,
    );
    assert_eq!(status(&violated).0, 2);

    let starved = write_config(
        dir,
        "starved.json",
        r#"{"kind": "solve", "problem": {"catalog": "twocontrol"}, "h": 0.125, "tau": 0.125,
            "solver": {"method": "value-iteration", "max_inner": 2, "tol": 1e-14}}"#,
    );
    assert_eq!(status(&starved).0, 3);
}

#[test]
fn thread_count_does_not_change_the_report() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        "s.json",
        r#"{"kind": "solve", "problem": {"catalog": "smooth2d8"}, "h": 0.125, "tau": 0.125}"#,
    );
    let mut bytes = Vec::new();
    for threads in ["1", "3"] {
        let out = tmp.path().join(threads);
        let st = bin()
            .args(["run", "--quiet", "--config"])
            .arg(&cfg)
            .arg("--out")
            .arg(&out)
            .env("BELLMAN_GRID_THREADS", threads)
            .status()
            .unwrap();
        assert!(st.success());
        bytes.push((std::fs::read(out.join("report.json")).unwrap(), std::fs::read(out.join("solution.csv")).unwrap()));
    }
    assert_eq!(bytes[0], bytes[1]);
}

#[test]
fn tabulated_problem_with_balanced_free_term_keeps_constant_data() {
    // a = 1, c = 2, f = 3 on every node: u ≡ 1.5 solves the scheme.
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    let table = |name: &str, k: i32, value: f64| {
        let mut text = String::from("alpha,k,time_index,x0,value\n");
        for level in 0..=2 {
            for x in 0..=4 {
                text += &format!("0,{k},{level},{x},{value}\n");
            }
        }
        std::fs::write(dir.join(format!("{name}.csv")), text).unwrap();
    };
    table("r", 0, 1.0);
    table("a", 1, 1.0);
    table("c", 0, 2.0);
    table("f", 0, 3.0);
    let mut data = String::from("time_index,x0,value\n");
    for level in 0..=2 {
        for x in 0..=4 {
            data += &format!("{level},{x},1.5\n");
        }
    }
    std::fs::write(dir.join("data.csv"), data).unwrap();
    let cfg = write_config(
        dir,
        "t.json",
        r#"{"kind": "solve", "h": 0.25, "tau": 0.25,
            "problem": {"tabulated": {"dir": ".", "controls": 1, "ells": [[1]], "lo": [0], "hi": [4], "data": "data.csv",
                "constants": {"horizon": 0.5, "h0": 1.0, "delta": 1.0, "k0": 1.0, "k1": 1.0, "k2": 1.0, "k3": 1.0,
                              "m": 0.0, "omega": 1.0, "c_struct": 4.0}}}}"#,
    );
    let out = dir.join("out");
    run(&cfg, &RunOptions { out: Some(out.clone()), seed: None }).unwrap();
    let solution = std::fs::read_to_string(out.join("solution.csv")).unwrap();
    let values: Vec<f64> = solution.lines().skip(1).map(|l| l.rsplit(',').next().unwrap().parse().unwrap()).collect();
    assert_eq!(values.len(), 15);
    assert!(values.iter().all(|v| (v - 1.5).abs() < 1e-12), "{solution}");
}
