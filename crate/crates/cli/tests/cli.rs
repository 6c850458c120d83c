use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn ar3(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ar3"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn json_file(p: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(p).unwrap()).unwrap()
}

#[test]
fn gen_solve_check_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let model = dir.path().join("m.json");
    let result = dir.path().join("r.json");
    let point = dir.path().join("s.json");

    let out = ar3(&[
        "gen",
        "--set",
        "diagonal",
        "--n",
        "6",
        "--seed",
        "3",
        "--out",
        path(&model),
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );

    let out = ar3(&[
        "solve",
        "--model",
        path(&model),
        "--solver",
        "dtm",
        "--rule",
        "diagonal",
        "--tol",
        "1e-5",
        "--out",
        path(&result),
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let r = json_file(&result);
    assert_eq!(r["status"], "converged");
    assert!(r["grad_norm"].as_f64().unwrap() <= 1e-5);
    assert_eq!(r["iters_success"], 1);

    fs::write(&point, serde_json::to_string(&r["s"]).unwrap()).unwrap();
    let out = ar3(&["check", "--model", path(&model), "--point", path(&point)]);
    assert!(out.status.success());
    let report: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(report["flags"]["first_order"], true);
    assert!(report["verdict"].is_string());
}

#[test]
fn arc_solver_and_wrapped_point() {
    let dir = tempfile::tempdir().unwrap();
    let model = dir.path().join("m.json");
    fs::write(
        &model,
        r#"{"g": [-1.0], "h": [[1.0]], "t": {"kind": "zero", "n": 1}, "sigma": 1.0}"#,
    )
    .unwrap();
    let out = ar3(&[
        "solve",
        "--model",
        path(&model),
        "--solver",
        "arc",
        "--tol",
        "1e-9",
    ]);
    assert!(out.status.success());
    let r: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!((r["s"][0].as_f64().unwrap() - 0.682_327_803_828_019_3).abs() < 1e-8);

    let point = dir.path().join("s.json");
    fs::write(&point, r#"{"s": [0.6823278038280193]}"#).unwrap();
    let out = ar3(&["check", "--model", path(&model), "--point", path(&point)]);
    let report: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(report["verdict"], "global_minimizer");
}

#[test]
fn check_separable_model() {
    let dir = tempfile::tempdir().unwrap();
    let model = dir.path().join("m.json");
    let point = dir.path().join("s.json");
    let out = ar3(&[
        "gen",
        "--set",
        "diagonal",
        "--n",
        "3",
        "--separable",
        "--out",
        path(&model),
    ]);
    assert!(out.status.success());
    fs::write(&point, "[0, 0, 0]").unwrap();
    let out = ar3(&["check", "--model", path(&model), "--point", path(&point)]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let report: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!(report.get("flags").is_some());
}

#[test]
fn bench_writes_csv() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("b.csv");
    let out = ar3(&[
        "bench",
        "--set",
        "diagonal",
        "--n",
        "20,30",
        "--trials",
        "3",
        "--seed",
        "42",
        "--csv",
        path(&csv),
        "--solver",
        "dtm,arc",
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let text = fs::read_to_string(&csv).unwrap();
    let mut lines = text.lines();
    assert_eq!(
        lines.next().unwrap(),
        "solver,set,n,seed,trial,iters_success,iters_total,fevals,devals,chol_count,cpu_ms,final_value,grad_norm,first_order_ok,local2_ok,necessary_ok,sufficient_ok,safeguards"
    );
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 12);
    for r in rows.iter().filter(|r| r.starts_with("dtm,")) {
        assert_eq!(r.split(',').nth(5), Some("1"));
    }
    let aggregates: Vec<Value> = String::from_utf8_lossy(&out.stdout)
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect();
    assert_eq!(aggregates.len(), 4);
}

#[test]
fn bench_sweep_labels_rows() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("b.csv");
    let out = ar3(&[
        "bench",
        "--set",
        "diagonal",
        "--n",
        "3",
        "--trials",
        "2",
        "--csv",
        path(&csv),
        "--sweep",
        "sigma",
        "--from",
        "50",
        "--to",
        "150",
        "--steps",
        "3",
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let text = fs::read_to_string(&csv).unwrap();
    assert_eq!(text.lines().count(), 7);
    assert!(text.contains("diagonal:sigma=150"));
}

#[test]
fn bench_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let strip = |p: &Path| -> Vec<String> {
        fs::read_to_string(p)
            .unwrap()
            .lines()
            .map(|l| {
                let mut f: Vec<&str> = l.split(',').collect();
                f[10] = "";
                f.join(",")
            })
            .collect()
    };
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    for p in [&a, &b] {
        let out = ar3(&[
            "bench",
            "--set",
            "full",
            "--n",
            "6",
            "--trials",
            "2",
            "--seed",
            "9",
            "--tol",
            "1e-3",
            "--csv",
            path(p),
        ]);
        assert!(out.status.success());
    }
    assert_eq!(strip(&a), strip(&b));
}

#[test]
fn errors_exit_nonzero() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("missing.json");
    let out = ar3(&["solve", "--model", path(&missing)]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("missing.json"));

    let out = ar3(&["gen", "--set", "nope", "--n", "3"]);
    assert_eq!(out.status.code(), Some(1));

    let out = ar3(&["bench", "--set", "diagonal"]);
    assert!(!out.status.success());

    let bad = dir.path().join("bad.json");
    fs::write(
        &bad,
        r#"{"g": [1.0], "h": [[1.0]], "t": {"kind": "zero", "n": 1}, "sigma": -1.0}"#,
    )
    .unwrap();
    let out = ar3(&["solve", "--model", path(&bad)]);
    assert_eq!(out.status.code(), Some(1));
}
