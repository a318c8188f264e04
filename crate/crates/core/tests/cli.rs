use std::process::Command;

fn wggp(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_wggp")).args(args).output().unwrap()
}

#[test]
fn density_run_succeeds_and_writes_reports() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("density");
    let o = wggp(&["density", "--seed", "3", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(out.join("report.json").exists());
    assert!(out.join("density.csv").exists());
    assert!(String::from_utf8_lossy(&o.stdout).contains("wrote"));
}

#[test]
fn config_file_and_overrides() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.json");
    let spec = r#"{"kind": "scale_recovery", "graph": {"kind": "synthetic", "spec": {"levels": [{"size": 4, "p": 0.9}, {"size": 4, "p": 0.4}], "cross": [0.3], "seed": 1}}, "optimizer": {"max_iters": 5}}"#;
    std::fs::write(&cfg, spec).unwrap();
    let out = dir.path().join("sr");
    let o = wggp(&[
        "scale-recovery",
        "--config",
        cfg.to_str().unwrap(),
        "--reps",
        "2",
        "--restarts",
        "1",
        "--fractions",
        "0.5",
        "--mode",
        "exact,wls",
        "--degree",
        "4",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["rows"].as_array().unwrap().len(), 4);
    assert_eq!(report["config"]["degree"], 4);
}

#[test]
fn config_errors_exit_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    for args in [
        vec!["scale-recovery", "--fractions", "1.5", "--out", out],
        vec!["scale-recovery", "--mode", "spline", "--out", out],
        vec!["density", "--config", "/no/such/config.json", "--out", out],
        vec!["classify", "--input", "/no/such/bundle", "--out", out],
        vec!["density", "--degree", "40", "--out", out],
    ] {
        let o = wggp(&args);
        assert_eq!(
            o.status.code(),
            Some(1),
            "{args:?}: {}",
            String::from_utf8_lossy(&o.stderr)
        );
        assert!(String::from_utf8_lossy(&o.stderr).contains("config error"));
    }
}

#[test]
fn runtime_failures_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("o");
    let o = wggp(&["impulse", "--node", "100000", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2), "{}", String::from_utf8_lossy(&o.stderr));
    let edges = dir.path().join("bad.txt");
    std::fs::write(&edges, "0 1\n1 two\n").unwrap();
    let o = wggp(&[
        "density",
        "--input",
        edges.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(2), "{}", String::from_utf8_lossy(&o.stderr));
}
