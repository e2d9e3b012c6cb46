use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

use ordmeta::cli::run;

fn data(name: &str) -> String {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/data").join(name).display().to_string()
}

fn go(args: &[&str]) -> i32 {
    run(std::iter::once("ordmeta").chain(args.iter().copied()))
}

fn fit_single(out: &Path, seed: &str) -> i32 {
    go(&["fit", "--data", &data("single.json"), "--model", "obiv_fc", "--chains", "2", "--warmup", "150", "--iter", "100", "--seed", seed, "--threads", "2", "--out", out.to_str().unwrap()])
}

#[test]
fn binary_exit_codes() {
    let bin = env!("CARGO_BIN_EXE_ordmeta");
    let st = Command::new(bin).args(["fit", "--data", "/no/such/file.json", "--model", "obiv_fc", "--out", "/tmp/x"]).output().unwrap();
    assert_eq!(st.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&st.stderr).contains("/no/such/file.json"));
    assert_eq!(Command::new(bin).arg("--bogus").output().unwrap().status.code(), Some(2));
    assert_eq!(Command::new(bin).arg("--help").output().unwrap().status.code(), Some(0));
}

#[test]
fn bad_inputs_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    assert_eq!(go(&["fit", "--data", &data("single.json"), "--model", "no_such_family", "--out", out]), 2);
    let bad = dir.path().join("bad.json");
    fs::write(&bad, r#"{"K": 3, "studies": [{"nd": {"n": 10, "cum": [3]}, "d": {"n": 5, "cum": [2, 1]}}]}"#).unwrap();
    assert_eq!(go(&["fit", "--data", bad.to_str().unwrap(), "--model", "obiv_fc", "--out", out]), 2);
    assert_eq!(go(&["fit", "--data", &data("single.json"), "--model", "obiv_fc", "--chains", "0", "--out", out]), 2);
}

#[test]
fn fit_is_reproducible_and_writes_all_outputs() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    assert_eq!(fit_single(a.path(), "5"), 0);
    assert_eq!(fit_single(b.path(), "5"), 0);
    for f in ["summary.csv", "auc.csv", "draws.csv", "draws.ordm", "diagnostics.csv", "sroc.svg", "thresholds.svg", "heterogeneity.json"] {
        let x = fs::read(a.path().join(f)).unwrap();
        assert_eq!(x, fs::read(b.path().join(f)).unwrap(), "{f} differs");
    }
    let m: serde_json::Value = serde_json::from_str(&fs::read_to_string(a.path().join("manifest.json")).unwrap()).unwrap();
    let m2: serde_json::Value = serde_json::from_str(&fs::read_to_string(b.path().join("manifest.json")).unwrap()).unwrap();
    assert_eq!(m["config_hash"], m2["config_hash"]);
    assert_eq!(m["config_hash"].as_str().unwrap().len(), 64);
    assert_eq!(m["seed"], 5);
    assert!(m["outputs"].as_array().unwrap().iter().any(|v| v == "summary.csv"));

    let c = tempfile::tempdir().unwrap();
    assert_eq!(fit_single(c.path(), "6"), 0);
    assert_ne!(fs::read(a.path().join("summary.csv")).unwrap(), fs::read(c.path().join("summary.csv")).unwrap());

    let text = fs::read_to_string(a.path().join("summary.csv")).unwrap();
    let s = ordmeta::io::parse_summary_csv(&text).unwrap();
    assert_eq!(s[0].rows.len(), 4);
}

#[test]
fn json_format_writes_json_tables() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let code = go(&["fit", "--data", &data("single.json"), "--model", "ohsroc_rc", "--chains", "2", "--warmup", "100", "--iter", "50", "--format", "json", "--out", out]);
    assert_eq!(code, 0);
    let v: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.path().join("summary.json")).unwrap()).unwrap();
    assert_eq!(v.as_array().unwrap().len(), 8);
    let h: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.path().join("heterogeneity.json")).unwrap()).unwrap();
    assert_eq!(h["mapped_from_hsroc"], true);
}

#[test]
fn simulate_with_infinite_threshold_runs_once() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("scn.json");
    fs::write(
        &cfg,
        r#"{"schema_version": 1, "profile": "gad2", "dgm": "obiv_fc", "n_studies": 6, "models": ["obiv_fc"], "mcse_threshold_pct": "inf", "sampler": {"chains": 2, "warmup": 100, "iter": 50}}"#,
    )
    .unwrap();
    let out = dir.path().join("out");
    assert_eq!(go(&["simulate", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]), 0);
    let trace = fs::read_to_string(out.join("trace.csv")).unwrap();
    assert_eq!(trace.lines().count(), 2);
    let results = fs::read_to_string(out.join("results.csv")).unwrap();
    assert!(results.lines().skip(1).all(|l| l.ends_with(",1")));
    assert!(fs::read_to_string(out.join("table.txt")).unwrap().contains("RMSE Se"));
}

fn write_kfold(dir: &Path, name: &str, pointwise: &[Option<f64>]) -> PathBuf {
    let v = serde_json::json!({
        "schema_version": 1, "model": name, "k_folds": 2, "fold_seed": 1,
        "elpd_total": 0.0, "se_total": 0.0, "pointwise": pointwise,
        "folds": [{"fold": 1, "studies": [0], "ess_min": 500.0, "discarded": false}],
    });
    let p = dir.join(format!("{name}.json"));
    fs::write(&p, v.to_string()).unwrap();
    p
}

#[test]
fn compare_ranks_four_result_files() {
    let dir = tempfile::tempdir().unwrap();
    let files: Vec<PathBuf> = [
        ("m0", [-10.0, -12.0, -9.0, -11.0]),
        ("m1", [-9.5, -11.5, -9.2, -10.4]),
        ("m2", [-14.0, -13.0, -12.0, -15.0]),
        ("m3", [-10.0, -12.0, -9.0, -11.5]),
    ]
    .iter()
    .map(|(n, v)| write_kfold(dir.path(), n, &v.map(Some)))
    .collect();
    let out = dir.path().join("cmp");
    let mut args = vec!["compare".to_string()];
    args.extend(files.iter().map(|p| p.display().to_string()));
    args.extend(["--out".into(), out.display().to_string()]);
    assert_eq!(run(std::iter::once("ordmeta".to_string()).chain(args)), 0);
    let csv = fs::read_to_string(out.join("comparison.csv")).unwrap();
    let order: Vec<&str> = csv.lines().skip(1).map(|l| l.split(',').nth(1).unwrap()).collect();
    assert_eq!(order, ["m1", "m0", "m3", "m2"]);
    assert!(fs::read_to_string(out.join("comparison.txt")).unwrap().contains("[Best]"));

    let wrong = dir.path().join("wrong.json");
    fs::write(&wrong, r#"{"schema_version": 1}"#).unwrap();
    assert_eq!(go(&["compare", wrong.to_str().unwrap(), "--out", out.to_str().unwrap()]), 2);
}

#[test]
fn kfold_writes_a_comparable_file() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let code = go(&[
        "kfold", "--data", &data("single.json"), "--model", "obiv_fc", "--chains", "2", "--warmup", "100", "--iter", "60",
        "--folds", "5", "--min-ess", "0", "--inner-draws", "5", "--name", "a", "--out", out,
    ]);
    assert_eq!(code, 0);
    let v: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.path().join("kfold_a.json")).unwrap()).unwrap();
    let pw = v["pointwise"].as_array().unwrap();
    assert_eq!(pw.len(), 10);
    let total: f64 = pw.iter().map(|x| x.as_f64().unwrap()).sum();
    assert!((total - v["elpd_total"].as_f64().unwrap()).abs() < 1e-9);
    let f = dir.path().join("kfold_a.json");
    assert_eq!(go(&["compare", f.to_str().unwrap(), f.to_str().unwrap(), "--out", out]), 0);
}

#[test]
fn network_fit_then_pairwise_and_baseline() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let model = data("nma_cov.json");
    let code = go(&["fit", "--data", &data("network.json"), "--model", &model, "--chains", "2", "--warmup", "150", "--iter", "100", "--out", out]);
    assert_eq!(code, 0);
    for f in ["variance.csv", "sroc_grid.svg", "thresholds_A.svg", "thresholds_B.svg"] {
        assert!(dir.path().join(f).exists(), "{f}");
    }
    let draws = dir.path().join("draws.ordm");
    let draws = draws.to_str().unwrap();

    // a test against itself differs by exactly zero in every draw
    let code = go(&["pairwise", "--data", &data("network.json"), "--model", &model, "--draws", draws, "--test-a", "B", "--test-b", "B", "--out", out]);
    assert_eq!(code, 0);
    let csv = fs::read_to_string(dir.path().join("pairwise.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 4);
    for l in csv.lines().skip(1) {
        assert!(l.split(',').skip(4).all(|v| v.parse::<f64>().unwrap() == 0.0), "{l}");
    }
    let code = go(&["pairwise", "--data", &data("network.json"), "--model", &model, "--draws", draws, "--test-a", "A", "--test-b", "B", "--thresholds", "1:2,3:4", "--out", out]);
    assert_eq!(code, 0);
    assert_eq!(fs::read_to_string(dir.path().join("pairwise.csv")).unwrap().lines().count(), 3);
    let code = go(&["pairwise", "--data", &data("network.json"), "--model", &model, "--draws", draws, "--test-a", "A", "--test-b", "B", "--thresholds", "9:1", "--out", out]);
    assert_ne!(code, 0);

    let code = go(&["baseline", "--data", &data("network.json"), "--model", &model, "--draws", draws, "--scenarios", &data("baseline.json"), "--out", out]);
    assert_eq!(code, 0);
    let b = fs::read_to_string(dir.path().join("baseline.csv")).unwrap();
    assert_eq!(b.lines().count(), 1 + 2 * 2 * (3 + 4));

    // draws from another model do not fit
    let code = go(&["pairwise", "--data", &data("network.json"), "--model", "ohsroc_nma", "--draws", draws, "--test-a", "A", "--test-b", "B", "--out", out]);
    assert_eq!(code, 2);
}

#[test]
fn baseline_needs_a_network_model() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    assert_eq!(fit_single(dir.path(), "1"), 0);
    let draws = dir.path().join("draws.ordm");
    let code = go(&["baseline", "--data", &data("single.json"), "--model", "obiv_fc", "--draws", draws.to_str().unwrap(), "--scenarios", &data("baseline.json"), "--out", out]);
    assert_eq!(code, 2);
}
