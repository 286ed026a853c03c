//! End-to-end tests of the calibrex binary: exit codes, file outputs, and
//! determinism contracts.

use std::path::Path;
use std::process::{Command, Output};

fn calibrex(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_calibrex"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(output: &Output) -> String {
    String::from_utf8_lossy(&output.stdout).to_string()
}

/// Deterministic, roughly calibrated two-class score file. The golden-ratio
/// sequence stands in for random outcomes so no RNG dependency is needed.
fn write_scores(path: &Path, n: usize) {
    let phi = 0.618_033_988_749_894_9_f64;
    let mut text = String::from("s_0,s_1,label\n");
    for i in 0..n {
        let s1 = 0.05 + 0.9 * ((i as f64 + 0.5) / n as f64);
        let u = (i as f64 * phi).fract();
        let label = usize::from(u < s1);
        text.push_str(&format!("{},{},{label}\n", 1.0 - s1, s1));
    }
    std::fs::write(path, text).unwrap();
}

#[test]
fn eval_legacy_fixed_bins() {
    let dir = tempfile::tempdir().unwrap();
    let scores = dir.path().join("scores.csv");
    write_scores(&scores, 100);
    let out = calibrex(&[
        "eval",
        "--scores",
        scores.to_str().unwrap(),
        "--estimator",
        "legacy",
        "--bins",
        "15",
    ]);
    assert!(out.status.success());
    let text = stdout(&out);
    assert!(text.contains("estimator: ECE_l"), "{text}");
    assert!(text.contains("bins: 15"), "{text}");
    let value: f64 = text
        .lines()
        .find_map(|l| l.strip_prefix("value: "))
        .unwrap()
        .parse()
        .unwrap();
    assert!((0.0..=1.0).contains(&value));
}

#[test]
fn eval_sqrt_heuristic_resolves_bin_count() {
    let dir = tempfile::tempdir().unwrap();
    let scores = dir.path().join("scores.csv");
    write_scores(&scores, 100);
    let out = calibrex(&[
        "eval",
        "--scores",
        scores.to_str().unwrap(),
        "--estimator",
        "legacy",
        "--bins",
        "sqrt",
    ]);
    assert!(out.status.success());
    assert!(stdout(&out).contains("bins: 10"));
}

#[test]
fn eval_kde_reports_resolved_bandwidth() {
    let dir = tempfile::tempdir().unwrap();
    let scores = dir.path().join("scores.csv");
    write_scores(&scores, 200);
    let out = calibrex(&[
        "eval",
        "--scores",
        scores.to_str().unwrap(),
        "--estimator",
        "kde",
        "--bandwidth",
        "auto",
        "--setting",
        "confidence",
        "--json",
    ]);
    assert!(out.status.success());
    let json: serde_json::Value = serde_json::from_str(stdout(&out).trim()).unwrap();
    assert_eq!(json["estimator_id"], "ECE_d");
    assert_eq!(json["setting"], "confidence");
    let value = json["value"].as_f64().unwrap();
    assert!((0.0..=1.0).contains(&value));
    let bandwidth: f64 = json["hyperparams"]["bandwidth"]
        .as_str()
        .unwrap()
        .parse()
        .unwrap();
    assert!(bandwidth > 0.0);
}

#[test]
fn eval_classwise_aggregates() {
    let dir = tempfile::tempdir().unwrap();
    let scores = dir.path().join("scores.csv");
    write_scores(&scores, 80);
    let out = calibrex(&[
        "eval",
        "--scores",
        scores.to_str().unwrap(),
        "--estimator",
        "convex",
        "--setting",
        "class-wise",
        "--json",
    ]);
    assert!(out.status.success());
    let json: serde_json::Value = serde_json::from_str(stdout(&out).trim()).unwrap();
    assert_eq!(json["setting"], "class_wise");
    assert_eq!(json["estimator_id"], "ECE_c");
}

#[test]
fn usage_and_data_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let scores = dir.path().join("scores.csv");
    write_scores(&scores, 20);

    // unknown flag
    let out = calibrex(&["eval", "--scores", scores.to_str().unwrap(), "--nope"]);
    assert_eq!(out.status.code(), Some(1));
    // unknown estimator
    let out = calibrex(&[
        "eval",
        "--scores",
        scores.to_str().unwrap(),
        "--estimator",
        "bogus",
    ]);
    assert_eq!(out.status.code(), Some(1));
    // conflicting flags
    let out = calibrex(&[
        "eval",
        "--scores",
        scores.to_str().unwrap(),
        "--estimator",
        "kde",
        "--bins",
        "5",
    ]);
    assert_eq!(out.status.code(), Some(1));
    // malformed csv
    let bad = dir.path().join("bad.csv");
    std::fs::write(&bad, "not,a,score,file\n1,2,3,4\n").unwrap();
    let out = calibrex(&[
        "eval",
        "--scores",
        bad.to_str().unwrap(),
        "--estimator",
        "legacy",
    ]);
    assert_eq!(out.status.code(), Some(2));
    // class-wise reliability curve is a usage error
    let out = calibrex(&[
        "reliability",
        "--scores",
        scores.to_str().unwrap(),
        "--setting",
        "class-wise",
        "--out",
        dir.path().join("c.csv").to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn reliability_curve_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let scores = dir.path().join("scores.csv");
    write_scores(&scores, 400);
    let csv_path = dir.path().join("curve.csv");
    let svg_path = dir.path().join("curve.svg");

    let out = calibrex(&[
        "reliability",
        "--scores",
        scores.to_str().unwrap(),
        "--setting",
        "class:1",
        "--bandwidth",
        "0.03",
        "--bootstrap",
        "8",
        "--band",
        "5,95",
        "--seed",
        "3",
        "--every",
        "64",
        "--out",
        csv_path.to_str().unwrap(),
        "--svg",
        svg_path.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(&csv_path).unwrap();
    assert!(text.contains("s,lce,rel,band_low,band_high"));
    assert!(text.contains("bandwidth: 0.03"));
    let svg = std::fs::read_to_string(&svg_path).unwrap();
    assert!(svg.starts_with("<svg"));

    // Re-running with the same seed and no SVG leaves the CSV byte-identical.
    let csv2 = dir.path().join("curve2.csv");
    let out = calibrex(&[
        "reliability",
        "--scores",
        scores.to_str().unwrap(),
        "--setting",
        "class:1",
        "--bandwidth",
        "0.03",
        "--bootstrap",
        "8",
        "--band",
        "5,95",
        "--seed",
        "3",
        "--every",
        "64",
        "--out",
        csv2.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    assert_eq!(text, std::fs::read_to_string(&csv2).unwrap());

    // Bootstrap off: no band columns.
    let csv3 = dir.path().join("curve3.csv");
    let out = calibrex(&[
        "reliability",
        "--scores",
        scores.to_str().unwrap(),
        "--bandwidth",
        "0.05",
        "--bootstrap",
        "0",
        "--every",
        "64",
        "--out",
        csv3.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    let text3 = std::fs::read_to_string(&csv3).unwrap();
    assert!(text3.contains("s,lce,rel\n"));
    assert!(!text3.contains("band_low"));
}

#[test]
fn diagram_outputs_and_merge_reporting() {
    let dir = tempfile::tempdir().unwrap();
    let scores = dir.path().join("scores.csv");
    write_scores(&scores, 60);
    let csv_path = dir.path().join("diagram.csv");
    let out = calibrex(&[
        "diagram",
        "--scores",
        scores.to_str().unwrap(),
        "--bins",
        "15",
        "--out",
        csv_path.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    let text = std::fs::read_to_string(&csv_path).unwrap();
    let data_rows = text
        .lines()
        .filter(|l| !l.starts_with('#') && !l.starts_with("bin,"))
        .count();
    assert_eq!(data_rows, 15);

    // Heavily tied scores with adaptive binning surface the merge count.
    let tied = dir.path().join("tied.csv");
    let mut body = String::from("s_0,s_1,label\n");
    for i in 0..40 {
        body.push_str(&format!("0.7,0.3,{}\n", i % 2));
    }
    std::fs::write(&tied, body).unwrap();
    let csv_path = dir.path().join("tied_diagram.csv");
    let out = calibrex(&[
        "diagram",
        "--scores",
        tied.to_str().unwrap(),
        "--setting",
        "class:0",
        "--bins",
        "8",
        "--binning",
        "adaptive",
        "--out",
        csv_path.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    let text = std::fs::read_to_string(&csv_path).unwrap();
    assert!(text.contains("# merged:"), "{text}");
}

#[test]
fn synth_outputs_are_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let args = |data: &Path, spec: &Path| {
        vec![
            "synth".to_string(),
            "--classes".into(),
            "5".into(),
            "--dims".into(),
            "5".into(),
            "--n".into(),
            "500".into(),
            "--seed".into(),
            "7".into(),
            "--out".into(),
            data.to_str().unwrap().into(),
            "--spec-out".into(),
            spec.to_str().unwrap().into(),
        ]
    };
    let (d1, s1) = (dir.path().join("a.csv"), dir.path().join("a.json"));
    let (d2, s2) = (dir.path().join("b.csv"), dir.path().join("b.json"));
    for (d, s) in [(&d1, &s1), (&d2, &s2)] {
        let argv = args(d, s);
        let argv: Vec<&str> = argv.iter().map(|a| a.as_str()).collect();
        let out = calibrex(&argv);
        assert!(out.status.success());
    }
    assert_eq!(std::fs::read(&d1).unwrap(), std::fs::read(&d2).unwrap());
    assert_eq!(std::fs::read(&s1).unwrap(), std::fs::read(&s2).unwrap());

    let header = std::fs::read_to_string(&d1).unwrap();
    assert!(header.starts_with("x_0,x_1,x_2,x_3,x_4,label\n"));
    let spec: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&s1).unwrap()).unwrap();
    assert_eq!(spec["n_classes"], 5);
    assert_eq!(spec["modes"].as_array().unwrap().len(), 20);
}

fn mini_bench_config(dir: &Path) -> std::path::PathBuf {
    let config = serde_json::json!({
        "class_counts": [2],
        "dims": [2],
        "specs_per_combination": 1,
        "models": [{"kind": "analytic_posterior"}],
        "train_size": 50,
        "train_splits": 1,
        "holdout_size": 3000,
        "truth_bins": 100,
        "eval_sizes": [30, 60],
        "n_boot_eval": 5,
        "error_percentile": 95.0,
        "estimators": [
            {"kind": "legacy", "bins": "sqrt"},
            {"kind": "kde", "bandwidth": "silverman"}
        ],
        "settings": ["confidence"],
        "seed": 5
    });
    let path = dir.join("mini.json");
    std::fs::write(&path, serde_json::to_string_pretty(&config).unwrap()).unwrap();
    path
}

#[test]
fn benchmark_writes_report_and_resumes() {
    let dir = tempfile::tempdir().unwrap();
    let config = mini_bench_config(dir.path());
    let out_dir = dir.path().join("run");

    let out = calibrex(&[
        "benchmark",
        "--config",
        config.to_str().unwrap(),
        "--out",
        out_dir.to_str().unwrap(),
        "--workers",
        "2",
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let report = std::fs::read_to_string(out_dir.join("report.csv")).unwrap();
    assert!(report
        .starts_with("setting,estimator,hyperparams,eval_size,median_p95_error,n_distributions"));
    assert_eq!(report.lines().count(), 1 + 4); // 2 estimators x 2 sizes
    assert!(out_dir.join("provenance.json").exists());
    assert!(out_dir.join("plot_confidence.svg").exists());
    assert!(out_dir.join("checkpoints").read_dir().unwrap().count() == 1);

    // Resume reuses the checkpoint and reproduces the identical report.
    let out = calibrex(&[
        "benchmark",
        "--config",
        config.to_str().unwrap(),
        "--out",
        out_dir.to_str().unwrap(),
        "--resume",
        "--workers",
        "1",
    ]);
    assert!(out.status.success());
    assert_eq!(
        report,
        std::fs::read_to_string(out_dir.join("report.csv")).unwrap()
    );

    // Bad config is a usage error.
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, "{}").unwrap();
    let out = calibrex(&[
        "benchmark",
        "--config",
        bad.to_str().unwrap(),
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(1));
}
