//! End-to-end checks of the `wsbm` binary: file round trips, JSON shapes,
//! and exit codes.

use std::path::Path;
use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_wsbm"))
}

fn run_ok(args: &[&str]) -> String {
    let out = bin().args(args).output().unwrap();
    assert!(
        out.status.success(),
        "command {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn exit_code(args: &[&str]) -> i32 {
    bin().args(args).output().unwrap().status.code().unwrap()
}

fn p(dir: &tempfile::TempDir, name: &str) -> String {
    dir.path().join(name).to_str().unwrap().to_string()
}

#[test]
fn generate_fit_eval_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let matrix = p(&dir, "net.csv");
    let labels = p(&dir, "truth.csv");
    run_ok(&[
        "generate", "--n", "90", "--k", "3", "--a", "3.0", "--b", "0.0", "--sigma2", "0.5",
        "--balanced", "--seed", "5", "--out", &matrix, "--labels", &labels,
    ]);

    let fit_json = p(&dir, "fit.json");
    run_ok(&[
        "fit", "--matrix", &matrix, "--k", "3", "--init", "spectral", "--seed", "1", "--out",
        &fit_json,
    ]);
    let fit: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&fit_json).unwrap()).unwrap();
    assert_eq!(fit["labels"].as_array().unwrap().len(), 90);
    assert_eq!(fit["pi"].as_array().unwrap().len(), 3);
    assert_eq!(fit["B"].as_array().unwrap().len(), 9);
    assert!(fit["pll_trace"].as_array().unwrap().len() >= 1);
    assert!(fit["wall_seconds"].as_f64().unwrap() >= 0.0);

    // write the fitted labels and score them against the truth
    let est = p(&dir, "est.csv");
    let est_labels: Vec<String> = fit["labels"]
        .as_array()
        .unwrap()
        .iter()
        .map(|v| v.as_u64().unwrap().to_string())
        .collect();
    std::fs::write(&est, est_labels.join("\n") + "\n").unwrap();

    let eval_out = run_ok(&["eval", "--labels", &est, "--ref-labels", &labels]);
    let eval: serde_json::Value = serde_json::from_str(&eval_out).unwrap();
    assert_eq!(eval["loss"].as_f64().unwrap(), 0.0);
    assert_eq!(eval["permutation"].as_array().unwrap().len(), 3);
    assert_eq!(eval["confusion_counts"].as_array().unwrap().len(), 3);

    let overlap_out = run_ok(&["overlap", "--labels", &est, "--ref-labels", &labels]);
    let mut lines = overlap_out.lines();
    assert_eq!(lines.next().unwrap(), "est,ref_list,overlap");
    for line in lines {
        assert!(line.ends_with(",1"), "expected full overlap, got {line}");
    }
}

#[test]
fn generate_is_deterministic_on_disk() {
    let dir = tempfile::tempdir().unwrap();
    let m1 = p(&dir, "a.csv");
    let m2 = p(&dir, "b.csv");
    for m in [&m1, &m2] {
        run_ok(&[
            "generate", "--n", "40", "--k", "2", "--seed", "11", "--out", m,
        ]);
    }
    assert_eq!(
        std::fs::read(&m1).unwrap(),
        std::fs::read(&m2).unwrap(),
        "generate is not byte-deterministic"
    );
}

#[test]
fn average_of_negated_matrix_is_zero() {
    let dir = tempfile::tempdir().unwrap();
    let m = p(&dir, "m.csv");
    run_ok(&["generate", "--n", "12", "--k", "2", "--seed", "3", "--out", &m]);
    let text = std::fs::read_to_string(&m).unwrap();
    let negated: String = text
        .lines()
        .map(|line| {
            line.split(',')
                .map(|tok| {
                    let v: f64 = tok.parse().unwrap();
                    format!("{}", -v)
                })
                .collect::<Vec<_>>()
                .join(",")
        })
        .collect::<Vec<_>>()
        .join("\n")
        + "\n";
    let neg = p(&dir, "neg.csv");
    std::fs::write(&neg, negated).unwrap();
    let avg = p(&dir, "avg.csv");
    run_ok(&["average", "--matrix", &m, "--matrix", &neg, "--out", &avg]);
    for line in std::fs::read_to_string(&avg).unwrap().lines() {
        for tok in line.split(',') {
            assert_eq!(tok.parse::<f64>().unwrap(), 0.0);
        }
    }
}

#[test]
fn bounds_json_and_heatmap_csv() {
    let out = run_ok(&[
        "bounds", "balanced", "--k", "2", "--n", "800", "--a", "0.2", "--b", "0", "--sigma2",
        "1", "--gamma", "1.0",
    ]);
    let v: serde_json::Value = serde_json::from_str(&out).unwrap();
    let bound = v["expected_error_bound"].as_f64().unwrap();
    assert!((bound - 0.018315638888734180).abs() < 1e-9);

    let out = run_ok(&[
        "bounds", "unbalanced", "--pi", "0.5,0.5", "--gamma", "0.5,0.5", "--a", "1", "--n",
        "100",
    ]);
    let v: serde_json::Value = serde_json::from_str(&out).unwrap();
    // degenerate initialization: bounds are null, never NaN
    assert!(v["expected_error_bound"].is_null());
    assert_eq!(v["tau2"].as_f64().unwrap(), 0.0);

    let out = run_ok(&[
        "bounds", "heatmap", "--gamma", "0.7,0.7", "--n", "100", "--sigma2", "1", "--ab-grid",
        "1.0,2.0", "--delta-grid", "0,0.25",
    ]);
    let lines: Vec<&str> = out.lines().collect();
    assert_eq!(lines[0], "delta,1,2");
    assert_eq!(lines.len(), 3);
    let row: Vec<f64> = lines[1].split(',').map(|t| t.parse().unwrap()).collect();
    assert_eq!(row[0], 0.0);
    assert!((row[1] - (-8.0)).abs() < 1e-9);
    assert!((row[2] - (-32.0)).abs() < 1e-9);
}

#[test]
fn heatmap_cell_with_failed_conditions_is_na() {
    let out = run_ok(&[
        "bounds", "heatmap", "--gamma", "0.5,0.5", "--n", "100", "--sigma2", "1", "--ab-grid",
        "1.0", "--delta-grid", "0",
    ]);
    let lines: Vec<&str> = out.lines().collect();
    assert_eq!(lines[1], "0,NA");
}

#[test]
fn edge_list_input_works() {
    let dir = tempfile::tempdir().unwrap();
    let edges = p(&dir, "net.tsv");
    // two noiseless triangles bridged by nothing: weights 1 within
    let mut text = String::new();
    for (i, j) in [(0, 1), (0, 2), (1, 2), (3, 4), (3, 5), (4, 5)] {
        text.push_str(&format!("{i}\t{j}\t1.0\n"));
    }
    std::fs::write(&edges, text).unwrap();
    let fit_json = p(&dir, "fit.json");
    run_ok(&[
        "fit", "--edge-list", &edges, "--k", "2", "--init", "spectral", "--t", "0", "--out",
        &fit_json,
    ]);
    let fit: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&fit_json).unwrap()).unwrap();
    let labels: Vec<u64> = fit["labels"]
        .as_array()
        .unwrap()
        .iter()
        .map(|v| v.as_u64().unwrap())
        .collect();
    assert_eq!(labels[0], labels[1]);
    assert_eq!(labels[0], labels[2]);
    assert_eq!(labels[3], labels[4]);
    assert_ne!(labels[0], labels[3]);
}

#[test]
fn exit_codes_match_failure_classes() {
    let dir = tempfile::tempdir().unwrap();
    // missing file: i/o failure
    assert_eq!(
        exit_code(&["fit", "--matrix", &p(&dir, "missing.csv"), "--k", "2"]),
        3
    );
    // invalid input: asymmetric matrix
    let bad = p(&dir, "bad.csv");
    std::fs::write(&bad, "0,1.0\n2.0,0\n").unwrap();
    assert_eq!(exit_code(&["fit", "--matrix", &bad, "--k", "2"]), 2);
    // invalid parameter: gamma at the excluded value 1/K
    assert_eq!(
        exit_code(&[
            "bounds", "balanced", "--k", "2", "--n", "100", "--a", "1", "--gamma", "0.5"
        ]),
        2
    );
    // bad config JSON
    let cfg = p(&dir, "cfg.json");
    std::fs::write(&cfg, "{not json").unwrap();
    assert_eq!(exit_code(&["simulate", "--config", &cfg]), 2);
}

#[test]
fn analyze_bundle_files_exist() {
    let dir = tempfile::tempdir().unwrap();
    let matrix = p(&dir, "net.csv");
    let labels = p(&dir, "truth.csv");
    run_ok(&[
        "generate", "--n", "40", "--k", "2", "--a", "3.0", "--sigma2", "0.5", "--balanced",
        "--seed", "2", "--out", &matrix, "--labels", &labels,
    ]);
    let outdir = p(&dir, "bundle");
    run_ok(&[
        "analyze", "--matrix", &matrix, "--k-range", "2:3", "--methods", "sc,pl-sc",
        "--ref-labels", &labels, "--seed", "4", "--out", &outdir,
    ]);
    for file in [
        "config.json",
        "likelihood.csv",
        "mismatch.csv",
        "overlap.csv",
        "labels_pl-sc_K2.csv",
        "labels_sc_K3.csv",
    ] {
        assert!(
            Path::new(&outdir).join(file).exists(),
            "missing bundle file {file}"
        );
    }
    let likelihood = std::fs::read_to_string(Path::new(&outdir).join("likelihood.csv")).unwrap();
    // header + 2 K values x 2 methods
    assert_eq!(likelihood.lines().count(), 5);
}
