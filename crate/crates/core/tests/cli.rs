mod common;

use std::fs;
use std::path::Path;
use std::process::{Command, Output};
use std::time::Instant;

use common::fixture;
use quasimed::pipeline::RESULTS_HEADER;
use quasimed::sim::METRICS_HEADER;

fn quasimed(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_quasimed"))
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .expect("binary runs")
}

fn analyze(out: &Path, extra: &[&str]) -> Output {
    let (m, f, c, p) = (fixture("matrix.mtx"), fixture("features.tsv"), fixture("cells.tsv"), fixture("pheno.tsv"));
    let mut args = vec![
        "analyze",
        "--expr",
        m.to_str().unwrap(),
        "--features",
        f.to_str().unwrap(),
        "--cells-map",
        c.to_str().unwrap(),
        "--pheno",
        p.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ];
    args.extend_from_slice(extra);
    quasimed(&args)
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn listing(dir: &Path) -> Vec<String> {
    let mut names: Vec<String> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .collect();
    names.sort();
    names
}

#[test]
fn analyze_fixture_writes_results_table() {
    let dir = tempfile::tempdir().unwrap();
    let o = analyze(dir.path(), &[]);
    assert!(o.status.success(), "{}", stderr(&o));
    let count: usize = String::from_utf8(o.stdout).unwrap().trim().parse().unwrap();
    let results = fs::read_to_string(dir.path().join("results.tsv")).unwrap();
    assert_eq!(
        results.lines().next().unwrap(),
        "gene\tpathway\tbeta_outcome\tse_outcome\tp_outcome\tcoef_exposure\tse_exposure\tp_exposure\tiie\tp_max\tq_bh\tsignificant\timputed_frac"
    );
    assert_eq!(results.lines().next().unwrap(), RESULTS_HEADER);
    let called = results.lines().skip(1).filter(|l| l.split('\t').nth(11) == Some("true")).count();
    assert_eq!(called, count);
    assert_eq!(listing(dir.path()), vec!["results.tsv", "summary.json", "timings.json"]);

    let summary: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.path().join("summary.json")).unwrap()).unwrap();
    let echoed = &summary["arguments"];
    for key in [
        "expr", "features", "cells_map", "pheno", "outcome_col", "exposure_col", "covar_cols", "min_cells",
        "min_subject_frac", "max_zero_frac", "clamp_lower", "clamp_upper", "method", "seed", "fdr", "k_top",
        "folds", "n_lambda", "joint_bh", "robust_se", "min_subjects",
    ] {
        assert!(echoed.get(key).is_some(), "summary does not echo `{key}`");
    }
}

#[test]
fn rerun_is_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    for method in ["quasimed", "naive"] {
        let o = analyze(dir.path(), &["--method", method, "--seed", "5"]);
        assert!(o.status.success(), "{}", stderr(&o));
        let first: Vec<Vec<u8>> = ["results.tsv", "summary.json"]
            .iter()
            .map(|f| fs::read(dir.path().join(f)).unwrap())
            .collect();
        let o = analyze(dir.path(), &["--method", method, "--seed", "5", "--threads", "2"]);
        assert!(o.status.success(), "{}", stderr(&o));
        let second: Vec<Vec<u8>> = ["results.tsv", "summary.json"]
            .iter()
            .map(|f| fs::read(dir.path().join(f)).unwrap())
            .collect();
        assert_eq!(first[0], second[0], "{method} results differ");
        // The thread count is not among the echoed arguments.
        assert_eq!(first[1], second[1], "{method} summaries differ");
    }
}

#[test]
fn missing_phenotype_column_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let o = analyze(dir.path(), &["--outcome-col", "bmi"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("bmi"), "{}", stderr(&o));
    assert!(!dir.path().join("results.tsv").exists());
}

#[test]
fn invalid_settings_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(analyze(dir.path(), &["--fdr", "1.5"]).status.code(), Some(2));
    assert_eq!(analyze(dir.path(), &["--threads", "0"]).status.code(), Some(2));
    let o = quasimed(&["simulate", "--genes", "0", "--seed", "1", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
    let o = quasimed(&["simulate", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2), "seed is required");
}

#[test]
fn help_lists_defaults() {
    let o = quasimed(&["analyze", "--help"]);
    let help = String::from_utf8(o.stdout).unwrap();
    for default in [
        "[default: 0.05]",
        "[default: 30]",
        "[default: 0.9]",
        "[default: 0.001]",
        "[default: 0.999]",
        "[default: 10]",
        "[default: 100]",
    ] {
        assert!(help.contains(default), "help lacks {default}");
    }
}

fn simulate(out: &Path, seed: &str) -> Output {
    quasimed(&[
        "simulate", "--n", "30", "--genes", "200", "--cells", "10", "--seed", seed, "--out", out.to_str().unwrap(),
    ])
}

#[test]
fn simulate_writes_dataset_and_truth() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let o = simulate(a.path(), "1");
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(simulate(b.path(), "2").status.success());
    let rep = a.path().join("rep_0");
    assert_eq!(listing(&rep), vec!["cells.tsv", "features.tsv", "matrix.mtx", "pheno.tsv", "truth.tsv"]);
    assert_eq!(listing(a.path()), vec!["config.json", "rep_0"]);

    let truth = fs::read_to_string(rep.join("truth.tsv")).unwrap();
    let count = |p: &str| truth.lines().filter(|l| l.split('\t').nth(1) == Some(p)).count();
    assert_eq!((count("M"), count("F")), (8, 8));

    let features = fs::read_to_string(rep.join("features.tsv")).unwrap().lines().count();
    assert!(features <= 200 && features > 150, "{features} expressed genes");
    let cells = fs::read_to_string(rep.join("cells.tsv")).unwrap().lines().count();
    assert_eq!(cells, 1 + 30 * 10);
    let mtx = fs::read_to_string(rep.join("matrix.mtx")).unwrap();
    let dims: Vec<usize> = mtx
        .lines()
        .find(|l| !l.starts_with('%'))
        .unwrap()
        .split_whitespace()
        .map(|v| v.parse().unwrap())
        .collect();
    assert_eq!((dims[0], dims[1]), (features, 300));
    assert_eq!(mtx.lines().filter(|l| !l.starts_with('%')).count(), 1 + dims[2]);

    let other = b.path().join("rep_0");
    for f in ["matrix.mtx", "pheno.tsv"] {
        let (x, y) = (fs::read_to_string(rep.join(f)).unwrap(), fs::read_to_string(other.join(f)).unwrap());
        assert_ne!(x, y, "{f} identical across seeds");
    }
    for f in ["cells.tsv", "pheno.tsv", "truth.tsv"] {
        let head = |d: &Path| fs::read_to_string(d.join(f)).unwrap().lines().next().unwrap().to_string();
        assert_eq!(head(&rep), head(&other));
    }
}

#[test]
fn simulated_dataset_runs_through_analyze() {
    let dir = tempfile::tempdir().unwrap();
    assert!(simulate(dir.path(), "3").status.success());
    let rep = dir.path().join("rep_0");
    let p = |f: &str| rep.join(f).to_str().unwrap().to_string();
    let out = dir.path().join("analysis");
    let o = quasimed(&[
        "analyze",
        "--expr",
        &p("matrix.mtx"),
        "--features",
        &p("features.tsv"),
        "--cells-map",
        &p("cells.tsv"),
        "--pheno",
        &p("pheno.tsv"),
        "--min-cells",
        "10",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
}

#[test]
fn benchmark_writes_one_row_per_config_and_method() {
    let dir = tempfile::tempdir().unwrap();
    let o = quasimed(&[
        "benchmark",
        "--n",
        "30,40",
        "--genes",
        "60",
        "--cells",
        "10",
        "--replicates",
        "1",
        "--seed",
        "4",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let table = fs::read_to_string(dir.path().join("metrics.tsv")).unwrap();
    let lines: Vec<&str> = table.lines().collect();
    assert_eq!(lines[0], METRICS_HEADER);
    assert_eq!(lines.len(), 1 + 2 * 2);
    let keys: Vec<(String, String)> = lines[1..]
        .iter()
        .map(|l| {
            let f: Vec<&str> = l.split('\t').collect();
            (f[0].to_string(), f[2].to_string())
        })
        .collect();
    assert_eq!(
        keys,
        [("30", "quasimed"), ("30", "naive"), ("40", "quasimed"), ("40", "naive")]
            .map(|(a, b)| (a.to_string(), b.to_string()))
    );
    assert_eq!(String::from_utf8(o.stdout).unwrap(), table);
    // No temporary files survive the atomic writes.
    assert_eq!(listing(dir.path()), vec!["metrics.json", "metrics.tsv"]);
}

#[test]
fn smoke_benchmark_finishes_within_a_minute() {
    let dir = tempfile::tempdir().unwrap();
    let start = Instant::now();
    let o = quasimed(&[
        "benchmark",
        "--n",
        "100",
        "--genes",
        "1000",
        "--replicates",
        "1",
        "--seed",
        "8",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    let secs = start.elapsed().as_secs_f64();
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(secs < 60.0, "took {secs:.1}s");
}
