//! End-to-end runs of the `metaratio` binary.

use std::path::Path;
use std::process::{Command, Output};

fn metaratio(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_metaratio"))
        .args(args)
        .env_remove("METARATIO_THREADS")
        .output()
        .expect("binary runs")
}

fn example_data() -> String {
    concat!(env!("CARGO_MANIFEST_DIR"), "/data/example_studies.csv").to_string()
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.to_string_lossy().into_owned()
}

/// `(quantity, method) -> (lo, hi)` for interval rows of an analysis CSV.
fn intervals(path: &Path) -> Vec<(String, f64, f64)> {
    let mut rd = csv::Reader::from_path(path).unwrap();
    rd.records()
        .map(Result::unwrap)
        .filter(|r| r[0].ends_with("interval"))
        .map(|r| {
            (
                format!("{}:{}", &r[0], &r[1]),
                r[4].parse().unwrap(),
                r[5].parse().unwrap(),
            )
        })
        .collect()
}

#[test]
fn analyze_reports_every_method() {
    let out = metaratio(&["analyze", &example_data()]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let text = String::from_utf8(out.stdout).unwrap();
    for label in [
        "DL", "REML", "MP", "J", "QP", "BJ", "PL", "SSW", "IV-DL", "IV-REML", "IV-MP", "IV-J",
        "HKSJ", "HKSJ-MP", "SSW-MP",
    ] {
        assert!(
            text.lines()
                .any(|l| l.trim_start().starts_with(&format!("{label} "))),
            "missing {label}"
        );
    }
}

#[test]
fn homogeneous_studies_pool_to_the_common_mean() {
    let dir = tempfile::tempdir().unwrap();
    let input = write(
        dir.path(),
        "h.csv",
        "study_id,n_t,mean_t,sd_t,n_c,mean_c,sd_c\na,10,2.0,0.5,10,1.0,0.5\nb,20,2.0,0.5,20,1.0,0.5\nc,15,2.0,0.5,15,1.0,0.5\n",
    );
    let csv_out = dir.path().join("out.csv");
    let out = metaratio(&["analyze", &input, "--out", csv_out.to_str().unwrap()]);
    assert!(out.status.success());
    let mut rd = csv::Reader::from_path(&csv_out).unwrap();
    for r in rd.records().map(Result::unwrap) {
        match &r[0] {
            "tau2" => assert_eq!(r[2].parse::<f64>().unwrap(), 0.0),
            "pooled" => assert!((r[2].parse::<f64>().unwrap() - 2f64.ln()).abs() < 1e-12),
            _ => {}
        }
    }
}

#[test]
fn negative_mean_names_the_study() {
    let dir = tempfile::tempdir().unwrap();
    let input = write(
        dir.path(),
        "bad.csv",
        "study_id,n_t,mean_t,sd_t,n_c,mean_c,sd_c\nok,10,2.0,0.5,10,1.0,0.5\nwillow,10,2.0,0.5,10,-1.0,0.5\n",
    );
    let out = metaratio(&["analyze", &input]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("willow"));
}

#[test]
fn parse_errors_carry_the_line_number() {
    let dir = tempfile::tempdir().unwrap();
    let input = write(
        dir.path(),
        "bad.csv",
        "study_id,n_t,mean_t,sd_t,n_c,mean_c,sd_c\nok,10,2.0,0.5,10,1.0,0.5\nbad,ten,2.0,0.5,10,1.0,0.5\n",
    );
    let out = metaratio(&["analyze", &input]);
    assert!(!out.status.success());
    assert!(
        String::from_utf8_lossy(&out.stderr).contains("line 3"),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
}

#[test]
fn lower_level_nests_every_interval() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("95.csv"), dir.path().join("90.csv"));
    assert!(
        metaratio(&["analyze", &example_data(), "--out", a.to_str().unwrap()])
            .status
            .success()
    );
    assert!(metaratio(&[
        "analyze",
        &example_data(),
        "--level",
        "0.9",
        "--out",
        b.to_str().unwrap()
    ])
    .status
    .success());
    let (wide, narrow) = (intervals(&a), intervals(&b));
    assert_eq!(wide.len(), 11);
    for ((m, lo95, hi95), (m2, lo90, hi90)) in wide.iter().zip(&narrow) {
        assert_eq!(m, m2);
        assert!(
            lo90 >= lo95 && hi90 <= hi95,
            "{m}: [{lo90}, {hi90}] vs [{lo95}, {hi95}]"
        );
        // τ² intervals may share a zero lower bound; effect intervals narrow strictly
        if m.starts_with("interval") {
            assert!(hi90 - lo90 < hi95 - lo95);
        }
    }
}

const SMALL_GRID: &str =
    "lambda = [0.0]\ntau2 = [0.0, 0.5]\nk = [5]\nn = [10]\nreps = 40\nseed = 3\n";

#[test]
fn simulate_is_deterministic_across_thread_counts() {
    let dir = tempfile::tempdir().unwrap();
    let config = write(dir.path(), "grid.toml", SMALL_GRID);
    let (a, b) = (dir.path().join("a.csv"), dir.path().join("b.csv"));
    let out = metaratio(&[
        "simulate",
        &config,
        "--threads",
        "1",
        "--out",
        a.to_str().unwrap(),
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    // environment override
    let out = Command::new(env!("CARGO_BIN_EXE_metaratio"))
        .args(["simulate", &config, "--out", b.to_str().unwrap()])
        .env("METARATIO_THREADS", "8")
        .output()
        .unwrap();
    assert!(String::from_utf8_lossy(&out.stderr).contains("on 8 threads"));
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());

    // flags override the config
    let c = dir.path().join("c.csv");
    assert!(metaratio(&[
        "simulate",
        &config,
        "--seed",
        "4",
        "--reps",
        "20",
        "--out",
        c.to_str().unwrap()
    ])
    .status
    .success());
    let text = std::fs::read_to_string(&c).unwrap();
    assert!(text
        .lines()
        .skip(1)
        .all(|l| l.split(',').nth(9) == Some("20")));
}

#[test]
fn simulate_rejects_bad_input() {
    let out = metaratio(&["simulate", "/nonexistent/grid.toml"]);
    assert!(!out.status.success());
    let out = metaratio(&["simulate"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("Usage"));
    let dir = tempfile::tempdir().unwrap();
    let config = write(dir.path(), "grid.toml", "lambda = [0.0]\nflavour = 3\n");
    assert!(!metaratio(&["simulate", &config]).status.success());
}

#[test]
fn plot_writes_one_figure_per_lambda_and_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let config = write(
        dir.path(),
        "grid.toml",
        "lambda = [0.0, 1.0]\ntau2 = [0.0, 0.5]\nk = [5, 10]\nn = [10, 40]\nreps = 5\n",
    );
    let results = dir.path().join("r.csv");
    assert!(
        metaratio(&["simulate", &config, "--out", results.to_str().unwrap()])
            .status
            .success()
    );
    let figs = dir.path().join("figs");
    let out = metaratio(&[
        "plot",
        results.to_str().unwrap(),
        "--metric",
        "coverage_tau2",
        "--out-dir",
        figs.to_str().unwrap(),
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let mut names: Vec<String> = std::fs::read_dir(&figs)
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .collect();
    names.sort();
    assert_eq!(
        names,
        [
            "coverage_tau2_lambda0_corrected.svg",
            "coverage_tau2_lambda0_usual.svg",
            "coverage_tau2_lambda1_corrected.svg",
            "coverage_tau2_lambda1_usual.svg"
        ]
    );
    let svg = std::fs::read_to_string(figs.join("coverage_tau2_lambda0_usual.svg")).unwrap();
    assert!(svg.starts_with("<svg") || svg.starts_with("<?xml"));

    let out = metaratio(&[
        "plot",
        results.to_str().unwrap(),
        "--metric",
        "bias_tau2",
        "--lambda",
        "1",
        "--out-dir",
        figs.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    assert_eq!(String::from_utf8(out.stdout).unwrap().lines().count(), 2);

    let out = metaratio(&[
        "plot",
        results.to_str().unwrap(),
        "--metric",
        "power",
        "--out-dir",
        figs.to_str().unwrap(),
    ]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("coverage_lambda"));
}
