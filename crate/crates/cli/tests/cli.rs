use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use disttomo_cli::args::{FitArgs, SimulateArgs};
use disttomo_cli::commands::{self, CSV_HEADER};
use disttomo_cli::plot;
use disttomo_core::analysis::effective_dimension;
use disttomo_core::NodePartition;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_disttomo"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn golden(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("tests/golden")
        .join(name)
}

const SMALL_GHZ: [&str; 18] = [
    "simulate",
    "--n-qubits",
    "3",
    "--partition",
    "3",
    "--partition",
    "2,1",
    "--partition",
    "1,1,1",
    "--ensemble",
    "locally-random-ghz",
    "--lambda",
    "0.05",
    "--num-states",
    "2",
    "--shots",
    "1000,4000",
    "--seed=7",
];

#[test]
fn simulate_matches_golden_file() {
    let out = run(&SMALL_GHZ);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let expected = fs::read_to_string(golden("simulate_small.csv")).unwrap();
    assert_eq!(stdout(&out), expected);
    assert_eq!(expected.lines().next().unwrap(), CSV_HEADER.join(","));
}

#[test]
fn simulate_is_reproducible_across_worker_counts() {
    let one = bin()
        .args(SMALL_GHZ)
        .env("DISTTOMO_WORKERS", "1")
        .output()
        .unwrap();
    let four = bin()
        .args(SMALL_GHZ)
        .env("DISTTOMO_WORKERS", "4")
        .output()
        .unwrap();
    assert!(one.status.success() && four.status.success());
    assert_eq!(one.stdout, four.stdout);
}

#[test]
fn global_design_beats_local_on_two_qubits() {
    let out = run(&[
        "simulate",
        "--n-qubits",
        "2",
        "--partition",
        "2",
        "--partition",
        "1,1",
        "--num-states",
        "5",
        "--shots",
        "1e5",
        "--seed",
        "3",
    ]);
    assert!(out.status.success());
    let text = stdout(&out);
    let rows: Vec<Vec<&str>> = text
        .lines()
        .skip(1)
        .map(|l| l.split(',').collect())
        .collect();
    assert_eq!(rows.len(), 10);
    let mean = |label: &str| {
        let errs: Vec<f64> = rows
            .iter()
            .filter(|r| r[0] == label)
            .map(|r| r[3].parse().unwrap())
            .collect();
        errs.iter().sum::<f64>() / errs.len() as f64
    };
    assert!(mean("2") < mean("1+1"));
    for r in &rows {
        assert_eq!(
            r[4].is_empty(),
            r[0] == "2",
            "negativity only for two-node partitions"
        );
    }
}

#[test]
fn noiseless_ghz_rows_are_pure_state_runs() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("ghz.csv");
    let out = run(&[
        "simulate",
        "--n-qubits",
        "3",
        "--ensemble",
        "noisy-ghz",
        "--lambda",
        "0",
        "--num-states",
        "1",
        "--shots",
        "2000",
        "--output",
        csv.to_str().unwrap(),
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let text = fs::read_to_string(&csv).unwrap();
    let rows: Vec<&str> = text.lines().skip(1).collect();
    assert_eq!(rows.len(), 4);
    for row in rows {
        let f: Vec<&str> = row.split(',').collect();
        assert!(!f[4].is_empty());
        // Pure state: the bound uses rank 1.
        let p: NodePartition = f[0].parse().unwrap();
        let eps2 = 128.0 / 3.0 * 2f64.powi(p.num_nodes() as i32) * effective_dimension(&p) / 2000.0
            * (8.0f64 / 0.01).ln();
        let bound: f64 = f[5].parse().unwrap();
        assert!((bound - eps2.sqrt()).abs() < 1e-12);
    }
}

#[test]
fn desk_scale_limits() {
    let too_many = run(&[
        "simulate",
        "--n-qubits",
        "6",
        "--num-states",
        "1",
        "--shots",
        "100",
    ]);
    assert!(!too_many.status.success());
    assert!(String::from_utf8_lossy(&too_many.stderr).contains("--paper-scale"));
    let too_long = run(&[
        "simulate",
        "--n-qubits",
        "2",
        "--num-states",
        "1",
        "--shots",
        "2e6",
    ]);
    assert!(!too_long.status.success());
    let infeasible = run(&[
        "simulate",
        "--n-qubits",
        "8",
        "--num-states",
        "1",
        "--shots",
        "100",
        "--paper-scale",
    ]);
    assert!(!infeasible.status.success());
    assert!(String::from_utf8_lossy(&infeasible.stderr).contains("memory"));
}

#[test]
fn config_file_with_flag_overrides() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("exp.json");
    fs::write(
        &path,
        r#"{"n_qubits": 2, "partitions": [[1, 1]], "ensemble": "haar", "num_states": 3, "shots": [500], "seed": 9}"#,
    )
    .unwrap();
    let args = SimulateArgs {
        config: Some(path.clone()),
        num_states: Some(2),
        shots: vec![700, 800],
        ..SimulateArgs::default()
    };
    let config = commands::experiment_config(&args).unwrap();
    assert_eq!(config.num_states, 2);
    assert_eq!(config.shots, vec![700, 800]);
    assert_eq!(config.seed, 9);
    assert_eq!(config.partitions, vec![NodePartition::qubits(2).unwrap()]);

    fs::write(
        &path,
        r#"{"n_qubits": 2, "ensemble": "haar", "num_states": 1, "shots": [10], "typo": 1}"#,
    )
    .unwrap();
    assert!(commands::experiment_config(&args).is_err());
    assert!(commands::experiment_config(&SimulateArgs::default()).is_err());
}

fn write_synthetic(path: &Path, shot_values: &[u64]) {
    let mut w = csv::Writer::from_path(path).unwrap();
    w.write_record(CSV_HEADER).unwrap();
    for n in 2..=4 {
        for p in NodePartition::compositions(n) {
            for &shots in shot_values {
                let m = p.num_nodes() as f64;
                let eps2 = 4.0
                    * 2f64.powf(m).powf(0.8)
                    * effective_dimension(&p).powf(0.95)
                    * (p.dim() as f64).ln()
                    / shots as f64;
                w.write_record([
                    p.label(),
                    shots.to_string(),
                    "0".into(),
                    eps2.sqrt().to_string(),
                    String::new(),
                    "1".into(),
                ])
                .unwrap();
            }
        }
    }
    w.flush().unwrap();
}

#[test]
fn fit_recovers_synthetic_exponents() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("synthetic.csv");
    write_synthetic(&path, &[10_000, 100_000, 1_000_000]);
    let out_csv = dir.path().join("fit.csv");
    let args = FitArgs {
        inputs: vec![path.clone()],
        output: Some(out_csv.clone()),
    };
    let mut sink = Vec::new();
    let fit = commands::fit(&args, &mut sink).unwrap();
    assert!((fit.alpha - 4.0).abs() < 1e-8);
    assert!((fit.beta - 0.8).abs() < 1e-8);
    assert!((fit.gamma - 0.95).abs() < 1e-8);
    assert!((fit.delta_exp - 1.0).abs() < 1e-8);
    assert!(fs::read_to_string(out_csv)
        .unwrap()
        .starts_with("coefficient,value,std_error\n"));

    let single = dir.path().join("single.csv");
    write_synthetic(&single, &[10_000]);
    let out = run(&["fit", single.to_str().unwrap()]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("single value"));
}

#[test]
fn bounds_worked_example() {
    let out = run(&[
        "bounds",
        "--partition",
        "1,1",
        "--shots",
        "1000000",
        "--delta",
        "0.01",
        "--epsilon",
        "0.05",
    ]);
    assert!(out.status.success());
    let text = stdout(&out);
    assert!(text.contains("ε ≤ 4.79658"), "{text}");
    assert!(text.contains("N ≥ 920289"), "{text}");
    let rejected = run(&[
        "bounds",
        "--partition",
        "1,1",
        "--shots",
        "100",
        "--epsilon",
        "1.5",
    ]);
    assert!(!rejected.status.success());
    assert!(String::from_utf8_lossy(&rejected.stderr).contains("ε ≤ 1"));
}

#[test]
fn verify_designs_exit_codes() {
    let ok = run(&["verify-designs", "--max-k", "3"]);
    assert!(ok.status.success());
    let text = stdout(&ok);
    for (k, bases) in [(1, 3), (2, 5), (3, 9)] {
        assert!(
            text.lines()
                .any(|l| l.starts_with(&format!("{k},{},{bases},", 1 << k))),
            "{text}"
        );
    }
    assert!(!run(&["verify-designs", "--max-k", "8"]).status.success());
}

#[test]
fn plot_writes_well_formed_svg() {
    let dir = tempfile::tempdir().unwrap();
    let svg_path = dir.path().join("fig.svg");
    let out = run(&[
        "plot",
        golden("simulate_small.csv").to_str().unwrap(),
        "--x",
        "N",
        "--y",
        "trace_error",
        "--group",
        "partition",
        "--title",
        "GHZ <noisy> & rotated",
        "--output",
        svg_path.to_str().unwrap(),
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let svg = fs::read_to_string(&svg_path).unwrap();
    let doc = roxmltree::Document::parse(&svg).expect("well-formed XML");
    let root = doc.root_element();
    assert_eq!(root.tag_name().name(), "svg");
    assert_eq!(root.attribute("version"), Some("1.1"));
    let circles = root
        .descendants()
        .filter(|n| n.has_tag_name("circle"))
        .count();
    // three groups × two N values, plus one legend marker per group
    assert_eq!(circles, 3 * 2 + 3);
}

#[test]
fn plot_derived_columns_and_errors() {
    let series = plot::collect_series(
        &golden("simulate_small.csv"),
        "dimension",
        "trace_error",
        "partition",
    )
    .unwrap();
    assert_eq!(series.len(), 3);
    assert!(series.values().all(|pts| pts.len() == 1 && pts[0].x == 8.0));

    let missing = plot::collect_series(&golden("simulate_small.csv"), "N", "fidelity", "partition");
    assert!(missing.unwrap_err().to_string().contains("fidelity"));

    let dir = tempfile::tempdir().unwrap();
    let empty = dir.path().join("empty.csv");
    fs::write(&empty, format!("{}\n", CSV_HEADER.join(","))).unwrap();
    assert!(plot::collect_series(&empty, "N", "trace_error", "partition").is_err());
}

#[test]
fn session_agrees_with_centralized_sampler() {
    for transport in ["in-process", "stream"] {
        let out = run(&[
            "session",
            "--partition",
            "2,2",
            "--shots",
            "3000",
            "--seed",
            "5",
            "--transport",
            transport,
        ]);
        assert!(out.status.success());
        let text = stdout(&out);
        assert!(text.starts_with("SESSION N=3000 M=2 dims=4,4 seed=5\n"));
        assert!(text.contains("centralized sampler agrees"));
        assert!(text.contains("N=3000 partition=2,2\n"));
    }
}
