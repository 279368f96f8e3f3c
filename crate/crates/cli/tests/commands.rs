use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tikmeans_cli::report::{RunReport, SCHEMA_VERSION};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_tikmeans"))
}

fn data(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../core/data")
        .join(name)
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("spawn tikmeans")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn parse_report(o: &Output) -> RunReport {
    serde_json::from_slice(&o.stdout).expect("report matches schema")
}

fn simulate_toy(dir: &Path, seed: &str) -> PathBuf {
    let path = dir.join(format!("toy{seed}.csv"));
    let o = run(&["simulate", "--preset", "paper-toy", "--seed", seed, "--output", path.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    path
}

#[test]
fn cluster_is_deterministic_and_schema_valid() {
    let dir = tempfile::tempdir().unwrap();
    let toy = simulate_toy(dir.path(), "1");
    let args = ["cluster", "--input", toy.to_str().unwrap(), "--labels", "label", "--k", "2", "--starts", "20", "--seed", "3", "--no-timing"];
    let a = run(&args);
    let b = run(&args);
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(a.stdout, b.stdout);
    let report = parse_report(&a);
    assert_eq!(report.schema_version, SCHEMA_VERSION);
    assert!(report.timing.is_none());
    assert_eq!(report.config.n, 200);
    assert_eq!(report.config.n_starts, 20);
    assert_eq!(report.model.labels.len(), 200);
    assert_eq!(report.centers.len(), 2);
    assert_eq!(report.evaluation.unwrap().ari, 1.0);
}

#[test]
fn thread_count_does_not_change_the_report() {
    let dir = tempfile::tempdir().unwrap();
    let toy = simulate_toy(dir.path(), "2");
    let base = ["cluster", "--input", toy.to_str().unwrap(), "--k", "2", "--starts", "8", "--no-timing"];
    let one = bin().args(base).args(["--threads", "1"]).output().unwrap();
    let four = bin().args(base).args(["--threads", "4"]).output().unwrap();
    assert_eq!(one.status.code(), Some(0));
    assert_eq!(one.stdout, four.stdout);
}

#[test]
fn timing_is_reported_by_default() {
    let dir = tempfile::tempdir().unwrap();
    let toy = simulate_toy(dir.path(), "1");
    let o = run(&["cluster", "--input", toy.to_str().unwrap(), "--k", "2", "--starts", "2"]);
    let t = parse_report(&o).timing.expect("timing present");
    assert!(t.elapsed_ms >= 0.0 && t.threads >= 1);
}

#[test]
fn kmeans_fails_on_the_toy_data() {
    let dir = tempfile::tempdir().unwrap();
    let toy = simulate_toy(dir.path(), "1");
    let o = run(&["cluster", "--input", toy.to_str().unwrap(), "--labels", "label", "--k", "2", "--lambda-mode", "none", "--no-timing"]);
    assert_eq!(o.status.code(), Some(0));
    let r = parse_report(&o);
    assert!(r.model.lambda.is_zero());
    assert!(r.evaluation.unwrap().ari < 0.1);
}

#[test]
fn wine_shared_report() {
    let wine = data("wine.csv");
    let o = run(&["cluster", "--input", wine.to_str().unwrap(), "--labels", "class", "--k", "3", "--lambda-mode", "shared", "--no-timing"]);
    assert_eq!(o.status.code(), Some(0));
    let r = parse_report(&o);
    let ev = r.evaluation.unwrap();
    assert!(ev.ari >= 0.80, "ARI {}", ev.ari);
    assert_eq!(ev.confusion.n(), 178);
    assert_eq!(r.config.label_column.as_deref(), Some("class"));
    assert_eq!(r.config.p, 13);
}

#[test]
fn centers_map_back_to_input_units() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("g.csv");
    let mut body = String::from("a,b\n");
    for i in 0..10 {
        let d = i as f64 * 0.01;
        body.push_str(&format!("{},{}\n", -3.0 + d, 1.0 + d));
        body.push_str(&format!("{},{}\n", 4.0 + d, 9.0 + d));
    }
    std::fs::write(&csv, body).unwrap();
    let o = run(&["cluster", "--input", csv.to_str().unwrap(), "--k", "2", "--shift-positive", "--scale", "rms", "--lambda-mode", "none", "--no-timing"]);
    assert_eq!(o.status.code(), Some(0));
    let r = parse_report(&o);
    assert!(r.config.shift_offsets.is_some() && r.config.scale_factors.is_some());
    let mut centers = r.centers.clone();
    centers.sort_by(|x, y| x[0].total_cmp(&y[0]));
    let want = [[-3.0 + 0.045, 1.0 + 0.045], [4.0 + 0.045, 9.0 + 0.045]];
    for (c, w) in centers.iter().zip(want) {
        for (v, t) in c.iter().zip(w) {
            assert!((v - t).abs() < 1e-9, "{v} vs {t}");
        }
    }
}

#[test]
fn csv_format_lists_every_record() {
    let dir = tempfile::tempdir().unwrap();
    let toy = simulate_toy(dir.path(), "1");
    let o = run(&["cluster", "--input", toy.to_str().unwrap(), "--labels", "label", "--k", "2", "--starts", "5", "--format", "csv"]);
    let text = stdout(&o);
    let lines: Vec<_> = text.lines().collect();
    assert_eq!(lines[0], "row,cluster,reference");
    assert_eq!(lines.len(), 201);
}

#[test]
fn usage_and_data_errors_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    let tiny = dir.path().join("tiny.csv");
    std::fs::write(&tiny, "a\n1\n2\n").unwrap();
    let t = tiny.to_str().unwrap();
    for args in [
        vec!["cluster", "--bogus"],
        vec!["cluster", "--input", t],
        vec!["cluster", "--input", t, "--k", "0"],
        vec!["cluster", "--input", t, "--k", "2"],
        vec!["cluster", "--input", t, "--k", "1", "--lambda-mode", "sideways"],
        vec!["cluster", "--input", t, "--k", "1", "--grid", "0,1..0.5"],
        vec!["cluster", "--input", "/nonexistent.csv", "--k", "1"],
        vec!["select-k", "--input", t, "--kmax", "3", "--k-true-hint", "1"],
        vec!["simulate", "--preset", "nope"],
        vec!["transform", "--input", t],
        vec!["transform", "--input", t, "--lambda", "1,2"],
    ] {
        let o = run(&args);
        assert_eq!(o.status.code(), Some(1), "{args:?}");
        assert!(!o.stderr.is_empty(), "{args:?}");
    }
}

#[test]
fn cycle_or_iteration_cap_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let toy = simulate_toy(dir.path(), "1");
    let o = run(&["cluster", "--input", toy.to_str().unwrap(), "--k", "2", "--starts", "3", "--max-iter", "1", "--warmup-step", "off", "--no-timing"]);
    assert_eq!(o.status.code(), Some(2));
    let r = parse_report(&o);
    assert!(!r.model.converged || r.model.cycle_detected);
}

#[test]
fn simulate_is_seeded() {
    let a = run(&["simulate", "--preset", "paper-toy", "--seed", "1"]);
    let b = run(&["simulate", "--preset", "paper-toy", "--seed", "1"]);
    let c = run(&["simulate", "--preset", "paper-toy", "--seed", "2"]);
    assert_eq!(a.stdout, b.stdout);
    assert_ne!(a.stdout, c.stdout);
    let text = stdout(&a);
    let mut labels: Vec<_> = text.lines().skip(1).map(|l| l.rsplit(',').next().unwrap().to_string()).collect();
    labels.sort();
    labels.dedup();
    assert_eq!(labels, ["1", "2"]);
}

fn skewness(v: &[f64]) -> f64 {
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    let m2 = v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / n;
    let m3 = v.iter().map(|x| (x - m).powi(3)).sum::<f64>() / n;
    m3 / m2.powf(1.5)
}

#[test]
fn untransformed_simulation_is_symmetric() {
    let o = run(&["simulate", "--n-per-cluster", "10000", "--means", "1,-2", "--sd", "1", "--lambda", "0,0", "--seed", "9"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = stdout(&o);
    let rows: Vec<Vec<f64>> = text
        .lines()
        .skip(1)
        .map(|l| l.split(',').take(2).map(|v| v.parse().unwrap()).collect())
        .collect();
    assert_eq!(rows.len(), 10_000);
    for j in 0..2 {
        let col: Vec<f64> = rows.iter().map(|r| r[j]).collect();
        // standard error of the sample skewness is about sqrt(6/n) = 0.0245
        assert!(skewness(&col).abs() < 0.1, "column {j}");
    }
    let skewed = run(&["simulate", "--n-per-cluster", "10000", "--means", "1,-2", "--sd", "1", "--lambda", "1,1", "--seed", "9"]);
    let col: Vec<f64> = stdout(&skewed).lines().skip(1).map(|l| l.split(',').next().unwrap().parse().unwrap()).collect();
    assert!(skewness(&col) > 0.5);
}

#[test]
fn transform_examples_and_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let one = dir.path().join("one.csv");
    std::fs::write(&one, "x\n1.0\n").unwrap();
    let o = run(&["transform", "--input", one.to_str().unwrap(), "--lambda", "1"]);
    let v: f64 = stdout(&o).lines().nth(1).unwrap().parse().unwrap();
    assert!((v - 0.881374).abs() < 5e-7);

    let toy = simulate_toy(dir.path(), "4");
    let fwd = dir.path().join("fwd.csv");
    let back = dir.path().join("back.csv");
    let t = toy.to_str().unwrap();
    assert!(run(&["transform", "--input", t, "--labels", "label", "--lambda", "1.4,0.9", "--output", fwd.to_str().unwrap()]).status.success());
    assert!(run(&["transform", "--input", fwd.to_str().unwrap(), "--labels", "label", "--lambda", "1.4,0.9", "--inverse", "--output", back.to_str().unwrap()]).status.success());
    let read = |p: &Path| -> Vec<Vec<String>> {
        std::fs::read_to_string(p).unwrap().lines().map(|l| l.split(',').map(String::from).collect()).collect()
    };
    let (orig, got) = (read(&toy), read(&back));
    assert_eq!(orig.len(), got.len());
    assert_eq!(orig[0], got[0]);
    for (a, b) in orig.iter().zip(&got).skip(1) {
        assert_eq!(a[2], b[2]);
        for j in 0..2 {
            let (x, y): (f64, f64) = (a[j].parse().unwrap(), b[j].parse().unwrap());
            assert!((x - y).abs() <= 1e-10 * x.abs().max(1.0));
        }
    }

    let ident = run(&["transform", "--input", t, "--labels", "label", "--lambda", "0,0"]);
    assert_eq!(stdout(&ident), std::fs::read_to_string(&toy).unwrap());
}

#[test]
fn transform_from_report() {
    let dir = tempfile::tempdir().unwrap();
    let toy = simulate_toy(dir.path(), "1");
    let t = toy.to_str().unwrap();
    let report = dir.path().join("r.json");
    let o = run(&["cluster", "--input", t, "--labels", "label", "--k", "2", "--lambda-mode", "per-cluster", "--starts", "3", "--warm-starts", "10", "--output", report.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let r: RunReport = serde_json::from_str(&std::fs::read_to_string(&report).unwrap()).unwrap();
    let o = run(&["transform", "--input", t, "--labels", "label", "--from-report", report.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let first: Vec<f64> = stdout(&o).lines().nth(1).unwrap().split(',').take(2).map(|v| v.parse().unwrap()).collect();
    let raw: Vec<f64> = std::fs::read_to_string(&toy).unwrap().lines().nth(1).unwrap().split(',').take(2).map(|v| v.parse().unwrap()).collect();
    let c = r.model.labels[0] - 1;
    for j in 0..2 {
        let want = tikmeans::ihs_forward(raw[j], r.model.lambda.get(c, j)).unwrap();
        assert_eq!(first[j], want);
    }
}

#[test]
fn select_k_on_scaled_wine() {
    let dir = tempfile::tempdir().unwrap();
    let svg = dir.path().join("jump.svg");
    let csv = dir.path().join("jump.csv");
    let wine = data("wine.csv");
    let o = run(&["select-k", "--input", wine.to_str().unwrap(), "--labels", "class", "--scale", "rms", "--k-true-hint", "3", "--svg", svg.to_str().unwrap(), "--csv", csv.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let text = stdout(&o);
    assert!(text.contains("kmax=7"));
    assert!(text.lines().any(|l| l == "selected K: 3"));
    assert!(std::fs::read_to_string(&svg).unwrap().starts_with("<svg"));
    let table = std::fs::read_to_string(&csv).unwrap();
    assert_eq!(table.lines().next(), Some("eta,chosen_k"));
    assert_eq!(table.lines().count(), 401);
}
