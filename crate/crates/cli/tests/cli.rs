use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

const BIN: &str = env!("CARGO_BIN_EXE_rds-sbm");

const SMALL_CONFIG: &str = "\
# small two-class design
Q = 2
alpha = 0.6666666666666666
pi = 0.7, 0.4, 0.8
n = 30
replicates = 3
seed = 11
methods = all
saem_iterations = 20
proposal_std = 0.05
dsub_max_k = 3
";

fn run(args: &[&str]) -> Output {
    Command::new(BIN).args(args).output().expect("binary runs")
}

fn path(dir: &TempDir, name: &str) -> PathBuf {
    dir.path().join(name)
}

fn arg(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn setup() -> (TempDir, PathBuf) {
    let dir = TempDir::new().unwrap();
    let cfg = path(&dir, "small.cfg");
    fs::write(&cfg, SMALL_CONFIG).unwrap();
    (dir, cfg)
}

#[test]
fn simulate_is_deterministic() {
    let (dir, cfg) = setup();
    let (a, b) = (path(&dir, "a.json"), path(&dir, "b.json"));
    for out in [&a, &b] {
        let o = run(&["simulate", "--config", arg(&cfg), "--out", arg(out)]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
    let c = path(&dir, "c.json");
    run(&["simulate", "--config", arg(&cfg), "--out", arg(&c), "--seed", "12"]);
    assert_ne!(fs::read(&a).unwrap(), fs::read(&c).unwrap());
    assert!(fs::read_to_string(&a).unwrap().contains("\"n\": 30"));
}

#[test]
fn estimate_writes_one_aligned_row() {
    let (dir, cfg) = setup();
    let sample = path(&dir, "s.json");
    run(&["simulate", "--config", arg(&cfg), "--out", arg(&sample)]);
    let out = path(&dir, "e.csv");
    let o = run(&[
        "estimate", "--method", "mle-complete", "--sample", arg(&sample), "--truth", arg(&cfg), "--out", arg(&out),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = fs::read_to_string(&out).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 2);
    assert!(lines[0].starts_with("method,Q,alpha_1,alpha_2,pi_11,pi_12,pi_22"));
    assert!(lines[1].starts_with("mle-complete,2,"));
}

#[test]
fn algebraic_estimate_runs_without_labels() {
    let (dir, cfg) = setup();
    let sample = path(&dir, "s.json");
    run(&["simulate", "--config", arg(&cfg), "--out", arg(&sample)]);
    let first = run(&["estimate", "--method", "debias-algebraic", "--sample", arg(&sample), "--seed", "3"]);
    let second = run(&["estimate", "--method", "debias-algebraic", "--sample", arg(&sample), "--seed", "3"]);
    assert!(first.status.success(), "{}", String::from_utf8_lossy(&first.stderr));
    assert_eq!(first.stdout, second.stdout);
    let text = String::from_utf8(first.stdout).unwrap();
    let row = text.lines().nth(1).unwrap();
    assert!(row.starts_with("debias-algebraic,2,"));
    assert!(row.contains("lambda_1="));
}

#[test]
fn mc_writes_summary_and_replicates() {
    let (dir, cfg) = setup();
    let (out, reps, hist) = (path(&dir, "mc.csv"), path(&dir, "reps.csv"), path(&dir, "hist.csv"));
    let o = run(&[
        "mc", "--config", arg(&cfg), "--out", arg(&out), "--replicates-out", arg(&reps), "--hist-out", arg(&hist),
        "--jobs", "2",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let summary = fs::read_to_string(&out).unwrap();
    let mut lines = summary.lines();
    assert_eq!(lines.next(), Some("method,param,mean,bias,mse,failures"));
    assert_eq!(lines.count(), 6 * 5);
    assert!(summary.contains("debias-algebraic,alpha_1,"));
    assert!(fs::read_to_string(&reps).unwrap().lines().count() > 1);
    assert!(fs::read_to_string(&hist).unwrap().lines().count() > 1);

    let again = path(&dir, "mc2.csv");
    run(&["mc", "--config", arg(&cfg), "--out", arg(&again), "--jobs", "1"]);
    assert_eq!(summary, fs::read_to_string(&again).unwrap());
}

#[test]
fn dsub_reports_both_distances() {
    let (dir, cfg) = setup();
    let sample = path(&dir, "s.json");
    run(&["simulate", "--config", arg(&cfg), "--out", arg(&sample)]);
    let o = run(&["dsub", "--sample", arg(&sample), "--config", arg(&cfg)]);
    assert!(o.status.success());
    let text = String::from_utf8(o.stdout).unwrap();
    assert!(text.starts_with("biased-truth,"));
    assert!(text.contains("\nfitted,"));
}

#[test]
fn unknown_method_exits_with_one() {
    let (dir, cfg) = setup();
    let sample = path(&dir, "s.json");
    run(&["simulate", "--config", arg(&cfg), "--out", arg(&sample)]);
    let o = run(&["estimate", "--method", "em", "--sample", arg(&sample)]);
    assert_eq!(o.status.code(), Some(1));
    assert_eq!(run(&["frobnicate"]).status.code(), Some(1));
}

#[test]
fn numerical_failure_exits_with_two() {
    let dir = TempDir::new().unwrap();
    let sample = path(&dir, "empty.json");
    fs::write(&sample, r#"{"n": 4, "x": [0.1, 0.2, 0.3, 0.4], "z": [1, 1, 1, 1], "y": [[1, 2], [2, 3], [3, 4]]}"#)
        .unwrap();
    let o = run(&["estimate", "--method", "mle-complete", "--sample", arg(&sample), "--classes", "2"]);
    assert_eq!(o.status.code(), Some(2));
}
