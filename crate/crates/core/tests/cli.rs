use std::path::Path;
use std::process::{Command, Output};

const DOC: &str = "\
[gains]
s11 = 1.0
s22 = 1.0
s12 = 0.03
s21 = 0.03
noise_power = 1e-3

[problem]
e1 = [0.0, 1.0, 2.0, 3.0, 3.5]
p1 = 1.0
p2max = [2.0, 4.0]

[simulation]
seed = 4
blocks = 50000

[oracle]
instances = 12
regions = [4, 6]
";

fn crlink(dir: &Path, args: &[&str]) -> Output {
    let cfg = dir.join("run.toml");
    if !cfg.exists() {
        std::fs::write(&cfg, DOC).unwrap();
    }
    Command::new(env!("CARGO_BIN_EXE_crlink"))
        .args(args)
        .arg("--config")
        .arg(&cfg)
        .arg("--output")
        .arg(dir.join("out"))
        .output()
        .unwrap()
}

fn read_csv(path: &Path) -> Vec<Vec<String>> {
    let mut r = csv::Reader::from_path(path).unwrap();
    r.records().map(|rec| rec.unwrap().iter().map(str::to_string).collect()).collect()
}

#[test]
fn every_command_succeeds_and_is_byte_stable() {
    let dir = tempfile::tempdir().unwrap();
    for (cmd, files) in [
        ("optimize", vec!["policy.csv", "summary.csv"]),
        ("sweep", vec!["sweep.csv"]),
        ("simulate", vec!["simulation.csv", "region_frequencies.csv"]),
        ("compare-oracle", vec!["oracle.csv"]),
        ("regions-export", vec!["regions.csv"]),
    ] {
        let first = crlink(dir.path(), &[cmd]);
        assert_eq!(first.status.code(), Some(0), "{cmd}: {}", String::from_utf8_lossy(&first.stderr));
        let bytes: Vec<Vec<u8>> = files.iter().map(|f| std::fs::read(dir.path().join("out").join(f)).unwrap()).collect();
        let again = crlink(dir.path(), &[cmd]);
        assert_eq!(again.status.code(), Some(0));
        for (f, b) in files.iter().zip(&bytes) {
            assert_eq!(&std::fs::read(dir.path().join("out").join(f)).unwrap(), b, "{cmd}: {f} changed");
        }
    }
}

#[test]
fn infeasible_problem_exits_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let out = crlink(dir.path(), &["optimize", "--set", "problem.e1=4.5"]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.starts_with("status=infeasible command=optimize"), "{err}");
    assert_eq!(err.lines().count(), 1);
    let summary = read_csv(&dir.path().join("out/summary.csv"));
    assert_eq!(summary[0].last().unwrap(), "false");
}

#[test]
fn configuration_errors_exit_with_one_and_name_the_key() {
    let dir = tempfile::tempdir().unwrap();
    let out = crlink(dir.path(), &["optimize", "--set", "problem.b2=0"]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("kind=config key=problem.b2 line="), "{err}");

    let out = crlink(dir.path(), &["sweep", "--set", "grid.colour=3"]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("kind=config") && err.contains("colour"), "{err}");

    let missing = Command::new(env!("CARGO_BIN_EXE_crlink"))
        .args(["optimize", "--config", "/nonexistent/run.toml"])
        .output()
        .unwrap();
    assert_eq!(missing.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&missing.stderr).contains("kind=io"));
}

#[test]
fn sweep_rows_are_ordered_and_monotone_in_e1() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(crlink(dir.path(), &["sweep"]).status.code(), Some(0));
    let rows = read_csv(&dir.path().join("out/sweep.csv"));
    assert_eq!(rows.len(), 2 * 5 * 4);
    for p2max in ["2.00000000000e0", "4.00000000000e0"] {
        let k2: Vec<f64> = rows
            .iter()
            .filter(|r| r[1] == p2max && r[4] == "variable-power" && r[9] == "true")
            .map(|r| r[5].parse().unwrap())
            .collect();
        assert!(k2.len() >= 4);
        assert!(k2.windows(2).all(|w| w[1] <= w[0] + 1e-9), "{k2:?}");
    }
}

#[test]
fn oracle_gaps_are_nonnegative() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(crlink(dir.path(), &["compare-oracle"]).status.code(), Some(0));
    let rows = read_csv(&dir.path().join("out/oracle.csv"));
    assert_eq!(rows.len(), 12);
    for r in rows.iter().filter(|r| !r[6].is_empty()) {
        let gap: f64 = r[6].parse().unwrap();
        assert!(gap >= -1e-9, "{r:?}");
    }
}

#[test]
fn region_export_masses_sum_to_one() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(crlink(dir.path(), &["regions-export"]).status.code(), Some(0));
    let rows = read_csv(&dir.path().join("out/regions.csv"));
    assert_eq!(rows.len(), 300);
    let total: f64 = rows.iter().map(|r| r[5].parse::<f64>().unwrap()).sum();
    assert!((total - 1.0).abs() < 1e-8);
    assert_eq!(rows.iter().filter(|r| r[7] == "true").count(), 1);
}
