use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn run(dir: &Path, args: &[&str], config: Option<&str>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_dirac-spectral"));
    cmd.args(args).arg("--out").arg(dir);
    if let Some(src) = config {
        let path = dir.join("run.toml");
        fs::write(&path, src).unwrap();
        cmd.arg("--config").arg(path);
    }
    cmd.output().unwrap()
}

fn sidecar(dir: &Path, name: &str) -> Value {
    serde_json::from_str(&fs::read_to_string(dir.join(format!("{name}.json"))).unwrap()).unwrap()
}

#[test]
fn classify_dirichlet() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(dir.path(), &["classify", "--preset", "dirichlet"], None);
    assert_eq!(out.status.code(), Some(0));
    let v = sidecar(dir.path(), "classify");
    assert_eq!(v["command"], "classify");
    assert_eq!(v["result"]["kind"], "StronglyRegular");
    let csv = fs::read_to_string(dir.path().join("classify.csv")).unwrap();
    let mut lines = csv.lines();
    assert!(lines.next().unwrap().starts_with("# dirac-spectral"));
    assert_eq!(lines.next().unwrap(), "kind,w1_re,w1_im,w2_re,w2_im");
    assert!(lines.next().unwrap().starts_with("StronglyRegular,"));
}

#[test]
fn spectrum0_periodic_double() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = "[boundary]\npreset = \"periodic\"\n[command]\nn_range = [-2, 2]\n";
    let out = run(dir.path(), &["spectrum0"], Some(cfg));
    assert_eq!(out.status.code(), Some(0));
    let csv = fs::read_to_string(dir.path().join("spectrum0.csv")).unwrap();
    let rows: Vec<Vec<String>> = csv.lines().skip(2).map(|l| l.split(',').map(str::to_string).collect()).collect();
    assert_eq!(rows.len(), 5);
    for r in rows {
        let n: i64 = r[0].parse().unwrap();
        let re: f64 = r[1].parse().unwrap();
        let im: f64 = r[2].parse().unwrap();
        assert!((re - 2.0 * n as f64).abs() < 1e-12 && im.abs() < 1e-12);
        assert_eq!(r[3], "2");
    }
}

#[test]
fn malformed_matrix_exits_with_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = "[boundary]\nmatrix = [[1, 0, 0], [0, 0, 1, 0]]\n";
    let out = run(dir.path(), &["classify"], Some(cfg));
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("boundary.matrix"));
    assert!(!dir.path().join("classify.json").exists());
}

#[test]
fn unknown_field_and_bad_usage() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(dir.path(), &["classify"], Some("[solver]\ncelss = 10\n"));
    assert_eq!(out.status.code(), Some(2));
    let out = run(dir.path(), &["no-such-command"], None);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn spectrum_is_deterministic() {
    let cfg = "[potential]\nq = [\"0.3*cos(x)\", \"0.1\", \"0.2*sin(x)\", \"-0.3*cos(x)\"]\n\
               [command]\nn_range = [-3, 3]\n";
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    assert_eq!(run(a.path(), &["spectrum"], Some(cfg)).status.code(), Some(0));
    assert_eq!(run(b.path(), &["spectrum", "--threads", "1"], Some(cfg)).status.code(), Some(0));
    for name in ["spectrum.csv", "spectrum.json"] {
        let x = fs::read(a.path().join(name)).unwrap();
        let y = fs::read(b.path().join(name)).unwrap();
        let strip = |s: &[u8]| String::from_utf8_lossy(s).replace(a.path().to_str().unwrap(), "").replace(b.path().to_str().unwrap(), "");
        assert_eq!(strip(&x), strip(&y), "{name} differs");
    }
    let v = sidecar(a.path(), "spectrum");
    assert_eq!(v["anomalies"].as_array().unwrap().len(), 0);
}

#[test]
fn gauge_and_green0_run() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = "[potential]\nq = [\"0.2+0.1*cos(x)\", \"0\", \"0\", \"0.1\"]\n[command]\nn_range = [-2, 2]\n";
    assert_eq!(run(dir.path(), &["gauge"], Some(cfg)).status.code(), Some(0));
    let v = sidecar(dir.path(), "gauge");
    assert!(v["result"].is_object());
    assert_eq!(run(dir.path(), &["green0"], Some(cfg)).status.code(), Some(0));
    assert!(dir.path().join("green0.csv").exists());
}
