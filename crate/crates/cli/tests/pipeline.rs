use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

const DEFAULT: &str = include_str!("../default.toml");

fn bdris(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_bdris"))
        .args(args)
        .arg("--out")
        .arg(out)
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str], out: &Path) -> String {
    let o = bdris(args, out);
    assert!(o.status.success(), "{args:?} failed: {}", String::from_utf8_lossy(&o.stderr));
    String::from_utf8(o.stdout).unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn write_config(dir: &Path, text: &str) -> String {
    let p = dir.join("run.toml");
    fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_owned()
}

fn small(dir: &Path) -> String {
    write_config(dir, &DEFAULT.replace("n_train = 2000", "n_train = 400").replace("histogram_samples = 10000", "histogram_samples = 500"))
}

fn files(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut v: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().into_string().unwrap(), fs::read(e.path()).unwrap())
        })
        .collect();
    v.sort();
    v
}

#[test]
fn verify_default_config_passes() {
    let tmp = tempfile::tempdir().unwrap();
    let stdout = ok(&["verify"], tmp.path());
    assert!(stdout.contains("PASS"));
    assert!(!stdout.contains("FAIL"), "{stdout}");
}

#[test]
fn stages_are_deterministic() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = small(tmp.path());
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    for out in [&a, &b] {
        ok(&["gen-env", "--config", &cfg], out);
        ok(&["simulate", "--config", &cfg], out);
    }
    assert_eq!(files(&a), files(&b));

    ok(&["estimate", "--config", &cfg], &a);
    let first = files(&a);
    ok(&["estimate", "--config", &cfg], &a);
    assert_eq!(files(&a), first);

    ok(&["gen-env", "--config", &cfg, "--seed", "7"], &b);
    ok(&["simulate", "--config", &cfg, "--seed", "7"], &b);
    assert_ne!(fs::read(a.join("train.csv")).unwrap(), fs::read(b.join("train.csv")).unwrap());
}

#[test]
fn full_pipeline_predicts_ground_truth_rssi() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    for stage in ["gen-env", "simulate", "estimate", "optimize"] {
        ok(&[stage], &out);
    }
    let report: Value = serde_json::from_str(&fs::read_to_string(out.join("fit_report.json")).unwrap()).unwrap();
    assert!(report["heldout_nmse_db"].as_f64().unwrap() <= -40.0);

    let opt: Value = serde_json::from_str(&fs::read_to_string(out.join("optimization.json")).unwrap()).unwrap();
    let (pred, truth) = (opt["predicted_rssi"].as_f64().unwrap(), opt["ground_truth_rssi"].as_f64().unwrap());
    assert!((pred - truth).abs() <= 1e-3 * truth, "{pred} vs {truth}");
    assert_eq!(opt["reaches_exhaustive_optimum"], Value::Bool(true));
    assert_eq!(opt["exhaustive"]["evaluations"], 512);

    let heldout = fs::read_to_string(out.join("heldout_predictions.csv")).unwrap();
    assert_eq!(heldout.lines().count(), 101);
    let hist = fs::read_to_string(out.join("rssi_histogram.csv")).unwrap();
    let rows: Vec<Vec<f64>> = hist
        .lines()
        .skip(1)
        .map(|l| l.split(',').map(|x| x.parse().unwrap()).collect())
        .collect();
    assert_eq!(rows.len(), 60);
    let mass: f64 = rows.iter().map(|r| r[2] * (r[1] - r[0])).sum();
    assert!((mass - 1.0).abs() < 1e-9);

    let manifest: Value = serde_json::from_str(&fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["parameters"], 132);
}

#[test]
fn config_errors_exit_2() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    let bad = write_config(tmp.path(), &DEFAULT.replace("n_s = 6", "n_s = 4"));
    assert_eq!(code(&bdris(&["simulate", "--config", &bad], &out)), 2);
    let missing = tmp.path().join("nope.toml");
    assert_eq!(code(&bdris(&["verify", "--config", missing.to_str().unwrap()], &out)), 2);
    // a later stage without its inputs
    assert_eq!(code(&bdris(&["estimate"], &out)), 2);
    assert_eq!(code(&bdris(&["frobnicate"], &out)), 2);
}

#[test]
fn divergence_exits_3() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    let text = DEFAULT
        .replace("n_train = 2000", "n_train = 50")
        .replace("seed = 1\n", "seed = 1\noptimizer = \"adam\"\nstep = 1e300\nrestarts = 1\n");
    let cfg = write_config(tmp.path(), &text);
    ok(&["gen-env", "--config", &cfg], &out);
    ok(&["simulate", "--config", &cfg], &out);
    assert_eq!(code(&bdris(&["estimate", "--config", &cfg], &out)), 3);
}

#[test]
fn failed_checks_exit_1() {
    let tmp = tempfile::tempdir().unwrap();
    // an active (gain) static circuit: one element port, one load port
    fs::write(
        tmp.path().join("gain.smatrix"),
        "smatrix v1 n=2 z0=50\n1.5e0+0e0j 0e0+0e0j\n0e0+0e0j 0.5e0+0e0j\n",
    )
    .unwrap();
    let text = DEFAULT
        .replace("n_s = 6", "n_s = 7")
        .replace("{ kind = \"pi\" }]", "{ kind = \"pi\" }, { kind = \"file\", path = \"gain.smatrix\", n_s = 1, n_c = 1 }]");
    let cfg = write_config(tmp.path(), &text);
    let o = bdris(&["verify", "--config", &cfg], &tmp.path().join("out"));
    assert_eq!(code(&o), 1, "{}", String::from_utf8_lossy(&o.stdout));
    assert!(String::from_utf8_lossy(&o.stdout).contains("FAIL"));
}
