use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;
use sha2::{Digest, Sha256};

fn lgmm(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lgmm"))
        .args(args)
        .env_remove("LGMM_SEED")
        .output()
        .unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn manifest(dir: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(dir.join("manifest.json")).unwrap()).unwrap()
}

#[test]
fn simulate_writes_one_row_per_path() {
    let d = tempfile::tempdir().unwrap();
    let out = d.path().to_str().unwrap();
    let o = lgmm(&[
        "simulate",
        "--manifold",
        "s3",
        "--scheme",
        "exp",
        "--paths",
        "1000",
        "--t",
        "0.5",
        "--dt",
        "0.001",
        "--seed",
        "7",
        "--out",
        out,
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let csv = fs::read_to_string(d.path().join("endpoints.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "path,a_re,a_im,b_re,b_im");
    assert_eq!(lines.len(), 1001);
    for l in &lines[1..] {
        let v: Vec<f64> = l.split(',').skip(1).map(|x| x.parse().unwrap()).collect();
        assert!((v.iter().map(|x| x * x).sum::<f64>() - 1.0).abs() < 1e-12);
    }
}

#[test]
fn sde_rows_stay_in_the_region_and_reruns_are_identical() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    for d in [&a, &b] {
        let o = lgmm(&[
            "sde",
            "--system",
            "h3-wc",
            "--paths",
            "100",
            "--t",
            "0.25",
            "--dt",
            "0.001",
            "--seed",
            "1",
            "--out",
            d.path().to_str().unwrap(),
        ]);
        assert_eq!(code(&o), 0);
    }
    let csv = fs::read(a.path().join("endpoints.csv")).unwrap();
    assert_eq!(csv, fs::read(b.path().join("endpoints.csv")).unwrap());
    let text = String::from_utf8(csv.clone()).unwrap();
    assert!(text.starts_with("path,w,c\n") && !text.contains('\r'));
    for l in text.lines().skip(1) {
        let w: f64 = l.split(',').nth(1).unwrap().parse().unwrap();
        assert!(w >= 1.0);
    }
    let m = manifest(a.path());
    let entry = &m["outputs"][0];
    assert_eq!(entry["file"], "endpoints.csv");
    assert_eq!(
        entry["sha256"].as_str().unwrap(),
        format!("{:x}", Sha256::digest(&csv))
    );
}

#[test]
fn seed_comes_from_the_environment() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let args = |d: &Path| {
        vec![
            "sde".to_string(),
            "--system".into(),
            "s3-x".into(),
            "--paths".into(),
            "20".into(),
            "--t".into(),
            "0.1".into(),
            "--out".into(),
            d.to_str().unwrap().into(),
        ]
    };
    let o = Command::new(env!("CARGO_BIN_EXE_lgmm"))
        .args(args(a.path()))
        .env("LGMM_SEED", "5")
        .output()
        .unwrap();
    assert_eq!(code(&o), 0);
    let mut flag = args(b.path());
    flag.extend(["--seed".into(), "5".into()]);
    assert_eq!(
        code(&lgmm(&flag.iter().map(String::as_str).collect::<Vec<_>>())),
        0
    );
    assert_eq!(
        fs::read(a.path().join("endpoints.csv")).unwrap(),
        fs::read(b.path().join("endpoints.csv")).unwrap()
    );
    assert_eq!(manifest(a.path())["config"]["seed"], 5);
}

#[test]
fn config_file_is_overridden_by_flags() {
    let d = tempfile::tempdir().unwrap();
    let cfg = d.path().join("run.cfg");
    fs::write(
        &cfg,
        "system = s3-xy\npaths = 50\nt = 0.2\nfull_paths = true\n",
    )
    .unwrap();
    let out = d.path().join("out");
    let o = lgmm(&[
        "--config",
        cfg.to_str().unwrap(),
        "sde",
        "--paths",
        "7",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let m = manifest(&out);
    assert_eq!(m["config"]["paths"], 7);
    assert_eq!(m["config"]["system"], "s3-xy");
    assert_eq!(
        fs::read_to_string(out.join("endpoints.csv"))
            .unwrap()
            .lines()
            .count(),
        8
    );
    assert!(out.join("paths.csv").exists());
}

#[test]
fn usage_errors_exit_with_two() {
    assert_eq!(
        code(&lgmm(&[
            "simulate",
            "--manifold",
            "h3",
            "--scheme",
            "ito",
            "--paths",
            "3",
            "--t",
            "1"
        ])),
        2
    );
    assert_eq!(
        code(&lgmm(&[
            "simulate",
            "--manifold",
            "x4",
            "--paths",
            "3",
            "--t",
            "1"
        ])),
        2
    );
    assert_eq!(
        code(&lgmm(&[
            "sde", "--system", "s3-x", "--paths", "3", "--t", "1", "--dt", "0.3", "--steps", "3"
        ])),
        2
    );
    let d = tempfile::tempdir().unwrap();
    let o = lgmm(&[
        "fpsolve",
        "--equation",
        "fp2-s3",
        "--nodes",
        "41",
        "--t",
        "0.1",
        "--dt",
        "1",
        "--out",
        d.path().to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("dt = 1e0 >"));
}

#[test]
fn fpsolve_reports_leakage_and_zero_horizon() {
    let d = tempfile::tempdir().unwrap();
    let o = lgmm(&[
        "fpsolve",
        "--equation",
        "fp1-h3",
        "--nodes",
        "101",
        "--lambda-max",
        "0.8",
        "--t",
        "1",
        "--out",
        d.path().to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 4);
    assert!(String::from_utf8_lossy(&o.stdout).contains("leakage"));
    assert!(d.path().join("density.csv").exists());

    let a = d.path().join("zero");
    assert_eq!(
        code(&lgmm(&[
            "fpsolve",
            "--equation",
            "fp2-s3",
            "--nodes",
            "31",
            "--init",
            "uniform",
            "--t",
            "0",
            "--out",
            a.to_str().unwrap()
        ])),
        0
    );
    let text = fs::read_to_string(a.join("density.csv")).unwrap();
    assert!(text.starts_with("x,y,p\n"));
    let g =
        lgmm::fokker_planck::DensityGrid::uniform(lgmm::fokker_planck::GridDomain::S3Disc, 31, 31)
            .unwrap();
    assert_eq!(text, lgmm::csv::grid_csv(&g));
}

#[test]
fn stationary_solve_matches_the_semicircle() {
    let d = tempfile::tempdir().unwrap();
    let o = lgmm(&[
        "fpsolve",
        "--equation",
        "fp1-s3",
        "--nodes",
        "401",
        "--init",
        "uniform",
        "--t",
        "5",
        "--out",
        d.path().to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0);
    let text = fs::read_to_string(d.path().join("density.csv")).unwrap();
    let rows: Vec<Vec<f64>> = text
        .lines()
        .skip(1)
        .map(|l| l.split(',').map(|x| x.parse().unwrap()).collect())
        .collect();
    let err: Vec<f64> = rows
        .iter()
        .map(|v| (v[1] - 2.0 / std::f64::consts::PI * (1.0 - v[0] * v[0]).sqrt()).abs())
        .collect();
    let h = rows[1][0] - rows[0][0];
    let l1 = h * (err.iter().sum::<f64>() - 0.5 * (err[0] + err[err.len() - 1]));
    assert!(l1 < 0.02, "{l1}");
}

#[test]
fn verify_writes_a_report_and_signals_the_outcome() {
    let d = tempfile::tempdir().unwrap();
    let out = d.path().to_str().unwrap();
    let o = lgmm(&[
        "verify",
        "--check",
        "radial-h3",
        "--paths",
        "2000",
        "--t",
        "0.5",
        "--seed",
        "3",
        "--out",
        out,
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let r: Value =
        serde_json::from_str(&fs::read_to_string(d.path().join("radial-h3.json")).unwrap())
            .unwrap();
    assert_eq!(r["pass"], true);
    assert!(r["p_value"].as_f64().unwrap() > 0.01);

    let o = lgmm(&[
        "verify", "--check", "pitman", "--paths", "50000", "--out", out,
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));

    // a slab too thin for the bins
    let o = lgmm(&[
        "verify",
        "--check",
        "conditional-r3",
        "--paths",
        "200",
        "--half-width",
        "0.001",
        "--out",
        out,
    ]);
    assert_eq!(code(&o), 4);
    assert_eq!(code(&lgmm(&["verify", "--check", "nope"])), 2);
}

#[test]
fn dh_prints_the_measure() {
    let o = lgmm(&[
        "dh",
        "--family",
        "s3_class",
        "--param",
        "1.5707963267948966",
        "--point",
        "0",
    ]);
    assert_eq!(code(&o), 0);
    let v: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["support"][0].as_f64().unwrap(), -1.0);
    assert!((v["density_at_point"].as_f64().unwrap() - 0.5).abs() < 1e-15);
    assert!((v["volume"].as_f64().unwrap() - 4.0 * std::f64::consts::PI).abs() < 1e-12);
    assert_eq!(
        code(&lgmm(&["dh", "--family", "s3_class", "--param", "4"])),
        2
    );
}
