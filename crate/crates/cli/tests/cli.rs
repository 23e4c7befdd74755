use std::path::Path;
use std::process::{Command, Output};

fn nsv(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_nsv"))
        .args(args)
        .env_remove("NSV_THREADS")
        .output()
        .expect("spawn nsv")
}

fn text(out: &Output) -> String {
    format!(
        "{}{}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    )
}

fn small_config(dir: &Path, drag: f64) -> String {
    let p = dir.join("small.json");
    let doc = format!(
        r#"{{
  "domain": {{"dimension": 2, "length": 1.0, "cells": 32, "dt": 0.01, "t_end": 1.5, "seed": 3}},
  "fluid": {{"viscosity": 1.0, "velocity": "swirl", "velocity_amplitude": 0.005, "blob_radius": 0.35, "swirl_radius": 0.3}},
  "kinetic": {{"drag": {drag}, "particles": 2000, "mass": 0.1, "spatial_radius": 0.25, "velocity_radius": 0.01}},
  "theory": {{"probe_times": [1.0], "probe_particles": 10}},
  "output": {{"dir": "{}"}}
}}"#,
        dir.join("default-out").display()
    );
    std::fs::write(&p, doc).unwrap();
    p.display().to_string()
}

#[test]
fn run_writes_documented_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path(), 1.0);
    let out = dir.path().join("run");
    let o = nsv(&["run", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", text(&o));
    let series = std::fs::read_to_string(out.join("series.csv")).unwrap();
    assert_eq!(
        series.lines().next().unwrap(),
        "t,E,D,Ecal,sup_nf,sup_jf,sup_ef,R_supp,w1_sur,gradu_l2,gradu_linf,u_linf,div_linf,rho_l32,gradrho_l2,mass_f,mom_x1,mom_x2,mom_x3,B1,B2,B3"
    );
    assert_eq!(series.lines().count(), 152);
    let verdicts = std::fs::read_to_string(out.join("verdicts.csv")).unwrap();
    assert!(verdicts.starts_with("check,claimed_rate,fitted_rate,pass\n"));
    assert!(std::fs::read_to_string(out.join("solver_log.csv"))
        .unwrap()
        .starts_with("step,iters,residual\n"));
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("report.json")).unwrap()).unwrap();
    assert!(report["theory"]["alpha"].as_f64().unwrap() > 0.0);
    assert!(out.join("particles_000150.nsvp").exists());

    // fit on the decayed energy column
    let fit = nsv(&[
        "fit",
        "--series",
        out.join("series.csv").to_str().unwrap(),
        "--column",
        "E",
        "--t0",
        "0.5",
        "--t1",
        "1.5",
    ]);
    assert_eq!(fit.status.code(), Some(0), "{}", text(&fit));
    let rate: f64 = text(&fit)
        .lines()
        .next()
        .unwrap()
        .strip_prefix("rate ")
        .unwrap()
        .parse()
        .unwrap();
    assert!(rate > 0.0);
    let typo = nsv(&[
        "fit",
        "--series",
        out.join("series.csv").to_str().unwrap(),
        "--column",
        "Energy",
        "--t0",
        "0.5",
        "--t1",
        "1.5",
    ]);
    assert_eq!(typo.status.code(), Some(2));
    assert!(text(&typo).contains("unknown column `Energy`"));
}

#[test]
fn default_output_dir_comes_from_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path(), 1.0);
    let o = nsv(&["run", "--config", &cfg]);
    assert_eq!(o.status.code(), Some(0), "{}", text(&o));
    assert!(dir.path().join("default-out/series.csv").exists());
}

#[test]
fn missing_config_is_a_usage_error() {
    let o = nsv(&[
        "run",
        "--config",
        "/definitely/not/here.json",
        "--out",
        "/tmp/x",
    ]);
    assert_eq!(o.status.code(), Some(2));
    assert!(text(&o).contains("/definitely/not/here.json"));
}

#[test]
fn invalid_config_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("bad.json");
    std::fs::write(&p, r#"{"domain": {"dimension": 2, "length": 1.0, "cells": 16, "dt": 0.01, "t_end": 0.1, "seed": 1, "colour": 3}, "fluid": {"viscosity": 1.0}, "kinetic": {"drag": 1.0, "particles": 0}, "theory": {}, "output": {}}"#).unwrap();
    let o = nsv(&["run", "--config", p.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(text(&o).contains("domain.colour"));
}

#[test]
fn unknown_subcommand_is_a_usage_error() {
    assert_eq!(nsv(&["simulate"]).status.code(), Some(2));
    assert_eq!(nsv(&[]).status.code(), Some(2));
}

#[test]
fn nan_abort_exits_one_with_step() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("nan.json");
    std::fs::write(
        &p,
        r#"{"domain": {"dimension": 2, "length": 1.0, "cells": 16, "dt": 0.01, "t_end": 0.05, "seed": 1},
            "fluid": {"viscosity": 1.7e308, "velocity": "swirl", "velocity_amplitude": 0.01},
            "kinetic": {"drag": 1.0, "particles": 10, "velocity_radius": 0.1},
            "theory": {}, "output": {}}"#,
    )
    .unwrap();
    let o = nsv(&[
        "run",
        "--config",
        p.to_str().unwrap(),
        "--out",
        dir.path().join("o").to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(1), "{}", text(&o));
    assert!(text(&o).contains("step 1"), "{}", text(&o));
}

#[test]
fn fit_exact_exponential() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("syn.csv");
    let mut s = String::from("t,y\n");
    for i in 0..=100 {
        let t = i as f64 * 0.05;
        s.push_str(&format!("{t:?},{:?}\n", (-3.0 * t).exp()));
    }
    std::fs::write(&p, s).unwrap();
    let o = nsv(&[
        "fit",
        "--series",
        p.to_str().unwrap(),
        "--column",
        "y",
        "--t0",
        "1",
        "--t1",
        "5",
    ]);
    assert_eq!(o.status.code(), Some(0));
    let rate: f64 = text(&o)
        .lines()
        .next()
        .unwrap()
        .strip_prefix("rate ")
        .unwrap()
        .parse()
        .unwrap();
    assert!((rate - 3.0).abs() < 1e-9, "{rate}");
}

#[test]
fn verify_fault_injection_fails_divergence() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path(), 1.0);
    let o = nsv(&[
        "verify",
        "--config",
        &cfg,
        "--fault",
        "disable-projection",
        "--no-oracle",
    ]);
    assert_eq!(o.status.code(), Some(1), "{}", text(&o));
    assert!(
        text(&o).contains("config/divergence: measured"),
        "{}",
        text(&o)
    );
}

#[test]
fn verify_weak_drag_warns() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path(), 0.9);
    let o = nsv(&[
        "verify",
        "--config",
        &cfg,
        "--no-oracle",
        "--out",
        dir.path().join("v").to_str().unwrap(),
    ]);
    assert!(
        text(&o).contains("warning [config]: drag coefficient κ = 0.9 < 1"),
        "{}",
        text(&o)
    );
    assert!(dir.path().join("v/checks.csv").exists());
}

#[test]
fn verify_reference_scenarios_pass() {
    let o = nsv(&["verify"]);
    assert_eq!(o.status.code(), Some(0), "{}", text(&o));
    let t = text(&o);
    for s in [
        "drag-only",
        "pure-fluid",
        "coupled-3d",
        "coupled-2d",
        "oracle",
    ] {
        assert!(t.contains(s), "{s} missing from\n{t}");
    }
}

#[test]
fn oracle_subcommand_passes() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("oracle.csv");
    let o = nsv(&["oracle", "--csv", csv.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", text(&o));
    assert!(std::fs::read_to_string(csv)
        .unwrap()
        .starts_with("scenario,property,measured,bound,pass,binding\n"));
}

#[test]
fn thread_count_does_not_change_series() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path(), 1.0);
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    let o = nsv(&[
        "--threads",
        "1",
        "run",
        "--config",
        &cfg,
        "--out",
        a.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", text(&o));
    let o = Command::new(env!("CARGO_BIN_EXE_nsv"))
        .args(["run", "--config", &cfg, "--out", b.to_str().unwrap()])
        .env("NSV_THREADS", "3")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(0), "{}", text(&o));
    assert_eq!(
        std::fs::read(a.join("series.csv")).unwrap(),
        std::fs::read(b.join("series.csv")).unwrap()
    );
    assert_eq!(nsv(&["--threads", "0", "oracle"]).status.code(), Some(2));
}
