use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_planar-sis"));
    c.env_remove("PLANAR_SIS_JOBS");
    c
}

fn run(args: &[&str], out: &Path) -> Output {
    bin().args(args).arg("--out").arg(out).output().unwrap()
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

const SIM: [&str; 11] = ["simulate", "--beta", "2", "--gamma", "1", "--L", "12", "--t-max", "30", "--seed", "7"];

#[test]
fn same_seed_gives_identical_files() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    assert!(run(&SIM, &a).status.success());
    assert!(bin().args(SIM).arg("--out").arg(&b).arg("--jobs").arg("3").status().unwrap().success());
    for f in ["summary.json", "snapshots.csv", "pcf.csv"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f}");
    }
    let s = json(&a.join("summary.json"));
    for key in ["p_mean", "p_stderr", "t_absorb", "censored", "event_counts", "seed", "params"] {
        assert!(s.get(key).is_some(), "summary lacks {key}");
    }
    let snap = fs::read_to_string(a.join("snapshots.csv")).unwrap();
    assert!(snap.starts_with("t,id,x,y,state\n"));
    let pcf = fs::read_to_string(a.join("pcf.csv")).unwrap();
    assert!(pcf.starts_with("r_lo,r_hi,xi_psiphi,xi_phiphi,xi_psipsi,counts\n"));
    let echo = fs::read_to_string(a.join("config.resolved.toml")).unwrap();
    let echo: toml::Table = toml::from_str(&echo).unwrap();
    assert_eq!(echo["command"].as_str(), Some("simulate"));
    assert_eq!(echo["resolved"]["seed"].as_integer(), Some(7));
}

#[test]
fn no_recovery_keeps_everyone_infected() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["simulate", "--beta", "0", "--gamma", "1", "--L", "10", "--t-max", "10"], dir.path());
    assert!(out.status.success());
    assert_eq!(json(&dir.path().join("summary.json"))["p_mean"].as_f64(), Some(1.0));
}

#[test]
fn solve_reports_table_value_and_schema() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(
        &["solve", "--spec", "m2bi", "--method", "poly", "--mu", "12.566", "--beta", "8", "--gamma", "1"],
        dir.path(),
    );
    assert!(out.status.success());
    let s = json(&dir.path().join("solution.json"));
    for key in ["spec", "params", "w", "v", "z", "p", "branch", "residual", "multiplicity_flag"] {
        assert!(s.get(key).is_some(), "solution lacks {key}");
    }
    assert!((s["p"].as_f64().unwrap() - 0.329).abs() < 5e-4);
}

#[test]
fn integral_and_finite_geometric_mixtures_agree() {
    let dir = tempfile::tempdir().unwrap();
    let get = |spec: &str| {
        let o = dir.path().join(spec);
        assert!(run(&["solve", "--spec", spec, "--mu", "12.566", "--beta", "8", "--gamma", "1"], &o).status.success());
        let mut v = json(&o.join("solution.json"));
        v.as_object_mut().unwrap().remove("spec");
        v
    };
    let (a, b) = (get("b1g1"), get("minfbg1"));
    for k in ["w", "v", "z", "p"] {
        assert!((a[k].as_f64().unwrap() - b[k].as_f64().unwrap()).abs() < 1e-9, "{k}");
    }
}

#[test]
fn no_motion_solve_picks_cluster_constants() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(
        &["solve", "--spec", "b1i", "--case", "no-motion", "--lambda", "1", "--a", "2", "--beta", "4"],
        dir.path(),
    );
    assert!(out.status.success());
    let s = json(&dir.path().join("solution.json"));
    assert!((s["p_tilde"].as_f64().unwrap() - 0.62).abs() < 0.03);
    assert!(s["q"].as_f64().unwrap() > 0.999);
}

#[test]
fn unknown_spec_is_a_usage_error_listing_codes() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["solve", "--spec", "h0", "--beta", "1"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    let f = json(&dir.path().join("failures.json"));
    let first = &f["failures"][0];
    assert_eq!(first["field"].as_str(), Some("spec"));
    assert!(first["reason"].as_str().unwrap().contains("m2bi"));
}

#[test]
fn invalid_parameter_names_its_field() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["simulate", "--beta=-1", "--gamma", "1"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("\"field\":\"beta\""));
}

#[test]
fn phase_classification() {
    let dir = tempfile::tempdir().unwrap();
    let classify = |mu: &str, beta: &str| {
        let o = run(&["phase", "classify", "--mu", mu, "--beta", beta], dir.path());
        assert!(o.status.success());
        String::from_utf8(o.stdout).unwrap().trim().to_string()
    };
    assert_eq!(classify("3", "2"), "UMI");
    assert_eq!(classify("5", "6"), "Safe");
    assert_eq!(classify("5", "4.8"), "UMS");
}

#[test]
fn phase_sweep_writes_curves() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(
        &["phase", "--spec", "m2bi", "--mu", "5", "--beta-range", "4.6:5.0:0.05", "--gamma-range", "0.2,100"],
        dir.path(),
    );
    assert!(out.status.success());
    let csv = fs::read_to_string(dir.path().join("phase.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("mu,beta,region,boolean_supercritical,gamma_minus,gamma_plus"));
    assert_eq!(lines.count(), 9);
    assert!(csv.contains("5.0,4.8,UMS,true,"));
    let plus = fs::read_to_string(dir.path().join("gamma_plus.csv")).unwrap();
    assert!(plus.starts_with("beta,gamma_plus\n"));
    let bc = fs::read_to_string(dir.path().join("beta_c.csv")).unwrap();
    assert_eq!(bc.lines().count(), 3);
}

#[test]
fn single_particle_mtta_is_mean_recovery_time() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(
        &["mtta", "--single-particle", "--beta", "2.5", "--sweep", "gamma", "--values", "0", "--replications", "4000"],
        dir.path(),
    );
    assert!(out.status.success());
    let csv = fs::read_to_string(dir.path().join("mtta.csv")).unwrap();
    let mut rdr = csv::Reader::from_reader(csv.as_bytes());
    assert_eq!(
        rdr.headers().unwrap().iter().collect::<Vec<_>>(),
        ["param", "L", "mean", "ci_lo", "ci_hi", "n", "censored_n"]
    );
    let row = rdr.records().next().unwrap().unwrap();
    let (lo, hi): (f64, f64) = (row[3].parse().unwrap(), row[4].parse().unwrap());
    assert!(lo < 0.4 && 0.4 < hi, "[{lo}, {hi}]");
}

#[test]
fn censored_runs_exit_nonzero_with_failure_list() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(
        &["mtta", "--beta", "0", "--gamma", "1", "--sweep", "L", "--values", "6", "--replications", "3", "--cap", "20"],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(3));
    let f = json(&dir.path().join("failures.json"));
    assert_eq!(f["failures"].as_array().unwrap().len(), 1);
    assert!(dir.path().join("mtta.csv").exists());
}

#[test]
fn percolation_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["percolation", "--lambda", "1", "--a", "1", "--pi"], dir.path());
    assert!(out.status.success());
    let p = json(&dir.path().join("percolation.json"));
    let q = p["q"].as_f64().unwrap();
    assert!((1.0 - q - (-std::f64::consts::PI * q).exp()).abs() < 1e-12);
    assert!((p["c"].as_f64().unwrap() - 1.0 / q).abs() < 1e-12);
    let pi = fs::read_to_string(dir.path().join("pi.csv")).unwrap();
    assert!(pi.starts_with("r,pi\n"));
}

#[test]
fn pcf_from_snapshots_matches_simulation() {
    let dir = tempfile::tempdir().unwrap();
    let sim = dir.path().join("sim");
    assert!(run(&SIM, &sim).status.success());
    let snaps = sim.join("snapshots.csv");
    let pcf = dir.path().join("pcf");
    let out = run(&["pcf", "--input", snaps.to_str().unwrap(), "--L", "12"], &pcf);
    assert!(out.status.success());
    assert_eq!(fs::read(sim.join("pcf.csv")).unwrap(), fs::read(pcf.join("pcf.csv")).unwrap());
}

#[test]
fn config_file_values_yield_to_flags() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("exp.toml");
    fs::write(
        &cfg,
        "[solve]\nspec = \"m2bi\"\nmu = 12.566\nbeta = 8.0\ngamma = 1.0\n",
    )
    .unwrap();
    let a = dir.path().join("a");
    assert!(bin().arg("--config").arg(&cfg).args(["--out", a.to_str().unwrap(), "solve"]).status().unwrap().success());
    assert!((json(&a.join("solution.json"))["p"].as_f64().unwrap() - 0.329).abs() < 5e-4);
    let b = dir.path().join("b");
    let st = bin()
        .args(["solve", "--beta", "12.0", "--config", cfg.to_str().unwrap(), "--out", b.to_str().unwrap()])
        .status()
        .unwrap();
    assert!(st.success());
    let s = json(&b.join("solution.json"));
    assert_eq!(s["params"]["beta"].as_f64(), Some(12.0));
    assert_eq!(s["params"]["gamma"].as_f64(), Some(1.0));
}

#[test]
fn jobs_come_from_the_environment() {
    let dir = tempfile::tempdir().unwrap();
    let st = bin()
        .env("PLANAR_SIS_JOBS", "2")
        .args(["phase", "classify", "--mu", "3", "--beta", "2", "--out", dir.path().to_str().unwrap()])
        .output()
        .unwrap();
    assert!(st.status.success());
    let echo: toml::Table = toml::from_str(&fs::read_to_string(dir.path().join("config.resolved.toml")).unwrap()).unwrap();
    assert_eq!(echo["jobs"].as_integer(), Some(2));
}

#[test]
fn unknown_config_keys_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    fs::write(&cfg, "[simulat]\nbeta = 1.0\n").unwrap();
    let out = bin()
        .args(["--config", cfg.to_str().unwrap(), "--out", dir.path().to_str().unwrap(), "simulate", "--beta", "1"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}
