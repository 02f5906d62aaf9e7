use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

struct Run {
    out: Output,
    dir: PathBuf,
}

impl Run {
    fn code(&self) -> Option<i32> {
        self.out.status.code()
    }

    fn report(&self) -> Value {
        let text = std::fs::read_to_string(self.dir.join("report.json")).expect("report.json written");
        serde_json::from_str(&text).unwrap()
    }

    fn check(&self, name: &str) -> Value {
        self.report()["checks"].as_array().unwrap().iter().find(|c| c["name"] == name).cloned().unwrap_or_else(|| panic!("no check {name}"))
    }
}

fn run(tmp: &TempDir, command: &str, config: &str) -> Run {
    let cfg = tmp.path().join(format!("{command}.json"));
    std::fs::write(&cfg, config).unwrap();
    run_with(tmp.path(), command, &cfg)
}

fn run_with(root: &Path, command: &str, cfg: &Path) -> Run {
    let dir = root.join(format!("out-{command}"));
    let out = Command::new(env!("CARGO_BIN_EXE_cosymlab"))
        .arg(command)
        .arg("--config")
        .arg(cfg)
        .arg("--out")
        .arg(&dir)
        .output()
        .unwrap();
    Run { out, dir }
}

#[test]
fn t5_demo_passes_in_dimension_six() {
    let tmp = TempDir::new().unwrap();
    let r = run(&tmp, "demo-product", r#"{"seed_name": "T5", "samples": 100, "section_samples": 10, "orbits": 2, "iterates": 5}"#);
    assert_eq!(r.code(), Some(0), "{}", String::from_utf8_lossy(&r.out.stdout));
    let rep = r.report();
    assert_eq!(rep["metrics"]["dimension"], 6);
    assert_eq!(rep["pass"], true);
    assert_eq!(rep["artifacts"], serde_json::json!(["report.json", "crossings.csv", "plot.svg"]));
    let csv = std::fs::read_to_string(r.dir.join("crossings.csv")).unwrap();
    assert!(csv.starts_with("orbit_id,t,coord_0,coord_1,coord_2,coord_3,margin\n"));
    assert_eq!(csv.lines().count(), 1 + 2 * 5);
    let svg = std::fs::read_to_string(r.dir.join("plot.svg")).unwrap();
    assert!(svg.contains(r#"width="800" height="800""#));
}

#[test]
fn malformed_seed_name_is_a_usage_error() {
    let tmp = TempDir::new().unwrap();
    let r = run(&tmp, "demo-product", r#"{"seed_name": "T4"}"#);
    assert_eq!(r.code(), Some(2));
    let err = String::from_utf8_lossy(&r.out.stderr);
    assert!(err.contains("unknown seed 'T4'") && err.contains("usage:"), "{err}");
    assert!(!r.dir.join("report.json").exists());
}

#[test]
fn config_errors_exit_two() {
    let tmp = TempDir::new().unwrap();
    assert_eq!(run(&tmp, "tischler", "{ not json").code(), Some(2));
    assert_eq!(run(&tmp, "verify-cosym", r#"{"tol": 0}"#).code(), Some(2));
    assert_eq!(run(&tmp, "obstruct", r#"{"unknown_field": 1}"#).code(), Some(2));
    let bad_expr = r#"{"system": {"dim": 2, "omega": [[0, 1, 1.0]], "hamiltonian": "x0^2 + tan(x1)"},
                      "section": {"angle": {"a": 0, "b": 1}}}"#;
    let r = run(&tmp, "return-map", bad_expr);
    assert_eq!(r.code(), Some(2));
    assert!(String::from_utf8_lossy(&r.out.stderr).contains("unknown name 'tan'"));
    assert_eq!(run_with(tmp.path(), "tischler", &tmp.path().join("missing.json")).code(), Some(2));
    let r = run(&tmp, "obstruct", r#"{"ambient": "S2xS2", "level_connected": false}"#);
    assert_eq!(r.code(), Some(2));
    let none = Command::new(env!("CARGO_BIN_EXE_cosymlab")).arg("obstruct").output().unwrap();
    assert_eq!(none.status.code(), Some(2));
    let unknown = Command::new(env!("CARGO_BIN_EXE_cosymlab")).arg("frobnicate").output().unwrap();
    assert_eq!(unknown.status.code(), Some(2));
}

#[test]
fn s3_profile_fails_at_degree_one() {
    let tmp = TempDir::new().unwrap();
    let r = run(&tmp, "obstruct", r#"{"profile": "S3", "system": "cotangent_r4", "resolution": 64}"#);
    assert_eq!(r.code(), Some(1));
    let rep = r.report();
    assert_eq!(rep["metrics"]["betti_vanishing_degree"], 1);
    assert_eq!(r.check("betti_necessary")["pass"], false);
    assert_eq!(r.check("stokes sphere")["pass"], true);
    assert_eq!(rep["metrics"]["exactness_verdict"]["kind"], "Negative");
}

#[test]
fn t3_profile_and_torus_integrals() {
    let tmp = TempDir::new().unwrap();
    let r = run(&tmp, "obstruct", r#"{"profile": [1, 3, 3, 1], "system": "standard_t4", "ambient": "T4", "resolution": 32}"#);
    assert_eq!(r.code(), Some(0));
    let rep = r.report();
    assert_eq!(rep["metrics"]["exactness_verdict"]["kind"], "Inconclusive");
    assert_eq!(rep["metrics"]["topology_verdict"]["kind"], "Inconclusive");
    // dx^dy + dz^dtheta integrates to (2 pi)^2 over the (0,1) and (2,3) tori only
    let integrals = rep["metrics"]["surface_integrals"].as_array().unwrap();
    assert_eq!(integrals.len(), 6);
    for pair in integrals {
        let (name, v) = (pair[0].as_str().unwrap(), pair[1].as_f64().unwrap());
        let expected = if name.ends_with("(0, 1)") || name.ends_with("(2, 3)") { 4.0 * std::f64::consts::PI.powi(2) } else { 0.0 };
        assert!((v - expected).abs() < 1e-9, "{name}: {v}");
    }
}

#[test]
fn rational_periods_are_exact() {
    let tmp = TempDir::new().unwrap();
    let r = run(&tmp, "tischler", r#"{"seed_name": "T3", "samples": 50}"#);
    assert_eq!(r.code(), Some(0));
    let rep = r.report();
    assert_eq!(rep["metrics"]["error"], 0.0);
    assert_eq!(rep["metrics"]["d"], 1);
    assert_eq!(rep["metrics"]["n"], serde_json::json!([0, 0, 1]));
}

#[test]
fn irrational_seed_rationalizes() {
    let tmp = TempDir::new().unwrap();
    let r = run(&tmp, "tischler", r#"{"seed_name": "irrational", "samples": 100, "eps": 1e-4}"#);
    assert_eq!(r.code(), Some(0));
    let rep = r.report();
    assert_eq!((rep["metrics"]["d"].as_u64(), rep["metrics"]["n"].clone()), (Some(70), serde_json::json!([70, 99, 0])));
}

#[test]
fn tangent_alpha_fails_transversality() {
    // the suspension Reeb field d_z + d_y / 3 is killed by dz - 3 dy
    let tmp = TempDir::new().unwrap();
    let r = run(&tmp, "tischler", r#"{"seed_name": "suspension", "alpha": [0.0, -3.0, 1.0], "samples": 20}"#);
    assert_eq!(r.code(), Some(2), "{}", String::from_utf8_lossy(&r.out.stderr));
}

#[test]
fn verify_cosym_round_trip() {
    let tmp = TempDir::new().unwrap();
    for seed in ["T3", "T5", "suspension", "irrational"] {
        let r = run(&tmp, "verify-cosym", &format!(r#"{{"seed_name": "{seed}", "samples": 32}}"#));
        assert_eq!(r.code(), Some(0), "{seed}");
        assert_eq!(r.check("collar_restricts_to_beta")["value"], 0.0);
    }
}

#[test]
fn linear_oscillator_crossings_lie_on_invariant_circles() {
    let tmp = TempDir::new().unwrap();
    let r = run(&tmp, "return-map", r#"{"orbits": 3, "iterates": 40, "section_samples": 20}"#);
    assert_eq!(r.code(), Some(0));
    assert!(r.check("return_map_area_preserving")["value"].as_f64().unwrap() < 1e-6);
    let csv = std::fs::read_to_string(r.dir.join("crossings.csv")).unwrap();
    let mut radius: Vec<Option<f64>> = vec![None; 3];
    let mut last_t = [0.0; 3];
    for line in csv.lines().skip(1) {
        let f: Vec<f64> = line.split(',').map(|x| x.parse().unwrap()).collect();
        let (id, t) = (f[0] as usize, f[1]);
        // first oscillator energy is conserved; crossings are 2 pi / sqrt 2 apart
        let r2 = f[2] * f[2] + f[3] * f[3];
        let r0 = *radius[id].get_or_insert(r2);
        assert!((r2 - r0).abs() < 1e-8, "orbit {id}: {r2} vs {r0}");
        assert!((t - last_t[id] - std::f64::consts::TAU / std::f64::consts::SQRT_2).abs() < 1e-8);
        assert!((f[4] - std::f64::consts::SQRT_2).abs() < 1e-9);
        last_t[id] = t;
    }
    assert_eq!(csv.lines().count(), 1 + 3 * 40);
}

#[test]
fn inline_pendulum_return_map() {
    let tmp = TempDir::new().unwrap();
    let cfg = r#"{
        "system": {"dim": 2, "coords": ["q", "p"], "periodic": [0], "omega": [[0, 1, 1.0]],
                   "hamiltonian": "0.5*p^2 - cos(q)"},
        "section": {"coordinate": {"index": 0, "value": 0.0, "period": null, "solve": 1}},
        "energy": 2.0, "orbits": 1, "iterates": 3, "section_samples": 1
    }"#;
    let r = run(&tmp, "return-map", cfg);
    assert_eq!(r.code(), Some(0), "{}", String::from_utf8_lossy(&r.out.stdout));
    // rotating orbit above the separatrix; the section is a single point
    let csv = std::fs::read_to_string(r.dir.join("crossings.csv")).unwrap();
    assert!(csv.starts_with("orbit_id,t,margin\n"), "{csv}");
    assert_eq!(csv.lines().count(), 4);
}

#[test]
fn seed_flag_overrides_config() {
    let tmp = TempDir::new().unwrap();
    let cfg = tmp.path().join("c.json");
    std::fs::write(&cfg, r#"{"seed_name": "T3", "samples": 20, "section_samples": 4, "orbits": 1, "iterates": 3}"#).unwrap();
    let out = tmp.path().join("o");
    let status = Command::new(env!("CARGO_BIN_EXE_cosymlab"))
        .args(["demo-product", "--seed", "9", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&out)
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(0));
    let rep: Value = serde_json::from_str(&std::fs::read_to_string(out.join("report.json")).unwrap()).unwrap();
    assert_eq!(rep["config"]["seed"], 9);
}
