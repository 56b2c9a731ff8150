use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use m2hs_core::lagrangian::blowup_time;
use m2hs_core::{seeded_profile, Grid, Mode, SimParams};
use serde_json::Value;

struct Scenario {
    dir: tempfile::TempDir,
}

impl Scenario {
    fn new() -> Self {
        Self { dir: tempfile::tempdir().unwrap() }
    }

    fn write(&self, name: &str, body: &str) -> PathBuf {
        let path = self.dir.path().join(name);
        std::fs::write(&path, format!("output_dir = \"out-{name}\"\n{body}")).unwrap();
        path
    }

    fn out(&self, name: &str) -> PathBuf {
        self.dir.path().join(format!("out-{name}"))
    }
}

fn m2hs(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_m2hs")).args(args).output().unwrap()
}

fn run(sub: &str, cfg: &Path) -> Output {
    m2hs(&[sub, cfg.to_str().unwrap()])
}

fn csv_rows(path: &Path) -> (Vec<String>, Vec<Vec<String>>) {
    let text = std::fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    let header = lines.next().unwrap().split(',').map(String::from).collect();
    (header, lines.map(|l| l.split(',').map(String::from).collect()).collect())
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

const SEEDED: &str = r#"
n = 512
s = 0.6
[profile]
kind = "seeded"
site = 100
u_modes = [{ k = 1, a = 0.15 }]
[time]
t_end = 4.0
samples = 41
"#;

#[test]
fn stationary_energy_column() {
    let sc = Scenario::new();
    let cfg = sc.write(
        "flat.toml",
        "n = 64\ns = 0.0\n[profile]\nkind = \"constant-rho\"\nvalue = 2.0\n[time]\nt_end = 2.0\nsamples = 11\n",
    );
    let out = run("simulate", &cfg);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let (header, rows) = csv_rows(&sc.out("flat.toml").join("conservation.csv"));
    assert_eq!(header, ["t", "energy", "angle", "degenerate_flag"]);
    assert_eq!(rows.len(), 11);
    for r in &rows {
        assert!((r[1].parse::<f64>().unwrap() - 1.0).abs() <= 1e-6);
    }
    let (header, rows) = csv_rows(&sc.out("flat.toml").join("states.csv"));
    assert_eq!(header, ["t", "x", "u", "u_x", "rho"]);
    assert_eq!(rows.len(), 11 * 64);
}

#[test]
fn seeded_summary_reports_formula_blowup_and_recovery() {
    let sc = Scenario::new();
    let cfg = sc.write("seeded.toml", SEEDED);
    let out = run("simulate", &cfg);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let summary = json(&sc.out("seeded.toml").join("summary.json"));

    let d = seeded_profile(Grid::new(512).unwrap(), 0.6, 100, &[Mode::new(1, 0.15, 0.0)], 1).unwrap();
    let p = SimParams::from_data(&d, 0.6).unwrap();
    // a k = 1 seed crosses s twice, at the seed and half a circle away
    let t0 = (0..512)
        .filter(|&j| (d.rho0[j] - 0.6).abs() <= p.rho_tol)
        .map(|j| blowup_time(d.u0x[j], &p))
        .fold(f64::INFINITY, f64::min);
    assert!(t0.is_finite());
    let reported = summary["blowup"]["t_first"].as_f64().unwrap();
    assert!((reported - t0).abs() <= 1e-4);
    let midpoint = summary["blowup"]["events"][0]["midpoint"].as_f64().unwrap();
    assert!((midpoint - t0).abs() <= 1e-4);

    // states past t_first, with conservation restored there
    let (_, rows) = csv_rows(&sc.out("seeded.toml").join("conservation.csv"));
    let after: Vec<_> = rows.iter().filter(|r| r[0].parse::<f64>().unwrap() > t0 + 0.01).collect();
    assert!(!after.is_empty());
    for r in after.iter().filter(|r| r[3] == "0") {
        assert!((r[1].parse::<f64>().unwrap() - 1.0).abs() <= 1e-6);
    }
    assert!(summary["max_deviations"]["energy_after_blowup"].as_f64().unwrap() <= 1e-6);
}

#[test]
fn blowup_rows() {
    let sc = Scenario::new();
    let body = r#"
n = 256
s = 0.8
[profile]
kind = "seeded"
site = 17
[time]
t_end = 1.0
samples = 2
[blowup]
s_values = [0.8, 0.8, 5.0]
"#;
    let cfg = sc.write("sweep.toml", body);
    let out = run("blowup", &cfg);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let (header, rows) = csv_rows(&sc.out("sweep.toml").join("blowup.csv"));
    assert_eq!(header[..4], ["s", "sites", "t_first", "margin"]);
    assert_eq!(rows[0], rows[1]);
    let d = seeded_profile(Grid::new(256).unwrap(), 0.8, 17, &[], 1).unwrap();
    let p = SimParams::from_data(&d, 0.8).unwrap();
    // u0x = 0 at the seed: t_first = π/Ω
    let t_first: f64 = rows[0][2].parse().unwrap();
    assert!((t_first - std::f64::consts::PI / p.omega()).abs() < 1e-12);
    assert_ne!(rows[0][1], "0");
    assert_eq!(rows[2][1], "0");
    assert_eq!(rows[2][4], "1");
}

#[test]
fn config_errors_exit_2() {
    let sc = Scenario::new();
    let cfg = sc.write("bad.toml", &SEEDED.replace("s = 0.6", "s = 0.6\nspeed = 3"));
    assert_eq!(run("simulate", &cfg).status.code(), Some(2));
    let missing = sc.dir.path().join("absent.toml");
    assert_eq!(run("simulate", &missing).status.code(), Some(2));
    let empty_sweep = sc.write("nosweep.toml", SEEDED);
    assert_eq!(run("blowup", &empty_sweep).status.code(), Some(2));
    let good = sc.write("good.toml", SEEDED);
    let out = Command::new(env!("CARGO_BIN_EXE_m2hs"))
        .args(["simulate", good.to_str().unwrap()])
        .env(m2hs_cli::THREADS_ENV, "zero")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(m2hs(&["simulate"]).status.code(), Some(2));
}

#[test]
fn degenerate_frequencies_exit_3() {
    let sc = Scenario::new();
    // ρ ≡ 2 has c² = δ = 1, so s = 2 gives a zero discriminant
    let cfg = sc.write(
        "degen.toml",
        "n = 64\ns = 2.0\n[profile]\nkind = \"constant-rho\"\nvalue = 2.0\n[time]\nt_end = 1.0\nsamples = 3\n",
    );
    assert_eq!(run("simulate", &cfg).status.code(), Some(3));
}

fn validate_body(extra: &str) -> String {
    format!("{}\n[validate]\nmol = false\n{extra}\n", SEEDED.replace("n = 512", "n = 256").replace("samples = 41", "samples = 9"))
}

#[test]
fn validate_passes_and_catches_corrupted_theta2() {
    let sc = Scenario::new();
    let cfg = sc.write("ok.toml", &validate_body(""));
    let out = run("validate", &cfg);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let report = json(&sc.out("ok.toml").join("validation.json"));
    assert_eq!(report["passed"], true);
    let names: Vec<_> = report["checks"].as_array().unwrap().iter().map(|c| c["name"].as_str().unwrap()).collect();
    for want in ["sphere_ode_residual", "delta_conservation", "energy_identity", "weak_geodesic"] {
        assert!(names.contains(&want), "{want} missing");
    }

    let bad = sc.write("bad.toml", &validate_body("corrupt_theta2 = 1e-3"));
    assert_eq!(run("validate", &bad).status.code(), Some(1));
    let report = json(&sc.out("bad.toml").join("validation.json"));
    let check = report["checks"].as_array().unwrap().iter().find(|c| c["name"] == "sphere_ode_residual").unwrap();
    assert_eq!(check["pass"], false);

    let warn = sc.write("warn.toml", &validate_body("corrupt_theta2 = 1e-3\nwarn_only = true"));
    assert_eq!(run("validate", &warn).status.code(), Some(0));
    assert_eq!(json(&sc.out("warn.toml").join("validation.json"))["passed"], false);
}

#[test]
fn repeated_runs_are_byte_identical() {
    let sc = Scenario::new();
    let a = sc.write("a.toml", SEEDED);
    let b = sc.write("b.toml", SEEDED);
    assert!(run("simulate", &a).status.success());
    assert!(run("simulate", &b).status.success());
    for f in ["states.csv", "conservation.csv", "summary.json"] {
        assert_eq!(std::fs::read(sc.out("a.toml").join(f)).unwrap(), std::fs::read(sc.out("b.toml").join(f)).unwrap());
    }
}
