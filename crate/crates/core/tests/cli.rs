use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use plt_core::experiments::Manifest;

const SMALL: &str = r#"{
  "V0_Er": 10.0,
  "a_m": 3.975e-7,
  "mass_kg": 1.4431608951127549e-25,
  "omega_rad_s": 226.1946710584651,
  "J_Er": 0.024,
  "Omega_Er": 0.00032,
  "N": 96,
  "samples": 96,
  "k_points": 64,
  "eigenstates": 40,
  "scenario": { "n0": 12.0, "k0a": 0.0, "sigma0": 2.23, "horizon_TD": 2.0 }
}"#;

fn config(dir: &Path, text: &str) -> PathBuf {
    let path = dir.join("config.json");
    fs::write(&path, text).unwrap();
    path
}

fn plt(args: &[&str], config: &Path, out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_plt"))
        .args(args)
        .arg("--config")
        .arg(config)
        .arg("--out")
        .arg(out)
        .output()
        .unwrap()
}

fn manifest(out: &Path) -> Manifest {
    serde_json::from_str(&fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap()
}

fn header(path: &Path) -> String {
    let text = fs::read_to_string(path).unwrap();
    text.split("\r\n").next().unwrap().to_owned()
}

fn files(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut v: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.file_name().unwrap() != "config.json")
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&p).unwrap()))
        .collect();
    v.sort();
    v
}

#[test]
fn spectrum_writes_tables_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path(), SMALL);
    let out = plt(&["spectrum"], &cfg, dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));

    let m = manifest(dir.path());
    assert_eq!(m.tool, "plt");
    assert_eq!(m.derived.critical_eigennumber, 24);
    for f in &m.files {
        assert!(dir.path().join(&f.name).exists(), "{} listed but missing", f.name);
    }
    let spectrum = dir.path().join("spectrum.csv");
    assert!(header(&spectrum).starts_with("r,"), "{}", header(&spectrum));
    let mut reader = csv::Reader::from_path(&spectrum).unwrap();
    let rows: Vec<csv::StringRecord> = reader.records().map(Result::unwrap).collect();
    assert_eq!(rows.len(), 40);
    let energies: Vec<f64> = rows.iter().map(|r| r[1].parse().unwrap()).collect();
    assert!(energies.windows(2).all(|w| w[0] <= w[1]));
    // Seventeen significant digits.
    assert!(rows[0][1].split('e').next().unwrap().trim_start_matches('-').len() == 18, "{}", &rows[0][1]);
}

#[test]
fn runs_are_byte_identical() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for dir in [a.path(), b.path()] {
        let cfg = config(dir, SMALL);
        let out = plt(&["evolve"], &cfg, dir);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    }
    let (fa, fb) = (files(a.path()), files(b.path()));
    assert!(fa.iter().any(|(n, _)| n == "density_xt.pgm"));
    assert_eq!(fa.len(), fb.len());
    for ((na, ca), (nb, cb)) in fa.iter().zip(&fb) {
        assert_eq!(na, nb);
        assert!(ca == cb, "{na} differs between runs");
    }
}

#[test]
fn evolve_outputs_are_consistent() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path(), SMALL);
    assert!(plt(&["evolve"], &cfg, dir.path()).status.success());

    let pgm = fs::read(dir.path().join("density_xt.pgm")).unwrap();
    let text = String::from_utf8_lossy(&pgm[..20]).into_owned();
    let mut fields = text.split_whitespace();
    assert_eq!(fields.next(), Some("P5"));
    let w: usize = fields.next().unwrap().parse().unwrap();
    let h: usize = fields.next().unwrap().parse().unwrap();
    assert_eq!(fields.next(), Some("255"));
    assert!(pgm.len() >= w * h && pgm.len() - w * h < 20);
    assert!(pgm[pgm.len() - w * h..].contains(&255));

    let mut reader = csv::Reader::from_path(dir.path().join("trajectory.csv")).unwrap();
    let head = reader.headers().unwrap().clone();
    let col = |name: &str| head.iter().position(|h| h == name).unwrap_or_else(|| panic!("no {name}"));
    let (norm, left, right) = (col("norm"), col("P_left"), col("P_right"));
    let mut rows = 0;
    for r in reader.records() {
        let r = r.unwrap();
        let n: f64 = r[norm].parse().unwrap();
        let sum: f64 = r[left].parse::<f64>().unwrap() + r[right].parse::<f64>().unwrap();
        assert!((n - 1.0).abs() < 1e-10 && (sum - n).abs() < 1e-12);
        rows += 1;
    }
    assert_eq!(rows, 96);
}

#[test]
fn husimi_accepts_explicit_states() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path(), SMALL);
    let out = plt(&["husimi", "--states", "0,3"], &cfg, dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    for name in ["husimi_r0.csv", "husimi_r0.pgm", "husimi_r3.csv", "husimi_r3.pgm"] {
        assert!(dir.path().join(name).exists(), "{name}");
    }
    assert!(!dir.path().join("husimi_r1.csv").exists());
}

#[test]
fn pendulum_and_tunneling_run_on_builtin_scenarios() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path(), SMALL);
    assert!(plt(&["pendulum", "--scenario", "fig2"], &cfg, dir.path()).status.success());
    assert!(header(&dir.path().join("separatrix.csv")).contains("ka"));

    let out = plt(&["tunneling", "--scenario", "fig9"], &cfg, dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("tunneling.json")).unwrap()).unwrap();
    assert_eq!(report["report"]["transferred"], false);
    assert_eq!(report["momentum_inversion"]["verdict"], "not_applicable");
}

#[test]
fn bad_inputs_fail_with_a_message() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path(), SMALL);
    let out = plt(&["spectrum", "--scenario", "fig99"], &cfg, dir.path());
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("fig99"));

    let cfg = config(dir.path(), &SMALL.replace("\"N\": 96", "\"N\": 96, \"bogus\": 1"));
    let out = plt(&["spectrum"], &cfg, dir.path());
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("bogus"));

    let cfg = config(dir.path(), &SMALL.replace("\"V0_Er\": 10.0", "\"V0_Er\": -1.0"));
    let out = plt(&["spectrum"], &cfg, dir.path());
    assert!(!out.status.success());

    let out = plt(&["spectrum"], &dir.path().join("missing.json"), dir.path());
    assert!(!out.status.success());
    assert!(!dir.path().join("manifest.json").exists());
}
