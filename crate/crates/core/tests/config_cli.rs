use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

use mae_rve::config::{load_config, parse_config};
use mae_rve::driver::LoadKind;
use mae_rve::output::{read_csv, CSV_SCHEMA};
use mae_rve::Error;

const BIN: &str = env!("CARGO_BIN_EXE_mae-rve");

fn scratch(name: &str) -> PathBuf {
    let d = std::env::temp_dir().join(format!("mae-rve-cli-{}-{name}", std::process::id()));
    fs::create_dir_all(&d).unwrap();
    d
}

fn shipped_configs() -> Vec<PathBuf> {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("examples/configs");
    let mut v: Vec<PathBuf> = fs::read_dir(dir).unwrap().map(|e| e.unwrap().path()).collect();
    v.sort();
    v
}

const SMALL: &str = r#"
[mesh]
cells = [2, 2, 2]
[[mesh.inclusions]]
center = [0.5, 0.5, 0.5]
radius = 0.3
[materials.matrix]
[materials.particle]
[load]
kind = "combined"
steps = 3
"#;

#[test]
fn defaults_are_filled_in() {
    let cfg = parse_config("[mesh]\ncells = [2, 2, 2]\n[materials.matrix]\n").unwrap();
    assert_eq!(cfg.path.steps, 10);
    assert_eq!(cfg.path.kind, LoadKind::Combined);
    assert_eq!(cfg.newton.rtol, 1e-8);
    assert_eq!(cfg.lengths, [1.0; 3]);
    assert!(!cfg.output.vtk);
    assert_eq!(cfg.output.csv, PathBuf::from("results.csv"));
}

#[test]
fn shipped_configs_parse_and_round_trip() {
    let configs = shipped_configs();
    assert!(configs.len() >= 6);
    for p in configs {
        let cfg = load_config(&p).unwrap_or_else(|e| panic!("{}: {e}", p.display()));
        let again = parse_config(&cfg.to_toml()).unwrap();
        assert_eq!(cfg, again, "{}", p.display());
    }
}

#[test]
fn misspelled_key_gets_a_suggestion() {
    let text = "[mesh]\ncells = [2, 2, 2]\n[materials.matrix]\nbluk_modulus = 1e6\n";
    let err = parse_config(text).unwrap_err().to_string();
    assert!(err.contains("bluk_modulus"), "{err}");
    assert!(err.contains("line 4"), "{err}");
    assert!(err.contains("did you mean `bulk_modulus`"), "{err}");
}

#[test]
fn semantic_errors_are_collected() {
    let text = r#"
[mesh]
cells = [2, 2, 2]
[[mesh.inclusions]]
center = [0.5, 0.5, 0.5]
radius = 0.2
[materials.matrix]
c1 = -1.0
[load]
steps = 0
[solver]
rtol = -1.0
"#;
    let Err(Error::Config(msg)) = parse_config(text) else {
        panic!("expected a configuration error");
    };
    for needle in ["particle", "c1", "steps", "rtol"] {
        assert!(msg.contains(needle), "missing `{needle}` in: {msg}");
    }
}

#[test]
fn run_writes_a_ramped_csv() {
    let dir = scratch("ramp");
    let cfg = dir.join("small.toml");
    fs::write(&cfg, SMALL).unwrap();
    let csv = dir.join("out.csv");
    let st = Command::new(BIN)
        .args(["run", cfg.to_str().unwrap(), "--steps", "4", "--output", csv.to_str().unwrap()])
        .status()
        .unwrap();
    assert!(st.success());
    let text = fs::read_to_string(&csv).unwrap();
    assert!(text.starts_with(&format!("# schema: {CSV_SCHEMA}")));
    let (header, rows) = read_csv(&text);
    assert_eq!(header[0], "t");
    let fxx = header.iter().position(|h| h == "F_avg_xx").unwrap();
    assert_eq!(rows.len(), 4);
    for (k, row) in rows.iter().enumerate() {
        let t = (k + 1) as f64 / 4.0;
        assert!((row[0] - t).abs() < 1e-15);
        assert!((row[fxx] - (1.0 + 0.1 * t)).abs() < 1e-12);
    }
    fs::remove_dir_all(dir).ok();
}

#[test]
fn repeated_runs_are_byte_identical() {
    let dir = scratch("repeat");
    let cfg = dir.join("small.toml");
    fs::write(&cfg, SMALL).unwrap();
    let mut outputs = Vec::new();
    for k in 0..2 {
        let csv = dir.join(format!("out{k}.csv"));
        let st = Command::new(BIN)
            .args(["run", cfg.to_str().unwrap(), "--output", csv.to_str().unwrap()])
            .status()
            .unwrap();
        assert!(st.success());
        outputs.push(fs::read(&csv).unwrap());
    }
    assert_eq!(outputs[0], outputs[1]);
    fs::remove_dir_all(dir).ok();
}

#[test]
fn vtk_and_iterative_flags() {
    let dir = scratch("vtk");
    let text = SMALL.to_string() + &format!("[output]\nvtk_dir = \"{}\"\n", dir.join("vtk").display());
    let cfg = dir.join("small.toml");
    fs::write(&cfg, text).unwrap();
    let csv = dir.join("out.csv");
    let st = Command::new(BIN)
        .args(["run", cfg.to_str().unwrap(), "--vtk", "--linear-solver", "iterative", "--output"])
        .arg(&csv)
        .status()
        .unwrap();
    assert!(st.success());
    for k in 1..=3 {
        let p = dir.join("vtk").join(format!("step_{k:04}.vtk"));
        let body = fs::read_to_string(&p).unwrap();
        assert!(body.contains("SCALARS sigma_zz double 1"));
    }
    fs::remove_dir_all(dir).ok();
}

#[test]
fn bad_config_fails_with_a_message() {
    let dir = scratch("bad");
    let cfg = dir.join("bad.toml");
    fs::write(&cfg, "[mesh]\ncels = [2, 2, 2]\n").unwrap();
    let out = Command::new(BIN).args(["run", cfg.to_str().unwrap()]).output().unwrap();
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("did you mean `cells`"), "{err}");
    let out = Command::new(BIN).args(["run", "/nonexistent/config.toml"]).output().unwrap();
    assert!(!out.status.success());
    fs::remove_dir_all(dir).ok();
}

#[test]
fn oracle_prints_the_coefficients() {
    let cfg = Path::new(env!("CARGO_MANIFEST_DIR")).join("examples/configs/stress_relaxed.toml");
    let out = Command::new(BIN).args(["oracle", cfg.to_str().unwrap()]).output().unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("[particle]"));
    assert!(text.contains("Lambda_3333 [1/T^2] = -1.51"));
    assert!(text.contains("Lambda_1133 [1/T^2] = 7.56"));
    assert!(text.contains("eps_33 = -3.06"));
}

#[test]
fn check_passes() {
    let out = Command::new(BIN).arg("check").output().unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(text.lines().filter(|l| l.starts_with("PASS")).count(), 6, "{text}");
}
