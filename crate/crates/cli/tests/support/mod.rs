//! Configs and process helpers shared by the CLI test targets.
#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use frac_cli::cli_io::artifacts::Manifest;
use serde_json::Value;

pub const EVOLVE: &str = r#"
kind = "evolve"
seed = 7
[grid]
n = 32
half_width = 8.0
[sim]
alpha = 1.8
lambda = 1
dt = 1e-2
t_end = 0.2
[data]
shape = "gaussian"
amplitude = 0.5
noise = 1e-3
[output]
snapshot_every = 5
field_snapshots = true
"#;

pub const WAVE: &str = r#"
kind = "wave-operator"
[grid]
n = 32
half_width = 8.0
[sim]
alpha = 1.8
lambda = 1
dt = 1e-2
t_end = 0.5
leak_tol = 0.05
[data]
shape = "gaussian"
mass = 1e-4
[wave_operator]
tol = 1e-10
"#;

pub const BLOWUP: &str = r#"
kind = "blowup-scan"
[grid]
n = 64
half_width = 16.0
[sim]
alpha = 1.8
lambda = 1
dt = 1e-3
t_end = 0.5
zoom_tail_tol = 1e-3
leak_tol = 0.5
[data]
shape = "negative-energy"
mass = 2.0
[blowup]
witness_start = 0.5
witness_count = 4
"#;

pub const MINIMAL_MASS: &str = r#"
kind = "minimal-mass"
[grid]
n = 64
half_width = 16.0
[sim]
alpha = 1.8
lambda = 1
dt = 4e-3
t_end = 0.5
zoom_tail_tol = 1e-3
leak_tol = 0.5
[minimal_mass]
m_lo = 0.5
m_hi = 1.0
n_bisect = 3
"#;

pub const NONLINEAR: &str = r#"
kind = "nonlinear-check"
[grid]
n = 64
half_width = 28.0
[sim]
alpha = 1.8
lambda = 1
dt = 1e-2
t_end = 0.5
leak_tol = 0.2
[output]
snapshot_every = 5
[nonlinear_check]
profiles = [
  { shape = "gaussian", norm = 0.05 },
  { shape = "gaussian", norm = 0.05, m = 2 },
]
"#;

pub const MIXTURE: &str = r#"{"grid": {"n": 256, "half_width": 185.0}, "alpha": 1.8,
 "profiles": [
  {"shape": "annular", "c": 3.0},
  {"shape": "annular", "c": 3.0, "norm": 0.8, "phase": 0.7, "t": 20.0},
  {"shape": "annular", "c": 3.0, "norm": 0.9, "m": 4}
 ]}"#;

pub const DECOMPOSE: &str = r#"
kind = "decompose"
[sim]
alpha = 1.8
[decompose]
synth_manifest = "mix/synth_manifest.json"
"#;

pub fn frac(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_frac")).args(args).output().expect("binary runs")
}

pub fn write_config(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

pub fn run(dir: &Path, kind: &str, text: &str, out: &str) -> Output {
    let cfg = write_config(dir, &format!("{kind}.toml"), text);
    let out = dir.join(out);
    frac(&[kind, "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()])
}

pub fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

pub fn manifest(dir: &Path) -> Manifest {
    serde_json::from_str(&std::fs::read_to_string(dir.join("manifest.json")).unwrap()).unwrap()
}

pub fn report(path: &Path) -> Value {
    let v: Value = serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap();
    v["report"].clone()
}

/// Compare two run directories: every listed artifact byte for byte, and
/// the manifests with the wall time removed. Returns the artifact count.
pub fn compare_runs(a: &Path, b: &Path) -> Result<usize, String> {
    let (ma, mb) = (manifest(a), manifest(b));
    if ma.artifacts != mb.artifacts {
        return Err(format!("artifact lists differ in {}", a.display()));
    }
    for art in &ma.artifacts {
        let (x, y) = (std::fs::read(a.join(&art.path)), std::fs::read(b.join(&art.path)));
        match (x, y) {
            (Ok(x), Ok(y)) if x == y => {}
            _ => return Err(format!("{} differs", art.path)),
        }
    }
    let strip = |m: &Manifest| Manifest { wall_time_s: 0.0, ..m.clone() };
    if strip(&ma) != strip(&mb) {
        return Err("manifests differ beyond the wall time".into());
    }
    Ok(ma.artifacts.len())
}
