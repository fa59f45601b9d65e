//! Stamped artifact writers, the run manifest and the verifier.
//!
//! Every artifact carries the SHA-256 of the canonical config and the seed:
//! JSON files as top-level `config_hash`/`seed` fields, CSV files in a first
//! comment line `# config_hash=<hex> seed=<u64>`, snapshots in their stamp
//! trailer. The manifest lists each artifact with its own SHA-256.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use super::config::ExperimentConfig;
use super::snapshot::{self, Stamp};
use super::synth::SynthSpec;
use super::{io_err, CliError, Result, Status};
use frac_core::Field;

pub const MANIFEST: &str = "manifest.json";

pub fn sha256(bytes: &[u8]) -> [u8; 32] {
    Sha256::digest(bytes).into()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArtifactRecord {
    pub path: String,
    pub sha256: String,
    pub bytes: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub kind: String,
    pub config_hash: String,
    pub seed: u64,
    pub config: Value,
    /// exact text the hash was taken over
    pub config_canonical: String,
    pub versions: Value,
    pub wall_time_s: f64,
    pub events: Value,
    pub artifacts: Vec<ArtifactRecord>,
    pub warnings: Vec<String>,
    pub status: String,
}

/// Output directory of one run.
pub struct RunWriter {
    pub dir: PathBuf,
    pub stamp: Stamp,
    canonical: String,
    records: Vec<ArtifactRecord>,
}

impl RunWriter {
    pub fn new(dir: &Path, canonical: String, seed: u64) -> Result<RunWriter> {
        std::fs::create_dir_all(dir).map_err(io_err(dir))?;
        let stamp = Stamp { config_hash: sha256(canonical.as_bytes()), seed };
        Ok(RunWriter { dir: dir.to_path_buf(), stamp, canonical, records: Vec::new() })
    }

    pub fn hash_hex(&self) -> String {
        hex::encode(self.stamp.config_hash)
    }

    fn put(&mut self, name: &str, bytes: &[u8]) -> Result<()> {
        let path = self.dir.join(name);
        std::fs::write(&path, bytes).map_err(io_err(&path))?;
        self.records.retain(|r| r.path != name);
        self.records.push(ArtifactRecord {
            path: name.to_string(),
            sha256: hex::encode(sha256(bytes)),
            bytes: bytes.len() as u64,
        });
        Ok(())
    }

    /// `{"config_hash", "seed", "report": value}`, pretty-printed.
    pub fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        let doc = json!({
            "config_hash": self.hash_hex(),
            "seed": self.stamp.seed,
            "report": serde_json::to_value(value).expect("report serializes"),
        });
        let mut text = serde_json::to_string_pretty(&doc).expect("json");
        text.push('\n');
        self.put(name, text.as_bytes())
    }

    pub fn csv(&mut self, name: &str, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
        let mut text = format!("# config_hash={} seed={}\n{}\n", self.hash_hex(), self.stamp.seed, header.join(","));
        for r in rows {
            debug_assert_eq!(r.len(), header.len());
            text.push_str(&r.join(","));
            text.push('\n');
        }
        self.put(name, text.as_bytes())
    }

    pub fn snapshot(&mut self, name: &str, field: &Field, alpha: f64) -> Result<()> {
        let bytes = snapshot::encode(field, alpha, Some(&self.stamp));
        self.put(name, &bytes)
    }

    /// Write the manifest last; it is not itself listed.
    pub fn finish(self, kind: &str, config: Value, wall: f64, events: Value, status: &Status) -> Result<PathBuf> {
        let warnings = match status {
            Status::Completed => Vec::new(),
            Status::Warnings(w) => w.clone(),
        };
        let m = Manifest {
            kind: kind.to_string(),
            config_hash: self.hash_hex(),
            seed: self.stamp.seed,
            config,
            config_canonical: self.canonical,
            versions: json!({ "frac_core": frac_core::VERSION, "frac_cli": env!("CARGO_PKG_VERSION") }),
            wall_time_s: wall,
            events,
            artifacts: self.records,
            warnings,
            status: if status.exit_code() == 0 { "completed".into() } else { "warnings".into() },
        };
        let path = self.dir.join(MANIFEST);
        let mut text = serde_json::to_string_pretty(&m).expect("manifest");
        text.push('\n');
        std::fs::write(&path, text).map_err(io_err(&path))?;
        Ok(path)
    }
}

/// Format a float so that it parses back to the same bits.
pub fn num(v: f64) -> String {
    format!("{v:e}")
}

#[derive(Debug, Clone, PartialEq)]
pub struct VerifyReport {
    pub kind: String,
    pub config_hash: String,
    pub artifacts: usize,
}

/// Re-hash the canonical config and check every listed artifact: its
/// digest, and the hash and seed stamped inside it.
pub fn verify(dir: &Path) -> Result<VerifyReport> {
    let mpath = dir.join(MANIFEST);
    let text = std::fs::read_to_string(&mpath).map_err(io_err(&mpath))?;
    let m: Manifest =
        serde_json::from_str(&text).map_err(|e| CliError::Format { path: mpath.clone(), msg: e.to_string() })?;
    let mut problems = Vec::new();
    let hash = sha256(m.config_canonical.as_bytes());
    let hash_hex = hex::encode(hash);
    if hash_hex != m.config_hash {
        problems.push(format!("config hash {} does not match the canonical config ({hash_hex})", m.config_hash));
    }
    // the canonical text must be what the program itself would emit
    let recanon = if m.kind == "synth" {
        serde_json::from_str::<SynthSpec>(&m.config_canonical).map(|s| s.canonical_json())
    } else {
        serde_json::from_str::<ExperimentConfig>(&m.config_canonical).map(|c| c.canonical_json())
    };
    match recanon {
        Ok(t) if t == m.config_canonical => {}
        Ok(_) => problems.push("canonical config is not in canonical form".into()),
        Err(e) => problems.push(format!("canonical config does not parse: {e}")),
    }
    if serde_json::from_str::<Value>(&m.config_canonical).ok().as_ref() != Some(&m.config) {
        problems.push("config echo differs from the canonical config".into());
    }
    for a in &m.artifacts {
        let p = dir.join(&a.path);
        let bytes = match std::fs::read(&p) {
            Ok(b) => b,
            Err(e) => {
                problems.push(format!("{}: {e}", a.path));
                continue;
            }
        };
        if hex::encode(sha256(&bytes)) != a.sha256 {
            problems.push(format!("{}: content digest changed", a.path));
        }
        if let Err(e) = check_stamp(&a.path, &bytes, &hash_hex, m.seed) {
            problems.push(format!("{}: {e}", a.path));
        }
    }
    if problems.is_empty() {
        Ok(VerifyReport { kind: m.kind, config_hash: m.config_hash, artifacts: m.artifacts.len() })
    } else {
        let mut msg = String::new();
        for p in &problems {
            let _ = write!(msg, "\n  {p}");
        }
        Err(CliError::Verify(msg))
    }
}

fn check_stamp(name: &str, bytes: &[u8], hash_hex: &str, seed: u64) -> std::result::Result<(), String> {
    if name.ends_with(".json") {
        let v: Value = serde_json::from_slice(bytes).map_err(|e| e.to_string())?;
        if v.get("config_hash").and_then(Value::as_str) != Some(hash_hex) {
            return Err("config_hash field missing or wrong".into());
        }
        if v.get("seed").and_then(Value::as_u64) != Some(seed) {
            return Err("seed field missing or wrong".into());
        }
    } else if name.ends_with(".csv") {
        let first = bytes.split(|&b| b == b'\n').next().unwrap_or_default();
        if first != format!("# config_hash={hash_hex} seed={seed}").as_bytes() {
            return Err("stamp line missing or wrong".into());
        }
    } else if name.ends_with(".frsh") {
        let s = snapshot::decode(bytes)?;
        match s.stamp {
            Some(st) if hex::encode(st.config_hash) == hash_hex && st.seed == seed => {}
            _ => return Err("snapshot stamp missing or wrong".into()),
        }
    } else {
        return Err("unknown artifact type".into());
    }
    Ok(())
}
