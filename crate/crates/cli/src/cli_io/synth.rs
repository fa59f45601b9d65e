//! Synthetic profile mixtures written to disk for the decomposition tests.
//!
//! The input is a JSON description:
//! `{"grid": {"dim", "n", "half_width"}, "alpha", "profiles": [...],
//!   "noise", "frames"}`; each profile is a [`ProfileSpec`]. Frame k is
//! U(τ_k) applied to Σ Γφ_j + ω, where ω is seeded noise of the given
//! amplitude.

use std::path::Path;

use frac_core::grid_spectral::Grid;
use frac_core::profiles::{annular_profile, synthesize, ProfileComponent};
use frac_core::propagator::{alpha_lower_bound, linear_propagate};
use frac_core::{Field, C64};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::json;

use super::artifacts::RunWriter;
use super::config::{ConfigError, ProfileSpec};
use super::{io_err, CliError, Result, Status};

pub const SYNTH_MANIFEST: &str = "synth_manifest.json";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    #[serde(default = "two")]
    pub dim: usize,
    pub n: usize,
    pub half_width: f64,
}

fn two() -> usize {
    2
}

fn origin() -> Vec<f64> {
    vec![0.0]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthSpec {
    pub grid: GridSpec,
    pub alpha: f64,
    pub profiles: Vec<ProfileSpec>,
    #[serde(default)]
    pub noise: f64,
    #[serde(default = "origin")]
    pub frames: Vec<f64>,
    #[serde(default)]
    pub seed: u64,
}

impl SynthSpec {
    pub fn canonical_json(&self) -> String {
        serde_json::to_string(self).expect("spec serializes")
    }

    pub fn validate(&self) -> std::result::Result<Grid, ConfigError> {
        let g = self.grid;
        let range = |key: &str, value: String, constraint: &str| ConfigError::Range {
            key: key.into(),
            value,
            constraint: constraint.into(),
        };
        let grid = Grid::new(g.dim, g.n, g.half_width)
            .map_err(|e| range("grid", format!("({}, {}, {})", g.dim, g.n, g.half_width), &e.to_string()))?;
        if !(self.alpha > alpha_lower_bound(g.dim) && self.alpha <= 2.0) {
            let d2 = 2 * g.dim;
            return Err(range("alpha", self.alpha.to_string(), &format!("α ∈ ({d2}/{}, 2]", d2 - 1)));
        }
        for (i, p) in self.profiles.iter().enumerate() {
            p.validate(&format!("profiles[{i}]"))?;
        }
        if !(self.noise >= 0.0 && self.noise.is_finite()) {
            return Err(range("noise", self.noise.to_string(), "≥ 0"));
        }
        if self.frames.is_empty() || self.frames.iter().any(|t| !t.is_finite()) {
            return Err(range("frames", format!("{:?}", self.frames), "nonempty list of finite times"));
        }
        Ok(grid)
    }
}

/// The unit-frame profile φ of a spec, with its norm and phase applied.
pub fn build_profile(grid: Grid, p: &ProfileSpec) -> Field {
    let base = match p.shape.as_str() {
        "annular" => annular_profile(grid, p.c.unwrap_or(3.0)),
        _ => {
            let w = p.width.unwrap_or(1.0);
            let f = Field::radial(grid, |r| (-r * r / (2.0 * w * w)).exp());
            let n = f.norm();
            f.scale(C64::new(1.0 / n, 0.0))
        }
    };
    base.scale(C64::from_polar(p.norm, p.phase))
}

pub fn components(grid: Grid, specs: &[ProfileSpec]) -> Vec<ProfileComponent> {
    specs.iter().map(|p| ProfileComponent::new(build_profile(grid, p), p.m, p.t)).collect()
}

/// Complex noise with both parts uniform in [−amp, amp].
pub fn noise_field(grid: Grid, amp: f64, rng: &mut ChaCha8Rng) -> Field {
    let values = (0..grid.len())
        .map(|_| C64::new(amp * rng.random_range(-1.0..=1.0), amp * rng.random_range(-1.0..=1.0)))
        .collect();
    Field { grid, values }
}

pub fn read_spec(path: &Path) -> Result<SynthSpec> {
    let text = std::fs::read_to_string(path).map_err(io_err(path))?;
    serde_json::from_str(&text).map_err(|e| CliError::Format { path: path.to_path_buf(), msg: e.to_string() })
}

/// Write the frames, the synthesis manifest and the run manifest into `out`.
pub fn run_synth(spec: &SynthSpec, out: &Path) -> Result<Status> {
    let t0 = std::time::Instant::now();
    let grid = spec.validate()?;
    let comps = components(grid, &spec.profiles);
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let omega = if spec.noise > 0.0 { noise_field(grid, spec.noise, &mut rng) } else { Field::zeros(grid) };
    let mixture = synthesize(&comps, &omega, spec.alpha)?;
    let canonical = spec.canonical_json();
    let mut w = RunWriter::new(out, canonical.clone(), spec.seed)?;
    let mut frames = Vec::new();
    for (k, &tau) in spec.frames.iter().enumerate() {
        let name = format!("frame_{k:03}.frsh");
        w.snapshot(&name, &linear_propagate(&mixture, tau, spec.alpha)?, spec.alpha)?;
        frames.push(json!({ "file": name, "t": tau }));
    }
    let listing: Vec<_> = spec
        .profiles
        .iter()
        .zip(&comps)
        .enumerate()
        .map(|(i, (p, c))| json!({ "index": i, "shape": p.shape, "m": p.m, "t": p.t, "mass": c.mass() }))
        .collect();
    w.json(
        SYNTH_MANIFEST,
        &json!({
            "component_count": comps.len(),
            "alpha": spec.alpha,
            "grid": grid,
            "components": listing,
            "noise": spec.noise,
            "frames": frames,
            "mixture_mass": mixture.norm_sq(),
        }),
    )?;
    let status = Status::Completed;
    let config: serde_json::Value = serde_json::from_str(&canonical).expect("json");
    w.finish("synth", config, t0.elapsed().as_secs_f64(), json!([]), &status)?;
    Ok(status)
}

/// Frame files listed in a synthesis manifest, resolved against its directory.
pub fn manifest_frames(path: &Path) -> Result<(usize, Vec<std::path::PathBuf>)> {
    let text = std::fs::read_to_string(path).map_err(io_err(path))?;
    let bad = |msg: &str| CliError::Format { path: path.to_path_buf(), msg: msg.into() };
    let v: serde_json::Value = serde_json::from_str(&text).map_err(|e| bad(&e.to_string()))?;
    let r = v.get("report").ok_or_else(|| bad("no report"))?;
    let count = r.get("component_count").and_then(|c| c.as_u64()).ok_or_else(|| bad("no component_count"))?;
    let dir = path.parent().unwrap_or(Path::new("."));
    let frames = r
        .get("frames")
        .and_then(|f| f.as_array())
        .ok_or_else(|| bad("no frames"))?
        .iter()
        .map(|f| f.get("file").and_then(|s| s.as_str()).map(|s| dir.join(s)).ok_or_else(|| bad("frame without file")))
        .collect::<Result<Vec<_>>>()?;
    Ok((count as usize, frames))
}
