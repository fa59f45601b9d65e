//! Experiment configuration files.
//!
//! The file is TOML. Unknown sections and keys are rejected, and every
//! range violation names the offending key with its admissible set. The
//! grammar with all defaults is documented in the README.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use frac_core::grid_spectral::Grid;
use frac_core::observables::RefinedStrichartzParams;
use frac_core::profiles::ExtractionConfig;
use frac_core::propagator::{alpha_lower_bound, Adaptive, SimConfig, Zoom};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConfigError {
    #[error("{0}")]
    Syntax(String),
    #[error("missing key `{0}`")]
    Missing(String),
    #[error("`{key}` = {value} is out of range: {constraint}")]
    Range { key: String, value: String, constraint: String },
    #[error("unknown experiment kind `{0}`; expected one of {KINDS}")]
    UnknownKind(String),
}

const KINDS: &str = "evolve, decompose, wave-operator, blowup-scan, minimal-mass, nonlinear-check";

type Result<T> = std::result::Result<T, ConfigError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    Evolve,
    Decompose,
    WaveOperator,
    BlowupScan,
    MinimalMass,
    NonlinearCheck,
}

impl ExperimentKind {
    pub const ALL: [ExperimentKind; 6] = [
        ExperimentKind::Evolve,
        ExperimentKind::Decompose,
        ExperimentKind::WaveOperator,
        ExperimentKind::BlowupScan,
        ExperimentKind::MinimalMass,
        ExperimentKind::NonlinearCheck,
    ];

    pub fn label(&self) -> &'static str {
        match self {
            ExperimentKind::Evolve => "evolve",
            ExperimentKind::Decompose => "decompose",
            ExperimentKind::WaveOperator => "wave-operator",
            ExperimentKind::BlowupScan => "blowup-scan",
            ExperimentKind::MinimalMass => "minimal-mass",
            ExperimentKind::NonlinearCheck => "nonlinear-check",
        }
    }

    /// kinds that integrate the equation and so need a grid and a time step
    fn simulates(&self) -> bool {
        !matches!(self, ExperimentKind::Decompose)
    }
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for ExperimentKind {
    type Err = ConfigError;

    fn from_str(s: &str) -> Result<Self> {
        ExperimentKind::ALL
            .into_iter()
            .find(|k| k.label() == s)
            .ok_or_else(|| ConfigError::UnknownKind(s.to_string()))
    }
}

/// Initial data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "kebab-case")]
pub enum DataShape {
    /// a·e^{−|x|²/(2w²)}, given by amplitude or by mass
    Gaussian { amplitude: Option<f64>, mass: Option<f64>, width: f64 },
    /// Gaussian of the given mass, narrowed until the energy is negative
    NegativeEnergy { mass: f64, width: f64 },
    /// band-localized radial profile with φ̂ ∝ |ξ|⁸e^{−c|ξ|²}
    Annular { c: f64, norm: f64 },
    Snapshot { path: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DataSpec {
    pub shape: DataShape,
    /// amplitude of seeded complex noise added at every grid point
    pub noise: f64,
}

/// One profile of a synthetic mixture: U(t)[h^{−d/2}φ(·/h)], h = 2^m,
/// with φ of L² norm `norm` and a constant phase.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProfileSpec {
    pub shape: String,
    #[serde(default)]
    pub c: Option<f64>,
    #[serde(default)]
    pub width: Option<f64>,
    #[serde(default = "one")]
    pub norm: f64,
    #[serde(default)]
    pub m: i32,
    #[serde(default)]
    pub t: f64,
    #[serde(default)]
    pub phase: f64,
}

fn one() -> f64 {
    1.0
}

impl ProfileSpec {
    pub fn validate(&self, key: &str) -> Result<()> {
        match self.shape.as_str() {
            "annular" | "gaussian" => {}
            other => {
                return Err(ConfigError::Range {
                    key: format!("{key}.shape"),
                    value: format!("\"{other}\""),
                    constraint: "one of \"annular\", \"gaussian\"".into(),
                })
            }
        }
        if let Some(c) = self.c {
            positive(&format!("{key}.c"), c)?;
        }
        if let Some(w) = self.width {
            positive(&format!("{key}.width"), w)?;
        }
        check(&format!("{key}.norm"), self.norm, self.norm >= 0.0 && self.norm.is_finite(), "≥ 0")?;
        check(&format!("{key}.t"), self.t, self.t.is_finite(), "finite")?;
        check(&format!("{key}.phase"), self.phase, self.phase.is_finite(), "finite")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimParams {
    pub alpha: f64,
    pub lambda: f64,
    pub dt: f64,
    pub t_end: f64,
    pub dealias: bool,
    pub adaptive: Adaptive,
    pub zoom: Option<Zoom>,
    pub leak_tol: f64,
    pub max_steps: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum DecomposeInput {
    Files(Vec<String>),
    SynthManifest(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WaveOperatorSpec {
    pub t0: f64,
    pub tol: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlowupSpec {
    pub witness_start: f64,
    pub witness_count: usize,
    pub schedule_exponent: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MinimalMassSpec {
    pub m_lo: f64,
    pub m_hi: f64,
    pub n_bisect: usize,
    pub width: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NonlinearCheckSpec {
    pub window: f64,
    pub profiles: Vec<ProfileSpec>,
}

/// Validated experiment. Serializing it gives the canonical echo that the
/// config hash is taken over; the output directory is not part of it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    pub seed: u64,
    pub grid: Option<Grid>,
    pub sim: SimParams,
    pub data: Option<DataSpec>,
    pub extraction: ExtractionConfig,
    /// keep every k-th step in the trajectory table
    pub snapshot_every: usize,
    /// also write a snapshot file for every kept step
    pub field_snapshots: bool,
    pub decompose: Option<DecomposeInput>,
    pub wave_operator: Option<WaveOperatorSpec>,
    pub blowup: Option<BlowupSpec>,
    pub minimal_mass: Option<MinimalMassSpec>,
    pub nonlinear_check: Option<NonlinearCheckSpec>,
    #[serde(skip)]
    pub out_dir: PathBuf,
    /// directory relative input paths are resolved against
    #[serde(skip)]
    pub base_dir: PathBuf,
}

impl ExperimentConfig {
    pub fn sim_config(&self, grid: Grid) -> std::result::Result<SimConfig, frac_core::FracError> {
        let s = &self.sim;
        let cfg = SimConfig {
            alpha: s.alpha,
            lambda: s.lambda,
            grid,
            dt: s.dt,
            t_end: s.t_end,
            dealias: s.dealias,
            adaptive: s.adaptive,
            zoom: s.zoom,
            snapshot_every: self.snapshot_every,
            max_steps: s.max_steps,
            leak_tol: s.leak_tol,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn canonical_json(&self) -> String {
        serde_json::to_string(self).expect("config serializes")
    }

    pub fn resolve(&self, p: &str) -> PathBuf {
        let path = Path::new(p);
        if path.is_absolute() {
            path.to_path_buf()
        } else {
            self.base_dir.join(path)
        }
    }
}

// ---- raw file layout ----

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    kind: Option<String>,
    seed: Option<u64>,
    grid: Option<RawGrid>,
    sim: Option<RawSim>,
    data: Option<RawData>,
    output: Option<RawOutput>,
    extraction: Option<RawExtraction>,
    decompose: Option<RawDecompose>,
    wave_operator: Option<RawWave>,
    blowup: Option<RawBlowup>,
    minimal_mass: Option<RawMinimalMass>,
    nonlinear_check: Option<RawNonlinear>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawGrid {
    dim: Option<usize>,
    n: Option<usize>,
    half_width: Option<f64>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSim {
    alpha: Option<f64>,
    lambda: Option<f64>,
    dt: Option<f64>,
    t_end: Option<f64>,
    dealias: Option<bool>,
    adaptive_growth: Option<f64>,
    dt_min: Option<f64>,
    zoom_tail_tol: Option<f64>,
    zoom_shed_max: Option<f64>,
    leak_tol: Option<f64>,
    max_steps: Option<usize>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawData {
    shape: Option<String>,
    amplitude: Option<f64>,
    mass: Option<f64>,
    width: Option<f64>,
    c: Option<f64>,
    norm: Option<f64>,
    path: Option<String>,
    noise: Option<f64>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawOutput {
    dir: Option<String>,
    snapshot_every: Option<usize>,
    field_snapshots: Option<bool>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawExtraction {
    delta: Option<f64>,
    m_max: Option<usize>,
    shift_min: Option<f64>,
    shift_max: Option<f64>,
    shift_step: Option<f64>,
    mu_floor: Option<f64>,
    rho_perp: Option<f64>,
    t_sep: Option<f64>,
    detect_radius: Option<f64>,
    profile_radius: Option<f64>,
    cap_constant: Option<f64>,
    refined_p: Option<f64>,
    refined_theta: Option<f64>,
    max_passes: Option<usize>,
    window: Option<f64>,
    window_samples: Option<usize>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawDecompose {
    inputs: Option<Vec<String>>,
    synth_manifest: Option<String>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawWave {
    t0: Option<f64>,
    tol: Option<f64>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawBlowup {
    witness_start: Option<f64>,
    witness_count: Option<usize>,
    schedule_exponent: Option<f64>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawMinimalMass {
    m_lo: Option<f64>,
    m_hi: Option<f64>,
    n_bisect: Option<usize>,
    width: Option<f64>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawNonlinear {
    window: Option<f64>,
    profiles: Option<Vec<ProfileSpec>>,
}

// ---- checks ----

fn check(key: &str, value: impl fmt::Display, ok: bool, constraint: &str) -> Result<()> {
    if ok {
        Ok(())
    } else {
        Err(ConfigError::Range { key: key.into(), value: value.to_string(), constraint: constraint.into() })
    }
}

fn positive(key: &str, v: f64) -> Result<()> {
    check(key, v, v > 0.0 && v.is_finite(), "> 0")
}

fn need<T>(v: Option<T>, key: &str) -> Result<T> {
    v.ok_or_else(|| ConfigError::Missing(key.into()))
}

fn section<T>(v: Option<T>, name: &str, kind: ExperimentKind) -> Result<T> {
    v.ok_or_else(|| ConfigError::Missing(format!("[{name}] (required for {kind})")))
}

fn parse_grid(raw: RawGrid) -> Result<Grid> {
    let dim = raw.dim.unwrap_or(2);
    check("grid.dim", dim, (2..=3).contains(&dim), "one of 2, 3")?;
    let n = need(raw.n, "grid.n")?;
    check("grid.n", n, n >= 4 && n.is_power_of_two(), "a power of two ≥ 4")?;
    let half_width = need(raw.half_width, "grid.half_width")?;
    positive("grid.half_width", half_width)?;
    Grid::new(dim, n, half_width).map_err(|e| ConfigError::Range {
        key: "grid".into(),
        value: format!("({dim}, {n}, {half_width})"),
        constraint: e.to_string(),
    })
}

fn parse_sim(raw: RawSim, kind: ExperimentKind, dim: usize) -> Result<SimParams> {
    let alpha = need(raw.alpha, "sim.alpha")?;
    let d2 = 2 * dim;
    check(
        "sim.alpha",
        alpha,
        alpha > alpha_lower_bound(dim) && alpha <= 2.0,
        &format!("α ∈ (2d/(2d−1), 2] = ({d2}/{}, 2] for d = {dim}", d2 - 1),
    )?;
    let lambda = match raw.lambda {
        Some(l) => l,
        None if kind.simulates() => return Err(ConfigError::Missing("sim.lambda".into())),
        None => 1.0,
    };
    check("sim.lambda", lambda, lambda == 1.0 || lambda == -1.0, "+1 (focusing) or −1 (defocusing)")?;
    let (dt, t_end) = if kind.simulates() {
        (need(raw.dt, "sim.dt")?, need(raw.t_end, "sim.t_end")?)
    } else {
        (raw.dt.unwrap_or(1e-3), raw.t_end.unwrap_or(1.0))
    };
    positive("sim.dt", dt)?;
    check("sim.t_end", t_end, t_end >= 0.0 && t_end.is_finite(), "≥ 0")?;
    let wants_adaptive = matches!(kind, ExperimentKind::BlowupScan | ExperimentKind::MinimalMass);
    let growth = raw.adaptive_growth.or(wants_adaptive.then_some(0.1));
    let adaptive = match growth {
        None => {
            if raw.dt_min.is_some() {
                return Err(ConfigError::Missing("sim.adaptive_growth (sim.dt_min given)".into()));
            }
            Adaptive::Off
        }
        Some(growth) => {
            positive("sim.adaptive_growth", growth)?;
            let dt_min = raw.dt_min.unwrap_or(dt * 2f64.powi(-20));
            check("sim.dt_min", dt_min, dt_min > 0.0 && dt_min < dt, "0 < dt_min < dt")?;
            Adaptive::Threshold { growth, dt_min }
        }
    };
    let zoom = match raw.zoom_tail_tol {
        None => {
            if raw.zoom_shed_max.is_some() {
                return Err(ConfigError::Missing("sim.zoom_tail_tol (sim.zoom_shed_max given)".into()));
            }
            None
        }
        Some(tail_tol) => {
            check("sim.zoom_tail_tol", tail_tol, tail_tol > 0.0 && tail_tol < 1.0, "(0, 1)")?;
            let shed_max = raw.zoom_shed_max.unwrap_or(0.5);
            check("sim.zoom_shed_max", shed_max, (0.0..=1.0).contains(&shed_max), "[0, 1]")?;
            Some(Zoom { tail_tol, shed_max })
        }
    };
    let leak_tol = raw.leak_tol.unwrap_or(1e-3);
    check("sim.leak_tol", leak_tol, leak_tol > 0.0 && leak_tol <= 1.0, "(0, 1]")?;
    let max_steps = raw.max_steps.unwrap_or(10_000_000);
    check("sim.max_steps", max_steps, max_steps >= 1, "≥ 1")?;
    Ok(SimParams { alpha, lambda, dt, t_end, dealias: raw.dealias.unwrap_or(true), adaptive, zoom, leak_tol, max_steps })
}

fn parse_data(raw: RawData) -> Result<DataSpec> {
    let shape = need(raw.shape, "data.shape")?;
    let unused = |keys: &[(&str, bool)]| -> Result<()> {
        for (k, present) in keys {
            check(&format!("data.{k}"), "(set)", !present, &format!("not used by shape \"{shape}\""))?;
        }
        Ok(())
    };
    let shape = match shape.as_str() {
        "gaussian" => {
            unused(&[("c", raw.c.is_some()), ("norm", raw.norm.is_some()), ("path", raw.path.is_some())])?;
            let width = raw.width.unwrap_or(1.0);
            positive("data.width", width)?;
            match (raw.amplitude, raw.mass) {
                (Some(_), Some(_)) => {
                    return Err(ConfigError::Range {
                        key: "data.mass".into(),
                        value: "(set)".into(),
                        constraint: "give either data.amplitude or data.mass, not both".into(),
                    })
                }
                (None, None) => return Err(ConfigError::Missing("data.amplitude or data.mass".into())),
                (Some(a), None) => check("data.amplitude", a, a.is_finite(), "finite")?,
                (None, Some(m)) => check("data.mass", m, m >= 0.0 && m.is_finite(), "≥ 0")?,
            }
            DataShape::Gaussian { amplitude: raw.amplitude, mass: raw.mass, width }
        }
        "negative-energy" => {
            unused(&[
                ("amplitude", raw.amplitude.is_some()),
                ("c", raw.c.is_some()),
                ("norm", raw.norm.is_some()),
                ("path", raw.path.is_some()),
            ])?;
            let mass = need(raw.mass, "data.mass")?;
            positive("data.mass", mass)?;
            let width = raw.width.unwrap_or(1.0);
            positive("data.width", width)?;
            DataShape::NegativeEnergy { mass, width }
        }
        "annular" => {
            unused(&[
                ("amplitude", raw.amplitude.is_some()),
                ("mass", raw.mass.is_some()),
                ("width", raw.width.is_some()),
                ("path", raw.path.is_some()),
            ])?;
            let c = raw.c.unwrap_or(3.0);
            positive("data.c", c)?;
            let norm = raw.norm.unwrap_or(1.0);
            check("data.norm", norm, norm >= 0.0 && norm.is_finite(), "≥ 0")?;
            DataShape::Annular { c, norm }
        }
        "snapshot" => {
            unused(&[
                ("amplitude", raw.amplitude.is_some()),
                ("mass", raw.mass.is_some()),
                ("width", raw.width.is_some()),
                ("c", raw.c.is_some()),
                ("norm", raw.norm.is_some()),
            ])?;
            DataShape::Snapshot { path: need(raw.path, "data.path")? }
        }
        other => {
            return Err(ConfigError::Range {
                key: "data.shape".into(),
                value: format!("\"{other}\""),
                constraint: "one of \"gaussian\", \"negative-energy\", \"annular\", \"snapshot\"".into(),
            })
        }
    };
    let noise = raw.noise.unwrap_or(0.0);
    check("data.noise", noise, noise >= 0.0 && noise.is_finite(), "≥ 0")?;
    Ok(DataSpec { shape, noise })
}

fn parse_extraction(raw: Option<RawExtraction>, alpha: f64) -> Result<ExtractionConfig> {
    let d = ExtractionConfig::default();
    let Some(r) = raw else {
        return Ok(ExtractionConfig { alpha, ..d });
    };
    let cfg = ExtractionConfig {
        alpha,
        delta: r.delta.unwrap_or(d.delta),
        m_max: r.m_max.unwrap_or(d.m_max),
        shift_min: r.shift_min.unwrap_or(d.shift_min),
        shift_max: r.shift_max.unwrap_or(d.shift_max),
        shift_step: r.shift_step.unwrap_or(d.shift_step),
        mu_floor: r.mu_floor.unwrap_or(d.mu_floor),
        rho_perp: r.rho_perp.unwrap_or(d.rho_perp),
        t_sep: r.t_sep.unwrap_or(d.t_sep),
        detect_radius: r.detect_radius.unwrap_or(d.detect_radius),
        profile_radius: r.profile_radius.unwrap_or(d.profile_radius),
        cap_constant: r.cap_constant.unwrap_or(d.cap_constant),
        refined: RefinedStrichartzParams {
            p: r.refined_p.unwrap_or(d.refined.p),
            theta: r.refined_theta.unwrap_or(d.refined.theta),
        },
        max_passes: r.max_passes.unwrap_or(d.max_passes),
        window: r.window.unwrap_or(d.window),
        window_samples: r.window_samples.unwrap_or(d.window_samples),
    };
    positive("extraction.delta", cfg.delta)?;
    check("extraction.m_max", cfg.m_max, cfg.m_max >= 1, "≥ 1")?;
    positive("extraction.shift_step", cfg.shift_step)?;
    check("extraction.shift_max", cfg.shift_max, cfg.shift_max >= cfg.shift_min, "≥ extraction.shift_min")?;
    check("extraction.mu_floor", cfg.mu_floor, cfg.mu_floor >= 0.0, "≥ 0")?;
    check("extraction.rho_perp", cfg.rho_perp, cfg.rho_perp >= 4.0, "≥ 4")?;
    check("extraction.t_sep", cfg.t_sep, cfg.t_sep >= 0.0, "≥ 0")?;
    positive("extraction.detect_radius", cfg.detect_radius)?;
    check(
        "extraction.profile_radius",
        cfg.profile_radius,
        cfg.profile_radius >= cfg.detect_radius,
        "≥ extraction.detect_radius",
    )?;
    positive("extraction.cap_constant", cfg.cap_constant)?;
    check("extraction.refined_p", cfg.refined.p, cfg.refined.p > 1.0 && cfg.refined.p < 2.0, "(1, 2)")?;
    check(
        "extraction.refined_theta",
        cfg.refined.theta,
        cfg.refined.theta > 0.0 && cfg.refined.theta < 1.0,
        "(0, 1)",
    )?;
    check("extraction.max_passes", cfg.max_passes, cfg.max_passes >= 1, "≥ 1")?;
    positive("extraction.window", cfg.window)?;
    check("extraction.window_samples", cfg.window_samples, cfg.window_samples >= 2, "≥ 2")?;
    Ok(cfg)
}

/// Parse and validate config text. Relative input paths are resolved
/// against `base_dir`.
pub fn parse_config_str(text: &str, base_dir: &Path) -> Result<ExperimentConfig> {
    let raw: RawConfig = toml::from_str(text).map_err(|e| ConfigError::Syntax(e.to_string().trim_end().to_string()))?;
    let kind: ExperimentKind = need(raw.kind, "kind")?.parse()?;
    let seed = raw.seed.unwrap_or(0);

    let grid = match raw.grid {
        Some(g) => Some(parse_grid(g)?),
        None if kind.simulates() => return Err(section::<Grid>(None, "grid", kind).unwrap_err()),
        None => None,
    };
    let dim = grid.map(|g| g.dim).unwrap_or(2);
    let sim = parse_sim(section(raw.sim, "sim", kind)?, kind, dim)?;

    let needs_data = matches!(kind, ExperimentKind::Evolve | ExperimentKind::WaveOperator | ExperimentKind::BlowupScan);
    let data = match raw.data {
        Some(d) => Some(parse_data(d)?),
        None if needs_data => return Err(section::<DataSpec>(None, "data", kind).unwrap_err()),
        None => None,
    };

    let (out, snapshot_every, field_snapshots) = match raw.output {
        Some(o) => (o.dir, o.snapshot_every.unwrap_or(100), o.field_snapshots.unwrap_or(false)),
        None => (None, 100, false),
    };
    check("output.snapshot_every", snapshot_every, snapshot_every >= 1, "≥ 1")?;

    let extraction = parse_extraction(raw.extraction, sim.alpha)?;

    let decompose = if kind == ExperimentKind::Decompose {
        let d = section(raw.decompose, "decompose", kind)?;
        Some(match (d.inputs, d.synth_manifest) {
            (Some(_), Some(_)) => {
                return Err(ConfigError::Range {
                    key: "decompose.synth_manifest".into(),
                    value: "(set)".into(),
                    constraint: "give either decompose.inputs or decompose.synth_manifest, not both".into(),
                })
            }
            (None, None) => return Err(ConfigError::Missing("decompose.inputs or decompose.synth_manifest".into())),
            (Some(files), None) => {
                check("decompose.inputs", "[]", !files.is_empty(), "at least one file")?;
                DecomposeInput::Files(files)
            }
            (None, Some(m)) => DecomposeInput::SynthManifest(m),
        })
    } else {
        None
    };

    let wave_operator = if kind == ExperimentKind::WaveOperator {
        let w = section(raw.wave_operator, "wave_operator", kind)?;
        let t0 = w.t0.unwrap_or(0.0);
        check("wave_operator.t0", t0, t0.is_finite() && t0 < sim.t_end, "finite and < sim.t_end")?;
        let tol = w.tol.unwrap_or(1e-9);
        positive("wave_operator.tol", tol)?;
        Some(WaveOperatorSpec { t0, tol })
    } else {
        None
    };

    let blowup = if kind == ExperimentKind::BlowupScan {
        let b = section(raw.blowup, "blowup", kind)?;
        let witness_start = b.witness_start.unwrap_or(0.0);
        check("blowup.witness_start", witness_start, (0.0..1.0).contains(&witness_start), "[0, 1)")?;
        let witness_count = b.witness_count.unwrap_or(12);
        check("blowup.witness_count", witness_count, (1..=52).contains(&witness_count), "[1, 52]")?;
        let schedule_exponent = b.schedule_exponent.unwrap_or(1.0 / (2.0 * sim.alpha));
        check(
            "blowup.schedule_exponent",
            schedule_exponent,
            schedule_exponent > 0.0 && schedule_exponent < 1.0 / sim.alpha,
            "(0, 1/α)",
        )?;
        Some(BlowupSpec { witness_start, witness_count, schedule_exponent })
    } else {
        None
    };

    let minimal_mass = if kind == ExperimentKind::MinimalMass {
        let m = section(raw.minimal_mass, "minimal_mass", kind)?;
        let m_lo = need(m.m_lo, "minimal_mass.m_lo")?;
        positive("minimal_mass.m_lo", m_lo)?;
        let m_hi = need(m.m_hi, "minimal_mass.m_hi")?;
        check("minimal_mass.m_hi", m_hi, m_hi > m_lo && m_hi.is_finite(), "> minimal_mass.m_lo")?;
        let n_bisect = m.n_bisect.unwrap_or(8);
        check("minimal_mass.n_bisect", n_bisect, n_bisect <= 60, "≤ 60")?;
        let width = m.width.unwrap_or(1.0);
        positive("minimal_mass.width", width)?;
        Some(MinimalMassSpec { m_lo, m_hi, n_bisect, width })
    } else {
        None
    };

    let nonlinear_check = if kind == ExperimentKind::NonlinearCheck {
        let c = section(raw.nonlinear_check, "nonlinear_check", kind)?;
        let window = c.window.unwrap_or(sim.t_end);
        check("nonlinear_check.window", window, window > 0.0 && window <= sim.t_end, "(0, sim.t_end]")?;
        let profiles = need(c.profiles, "nonlinear_check.profiles")?;
        check("nonlinear_check.profiles", "[]", !profiles.is_empty(), "at least one profile")?;
        for (i, p) in profiles.iter().enumerate() {
            p.validate(&format!("nonlinear_check.profiles[{i}]"))?;
        }
        Some(NonlinearCheckSpec { window, profiles })
    } else {
        None
    };

    Ok(ExperimentConfig {
        kind,
        seed,
        grid,
        sim,
        data,
        extraction,
        snapshot_every,
        field_snapshots,
        decompose,
        wave_operator,
        blowup,
        minimal_mass,
        nonlinear_check,
        out_dir: PathBuf::from(out.unwrap_or_else(|| "out".into())),
        base_dir: base_dir.to_path_buf(),
    })
}

/// Read a config file. A relative `output.dir` is taken relative to the
/// file, like every other path in it.
pub fn parse_config(path: &Path) -> std::result::Result<ExperimentConfig, super::CliError> {
    let text = std::fs::read_to_string(path).map_err(super::io_err(path))?;
    let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
    let mut cfg = parse_config_str(&text, &base)?;
    if cfg.out_dir.is_relative() {
        cfg.out_dir = base.join(&cfg.out_dir);
    }
    Ok(cfg)
}

#[cfg(test)]
mod tests {
    use super::*;

    const EVOLVE: &str = r#"
kind = "evolve"
[grid]
n = 32
half_width = 8.0
[sim]
alpha = 1.8
lambda = 1
dt = 1e-2
t_end = 0.1
[data]
shape = "gaussian"
amplitude = 0.5
"#;

    fn parse(s: &str) -> Result<ExperimentConfig> {
        parse_config_str(s, Path::new("."))
    }

    #[test]
    fn minimal_evolve_gets_defaults() {
        let c = parse(EVOLVE).unwrap();
        assert_eq!(c.kind, ExperimentKind::Evolve);
        assert_eq!(c.seed, 0);
        assert_eq!(c.grid.unwrap().dim, 2);
        assert!(c.sim.dealias);
        assert_eq!(c.sim.adaptive, Adaptive::Off);
        assert_eq!(c.sim.zoom, None);
        assert_eq!(c.sim.leak_tol, 1e-3);
        assert_eq!(c.snapshot_every, 100);
        assert_eq!(c.extraction, ExtractionConfig { alpha: 1.8, ..Default::default() });
        assert_eq!(c.data.as_ref().unwrap().noise, 0.0);
        c.sim_config(c.grid.unwrap()).unwrap();
    }

    #[test]
    fn alpha_out_of_range_cites_interval() {
        let e = parse(&EVOLVE.replace("alpha = 1.8", "alpha = 2.5")).unwrap_err();
        let msg = e.to_string();
        assert!(msg.contains("sim.alpha") && msg.contains("(4/3, 2]"), "{msg}");
        let e = parse(&EVOLVE.replace("alpha = 1.8", "alpha = 1.3")).unwrap_err();
        assert!(matches!(e, ConfigError::Range { ref key, .. } if key == "sim.alpha"));
    }

    #[test]
    fn duplicate_key_is_named() {
        let e = parse(&EVOLVE.replace("dt = 1e-2", "dt = 1e-2\ndt = 2e-2")).unwrap_err();
        let msg = e.to_string();
        assert!(msg.contains("duplicate") && msg.contains("dt"), "{msg}");
    }

    #[test]
    fn unknown_kind_and_keys() {
        let e = parse(&EVOLVE.replace("\"evolve\"", "\"simulate\"")).unwrap_err();
        assert_eq!(e, ConfigError::UnknownKind("simulate".into()));
        let e = parse(&EVOLVE.replace("lambda = 1", "lambda = 1\nlamda = 1")).unwrap_err();
        assert!(e.to_string().contains("lamda"), "{e}");
    }

    #[test]
    fn missing_keys_and_sections() {
        assert_eq!(parse(&EVOLVE.replace("dt = 1e-2\n", "")).unwrap_err(), ConfigError::Missing("sim.dt".into()));
        let no_data = EVOLVE.split("[data]").next().unwrap();
        assert!(matches!(parse(no_data).unwrap_err(), ConfigError::Missing(k) if k.starts_with("[data]")));
        let wave = EVOLVE.replace("\"evolve\"", "\"wave-operator\"");
        assert!(matches!(parse(&wave).unwrap_err(), ConfigError::Missing(k) if k.starts_with("[wave_operator]")));
    }

    #[test]
    fn adaptive_defaults_for_blowup_kinds() {
        let s = EVOLVE.replace("\"evolve\"", "\"blowup-scan\"") + "[blowup]\n";
        let c = parse(&s).unwrap();
        assert_eq!(c.sim.adaptive, Adaptive::Threshold { growth: 0.1, dt_min: 1e-2 * 2f64.powi(-20) });
        let b = c.blowup.unwrap();
        assert!((b.schedule_exponent - 1.0 / 3.6).abs() < 1e-15);
        assert_eq!(b.witness_count, 12);
    }

    #[test]
    fn canonical_echo_round_trips() {
        let c = parse(EVOLVE).unwrap();
        let text = c.canonical_json();
        let back: ExperimentConfig = serde_json::from_str(&text).unwrap();
        assert_eq!(back.canonical_json(), text);
    }

    #[test]
    fn decompose_needs_no_grid() {
        let s = "kind = \"decompose\"\n[sim]\nalpha = 1.8\n[decompose]\ninputs = [\"a.frsh\"]\n";
        let c = parse(s).unwrap();
        assert!(c.grid.is_none());
        assert_eq!(c.decompose, Some(DecomposeInput::Files(vec!["a.frsh".into()])));
    }
}
