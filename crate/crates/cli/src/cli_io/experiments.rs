//! One function per experiment kind. Each writes its artifacts through a
//! [`RunWriter`] and reports warnings that turn a completed run into exit
//! status 2.

use std::path::PathBuf;
use std::time::Instant;

use frac_core::blowup_lab::{
    concentration_scan, detect_blowup, estimate_minimal_mass, gaussian_with_mass, make_negative_energy_data,
    rescaling_probe, Schedule, Verdict, WitnessPlan,
};
use frac_core::grid_spectral::Grid;
use frac_core::profiles::{annular_profile, decompose, nonlinear_decomposition_check, Decomposition};
use frac_core::propagator::{evolve, wave_operator_solve, SimConfig};
use frac_core::{Field, C64};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

use super::artifacts::{num, RunWriter};
use super::config::{DataShape, DecomposeInput, ExperimentConfig, ExperimentKind};
use super::snapshot;
use super::synth::{self, manifest_frames};
use super::{CliError, Result, Status};

#[derive(Debug, Clone)]
pub struct Outcome {
    pub status: Status,
    pub manifest: PathBuf,
}

struct Report {
    warnings: Vec<String>,
    events: Value,
}

pub fn run_experiment(cfg: &ExperimentConfig) -> Result<Outcome> {
    let start = Instant::now();
    let canonical = cfg.canonical_json();
    let mut w = RunWriter::new(&cfg.out_dir, canonical.clone(), cfg.seed)?;
    let report = match cfg.kind {
        ExperimentKind::Evolve => run_evolve(cfg, &mut w)?,
        ExperimentKind::Decompose => run_decompose(cfg, &mut w)?,
        ExperimentKind::WaveOperator => run_wave_operator(cfg, &mut w)?,
        ExperimentKind::BlowupScan => run_blowup_scan(cfg, &mut w)?,
        ExperimentKind::MinimalMass => run_minimal_mass(cfg, &mut w)?,
        ExperimentKind::NonlinearCheck => run_nonlinear_check(cfg, &mut w)?,
    };
    let status = Status::from_warnings(report.warnings);
    let config: Value = serde_json::from_str(&canonical).expect("json");
    let manifest = w.finish(cfg.kind.label(), config, start.elapsed().as_secs_f64(), report.events, &status)?;
    Ok(Outcome { status, manifest })
}

fn grid_of(cfg: &ExperimentConfig) -> Grid {
    cfg.grid.expect("simulating kinds always carry a grid")
}

fn initial_data(cfg: &ExperimentConfig, sim: &SimConfig) -> Result<Field> {
    let grid = sim.grid;
    let spec = cfg.data.as_ref().expect("validated config carries data");
    let mut u = match &spec.shape {
        DataShape::Gaussian { amplitude: Some(a), width, .. } => {
            Field::radial(grid, |r| a * (-r * r / (2.0 * width * width)).exp())
        }
        DataShape::Gaussian { mass, width, .. } => gaussian_with_mass(grid, mass.unwrap_or(0.0), *width),
        DataShape::NegativeEnergy { mass, width } => make_negative_energy_data(*mass, *width, sim)?,
        DataShape::Annular { c, norm } => annular_profile(grid, *c).scale(C64::new(*norm, 0.0)),
        DataShape::Snapshot { path } => {
            let p = cfg.resolve(path);
            let s = snapshot::read(&p)?;
            s.field.grid.check_same(&grid).map_err(|e| CliError::Format { path: p, msg: e.to_string() })?;
            s.field
        }
    };
    if spec.noise > 0.0 {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        u.add_assign(&synth::noise_field(grid, spec.noise, &mut rng));
    }
    Ok(u)
}

fn run_evolve(cfg: &ExperimentConfig, w: &mut RunWriter) -> Result<Report> {
    let sim = cfg.sim_config(grid_of(cfg))?;
    let u0 = initial_data(cfg, &sim)?;
    let traj = evolve(&u0, &sim, &mut [])?;
    let rows: Vec<Vec<String>> = traj
        .log
        .iter()
        .map(|r| {
            vec![num(r.t), num(r.mass), num(r.energy), num(r.hseminorm), num(r.lqlr_partial), num(r.dt), r.event.clone()]
        })
        .collect();
    w.csv("trajectory.csv", &["t", "mass", "energy", "hseminorm", "lqlr_partial", "dt", "event"], &rows)?;
    if cfg.field_snapshots {
        for (i, f) in traj.fields.iter().enumerate() {
            w.snapshot(&format!("snapshot_{i:05}.frsh"), f, sim.alpha)?;
        }
    }
    w.snapshot("final.frsh", traj.final_field(), sim.alpha)?;
    let stop = traj.stop_event().copied();
    w.json(
        "evolve.json",
        &json!({
            "steps": traj.steps,
            "final_time": traj.final_time(),
            "stop": stop.map(|e| e.kind.label()),
            "events": traj.events,
            "strichartz_pair": { "q": traj.spec.q, "r": traj.spec.r },
            "lqlr_norm": traj.lqlr_norm(),
        }),
    )?;
    let warnings = stop
        .map(|e| vec![format!("run stopped at t = {} on {} (value {})", e.t, e.kind.label(), e.value)])
        .unwrap_or_default();
    Ok(Report { warnings, events: serde_json::to_value(&traj.events).expect("events") })
}

fn run_decompose(cfg: &ExperimentConfig, w: &mut RunWriter) -> Result<Report> {
    let (expected, paths) = match cfg.decompose.as_ref().expect("validated") {
        DecomposeInput::Files(files) => (None, files.iter().map(|f| cfg.resolve(f)).collect()),
        DecomposeInput::SynthManifest(m) => {
            let (count, frames) = manifest_frames(&cfg.resolve(m))?;
            (Some(count), frames)
        }
    };
    let mut warnings = Vec::new();
    let mut seq = Vec::with_capacity(paths.len());
    for p in &paths {
        let s = snapshot::read(p)?;
        if let Some(first) = seq.first() {
            let first: &Field = first;
            first.grid.check_same(&s.field.grid).map_err(|e| CliError::Format { path: p.clone(), msg: e.to_string() })?;
        }
        if (s.alpha - cfg.sim.alpha).abs() > 1e-12 {
            warnings.push(format!("{}: written with α = {}, decomposed with α = {}", p.display(), s.alpha, cfg.sim.alpha));
        }
        seq.push(s.field);
    }
    let dec = decompose(&seq, &cfg.extraction)?;
    for (i, c) in dec.components.iter().enumerate() {
        w.snapshot(&format!("profile_{i:02}.frsh"), &c.phi, cfg.sim.alpha)?;
    }
    if let Some(r) = &dec.remainder {
        w.snapshot("remainder.frsh", r, cfg.sim.alpha)?;
    }
    let comps: Vec<Value> = dec
        .components
        .iter()
        .enumerate()
        .map(|(i, c)| json!({ "index": i, "m": c.m, "h": c.h(), "t": c.t, "mass": c.mass() }))
        .collect();
    if let Some(n) = expected {
        if n != dec.components.len() {
            warnings.push(format!("found {} components, the synthesis manifest lists {n}", dec.components.len()));
        }
    }
    warnings.extend(dec.warnings.iter().cloned());
    w.json(
        "decomposition.json",
        &json!({
            "inputs": seq.len(),
            "component_count": dec.components.len(),
            "expected_component_count": expected,
            "components": comps,
            "remainder_mass": dec.remainder.as_ref().map(|r| r.norm_sq()),
            "diagnostics": dec.diagnostics,
            "warnings": dec.warnings,
        }),
    )?;
    Ok(Report { warnings, events: json!([]) })
}

fn run_wave_operator(cfg: &ExperimentConfig, w: &mut RunWriter) -> Result<Report> {
    let sim = cfg.sim_config(grid_of(cfg))?;
    let spec = cfg.wave_operator.as_ref().expect("validated");
    let g = initial_data(cfg, &sim)?;
    let sol = wave_operator_solve(&g, spec.t0, sim.t_end, spec.tol, &sim)?;
    let rows: Vec<Vec<String>> = sol
        .times
        .iter()
        .zip(&sol.deviation)
        .zip(&sol.u)
        .map(|((t, d), u)| vec![num(*t), num(*d), num(u.norm_sq())])
        .collect();
    w.csv("wave_operator.csv", &["t", "deviation", "mass"], &rows)?;
    w.snapshot("u_t0.frsh", &sol.u[0], sim.alpha)?;
    w.snapshot("u_end.frsh", sol.u.last().expect("nonempty lattice"), sim.alpha)?;
    let nonincreasing = sol.deviation.windows(2).all(|p| p[1] <= p[0]);
    w.json(
        "wave_operator.json",
        &json!({
            "t0": spec.t0,
            "t_end": sim.t_end,
            "tol": spec.tol,
            "samples": sol.times.len(),
            "iterations": sol.increments.len(),
            "increments": sol.increments,
            "contraction": sol.contraction,
            "residual": sol.residual,
            "tail_estimate": sol.tail_estimate,
            "deviation_nonincreasing": nonincreasing,
            "data_norm": g.norm(),
        }),
    )?;
    let mut warnings = Vec::new();
    if sol.contraction.iter().any(|&r| r >= 1.0) {
        warnings.push("an iteration did not contract".into());
    }
    Ok(Report { warnings, events: json!([]) })
}

fn run_blowup_scan(cfg: &ExperimentConfig, w: &mut RunWriter) -> Result<Report> {
    let sim = cfg.sim_config(grid_of(cfg))?;
    let spec = cfg.blowup.as_ref().expect("validated");
    let u0 = initial_data(cfg, &sim)?;
    let plan = WitnessPlan { start: spec.witness_start, count: spec.witness_count };
    let rep = detect_blowup(&u0, &sim, &plan)?;
    let mut warnings = Vec::new();
    if rep.verdict == Verdict::DomainTooSmall {
        warnings.push(format!("run ended on {} before a verdict", rep.stop.as_deref().unwrap_or("?")));
    }
    let rows: Vec<Vec<String>> = rep.growth.iter().map(|(t, s)| vec![num(*t), num(*s)]).collect();
    w.csv("growth.csv", &["t", "hseminorm"], &rows)?;
    for (i, wt) in rep.witnesses.iter().enumerate() {
        w.snapshot(&format!("witness_{i:02}.frsh"), &wt.u, sim.alpha)?;
    }
    let mut concentration = Value::Null;
    let mut rescaling = Value::Null;
    if rep.verdict == Verdict::BlowupTrigger {
        let schedule = Schedule::Power { exponent: spec.schedule_exponent };
        match concentration_scan(&rep, &schedule, sim.alpha) {
            Ok(c) => {
                let rows: Vec<Vec<String>> = c
                    .rows
                    .iter()
                    .map(|r| {
                        vec![
                            num(r.t),
                            num(r.radius),
                            num(r.ratio),
                            num(r.mass_inside),
                            num(r.fraction),
                            num(r.fraction_of_initial),
                            num(r.running_max),
                        ]
                    })
                    .collect();
                w.csv(
                    "concentration.csv",
                    &["t", "radius", "ratio", "mass_inside", "fraction", "fraction_of_initial", "running_max"],
                    &rows,
                )?;
                concentration = serde_json::to_value(&c).expect("report");
            }
            Err(e) => warnings.push(format!("concentration scan: {e}")),
        }
        match rescaling_probe(&rep.witnesses, rep.t_star, sim.alpha) {
            Ok(p) => {
                let snaps: Vec<Value> = p
                    .snapshots
                    .iter()
                    .map(|s| json!({ "t": s.t, "h": s.h, "band": s.band, "ratio": s.ratio, "resolved": s.field.is_some() }))
                    .collect();
                rescaling = json!({
                    "snapshots": snaps,
                    "distances": p.distances,
                    "phase_distances": p.phase_distances,
                    "ratio_running_max": p.ratio_running_max,
                    "warnings": p.warnings,
                });
                warnings.extend(p.warnings.iter().map(|m| format!("rescaling probe: {m}")));
            }
            Err(e) => warnings.push(format!("rescaling probe: {e}")),
        }
    }
    let witness_times: Vec<f64> = rep.witnesses.iter().map(|w| w.t).collect();
    w.json(
        "blowup.json",
        &json!({
            "verdict": rep.verdict.label(),
            "stop": rep.stop,
            "t_star": rep.t_star,
            "dt_min": rep.dt_min,
            "growth_factor": rep.growth_factor,
            "lqlr_partial": rep.lqlr_partial,
            "initial_mass": rep.initial_mass,
            "zooms": rep.zooms,
            "witness_times": witness_times,
            "schedule_exponent": spec.schedule_exponent,
            "concentration": concentration,
            "rescaling": rescaling,
        }),
    )?;
    let events = json!({ "verdict": rep.verdict.label(), "stop": rep.stop, "t_star": rep.t_star, "zooms": rep.zooms });
    Ok(Report { warnings, events })
}

fn run_minimal_mass(cfg: &ExperimentConfig, w: &mut RunWriter) -> Result<Report> {
    let grid = grid_of(cfg);
    let sim = cfg.sim_config(grid)?;
    let spec = cfg.minimal_mass.as_ref().expect("validated");
    let width = spec.width;
    let family = move |m: f64| Ok(gaussian_with_mass(grid, m, width));
    let name = format!("gaussian(width = {width})");
    let est = estimate_minimal_mass(&name, &family, (spec.m_lo, spec.m_hi), spec.n_bisect, &sim)?;
    let rows: Vec<Vec<String>> =
        est.probes.iter().map(|p| vec![num(p.mass), p.verdict.label().to_string(), num(p.t_star)]).collect();
    w.csv("probes.csv", &["mass", "verdict", "t_star"], &rows)?;
    w.json(
        "minimal_mass.json",
        &json!({
            "family": est.family,
            "m_lo": est.m_lo,
            "m_hi": est.m_hi,
            "midpoint": est.midpoint(),
            "width": est.width(),
            "probes": est.probes,
        }),
    )?;
    Ok(Report { warnings: Vec::new(), events: json!([]) })
}

fn run_nonlinear_check(cfg: &ExperimentConfig, w: &mut RunWriter) -> Result<Report> {
    let grid = grid_of(cfg);
    let sim = cfg.sim_config(grid)?;
    let spec = cfg.nonlinear_check.as_ref().expect("validated");
    let dec = Decomposition {
        config: cfg.extraction,
        components: synth::components(grid, &spec.profiles),
        remainder: Some(Field::zeros(grid)),
        diagnostics: None,
        warnings: Vec::new(),
    };
    let check = nonlinear_decomposition_check(&dec, &sim, spec.window)?;
    let rows: Vec<Vec<String>> =
        check.times.iter().zip(&check.error_l2).map(|(t, e)| vec![num(*t), num(*e)]).collect();
    w.csv("nonlinear_check.csv", &["t", "error_l2"], &rows)?;
    let mass: f64 = dec.components.iter().map(|c| c.mass()).sum();
    w.json(
        "nonlinear_check.json",
        &json!({ "check": check, "profile_mass": mass, "relative_to_mass": check.triple_norm / mass }),
    )?;
    let warnings = if check.applicable {
        Vec::new()
    } else {
        vec![format!("check not applicable: {}", check.reason.as_deref().unwrap_or("?"))]
    };
    Ok(Report { warnings, events: json!([]) })
}
