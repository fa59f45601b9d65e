//! Blowup experiments: negative-energy data, blowup detection with witness
//! snapshots, bisection on the mass threshold of a data family, mass
//! concentration along a shrinking-radius schedule, and the rescaling probe
//! for compactness modulo scaling.

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{FracError, Result};
use crate::grid_spectral::{dilate, forward, Field, Grid};
use crate::observables::{band_weights, best_band, energy, RefinedStrichartzParams};
use crate::propagator::{evolve, Adaptive, EventKind, Observer, SimConfig};

/// Gaussian bump e^{−|x|²/(2w²)} scaled to mass `mass`; the width is
/// halved (at most ten times) until the energy is negative.
pub fn make_negative_energy_data(mass: f64, width: f64, cfg: &SimConfig) -> Result<Field> {
    if !(mass > 0.0 && width > 0.0) {
        return Err(FracError::Domain(format!("mass {mass} and width {width} must be positive")));
    }
    let mut table = Vec::new();
    let mut w = width;
    for _ in 0..=10 {
        let f = gaussian_with_mass(cfg.grid, mass, w);
        let e = energy(&f, cfg.alpha, cfg.lambda)?.energy;
        table.push((w, e));
        if e < 0.0 {
            return Ok(f);
        }
        w *= 0.5;
    }
    let rows: Vec<String> = table.iter().map(|(w, e)| format!("E({w:.4e}) = {e:.6e}")).collect();
    Err(FracError::NoNegativeEnergy(rows.join(", ")))
}

pub fn gaussian_with_mass(grid: Grid, mass: f64, width: f64) -> Field {
    let f = Field::radial(grid, |r| (-r * r / (2.0 * width * width)).exp());
    f.scale(C64::new((mass / f.norm_sq()).sqrt(), 0.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Verdict {
    BlowupTrigger,
    Completed,
    /// the run ended on a mass leak, step cap or non-finite state
    DomainTooSmall,
}

impl Verdict {
    pub fn label(&self) -> &'static str {
        match self {
            Verdict::BlowupTrigger => "blowup-trigger",
            Verdict::Completed => "completed",
            Verdict::DomainTooSmall => "domain-too-small",
        }
    }
}

#[derive(Debug, Clone)]
pub struct Witness {
    pub t: f64,
    /// physical field; its grid shrinks with every zoom before t
    pub u: Field,
}

#[derive(Debug, Clone)]
pub struct BlowupReport {
    pub verdict: Verdict,
    /// label of the terminal event, if any
    pub stop: Option<String>,
    /// surrogate T*: time of dt underflow, or the end time otherwise
    pub t_star: f64,
    pub dt_min: Option<f64>,
    /// (t, ‖u‖_{Ḣ^{α/2}}) after every accepted step
    pub growth: Vec<(f64, f64)>,
    /// max over the run of the seminorm relative to its initial value
    pub growth_factor: f64,
    pub lqlr_partial: f64,
    pub initial_mass: f64,
    pub zooms: usize,
    pub witnesses: Vec<Witness>,
}

/// Settings for [`detect_blowup`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WitnessPlan {
    /// t₀ as a fraction of T*
    pub start: f64,
    /// witnesses t_n = T* − (T* − t₀)2^{−n}, n = 0..=count
    pub count: usize,
}

impl Default for WitnessPlan {
    fn default() -> Self {
        WitnessPlan { start: 0.0, count: 12 }
    }
}

pub fn witness_times(t_star: f64, plan: &WitnessPlan) -> Vec<f64> {
    let t0 = plan.start * t_star;
    (0..=plan.count).map(|n| t_star - (t_star - t0) * 2f64.powi(-(n as i32))).collect()
}

/// Keeps the first state at or after each requested time.
struct Capture {
    times: Vec<f64>,
    next: usize,
    out: Vec<Witness>,
}

impl Observer for Capture {
    fn observe(&mut self, t: f64, u: &Field) {
        let mut taken = false;
        while self.next < self.times.len() && t >= self.times[self.next] {
            if !taken {
                self.out.push(Witness { t, u: u.clone() });
                taken = true;
            }
            self.next += 1;
        }
    }
}

/// States of the run from `u0` at the first steps reaching each of `times`
/// (sorted ascending). The initial state serves t ≤ 0. Repeated hits of the
/// same step are kept once, so the witness times are strictly increasing.
pub fn capture_witnesses(u0: &Field, cfg: &SimConfig, times: &[f64]) -> Result<Vec<Witness>> {
    let mut cap = Capture { times: times.to_vec(), next: 0, out: Vec::new() };
    if cap.times.first().is_some_and(|&t| t <= 0.0) {
        cap.out.push(Witness { t: 0.0, u: u0.clone() });
        while cap.next < cap.times.len() && cap.times[cap.next] <= 0.0 {
            cap.next += 1;
        }
    }
    let last = times.last().copied().unwrap_or(0.0);
    let mut run = *cfg;
    run.t_end = run.t_end.min(last.max(0.0));
    if run.t_end > 0.0 {
        evolve(u0, &run, &mut [&mut cap])?;
    }
    Ok(cap.out)
}

/// Run with adaptive stepping and classify the outcome. When the run ends
/// on a blowup trigger it is repeated (the integrator is deterministic) to
/// collect witness snapshots approaching T*.
pub fn detect_blowup(u0: &Field, cfg: &SimConfig, plan: &WitnessPlan) -> Result<BlowupReport> {
    let Adaptive::Threshold { dt_min, .. } = cfg.adaptive else {
        return Err(FracError::Domain("blowup detection needs adaptive stepping".into()));
    };
    let traj = evolve(u0, cfg, &mut [])?;
    let stop = traj.stop_event().copied();
    let verdict = match stop.map(|e| e.kind) {
        None => Verdict::Completed,
        Some(EventKind::BlowupTrigger) => Verdict::BlowupTrigger,
        Some(_) => Verdict::DomainTooSmall,
    };
    let growth: Vec<(f64, f64)> = traj.history.iter().map(|r| (r.t, r.hseminorm)).collect();
    let s0 = growth.first().map(|g| g.1).unwrap_or(0.0);
    let smax = growth.iter().map(|g| g.1).fold(0.0, f64::max);
    let t_star = traj.final_time();
    let witnesses = if verdict == Verdict::BlowupTrigger {
        let times = witness_times(t_star, plan);
        // the trigger step itself is rejected, so T* is never reached; stop just short
        let mut run = *cfg;
        run.t_end = t_star;
        capture_witnesses(u0, &run, &times)?
    } else {
        Vec::new()
    };
    Ok(BlowupReport {
        verdict,
        stop: stop.map(|e| e.kind.label().to_string()),
        t_star,
        dt_min: (verdict == Verdict::BlowupTrigger).then_some(dt_min),
        growth,
        growth_factor: if s0 > 0.0 { smax / s0 } else { 0.0 },
        lqlr_partial: traj.lqlr_norm(),
        initial_mass: u0.norm_sq(),
        zooms: traj.events.iter().filter(|e| e.kind == EventKind::Zoom).count(),
        witnesses,
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Probe {
    pub mass: f64,
    pub verdict: Verdict,
    pub t_star: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MinimalMassEstimate {
    pub family: String,
    pub m_lo: f64,
    pub m_hi: f64,
    pub probes: Vec<Probe>,
}

impl MinimalMassEstimate {
    pub fn midpoint(&self) -> f64 {
        0.5 * (self.m_lo + self.m_hi)
    }

    pub fn width(&self) -> f64 {
        self.m_hi - self.m_lo
    }
}

fn probe(family: &(dyn Fn(f64) -> Result<Field> + Sync), mass: f64, cfg: &SimConfig) -> Result<Probe> {
    let u0 = family(mass)?;
    let traj = evolve(&u0, cfg, &mut [])?;
    let verdict = match traj.stop_event().map(|e| e.kind) {
        None => Verdict::Completed,
        Some(EventKind::BlowupTrigger) => Verdict::BlowupTrigger,
        Some(_) => Verdict::DomainTooSmall,
    };
    Ok(Probe { mass, verdict, t_star: traj.final_time() })
}

/// Bisection on mass between a completed and a blowup-trigger verdict. The
/// result brackets the threshold of this family only.
pub fn estimate_minimal_mass(
    family_name: &str,
    family: &(dyn Fn(f64) -> Result<Field> + Sync),
    seed: (f64, f64),
    n_bisect: usize,
    cfg: &SimConfig,
) -> Result<MinimalMassEstimate> {
    let (mut lo, mut hi) = seed;
    if !(lo > 0.0 && lo < hi) {
        return Err(FracError::BracketInvalid(format!("seed bracket [{lo}, {hi}] is not increasing")));
    }
    if !matches!(cfg.adaptive, Adaptive::Threshold { .. }) {
        return Err(FracError::Domain("minimal-mass bisection needs adaptive stepping".into()));
    }
    let (a, b) = rayon::join(|| probe(family, lo, cfg), || probe(family, hi, cfg));
    let (a, b) = (a?, b?);
    if a.verdict != Verdict::Completed || b.verdict != Verdict::BlowupTrigger {
        return Err(FracError::BracketInvalid(format!(
            "endpoint verdicts are {} at {lo} and {} at {hi}",
            a.verdict.label(),
            b.verdict.label()
        )));
    }
    let mut probes = vec![a, b];
    for _ in 0..n_bisect {
        let mid = 0.5 * (lo + hi);
        let p = probe(family, mid, cfg)?;
        match p.verdict {
            Verdict::Completed => lo = mid,
            Verdict::BlowupTrigger => hi = mid,
            Verdict::DomainTooSmall => {
                return Err(FracError::BracketInvalid(format!(
                    "probe at mass {mid} ended with domain-too-small"
                )))
            }
        }
        probes.push(p);
    }
    Ok(MinimalMassEstimate { family: family_name.to_string(), m_lo: lo, m_hi: hi, probes })
}

/// Radius schedule λ(t) for concentration scans, written in terms of T* − t.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Schedule {
    /// λ = (T* − t)^p
    Power { exponent: f64 },
    Constant { radius: f64 },
}

impl Schedule {
    pub fn radius(&self, remaining: f64) -> f64 {
        match *self {
            Schedule::Power { exponent } => remaining.powf(exponent),
            Schedule::Constant { radius } => radius,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConcentrationRow {
    pub t: f64,
    pub radius: f64,
    /// (T* − t)^{1/α}/λ(t)
    pub ratio: f64,
    pub mass_inside: f64,
    /// mass_inside over the mass of the snapshot
    pub fraction: f64,
    /// mass_inside over the initial mass (mass dropped by zooms counts as outside)
    pub fraction_of_initial: f64,
    pub running_max: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConcentrationReport {
    pub t_star: f64,
    pub rows: Vec<ConcentrationRow>,
}

impl ConcentrationReport {
    pub fn fractions(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.fraction).collect()
    }
}

/// Concentration along the witnesses of a blowup report.
pub fn concentration_scan(report: &BlowupReport, schedule: &Schedule, alpha: f64) -> Result<ConcentrationReport> {
    if report.verdict != Verdict::BlowupTrigger {
        return Err(FracError::Domain(format!(
            "concentration scan needs a blowup-trigger report, got {}",
            report.verdict.label()
        )));
    }
    concentration_scan_at(&report.witnesses, report.t_star, report.initial_mass, schedule, alpha)
}

/// Concentration of arbitrary snapshots against a given T*, e.g. a
/// non-blowing twin run sampled at the blowup run's witness times. The
/// ratio (T* − t_n)^{1/α}/λ(t_n) must decrease strictly along the samples.
pub fn concentration_scan_at(
    witnesses: &[Witness],
    t_star: f64,
    initial_mass: f64,
    schedule: &Schedule,
    alpha: f64,
) -> Result<ConcentrationReport> {
    let mut rows: Vec<ConcentrationRow> = Vec::with_capacity(witnesses.len());
    let mut running = 0.0f64;
    for w in witnesses {
        let remaining = t_star - w.t;
        let radius = schedule.radius(remaining);
        if !(remaining > 0.0 && radius > 0.0) {
            return Err(FracError::ScheduleInvalid(w.t));
        }
        let ratio = remaining.powf(1.0 / alpha) / radius;
        if let Some(prev) = rows.last() {
            if !(ratio < prev.ratio) {
                return Err(FracError::ScheduleInvalid(w.t));
            }
        }
        let mass = w.u.norm_sq();
        let inside = w.u.mass_within(radius);
        let fraction = if mass > 0.0 { inside / mass } else { 0.0 };
        running = running.max(fraction);
        rows.push(ConcentrationRow {
            t: w.t,
            radius,
            ratio,
            mass_inside: inside,
            fraction,
            fraction_of_initial: if initial_mass > 0.0 { inside / initial_mass } else { 0.0 },
            running_max: running,
        });
    }
    Ok(ConcentrationReport { t_star, rows })
}

#[derive(Debug, Clone)]
pub struct RescaledSnapshot {
    pub t: f64,
    /// dyadic h_n = 2^{−k} for the argmax band k
    pub h: f64,
    pub band: i32,
    /// h^{d/2}u(t_n, h·) on the probe's reference grid
    pub field: Option<Field>,
    /// h_n/(T* − t_n)^{1/α}
    pub ratio: f64,
}

#[derive(Debug, Clone)]
pub struct RescalingProbe {
    pub snapshots: Vec<RescaledSnapshot>,
    /// ‖v_{n+1} − v_n‖₂ between consecutive rescaled snapshots
    pub distances: Vec<Option<f64>>,
    /// the same distance minimized over a constant phase
    pub phase_distances: Vec<Option<f64>>,
    pub ratio_running_max: Vec<f64>,
    pub warnings: Vec<String>,
}

/// Rescale each witness by its argmax band: v_n = h_n^{d/2}u(t_n, h_n·).
/// The reference grid is the first witness's grid stretched by 1/h_0;
/// later snapshots are brought to it with exact dyadic dilations.
pub fn rescaling_probe(witnesses: &[Witness], t_star: f64, alpha: f64) -> Result<RescalingProbe> {
    let params = RefinedStrichartzParams::default();
    let mut warnings = Vec::new();
    let mut snapshots: Vec<RescaledSnapshot> = Vec::new();
    let mut reference: Option<Grid> = None;
    for w in witnesses {
        let g = w.u.grid;
        let weights = band_weights(&forward(&w.u), &params);
        let Some(k) = best_band(&weights).1 else {
            warnings.push(format!("t = {}: zero snapshot", w.t));
            continue;
        };
        let top = weights.last().map(|x| x.0).unwrap_or(k);
        if k == top {
            warnings.push(format!("t = {}: argmax band {k} is the highest resolved band", w.t));
        }
        let h = 2f64.powi(-k);
        let natural = g.rescaled(1.0 / h);
        let refg = *reference.get_or_insert(natural);
        // natural.half_width = 2^j · refg.half_width
        let j = (natural.half_width / refg.half_width).log2().round() as i32;
        // values h^{d/2}u(x_i) sit at x_i/h; moved onto the reference grid and spread by 2^j
        let amp = (h * 2f64.powi(j)).powf(g.dim as f64 / 2.0);
        let on_ref = Field { grid: refg, values: w.u.values.iter().map(|v| v * amp).collect() };
        let field = match dilate(&on_ref, j, 1e-6) {
            Ok(f) => Some(f),
            Err(e) => {
                warnings.push(format!("t = {}: {e}", w.t));
                None
            }
        };
        let remaining = t_star - w.t;
        snapshots.push(RescaledSnapshot {
            t: w.t,
            h,
            band: k,
            field,
            ratio: if remaining > 0.0 { h / remaining.powf(1.0 / alpha) } else { f64::INFINITY },
        });
    }
    let mut distances = Vec::new();
    let mut phase_distances = Vec::new();
    for p in snapshots.windows(2) {
        match (&p[0].field, &p[1].field) {
            (Some(a), Some(b)) => {
                distances.push(Some(b.sub(a).norm()));
                let cross = a.inner(b).norm();
                phase_distances.push(Some((a.norm_sq() + b.norm_sq() - 2.0 * cross).max(0.0).sqrt()));
            }
            _ => {
                distances.push(None);
                phase_distances.push(None);
            }
        }
    }
    let mut running = 0.0f64;
    let ratio_running_max = snapshots
        .iter()
        .map(|s| {
            running = running.max(s.ratio);
            running
        })
        .collect();
    Ok(RescalingProbe { snapshots, distances, phase_distances, ratio_running_max, warnings })
}
