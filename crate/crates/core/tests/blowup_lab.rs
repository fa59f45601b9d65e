use frac_core::blowup_lab::*;
use frac_core::grid_spectral::{dilate, inverse, Grid, SpectralField};
use frac_core::observables::energy;
use frac_core::propagator::{SimConfig, Zoom};
use frac_core::{FracError, Field, C64};

const ALPHA: f64 = 1.8;

fn adaptive(g: Grid, lambda: f64, dt: f64, t_end: f64) -> SimConfig {
    let mut cfg = SimConfig::new(g, ALPHA, lambda, dt, t_end).unwrap().with_adaptive(0.1);
    cfg.zoom = Some(Zoom { tail_tol: 1e-3, shed_max: 0.5 });
    cfg.leak_tol = 0.5;
    cfg
}

/// Width-16 data on a box of half-width 256: the width-1 run blown up by ρ = 16 under
/// the scaling symmetry, so the (T* − t)^{1/(2α)} balls start inside the bump.
fn collapse_cfg(lambda: f64) -> SimConfig {
    let s = 16f64.powf(ALPHA);
    adaptive(Grid::new(2, 256, 256.0).unwrap(), lambda, 1e-3 * s, 0.5 * s)
}

#[test]
fn negative_energy_data_has_requested_mass() {
    let cfg = adaptive(Grid::new(2, 128, 16.0).unwrap(), 1.0, 1e-3, 0.1);
    let u = make_negative_energy_data(2.0, 1.0, &cfg).unwrap();
    assert!((u.norm_sq() - 2.0).abs() < 1e-10 * 2.0);
    assert!(energy(&u, ALPHA, 1.0).unwrap().energy < 0.0);
    // wide data only reaches E < 0 after shrinking
    let w = make_negative_energy_data(2.0, 8.0, &cfg).unwrap();
    assert!(energy(&w, ALPHA, 1.0).unwrap().energy < 0.0);
}

#[test]
fn defocusing_data_never_has_negative_energy() {
    let cfg = adaptive(Grid::new(2, 128, 16.0).unwrap(), -1.0, 1e-3, 0.1);
    match make_negative_energy_data(2.0, 1.0, &cfg) {
        Err(FracError::NoNegativeEnergy(table)) => assert!(!table.is_empty()),
        other => panic!("{other:?}"),
    }
    let g = cfg.grid;
    assert!(energy(&gaussian_with_mass(g, 2.0, 1.0), ALPHA, -1.0).unwrap().energy > 0.0);
}

#[test]
fn zero_data_completes() {
    let g = Grid::new(2, 32, 8.0).unwrap();
    let rep = detect_blowup(&Field::zeros(g), &adaptive(g, 1.0, 1e-2, 0.2), &WitnessPlan::default()).unwrap();
    assert_eq!(rep.verdict, Verdict::Completed);
    assert!(rep.growth.iter().all(|&(_, s)| s == 0.0));
    assert!(rep.witnesses.is_empty());
}

#[test]
fn small_defocusing_gaussian_completes() {
    let g = Grid::new(2, 64, 16.0).unwrap();
    let u0 = gaussian_with_mass(g, 0.1, 1.0);
    let rep = detect_blowup(&u0, &adaptive(g, -1.0, 1e-2, 1.0), &WitnessPlan::default()).unwrap();
    assert_eq!(rep.verdict, Verdict::Completed);
    assert!(rep.growth_factor < 2.0);
}

#[test]
fn detection_requires_adaptive_mode() {
    let g = Grid::new(2, 32, 8.0).unwrap();
    let cfg = SimConfig::new(g, ALPHA, 1.0, 1e-2, 0.1).unwrap();
    assert!(detect_blowup(&Field::zeros(g), &cfg, &WitnessPlan::default()).is_err());
}

#[test]
fn witness_times_approach_t_star_geometrically() {
    let t = witness_times(2.0, &WitnessPlan { start: 0.5, count: 3 });
    assert_eq!(t, vec![1.0, 1.5, 1.75, 1.875]);
}

#[test]
fn focusing_collapse_concentrates_and_twin_disperses() {
    let cfg = collapse_cfg(1.0);
    let u0 = make_negative_energy_data(2.0, 16.0, &cfg).unwrap();
    let plan = WitnessPlan { start: 0.5, count: 11 };
    let rep = detect_blowup(&u0, &cfg, &plan).unwrap();
    assert_eq!(rep.verdict, Verdict::BlowupTrigger);
    assert!(rep.growth_factor >= 1e3, "growth {}", rep.growth_factor);
    assert!(rep.witnesses.windows(2).all(|w| w[1].t > w[0].t));
    assert!(rep.witnesses.iter().all(|w| w.t < rep.t_star));

    let sched = Schedule::Power { exponent: 1.0 / (2.0 * ALPHA) };
    let scan = concentration_scan(&rep, &sched, ALPHA).unwrap();
    let f: Vec<f64> = scan.rows.iter().map(|r| r.fraction_of_initial).collect();
    assert!(f.windows(2).all(|w| w[1] >= w[0]), "{f:?}");
    assert!(scan.rows.windows(2).all(|w| w[1].ratio < w[0].ratio));

    // full box at every witness
    let boxed = Schedule::Constant { radius: 1e9 };
    let full = concentration_scan(&rep, &boxed, ALPHA).unwrap();
    for (row, w) in full.rows.iter().zip(&rep.witnesses) {
        assert!((row.mass_inside - w.u.norm_sq()).abs() < 1e-10 * w.u.norm_sq());
    }

    let twin = collapse_cfg(-1.0);
    let tw = capture_witnesses(&u0, &twin, &witness_times(rep.t_star, &plan)).unwrap();
    let ts = concentration_scan_at(&tw, rep.t_star, u0.norm_sq(), &sched, ALPHA).unwrap();
    let g: Vec<f64> = ts.rows.iter().map(|r| r.fraction).collect();
    assert!(g.windows(2).all(|w| w[1] <= w[0]), "{g:?}");
    assert!(*g.last().unwrap() < 0.01, "{g:?}");
}

#[test]
fn growing_radius_schedule_is_rejected() {
    let g = Grid::new(2, 32, 8.0).unwrap();
    let u = gaussian_with_mass(g, 1.0, 1.0);
    let wit: Vec<Witness> = [0.0, 0.5, 0.75].iter().map(|&t| Witness { t, u: u.clone() }).collect();
    // λ = (T* − t)^1 shrinks faster than (T* − t)^{1/α}
    match concentration_scan_at(&wit, 1.0, 1.0, &Schedule::Power { exponent: 1.0 }, ALPHA) {
        Err(FracError::ScheduleInvalid(t)) => assert_eq!(t, 0.5),
        other => panic!("{other:?}"),
    }
    let ok = concentration_scan_at(&wit, 1.0, 1.0, &Schedule::Power { exponent: 0.25 }, ALPHA).unwrap();
    assert_eq!(ok.rows.len(), 3);
}

#[test]
fn rescaling_probe_inverts_self_similar_input() {
    let g = Grid::new(2, 512, 128.0).unwrap();
    let ring = SpectralField::from_fn(g, |xi| {
        let r = xi.iter().map(|v| v * v).sum::<f64>().sqrt();
        C64::new((-(r - 0.5).powi(2) / 0.0098).exp(), 0.0)
    });
    let phi = inverse(&ring);
    let wit: Vec<Witness> =
        (0..3).map(|n| Witness { t: 1.0 - 2f64.powi(-n), u: dilate(&phi, -n, 1e-12).unwrap() }).collect();
    let p = rescaling_probe(&wit, 1.0, ALPHA).unwrap();
    assert_eq!(p.snapshots.len(), 3);
    for (n, s) in p.snapshots.iter().enumerate() {
        assert_eq!(s.h, 2f64.powi(1 - n as i32));
    }
    for d in &p.distances {
        let d = d.expect("rescaled snapshot missing");
        assert!(d < 1e-8 * phi.norm(), "{d}");
    }
    assert!(p.ratio_running_max.windows(2).all(|w| w[1] >= w[0]));
}

fn mm_cfg(dt: f64) -> SimConfig {
    adaptive(Grid::new(2, 64, 16.0).unwrap(), 1.0, dt, 0.5)
}

fn family(m: f64) -> frac_core::Result<Field> {
    Ok(gaussian_with_mass(Grid::new(2, 64, 16.0).unwrap(), m, 1.0))
}

#[test]
fn zero_bisections_return_the_seed() {
    let est = estimate_minimal_mass("gaussian w=1", &family, (0.5, 1.0), 0, &mm_cfg(4e-3)).unwrap();
    assert_eq!((est.m_lo, est.m_hi), (0.5, 1.0));
    assert_eq!(est.probes.len(), 2);
    assert_eq!(est.probes[0].verdict, Verdict::Completed);
    assert_eq!(est.probes[1].verdict, Verdict::BlowupTrigger);
}

#[test]
fn same_verdict_endpoints_are_rejected() {
    match estimate_minimal_mass("gaussian w=1", &family, (1.5, 2.0), 1, &mm_cfg(4e-3)) {
        Err(FracError::BracketInvalid(_)) => {}
        other => panic!("{other:?}"),
    }
    assert!(estimate_minimal_mass("gaussian w=1", &family, (1.0, 0.5), 1, &mm_cfg(4e-3)).is_err());
}

#[test]
fn bisection_halves_the_bracket_and_is_dt_robust() {
    let (a, b) = rayon::join(
        || estimate_minimal_mass("gaussian w=1", &family, (0.5, 1.0), 8, &mm_cfg(4e-3)).unwrap(),
        || estimate_minimal_mass("gaussian w=1", &family, (0.5, 1.0), 8, &mm_cfg(2e-3)).unwrap(),
    );
    for e in [&a, &b] {
        assert!((e.width() - 0.5 * 2f64.powi(-8)).abs() < 1e-12);
        assert!(e.m_lo < e.m_hi);
        let lo = e.probes.iter().filter(|p| p.mass == e.m_lo).all(|p| p.verdict == Verdict::Completed);
        let hi = e.probes.iter().filter(|p| p.mass == e.m_hi).all(|p| p.verdict == Verdict::BlowupTrigger);
        assert!(lo && hi);
    }
    assert!((a.midpoint() - b.midpoint()).abs() < a.width(), "{} vs {} (width {})", a.midpoint(), b.midpoint(), a.width());
}
