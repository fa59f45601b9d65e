use frac_core::grid_spectral::Grid;
use frac_core::observables::StrichartzSpec;
use frac_core::profiles::{
    annular_profile, nonlinear_decomposition_check, orthogonality_report, uniform_window, Decomposition,
    ExtractionConfig, NonlinearCheck, PairClass, ProfileComponent,
};
use frac_core::propagator::SimConfig;
use frac_core::{Field, C64};

fn dec_of(components: Vec<ProfileComponent>, alpha: f64) -> Decomposition {
    let g = components[0].phi.grid;
    Decomposition {
        config: ExtractionConfig { alpha, ..Default::default() },
        components,
        remainder: Some(Field::zeros(g)),
        diagnostics: None,
        warnings: Vec::new(),
    }
}

fn gaussian(g: Grid, norm: f64) -> Field {
    let phi = Field::radial(g, |r| (-r * r / 2.0).exp());
    phi.scale(C64::new(norm / phi.norm(), 0.0))
}

#[test]
fn self_pair_is_the_squared_norm() {
    let g = Grid::new(2, 64, 16.0).unwrap();
    let dec = dec_of(vec![ProfileComponent::new(gaussian(g, 1.0), 0, 0.0)], 1.8);
    let spec = StrichartzSpec::critical(1.8, 2);
    let rep = orthogonality_report(&dec, &uniform_window(0.0, 2.0, 9), &spec).unwrap();
    assert_eq!(rep.pairs.len(), 1);
    let p = &rep.pairs[0];
    assert_eq!(p.class, PairClass::Same);
    assert!((p.bilinear - rep.norms[0].powi(2)).abs() < 1e-12 * p.bilinear);
    assert!((p.ratio - 1.0).abs() < 1e-12);
    assert!(rep.defect.abs() < 1e-12);
}

#[test]
fn report_rejects_bad_input() {
    let g = Grid::new(2, 32, 8.0).unwrap();
    let dec = dec_of(vec![ProfileComponent::new(gaussian(g, 1.0), 0, 0.0)], 1.8);
    let ok = StrichartzSpec::critical(1.8, 2);
    assert!(orthogonality_report(&dec, &[0.0], &ok).is_err());
    assert!(orthogonality_report(&dec, &[0.0, 1.0, 0.5], &ok).is_err());
    let wrong_alpha = StrichartzSpec::critical(1.5, 2);
    assert!(orthogonality_report(&dec, &[0.0, 1.0], &wrong_alpha).is_err());
}

#[test]
fn time_separated_pair_decouples() {
    let g = Grid::new(2, 512, 256.0).unwrap();
    let phi = annular_profile(g, 3.0);
    let dec = dec_of(vec![ProfileComponent::new(phi.clone(), 0, 0.0), ProfileComponent::new(phi, 0, 50.0)], 1.8);
    let spec = StrichartzSpec::admissible_for(4.0, 1.8, 2).unwrap();
    let rep = orthogonality_report(&dec, &uniform_window(-60.0, 10.0, 141), &spec).unwrap();
    let p = rep.pairs.iter().find(|p| p.j != p.k).unwrap();
    assert_eq!(p.class, PairClass::Time);
    assert!(p.ratio < 0.1, "ratio {}", p.ratio);
}

#[test]
fn scale_separated_pair_decouples() {
    let g = Grid::new(2, 2048, 896.0).unwrap();
    let phi = gaussian(g, 1.0);
    let dec = dec_of(vec![ProfileComponent::new(phi.clone(), 0, 0.0), ProfileComponent::new(phi, 8, 0.0)], 1.8);
    let spec = StrichartzSpec::admissible_for(4.0, 1.8, 2).unwrap();
    let rep = orthogonality_report(&dec, &uniform_window(0.0, 1.0, 9), &spec).unwrap();
    let p = rep.pairs.iter().find(|p| p.j != p.k).unwrap();
    assert_eq!(p.class, PairClass::Scale);
    assert!(p.ratio < 0.1, "ratio {}", p.ratio);
}

fn nonlinear(comps: Vec<ProfileComponent>, lambda: f64, leak_tol: f64) -> NonlinearCheck {
    let g = comps[0].phi.grid;
    let dec = dec_of(comps, 1.8);
    let mut cfg = SimConfig { snapshot_every: 10, ..SimConfig::new(g, 1.8, lambda, 1e-3, 1.0).unwrap() };
    cfg.leak_tol = leak_tol;
    nonlinear_decomposition_check(&dec, &cfg, 1.0).unwrap()
}

#[test]
fn single_profile_has_no_error() {
    let g = Grid::new(2, 128, 56.0).unwrap();
    for amp in [0.05, 0.3] {
        let c = nonlinear(vec![ProfileComponent::new(gaussian(g, amp), 0, 0.0)], 1.0, 0.2);
        assert!(c.applicable);
        assert!(c.triple_norm <= 1e-12 * c.data_norm, "amp {amp}: |||e||| = {}", c.triple_norm);
        assert!(c.beta <= 1e-12);
    }
}

#[test]
fn small_scale_separated_profiles_superpose() {
    let g = Grid::new(2, 128, 56.0).unwrap();
    let phi = gaussian(g, 0.05);
    let c = nonlinear(vec![ProfileComponent::new(phi.clone(), 0, 0.0), ProfileComponent::new(phi, 4, 0.0)], 1.0, 0.2);
    assert!(c.applicable);
    let mass = c.data_norm * c.data_norm;
    assert!(c.triple_norm < 0.05 * mass, "|||e||| = {} vs mass {mass}", c.triple_norm);
    assert!(c.triple_norm < 0.05 * c.data_norm);
    assert!(c.beta > 0.0);
}

#[test]
fn cross_interaction_drops_with_scale_ratio() {
    let g = Grid::new(2, 256, 112.0).unwrap();
    let phi = gaussian(g, 0.3);
    let beta = |m: i32| {
        let c = nonlinear(
            vec![
                ProfileComponent::new(phi.clone(), 0, 0.0),
                ProfileComponent::new(phi.clone(), m, 0.0),
                ProfileComponent::new(phi.clone(), 0, -20.0),
            ],
            -1.0,
            0.3,
        );
        assert!(c.applicable, "{:?}", c.reason);
        c.beta
    };
    let (b4, b5) = (beta(4), beta(5));
    assert!(b4 >= 2.0 * b5, "β(2⁴) = {b4}, β(2⁵) = {b5}");
}

#[test]
fn blowing_profile_makes_check_inapplicable() {
    let g = Grid::new(2, 64, 8.0).unwrap();
    let f = Field::radial(g, |r| (-r * r / (2.0 * 0.25f64.powi(2))).exp());
    let f = f.scale(C64::new(6.0 / f.norm(), 0.0));
    let dec = dec_of(vec![ProfileComponent::new(f, 0, 0.0)], 1.8);
    let cfg = SimConfig::new(g, 1.8, 1.0, 1e-3, 1.0).unwrap();
    let c = nonlinear_decomposition_check(&dec, &cfg, 1.0).unwrap();
    assert!(!c.applicable);
    assert!(c.reason.is_some());
}
