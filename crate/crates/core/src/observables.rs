//! Mass, energy, space-time norms, the refined Strichartz band functional
//! and concentration integrals.

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{FracError, Result};
use crate::grid_spectral::{
    apply_symbol_table, band_symbol, dealias_mask, forward, resolved_bands, riesz_multiplier,
    Field, SpectralField,
};
use crate::propagator::Trajectory;

pub fn mass(u: &Field) -> f64 {
    u.norm_sq()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConservationSample {
    pub t: f64,
    pub mass: f64,
    pub energy: f64,
    pub kinetic: f64,
    pub potential: f64,
}

/// ½∫ū|∇|^α u via Parseval.
pub fn kinetic_energy(u: &Field, alpha: f64) -> f64 {
    let s = forward(u);
    let g = u.grid;
    let sum: f64 =
        s.coeffs.iter().enumerate().map(|(k, v)| g.abs_xi(k).powf(alpha) * v.norm_sqr()).sum();
    0.5 * sum / g.box_volume()
}

/// ‖(−Δ)^{α/4}u‖₂.
pub fn hseminorm(u: &Field, alpha: f64) -> f64 {
    hseminorm_spectral(&forward(u), alpha)
}

pub fn hseminorm_spectral(s: &SpectralField, alpha: f64) -> f64 {
    let g = s.grid;
    let sum: f64 =
        s.coeffs.iter().enumerate().map(|(k, v)| g.abs_xi(k).powf(alpha) * v.norm_sqr()).sum();
    (sum / g.box_volume()).sqrt()
}

/// Hartree potential |x|^{−α} ∗ |u|², optionally with the 2/3-rule
/// truncation of the density spectrum.
pub fn hartree_potential(u: &Field, alpha: f64, dealias: bool) -> Result<Field> {
    let g = u.grid;
    let d = g.dim as f64;
    if !(alpha > 1.0 && alpha < d) {
        return Err(FracError::Domain(format!("Riesz exponent α = {alpha} not in (1, {d})")));
    }
    let rho = Field { grid: g, values: u.values.iter().map(|v| C64::new(v.norm_sqr(), 0.0)).collect() };
    let mut table = riesz_multiplier(&g, alpha);
    if dealias {
        for (m, keep) in table.iter_mut().zip(dealias_mask(&g)) {
            if !keep {
                *m = 0.0;
            }
        }
    }
    let table: Vec<C64> = table.into_iter().map(|m| C64::new(m, 0.0)).collect();
    let mut v = apply_symbol_table(&rho, &table);
    for z in v.values.iter_mut() {
        z.im = 0.0;
    }
    Ok(v)
}

/// E = ½∫ū|∇|^α u − (λ/4)∫ū(|x|^{−α}∗|u|²)u.
pub fn energy(u: &Field, alpha: f64, lambda: f64) -> Result<ConservationSample> {
    energy_with(u, alpha, lambda, false)
}

/// Energy with the potential computed the way the integrator computes it.
pub fn energy_with(u: &Field, alpha: f64, lambda: f64, dealias: bool) -> Result<ConservationSample> {
    let kinetic = kinetic_energy(u, alpha);
    let v = hartree_potential(u, alpha, dealias)?;
    let p: f64 = v.values.iter().zip(&u.values).map(|(v, z)| v.re * z.norm_sqr()).sum();
    let potential = -0.25 * lambda * p * u.grid.cell_volume();
    Ok(ConservationSample { t: 0.0, mass: mass(u), energy: kinetic + potential, kinetic, potential })
}

/// Exponent pair (q, r) and the gap β = d/2 − d/r − α/q.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StrichartzSpec {
    pub q: f64,
    pub r: f64,
    pub alpha: f64,
    pub dim: usize,
}

impl StrichartzSpec {
    pub fn new(q: f64, r: f64, alpha: f64, dim: usize) -> Result<StrichartzSpec> {
        if !(q > 2.0 && r > 2.0) {
            return Err(FracError::Domain(format!("exponents (q, r) = ({q}, {r}) must exceed 2")));
        }
        Ok(StrichartzSpec { q, r, alpha, dim })
    }

    /// (3, 6d/(3d − 2α)), the pair controlling global existence.
    pub fn critical(alpha: f64, dim: usize) -> StrichartzSpec {
        let d = dim as f64;
        StrichartzSpec { q: 3.0, r: 6.0 * d / (3.0 * d - 2.0 * alpha), alpha, dim }
    }

    /// The admissible pair with time exponent q: r = d/(d/2 − α/q).
    pub fn admissible_for(q: f64, alpha: f64, dim: usize) -> Result<StrichartzSpec> {
        let d = dim as f64;
        let gap = d / 2.0 - alpha / q;
        if !(q > 2.0 && gap > 0.0) {
            return Err(FracError::Domain(format!("no admissible r < ∞ for q = {q}, α = {alpha}, d = {dim}")));
        }
        StrichartzSpec::new(q, d / gap, alpha, dim)
    }

    pub fn beta(&self) -> f64 {
        let d = self.dim as f64;
        d / 2.0 - d / self.r - self.alpha / self.q
    }

    pub fn admissible(&self) -> bool {
        self.beta().abs() < 1e-12
    }
}

/// (Σ dt_k ‖u(t_k)‖_r^q)^{1/q} with left-endpoint rectangles over the
/// snapshot times.
pub fn strichartz_norm(traj: &Trajectory, spec: &StrichartzSpec) -> f64 {
    strichartz_power(traj, spec).powf(1.0 / spec.q)
}

/// The q-th power of [`strichartz_norm`], additive over disjoint windows.
pub fn strichartz_power(traj: &Trajectory, spec: &StrichartzSpec) -> f64 {
    let mut acc = 0.0;
    for w in 0..traj.times.len().saturating_sub(1) {
        let dt = traj.times[w + 1] - traj.times[w];
        acc += dt * traj.fields[w].lp_norm(spec.r).powf(spec.q);
    }
    acc
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RefinedStrichartzParams {
    pub p: f64,
    pub theta: f64,
}

impl Default for RefinedStrichartzParams {
    fn default() -> Self {
        RefinedStrichartzParams { p: 1.5, theta: 1.0 / 3.0 }
    }
}

impl RefinedStrichartzParams {
    pub fn new(p: f64, theta: f64) -> Result<Self> {
        if !(p > 1.0 && p < 2.0) {
            return Err(FracError::Domain(format!("p = {p} not in (1, 2)")));
        }
        if !(theta > 0.0 && theta < 1.0) {
            return Err(FracError::Domain(format!("θ = {theta} not in (0, 1)")));
        }
        Ok(RefinedStrichartzParams { p, theta })
    }

    pub fn weight_exponent(&self, dim: usize) -> f64 {
        dim as f64 * (0.5 - 1.0 / self.p)
    }
}

/// 2^{kd(1/2 − 1/p)} ‖χ_k f̂‖_p for every resolved band, lowest band first.
pub fn band_weights(s: &SpectralField, params: &RefinedStrichartzParams) -> Vec<(i32, f64)> {
    let g = s.grid;
    let (lo, hi) = resolved_bands(&g);
    let cell = g.dxi().powi(g.dim as i32);
    let e = params.weight_exponent(g.dim);
    let r: Vec<f64> = g.abs_xi_table();
    (lo..=hi)
        .map(|k| {
            let sum: f64 = s
                .coeffs
                .iter()
                .zip(&r)
                .map(|(v, &r)| {
                    let w = band_symbol(k, r);
                    if w == 0.0 {
                        0.0
                    } else {
                        (w * v.norm()).powf(params.p)
                    }
                })
                .sum();
            (k, 2f64.powf(k as f64 * e) * (sum * cell).powf(1.0 / params.p))
        })
        .collect()
}

/// sup over bands with its argmax; `None` for the zero field. Ties go to
/// the lower band.
pub fn refined_strichartz_functional(f: &Field, params: &RefinedStrichartzParams) -> (f64, Option<i32>) {
    best_band(&band_weights(&forward(f), params))
}

pub fn best_band(weights: &[(i32, f64)]) -> (f64, Option<i32>) {
    let mut best = (0.0, None);
    for &(k, w) in weights {
        if w > best.0 {
            best = (w, Some(k));
        }
    }
    best
}

/// ∫_{|x|≤R} |u|².
pub fn concentration_mass(u: &Field, radius: f64) -> Result<f64> {
    if radius < 0.0 {
        return Err(FracError::Domain(format!("radius {radius} must be nonnegative")));
    }
    Ok(u.mass_within(radius))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid_spectral::{inverse, Grid};
    use std::f64::consts::PI;

    fn unit_gaussian() -> Field {
        let g = Grid::new(2, 256, 16.0).unwrap();
        Field::radial(g, |r| (-r * r / 2.0).exp())
    }

    #[test]
    fn gaussian_mass_is_pi() {
        assert!((mass(&unit_gaussian()) - PI).abs() < 1e-10 * PI);
    }

    #[test]
    fn mass_homogeneity() {
        let u = unit_gaussian();
        let c = C64::new(0.3, -1.2);
        assert!((mass(&u.scale(c)) - c.norm_sqr() * mass(&u)).abs() < 1e-13);
    }

    #[test]
    fn plane_wave_kinetic() {
        let g = Grid::new(2, 32, PI).unwrap();
        let a = C64::new(0.7, 0.2);
        let u = Field::from_fn(g, |x| a * C64::new(0.0, 2.0 * x[0] + x[1]).exp());
        let alpha = 1.6;
        let expect = 0.5 * a.norm_sqr() * 5f64.powf(alpha / 2.0) * g.box_volume();
        assert!((kinetic_energy(&u, alpha) - expect).abs() < 1e-11 * expect);
    }

    #[test]
    fn energy_homogeneity_and_sign() {
        let g = Grid::new(2, 64, 8.0).unwrap();
        let u = Field::radial(g, |r| (-r * r).exp());
        let e1 = energy(&u, 1.8, 1.0).unwrap();
        let e2 = energy(&u.scale(C64::new(2.0, 0.0)), 1.8, 1.0).unwrap();
        assert!((e2.kinetic - 4.0 * e1.kinetic).abs() < 1e-12 * e2.kinetic);
        assert!((e2.potential - 16.0 * e1.potential).abs() < 1e-12 * e2.potential.abs());
        assert!(energy(&u, 1.8, -1.0).unwrap().energy > 0.0);
        assert_eq!(energy(&Field::zeros(g), 1.8, 1.0).unwrap().energy, 0.0);
    }

    #[test]
    fn critical_pair_is_admissible() {
        for &a in &[1.4, 1.5, 1.8, 2.0] {
            assert!(StrichartzSpec::critical(a, 2).admissible());
            assert!(StrichartzSpec::critical(a, 3).admissible());
            assert!(StrichartzSpec::admissible_for(12.0, a, 2).unwrap().admissible());
        }
        assert!(StrichartzSpec::admissible_for(2.0, 1.5, 2).is_err());
        assert!(!StrichartzSpec::new(4.0, 4.0, 1.5, 2).unwrap().admissible());
    }

    #[test]
    fn concentration_of_gaussian() {
        // e^{−r²} has |u|² = e^{−2r²}; use the unit Gaussian squared profile instead
        let g = Grid::new(2, 256, 16.0).unwrap();
        let u = Field::radial(g, |r| (-r * r / 2.0).exp());
        let m = concentration_mass(&u, 1.0).unwrap();
        // the lattice disc only approximates the disc; compare with a fine-grid value
        let exact = PI * (1.0 - (-1.0f64).exp());
        assert!((m - exact).abs() < 0.05 * exact);
        assert!((concentration_mass(&u, 16.0 * 2f64.sqrt()).unwrap() - mass(&u)).abs() < 1e-14);
        assert_eq!(concentration_mass(&u, 0.0).unwrap(), u.values[g.len() / 2 + g.n / 2].norm_sqr() * g.cell_volume());
    }

    #[test]
    fn single_band_argmax() {
        let g = Grid::new(2, 128, 16.0).unwrap();
        let s = SpectralField::from_fn(g, |xi| {
            let r = (xi[0] * xi[0] + xi[1] * xi[1]).sqrt();
            C64::new(band_symbol(1, r), 0.0)
        });
        let f = inverse(&s);
        let w = band_weights(&forward(&f), &RefinedStrichartzParams::default());
        let (v, k) = best_band(&w);
        assert_eq!(k, Some(1));
        assert!(v > 0.0);
        assert_eq!(refined_strichartz_functional(&Field::zeros(g), &RefinedStrichartzParams::default()).1, None);
    }
}
