//! Periodic grids, Fourier transforms with the continuum normalization,
//! Fourier multipliers (fractional Laplacian, Riesz potential), dyadic
//! Littlewood-Paley projections, dyadic dilations and radial averaging.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::{Arc, Mutex, OnceLock};

use num_complex::Complex64 as C64;
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};
use statrs::function::gamma::{gamma, gamma_ur};

use crate::error::{FracError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub dim: usize,
    pub n: usize,
    pub half_width: f64,
}

impl Grid {
    pub fn new(dim: usize, n: usize, half_width: f64) -> Result<Grid> {
        if !(2..=3).contains(&dim) {
            return Err(FracError::Domain(format!("dimension {dim} not in {{2, 3}}")));
        }
        if n < 4 || !n.is_power_of_two() {
            return Err(FracError::Domain(format!("N = {n} must be a power of two >= 4")));
        }
        if !(half_width.is_finite() && half_width > 0.0) {
            return Err(FracError::Domain(format!("half-width {half_width} must be positive")));
        }
        Ok(Grid { dim, n, half_width })
    }

    pub fn len(&self) -> usize {
        self.n.pow(self.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn dx(&self) -> f64 {
        2.0 * self.half_width / self.n as f64
    }

    /// Lattice spacing in frequency, also the smallest nonzero |ξ|.
    pub fn dxi(&self) -> f64 {
        PI / self.half_width
    }

    /// Largest frequency resolved along every axis.
    pub fn xi_max(&self) -> f64 {
        PI * self.n as f64 / (2.0 * self.half_width)
    }

    pub fn cell_volume(&self) -> f64 {
        self.dx().powi(self.dim as i32)
    }

    pub fn box_volume(&self) -> f64 {
        (2.0 * self.half_width).powi(self.dim as i32)
    }

    /// Same N, half-width multiplied by `rho`.
    pub fn rescaled(&self, rho: f64) -> Grid {
        Grid { half_width: self.half_width * rho, ..*self }
    }

    pub fn coord(&self, i: usize) -> f64 {
        -self.half_width + i as f64 * self.dx()
    }

    /// Signed frequency index of FFT-ordered position `i`.
    pub fn freq_index(&self, i: usize) -> i64 {
        if i < self.n / 2 {
            i as i64
        } else {
            i as i64 - self.n as i64
        }
    }

    pub fn unravel(&self, mut flat: usize, out: &mut [usize]) {
        for a in (0..self.dim).rev() {
            out[a] = flat % self.n;
            flat /= self.n;
        }
    }

    /// Σ (j_a − N/2)², the squared radius in units of Δx².
    pub fn radius_sq_index(&self, flat: usize) -> usize {
        let half = (self.n / 2) as i64;
        let mut r2 = 0i64;
        let mut f = flat;
        for _ in 0..self.dim {
            let j = (f % self.n) as i64 - half;
            r2 += j * j;
            f /= self.n;
        }
        r2 as usize
    }

    /// Σ m_a², the squared frequency in units of Δξ².
    pub fn xi_sq_index(&self, flat: usize) -> usize {
        let mut r2 = 0i64;
        let mut f = flat;
        for _ in 0..self.dim {
            let m = self.freq_index(f % self.n);
            r2 += m * m;
            f /= self.n;
        }
        r2 as usize
    }

    /// Largest |m_a| over the axes, in lattice units.
    pub fn xi_sup_index(&self, flat: usize) -> usize {
        let mut s = 0;
        let mut f = flat;
        for _ in 0..self.dim {
            s = s.max(self.freq_index(f % self.n).unsigned_abs() as usize);
            f /= self.n;
        }
        s
    }

    pub fn abs_x(&self, flat: usize) -> f64 {
        (self.radius_sq_index(flat) as f64).sqrt() * self.dx()
    }

    pub fn abs_xi(&self, flat: usize) -> f64 {
        (self.xi_sq_index(flat) as f64).sqrt() * self.dxi()
    }

    /// |ξ| for every coefficient, FFT order.
    pub fn abs_xi_table(&self) -> Vec<f64> {
        (0..self.len()).map(|k| self.abs_xi(k)).collect()
    }

    pub fn check_same(&self, other: &Grid) -> Result<()> {
        if self != other {
            return Err(FracError::Structural(format!("grid {self:?} differs from {other:?}")));
        }
        Ok(())
    }
}

/// Physical-space samples u(x_j), x_j = −L + jΔx, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    pub grid: Grid,
    pub values: Vec<C64>,
}

/// Coefficients f̂(ξ_m) in FFT order.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralField {
    pub grid: Grid,
    pub coeffs: Vec<C64>,
}

impl Field {
    pub fn new(grid: Grid, values: Vec<C64>) -> Result<Field> {
        if values.len() != grid.len() {
            return Err(FracError::Structural(format!(
                "{} values for a grid of {} points",
                values.len(),
                grid.len()
            )));
        }
        Ok(Field { grid, values })
    }

    pub fn zeros(grid: Grid) -> Field {
        Field { grid, values: vec![C64::new(0.0, 0.0); grid.len()] }
    }

    pub fn from_fn(grid: Grid, f: impl Fn(&[f64]) -> C64) -> Field {
        let mut idx = vec![0usize; grid.dim];
        let mut x = vec![0.0; grid.dim];
        let values = (0..grid.len())
            .map(|k| {
                grid.unravel(k, &mut idx);
                for a in 0..grid.dim {
                    x[a] = grid.coord(idx[a]);
                }
                f(&x)
            })
            .collect();
        Field { grid, values }
    }

    /// Radial profile g(|x|), real valued.
    pub fn radial(grid: Grid, g: impl Fn(f64) -> f64) -> Field {
        Field::from_fn(grid, |x| C64::new(g(x.iter().map(|v| v * v).sum::<f64>().sqrt()), 0.0))
    }

    pub fn norm_sq(&self) -> f64 {
        self.values.iter().map(|v| v.norm_sqr()).sum::<f64>() * self.grid.cell_volume()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sq().sqrt()
    }

    /// ⟨self, other⟩ = ∫ conj(self)·other.
    pub fn inner(&self, other: &Field) -> C64 {
        let s: C64 = self.values.iter().zip(&other.values).map(|(a, b)| a.conj() * b).sum();
        s * self.grid.cell_volume()
    }

    pub fn lp_norm(&self, p: f64) -> f64 {
        let s: f64 = self.values.iter().map(|v| v.norm().powf(p)).sum();
        (s * self.grid.cell_volume()).powf(1.0 / p)
    }

    pub fn scale(&self, c: C64) -> Field {
        Field { grid: self.grid, values: self.values.iter().map(|v| v * c).collect() }
    }

    pub fn add(&self, other: &Field) -> Field {
        let values = self.values.iter().zip(&other.values).map(|(a, b)| a + b).collect();
        Field { grid: self.grid, values }
    }

    pub fn sub(&self, other: &Field) -> Field {
        let values = self.values.iter().zip(&other.values).map(|(a, b)| a - b).collect();
        Field { grid: self.grid, values }
    }

    pub fn add_assign(&mut self, other: &Field) {
        for (a, b) in self.values.iter_mut().zip(&other.values) {
            *a += b;
        }
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.re.is_finite() && v.im.is_finite())
    }

    /// ‖self − other‖₂ / ‖other‖₂.
    pub fn rel_dist(&self, reference: &Field) -> f64 {
        let nr = reference.norm();
        let d = self.sub(reference).norm();
        if nr == 0.0 {
            d
        } else {
            d / nr
        }
    }

    pub fn max_abs_diff(&self, other: &Field) -> f64 {
        self.values.iter().zip(&other.values).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max)
    }

    /// Mass on the points with |x| ≤ r.
    pub fn mass_within(&self, r: f64) -> f64 {
        let lim = r / self.grid.dx();
        let lim2 = lim * lim;
        let s: f64 = (0..self.grid.len())
            .filter(|&k| self.grid.radius_sq_index(k) as f64 <= lim2)
            .map(|k| self.values[k].norm_sqr())
            .sum();
        s * self.grid.cell_volume()
    }
}

impl SpectralField {
    pub fn zeros(grid: Grid) -> SpectralField {
        SpectralField { grid, coeffs: vec![C64::new(0.0, 0.0); grid.len()] }
    }

    /// Coefficients from a function of ξ evaluated on the lattice.
    pub fn from_fn(grid: Grid, f: impl Fn(&[f64]) -> C64) -> SpectralField {
        let mut idx = vec![0usize; grid.dim];
        let mut xi = vec![0.0; grid.dim];
        let coeffs = (0..grid.len())
            .map(|k| {
                grid.unravel(k, &mut idx);
                for a in 0..grid.dim {
                    xi[a] = grid.freq_index(idx[a]) as f64 * grid.dxi();
                }
                f(&xi)
            })
            .collect();
        SpectralField { grid, coeffs }
    }

    /// (2π)^{-d} ∫|f̂|² dξ, equal to the physical mass by Parseval.
    pub fn norm_sq(&self) -> f64 {
        self.coeffs.iter().map(|v| v.norm_sqr()).sum::<f64>() / self.grid.box_volume()
    }

    /// (Σ |f̂_m|^p Δξ^d)^{1/p}.
    pub fn lp_norm(&self, p: f64) -> f64 {
        let s: f64 = self.coeffs.iter().map(|v| v.norm().powf(p)).sum();
        (s * self.grid.dxi().powi(self.grid.dim as i32)).powf(1.0 / p)
    }
}

fn plan(n: usize, inverse: bool) -> Arc<dyn Fft<f64>> {
    static PLANS: OnceLock<Mutex<HashMap<(usize, bool), Arc<dyn Fft<f64>>>>> = OnceLock::new();
    let mut plans = PLANS.get_or_init(|| Mutex::new(HashMap::new())).lock().unwrap();
    plans
        .entry((n, inverse))
        .or_insert_with(|| {
            let mut planner = FftPlanner::new();
            if inverse {
                planner.plan_fft_inverse(n)
            } else {
                planner.plan_fft_forward(n)
            }
        })
        .clone()
}

const LINES_PER_TASK: usize = 16;

/// Unnormalized d-dimensional DFT in place. Each round transforms the
/// contiguous last axis and then rotates the axes by one transpose.
pub(crate) fn fft_nd(data: &mut Vec<C64>, n: usize, dim: usize, inverse: bool) {
    let fft = plan(n, inverse);
    let rows = data.len() / n;
    let mut tmp = vec![C64::new(0.0, 0.0); data.len()];
    for _ in 0..dim {
        data.par_chunks_mut(n * LINES_PER_TASK).for_each(|chunk| fft.process(chunk));
        // tmp[c][r] = data[r][c]
        let src: &[C64] = data;
        tmp.par_chunks_mut(rows).enumerate().for_each(|(c, out)| {
            for (r, o) in out.iter_mut().enumerate() {
                *o = src[r * n + c];
            }
        });
        std::mem::swap(data, &mut tmp);
    }
}

fn parity_sign(grid: &Grid, flat: usize) -> f64 {
    let mut s = 0usize;
    let mut f = flat;
    for _ in 0..grid.dim {
        s += f % grid.n;
        f /= grid.n;
    }
    if s % 2 == 0 {
        1.0
    } else {
        -1.0
    }
}

/// f̂(ξ) = ∫ e^{−ix·ξ} f(x) dx by the rectangle rule.
pub fn forward(f: &Field) -> SpectralField {
    let g = f.grid;
    let mut data = f.values.clone();
    fft_nd(&mut data, g.n, g.dim, false);
    let w = g.cell_volume();
    // x_0 = −L contributes the phase e^{iLξ_m} = (−1)^m per axis
    data.par_iter_mut().enumerate().for_each(|(k, v)| *v *= w * parity_sign(&g, k));
    SpectralField { grid: g, coeffs: data }
}

/// f(x) = (2π)^{-d} ∫ e^{ix·ξ} f̂(ξ) dξ by the rectangle rule.
pub fn inverse(s: &SpectralField) -> Field {
    let g = s.grid;
    let w = 1.0 / g.box_volume();
    let mut data: Vec<C64> =
        s.coeffs.iter().enumerate().map(|(k, v)| v * (w * parity_sign(&g, k))).collect();
    fft_nd(&mut data, g.n, g.dim, true);
    Field { grid: g, values: data }
}

/// Apply a Fourier multiplier given as a table in FFT order.
pub fn apply_symbol_table(f: &Field, table: &[C64]) -> Field {
    let g = f.grid;
    let mut data = f.values.clone();
    fft_nd(&mut data, g.n, g.dim, false);
    let norm = 1.0 / g.len() as f64;
    data.par_iter_mut().zip(table.par_iter()).for_each(|(v, m)| *v *= m * norm);
    fft_nd(&mut data, g.n, g.dim, true);
    Field { grid: g, values: data }
}

/// Apply a real radial multiplier m(|ξ|).
pub fn apply_radial_symbol(f: &Field, m: impl Fn(f64) -> f64) -> Field {
    let table: Vec<C64> = f.grid.abs_xi_table().into_iter().map(|r| C64::new(m(r), 0.0)).collect();
    apply_symbol_table(f, &table)
}

/// |∇|^s f = F^{-1}[|ξ|^s f̂] for any s ≥ 0.
pub fn abs_derivative(f: &Field, s: f64) -> Field {
    apply_radial_symbol(f, |r| if r == 0.0 { if s == 0.0 { 1.0 } else { 0.0 } } else { r.powf(s) })
}

pub fn fractional_laplacian_apply(f: &Field, alpha: f64) -> Result<Field> {
    if !(alpha > 1.0 && alpha <= 2.0) {
        return Err(FracError::Domain(format!("fractional order α = {alpha} not in (1, 2]")));
    }
    Ok(abs_derivative(f, alpha))
}

/// c_{d,α} with F[|x|^{−α}](ξ) = c_{d,α}|ξ|^{α−d}.
pub fn riesz_constant(dim: usize, alpha: f64) -> f64 {
    let d = dim as f64;
    PI.powf(d / 2.0) * 2f64.powf(d - alpha) * gamma((d - alpha) / 2.0) / gamma(alpha / 2.0)
}

fn lattice_points(dim: usize, nmax: i64) -> Vec<f64> {
    // squared norms of the nonzero integer points with every |n_a| ≤ nmax
    let side = 2 * nmax + 1;
    let total = side.pow(dim as u32);
    (0..total)
        .filter_map(|mut k| {
            let mut r2 = 0i64;
            for _ in 0..dim {
                let c = k % side - nmax;
                r2 += c * c;
                k /= side;
            }
            (r2 > 0).then_some(r2 as f64)
        })
        .collect()
}

/// Value assigned to the ξ = 0 coefficient of the Riesz multiplier on a box
/// of half-width L. It is the constant that makes the periodized kernel
/// agree with |x|^{−α} as x → 0 (the image sum loses no constant offset),
/// evaluated by Ewald splitting with a Gaussian cut at η = (π/2L)².
/// Homogeneous of degree d − α in L, like the rest of the multiplier.
pub fn riesz_zero_mode(dim: usize, alpha: f64, half_width: f64) -> f64 {
    riesz_zero_mode_with_split(dim, alpha, half_width, (PI / (2.0 * half_width)).powi(2))
}

/// Ewald evaluation with an explicit split parameter η; the result does
/// not depend on η beyond truncation error.
pub fn riesz_zero_mode_with_split(dim: usize, alpha: f64, half_width: f64, eta: f64) -> f64 {
    let d = dim as f64;
    let p = 2.0 * half_width;
    let ga = gamma(alpha / 2.0);
    let b = (d - alpha) / 2.0;
    let long_at_origin = eta.powf(alpha / 2.0) / ((alpha / 2.0) * ga);
    let short_hat_origin = PI.powf(d / 2.0) / ga * eta.powf(-b) / b;
    // both lattice sums decay like exp(−c n²) for this η range
    let pts = lattice_points(dim, 8);
    let mut real = 0.0;
    let mut recip = 0.0;
    for &n2 in &pts {
        let r2 = p * p * n2;
        real += gamma_ur(alpha / 2.0, eta * r2) * r2.powf(-alpha / 2.0);
        let k2 = (2.0 * PI / p).powi(2) * n2;
        recip += PI.powf(d / 2.0) / ga
            * (k2 / 4.0).powf(-b)
            * gamma(b)
            * gamma_ur(b, k2 / (4.0 * eta));
    }
    let vol = p.powi(dim as i32);
    vol * (long_at_origin - real) + short_hat_origin - recip
}

/// Riesz multiplier table in FFT order, zero mode from [`riesz_zero_mode`].
pub fn riesz_multiplier(grid: &Grid, alpha: f64) -> Vec<f64> {
    let c = riesz_constant(grid.dim, alpha);
    let e = alpha - grid.dim as f64;
    let m0 = riesz_zero_mode(grid.dim, alpha, grid.half_width);
    (0..grid.len())
        .map(|k| {
            let r = grid.abs_xi(k);
            if r == 0.0 {
                m0
            } else {
                c * r.powf(e)
            }
        })
        .collect()
}

/// |x|^{−α} ∗ ρ on the periodic box.
pub fn riesz_convolve(rho: &Field, alpha: f64) -> Result<Field> {
    let d = rho.grid.dim as f64;
    if !(alpha > 1.0 && alpha < d) {
        return Err(FracError::Domain(format!("Riesz exponent α = {alpha} not in (1, {d})")));
    }
    let table: Vec<C64> =
        riesz_multiplier(&rho.grid, alpha).into_iter().map(|m| C64::new(m, 0.0)).collect();
    Ok(apply_symbol_table(rho, &table))
}

/// 2/3-rule mask: keeps coefficients with every |m_a| < N/3.
pub fn dealias_mask(grid: &Grid) -> Vec<bool> {
    let cut = grid.n / 3;
    (0..grid.len()).map(|k| grid.xi_sup_index(k) < cut).collect()
}

/// η(r): 1 on [0,1], smooth decay on (1,2), 0 from 2 on.
pub fn eta(r: f64) -> f64 {
    if r <= 1.0 {
        1.0
    } else if r >= 2.0 {
        0.0
    } else {
        let s = r - 1.0;
        (1.0 - 1.0 / (1.0 - s * s)).exp()
    }
}

/// χ(ξ) = η(|ξ|) − η(2|ξ|), supported in 1/2 < |ξ| < 2.
pub fn chi(r: f64) -> f64 {
    eta(r) - eta(2.0 * r)
}

/// Symbol of P_k at |ξ| = r.
pub fn band_symbol(k: i32, r: f64) -> f64 {
    chi(r / 2f64.powi(k))
}

/// Bands whose partial sums reproduce every nonzero frequency up to
/// 2^{k_max}, where k_max is the largest k with 2^{k+1} < ξ_max.
pub fn resolved_bands(grid: &Grid) -> (i32, i32) {
    let lo = grid.dxi().log2().floor() as i32;
    let mut hi = grid.xi_max().log2().floor() as i32 - 1;
    while 2f64.powi(hi + 1) >= grid.xi_max() {
        hi -= 1;
    }
    (lo, hi)
}

pub fn band_meets_lattice(grid: &Grid, k: i32) -> bool {
    let lo = 2f64.powi(k - 1);
    let hi = 2f64.powi(k + 1);
    // the lattice holds nonzero |ξ| from Δξ up to √d·ξ_max
    hi > grid.dxi() && lo < grid.xi_max() * (grid.dim as f64).sqrt()
}

pub fn dyadic_project(f: &Field, k: i32) -> Result<Field> {
    if !band_meets_lattice(&f.grid, k) {
        return Err(FracError::EmptyBand(k));
    }
    Ok(apply_radial_symbol(f, |r| band_symbol(k, r)))
}

/// Spectral restriction to a set of lattice coefficients.
pub fn restrict_spectrum(f: &SpectralField, keep: impl Fn(usize) -> bool) -> SpectralField {
    let coeffs = f
        .coeffs
        .iter()
        .enumerate()
        .map(|(k, v)| if keep(k) { *v } else { C64::new(0.0, 0.0) })
        .collect();
    SpectralField { grid: f.grid, coeffs }
}

/// Average over shells of equal Σ(j_a − N/2)². Shells are unions of orbits
/// of the axis permutations and reflections, so the output carries both
/// the hyperoctahedral symmetry and the radial averaging, and the map is
/// an exact projection.
pub fn radial_symmetrize(f: &Field) -> Field {
    let g = f.grid;
    let shells = g.dim * (g.n / 2) * (g.n / 2) + 1;
    let mut sum = vec![C64::new(0.0, 0.0); shells];
    let mut count = vec![0usize; shells];
    for k in 0..g.len() {
        let s = g.radius_sq_index(k);
        sum[s] += f.values[k];
        count[s] += 1;
    }
    let avg: Vec<C64> =
        sum.iter().zip(&count).map(|(s, &c)| if c > 0 { s / c as f64 } else { *s }).collect();
    let values = (0..g.len()).map(|k| avg[g.radius_sq_index(k)]).collect();
    Field { grid: g, values }
}

/// Relative mass a field keeps outside the cube |x_a| < `r` (any axis).
pub fn mass_fraction_outside_cube(f: &Field, r: f64) -> f64 {
    let g = f.grid;
    let total: f64 = f.values.iter().map(|v| v.norm_sqr()).sum();
    if total == 0.0 {
        return 0.0;
    }
    let mut idx = vec![0usize; g.dim];
    let mut out = 0.0;
    for k in 0..g.len() {
        g.unravel(k, &mut idx);
        if idx.iter().any(|&i| g.coord(i).abs() >= r) {
            out += f.values[k].norm_sqr();
        }
    }
    out / total
}

/// Relative spectral mass with some |ξ_a| ≥ `cut` (in frequency units).
pub fn spectral_fraction_outside_cube(s: &SpectralField, cut: f64) -> f64 {
    let g = s.grid;
    let total: f64 = s.coeffs.iter().map(|v| v.norm_sqr()).sum();
    if total == 0.0 {
        return 0.0;
    }
    let lim = cut / g.dxi();
    let out: f64 = (0..g.len())
        .filter(|&k| g.xi_sup_index(k) as f64 >= lim)
        .map(|k| s.coeffs[k].norm_sqr())
        .sum();
    out / total
}

/// D_h f = h^{−d/2} f(·/h) on the same grid for h = 2^m.
///
/// Shrinking (m < 0) subsamples physical points; it is exact when f̂ has no
/// content at |ξ_a| ≥ 2^m ξ_max. Spreading (m > 0) subsamples the
/// frequency lattice; it is exact when f vanishes outside |x_a| < 2^{−m} L.
/// `tol` bounds the relative mass allowed in the region that is lost.
pub fn dilate(f: &Field, m: i32, tol: f64) -> Result<Field> {
    let g = f.grid;
    if m == 0 {
        return Ok(f.clone());
    }
    let step = 1usize << m.unsigned_abs();
    if step >= g.n {
        return Err(FracError::Resolution(format!("dilation 2^{m} exceeds the grid")));
    }
    let h = 2f64.powi(m);
    let amp = h.powf(-(g.dim as f64) / 2.0);
    let half = g.n / 2;
    let mut idx = vec![0usize; g.dim];
    if m < 0 {
        let lost = spectral_fraction_outside_cube(&forward(f), h * g.xi_max());
        if lost > tol {
            return Err(FracError::Resolution(format!(
                "shrinking by 2^{m} folds {lost:.3e} of the spectrum past Nyquist"
            )));
        }
        let values = (0..g.len())
            .map(|k| {
                g.unravel(k, &mut idx);
                // x/h for x = (j − N/2)Δx lands on index N/2 + (j − N/2)·2^{|m|}
                let mut src = 0usize;
                for &i in idx.iter() {
                    let j = half as i64 + (i as i64 - half as i64) * step as i64;
                    if j < 0 || j >= g.n as i64 {
                        return C64::new(0.0, 0.0);
                    }
                    src = src * g.n + j as usize;
                }
                f.values[src] * amp
            })
            .collect();
        Ok(Field { grid: g, values })
    } else {
        let lost = mass_fraction_outside_cube(f, g.half_width / h);
        if lost > tol {
            return Err(FracError::Resolution(format!(
                "spreading by 2^{m} pushes {lost:.3e} of the mass out of the box"
            )));
        }
        let s = forward(f);
        let norm = h.powf(g.dim as f64 / 2.0);
        let coeffs = (0..g.len())
            .map(|k| {
                g.unravel(k, &mut idx);
                // new coefficient at ξ_m is h^{d/2} f̂(h ξ_m) = old index h·m
                let mut src = 0usize;
                for &i in idx.iter() {
                    let mm = g.freq_index(i) * step as i64;
                    if mm < -(half as i64) || mm >= half as i64 {
                        return C64::new(0.0, 0.0);
                    }
                    let j = if mm < 0 { (mm + g.n as i64) as usize } else { mm as usize };
                    src = src * g.n + j;
                }
                s.coeffs[src] * norm
            })
            .collect();
        Ok(inverse(&SpectralField { grid: g, coeffs }))
    }
}

/// Magnify the central half-cube onto the whole box: returns
/// w(x) = 2^{−d/2} f(x/2) evaluated by trigonometric interpolation, and the
/// relative mass that lay outside |x_a| < L/2 and is dropped.
pub fn zoom_in(f: &Field) -> (Field, f64) {
    let g = f.grid;
    let shed = mass_fraction_outside_cube(f, g.half_width / 2.0);
    let n2 = 2 * g.n;
    let total2 = n2.pow(g.dim as u32);
    let mut data = f.values.clone();
    fft_nd(&mut data, g.n, g.dim, false);
    let mut big = vec![C64::new(0.0, 0.0); total2];
    let mut idx = vec![0usize; g.dim];
    for (k, v) in data.iter().enumerate() {
        g.unravel(k, &mut idx);
        let mut dst = 0usize;
        for &i in idx.iter() {
            let m = g.freq_index(i);
            let j = if m < 0 { (m + n2 as i64) as usize } else { m as usize };
            dst = dst * n2 + j;
        }
        big[dst] = *v;
    }
    fft_nd(&mut big, n2, g.dim, true);
    // fine point j sits at −L + jΔx/2; the central half-cube is j ∈ [N/2, 3N/2)
    let amp = 2f64.powf(-(g.dim as f64) / 2.0) / g.len() as f64;
    let values = (0..g.len())
        .map(|k| {
            g.unravel(k, &mut idx);
            let mut src = 0usize;
            for &i in idx.iter() {
                src = src * n2 + i + g.n / 2;
            }
            big[src] * amp
        })
        .collect();
    (Field { grid: g, values }, shed)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zoom_in_magnifies_centre() {
        let g = grid(64, 8.0);
        let f = Field::radial(g, |r| (-r * r).exp());
        let (z, shed) = zoom_in(&f);
        let exact = Field::radial(g, |r| 0.5 * (-r * r / 4.0).exp());
        assert!(z.rel_dist(&exact) < 1e-12);
        assert!(shed < 1e-12);
    }

    fn grid(n: usize, l: f64) -> Grid {
        Grid::new(2, n, l).unwrap()
    }

    fn gaussian(g: Grid) -> Field {
        Field::radial(g, |r| (-r * r / 2.0).exp())
    }

    #[test]
    fn grid_rejects_bad_sizes() {
        assert!(Grid::new(2, 48, 1.0).is_err());
        assert!(Grid::new(1, 64, 1.0).is_err());
        assert!(Grid::new(2, 64, -1.0).is_err());
    }

    #[test]
    fn round_trip_and_parseval() {
        let g = grid(64, 5.0);
        let f = Field::from_fn(g, |x| C64::new((-x[0] * x[0]).exp() * x[1], (x[0] - x[1]).sin()));
        let s = forward(&f);
        let back = inverse(&s);
        assert!(back.rel_dist(&f) < 1e-12);
        assert!((s.norm_sq() - f.norm_sq()).abs() / f.norm_sq() < 1e-12);
    }

    #[test]
    fn constant_maps_to_box_volume() {
        let g = grid(32, 3.0);
        let f = Field::from_fn(g, |_| C64::new(1.0, 0.0));
        let s = forward(&f);
        assert!((s.coeffs[0].re - 36.0).abs() < 1e-10);
        let rest: f64 = s.coeffs[1..].iter().map(|v| v.norm()).sum();
        assert!(rest < 1e-9);
    }

    #[test]
    fn gaussian_transform_matches_closed_form() {
        let g = grid(256, 16.0);
        let s = forward(&gaussian(g));
        for k in 0..g.len() {
            let r = g.abs_xi(k);
            let exact = 2.0 * PI * (-r * r / 2.0).exp();
            assert!((s.coeffs[k] - exact).norm() < 1e-10, "at ξ = {r}");
        }
    }

    #[test]
    fn fractional_laplacian_of_plane_wave() {
        let g = grid(32, PI);
        let f = Field::from_fn(g, |x| C64::new(0.0, 3.0 * x[0] - 2.0 * x[1]).exp());
        let out = fractional_laplacian_apply(&f, 2.0).unwrap();
        assert!(out.rel_dist(&f.scale(C64::new(13.0, 0.0))) < 1e-12);
        assert!(fractional_laplacian_apply(&f, 1.0).is_err());
        assert!(fractional_laplacian_apply(&f, 2.1).is_err());
    }

    #[test]
    fn fractional_laplacian_matches_dense_oracle() {
        // explicit O(N⁴) sum of the continuum inverse transform of |ξ|^α f̂ over the lattice
        let g = grid(32, 6.0);
        let f = gaussian(g);
        let alpha = 1.5;
        let out = fractional_laplacian_apply(&f, alpha).unwrap();
        let n = g.n;
        let mut worst: f64 = 0.0;
        for j0 in (0..n).step_by(3) {
            for j1 in (0..n).step_by(5) {
                let (x0, x1) = (g.coord(j0), g.coord(j1));
                let mut acc = C64::new(0.0, 0.0);
                for m0 in -(n as i64 / 2)..(n as i64 / 2) {
                    for m1 in -(n as i64 / 2)..(n as i64 / 2) {
                        let (k0, k1) = (m0 as f64 * g.dxi(), m1 as f64 * g.dxi());
                        let r = (k0 * k0 + k1 * k1).sqrt();
                        let fhat = 2.0 * PI * (-r * r / 2.0).exp();
                        acc += C64::new(0.0, k0 * x0 + k1 * x1).exp() * fhat * r.powf(alpha);
                    }
                }
                acc /= g.box_volume();
                worst = worst.max((acc - out.values[j0 * n + j1]).norm());
            }
        }
        assert!(worst < 1e-6, "worst {worst}");
    }

    #[test]
    fn multiplier_composition() {
        let g = grid(64, 8.0);
        let f = Field::from_fn(g, |x| C64::new((-(x[0] - 1.0).powi(2) - x[1] * x[1]).exp(), 0.0));
        let once = abs_derivative(&f, 1.7);
        let twice = abs_derivative(&abs_derivative(&f, 0.85), 0.85);
        assert!(once.max_abs_diff(&twice) < 1e-12 * once.values.iter().map(|v| v.norm()).fold(0.0, f64::max));
    }

    #[test]
    fn riesz_constant_matches_known_cases() {
        // d = 3, α = 1: F[1/|x|] = 4π/|ξ|²
        assert!((riesz_constant(3, 1.0) - 4.0 * PI).abs() < 1e-12);
        // d = 2, α = 1: F[1/|x|] = 2π/|ξ|
        assert!((riesz_constant(2, 1.0) - 2.0 * PI).abs() < 1e-12);
    }

    #[test]
    fn zero_mode_is_split_independent_and_homogeneous() {
        for &(d, a) in &[(2usize, 1.5), (2, 1.8), (3, 1.5), (3, 2.0)] {
            let l = 2.0;
            let base = riesz_zero_mode(d, a, l);
            let eta0 = (PI / (2.0 * l)).powi(2);
            for &f in &[0.5, 2.0] {
                let other = riesz_zero_mode_with_split(d, a, l, eta0 * f);
                assert!((other - base).abs() < 1e-9 * base.abs(), "d={d} α={a}: {base} vs {other}");
            }
            let scaled = riesz_zero_mode(d, a, 2.0 * l);
            let expect = base * 2f64.powf(d as f64 - a);
            assert!((scaled - expect).abs() < 1e-9 * expect.abs());
        }
        // reference value from an independent scipy evaluation of the same Ewald sums
        assert!((riesz_zero_mode(2, 1.5, 2.0) - 20.155118957586).abs() < 1e-8);
    }

    #[test]
    fn riesz_rejects_bad_exponent() {
        let f = gaussian(grid(16, 4.0));
        assert!(riesz_convolve(&f, 2.0).is_err());
        assert!(riesz_convolve(&f, 1.0).is_err());
        assert!(riesz_convolve(&f, 1.5).is_ok());
    }

    #[test]
    fn riesz_of_real_is_real() {
        let g = grid(32, 4.0);
        let f = Field::from_fn(g, |x| C64::new((-(x[0] - 0.5).powi(2) - 2.0 * x[1] * x[1]).exp(), 0.0));
        let v = riesz_convolve(&f, 1.5).unwrap();
        assert!(v.values.iter().all(|z| z.im.abs() < 1e-12));
    }

    #[test]
    fn partition_of_unity_on_symbols() {
        let g = grid(256, 16.0);
        let (lo, hi) = resolved_bands(&g);
        assert_eq!((lo, hi), (-3, 3));
        for k in 0..g.len() {
            let r = g.abs_xi(k);
            if r == 0.0 || r > 2f64.powi(hi) {
                continue;
            }
            let s: f64 = (lo..=hi).map(|b| band_symbol(b, r)).sum();
            assert!((s - 1.0).abs() < 1e-12);
        }
        assert!(2f64.powi(hi + 1) < g.xi_max());
    }

    #[test]
    fn symbol_vanishes_off_annulus() {
        for i in 0..2000 {
            let r = i as f64 * 0.01;
            let v = band_symbol(1, r);
            assert!((0.0..=1.0).contains(&v));
            if r <= 1.0 || r >= 4.0 {
                assert_eq!(v, 0.0);
            }
        }
    }

    #[test]
    fn band_outside_lattice_is_rejected() {
        let f = gaussian(grid(32, 4.0));
        assert_eq!(dyadic_project(&f, 12), Err(FracError::EmptyBand(12)));
        assert_eq!(dyadic_project(&f, -9), Err(FracError::EmptyBand(-9)));
    }

    #[test]
    fn radial_symmetrize_properties() {
        let g = grid(64, 6.0);
        let rad = gaussian(g);
        assert!(radial_symmetrize(&rad).max_abs_diff(&rad) < 1e-12);
        let odd = Field::from_fn(g, |x| C64::new(x[0], 0.0));
        let out = radial_symmetrize(&odd);
        // the corner column x = −L has no mirror partner on the torus
        let inner: f64 = (0..g.len()).filter(|&k| g.abs_x(k) < 5.9).map(|k| out.values[k].norm()).fold(0.0, f64::max);
        assert!(inner < 1e-12);
        let once = radial_symmetrize(&odd.add(&rad));
        assert!(radial_symmetrize(&once).max_abs_diff(&once) < 1e-15);
    }

    #[test]
    fn dilation_round_trip() {
        let g = grid(128, 16.0);
        let f = gaussian(g);
        let spread = dilate(&f, 1, 1e-20).unwrap();
        let exact = Field::radial(g, |r| 0.5 * (-r * r / 8.0).exp());
        assert!(spread.rel_dist(&exact) < 1e-12);
        let back = dilate(&spread, -1, 1e-12).unwrap();
        assert!(back.rel_dist(&f) < 1e-12);
        assert!((spread.norm_sq() - f.norm_sq()).abs() < 1e-12 * f.norm_sq());
        assert!(matches!(dilate(&f, 3, 1e-12), Err(FracError::Resolution(_))));
        assert!(matches!(dilate(&f, -3, 1e-12), Err(FracError::Resolution(_))));
    }
}
