//! O(N⁴) real-space oracle for ∫|x − y|^{−α}ρ(y) dy over the box.
//!
//! The singular self-term is handled by subtraction:
//! Σ_{j≠i}|x_i − x_j|^{−α}(ρ_j − ρ_i)Δx² + ρ_i ∫_box |x_i − y|^{−α} dy,
//! where the box integral is done exactly in the radial variable and by
//! composite Simpson in the angle.

use frac_core::grid_spectral::Grid;
use frac_core::Field;

/// ∫_{θa}^{θb} (h / cos θ)^{2−α} dθ / (2 − α): one triangle from x to an edge.
fn triangle(h: f64, a: f64, b: f64, alpha: f64) -> f64 {
    if h <= 0.0 || b <= a {
        return 0.0;
    }
    let n = 4000;
    let step = (b - a) / n as f64;
    let f = |th: f64| (h / th.cos()).powf(2.0 - alpha);
    let mut s = f(a) + f(b);
    for k in 1..n {
        s += f(a + k as f64 * step) * if k % 2 == 1 { 4.0 } else { 2.0 };
    }
    s * step / 3.0 / (2.0 - alpha)
}

/// ∫_{[−L,L]²} |x − y|^{−α} dy for a point x inside the square.
pub fn box_integral(x: [f64; 2], l: f64, alpha: f64) -> f64 {
    let mut total = 0.0;
    for axis in 0..2 {
        let other = 1 - axis;
        for side in [1.0, -1.0] {
            let h = l - side * x[axis];
            let a = ((-l - x[other]) / h).atan();
            let b = ((l - x[other]) / h).atan();
            total += triangle(h, a, b, alpha);
        }
    }
    total
}

/// Direct-sum potential of a real density on a 2-d grid.
pub fn direct_potential(rho: &[f64], g: Grid, alpha: f64) -> Vec<f64> {
    assert_eq!(g.dim, 2);
    let n = g.n;
    let dx = g.dx();
    let cell = dx * dx;
    let pts: Vec<[f64; 2]> = (0..n * n).map(|k| [g.coord(k / n), g.coord(k % n)]).collect();
    (0..n * n)
        .map(|i| {
            let mut s = 0.0;
            for j in 0..n * n {
                if j != i {
                    let r = ((pts[i][0] - pts[j][0]).powi(2) + (pts[i][1] - pts[j][1]).powi(2)).sqrt();
                    s += r.powf(-alpha) * (rho[j] - rho[i]) * cell;
                }
            }
            s + rho[i] * box_integral(pts[i], g.half_width, alpha)
        })
        .collect()
}

/// Relative L² difference on points at least `layer` cells from the box edge.
pub fn interior_rel_l2(a: &Field, b: &[f64], layer: usize) -> f64 {
    let g = a.grid;
    let n = g.n;
    let (mut num, mut den) = (0.0, 0.0);
    for k in 0..n * n {
        let (i, j) = (k / n, k % n);
        if i < layer || j < layer || i >= n - layer || j >= n - layer {
            continue;
        }
        num += (a.values[k].re - b[k]).powi(2) + a.values[k].im.powi(2);
        den += b[k] * b[k];
    }
    (num / den).sqrt()
}
