//! Pseudo-spectral simulation of the mass-critical fractional Hartree
//! equation i∂ₜu + (−Δ)^{α/2}u = λ(|x|^{−α} ∗ |u|²)u with radial data, plus
//! the harmonic-analysis tooling used to decompose and diagnose solutions.

pub mod blowup_lab;
pub mod error;
pub mod grid_spectral;
pub mod observables;
pub mod profiles;
pub mod propagator;

pub use error::{FracError, Result};
pub use grid_spectral::{Field, Grid, SpectralField};
pub use num_complex::Complex64 as C64;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
