//! Nonlinear functionals of random spherical Gaussian eigenfunctions.
//!
//! The crate computes the Hermite functionals `h_{l;q} = ∫ H_q(f_l(x)) dx`
//! of a degree-`l` Gaussian eigenfunction on the unit sphere, both exactly
//! (variances, Legendre moments, Wigner-symbol identities, diagram-formula
//! cumulants) and by seeded Monte Carlo (field synthesis on exact product
//! quadratures, k-statistics, Kolmogorov–Smirnov distances, the Defect).
//!
//! Module map:
//!
//! * [`specfun`]: Legendre, normalized associated Legendre, Hermite, Bessel `J0`.
//! * [`wigner`]: 3j symbols, Clebsch–Gordan coefficients, Gaunt integrals.
//! * [`moments`]: quadrature rules, Legendre moments, variances, `c_q`.
//! * [`fieldsim`]: coefficient sampling, grid synthesis, `h_{l;q}` and Defect.
//! * [`diagrams`]: η-families of connected diagrams and fourth cumulants.
//! * [`mcstats`]: Monte Carlo experiments and their summary statistics.

pub mod diagrams;
mod error;
pub mod fieldsim;
pub mod mcstats;
pub mod moments;
pub mod output;
pub mod specfun;
pub mod wigner;

pub use error::{Error, Result};

/// Surface area of the unit sphere.
pub const FOUR_PI: f64 = 4.0 * std::f64::consts::PI;
