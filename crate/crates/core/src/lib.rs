//! Numerical construction of the Fourier interpolation basis on `sqrt(n)`-spheres.
//!
//! The crate builds, in dimensions `d >= 5`, the radial basis functions
//! `b_{p,n}(r)` and their Fourier partners by two independent routes
//! (contour integration of a coset-indexed generating series, and explicit
//! Bessel/Kloosterman expansions), assembles the sphere kernels
//! `A_n(x, zeta)` from them, and verifies the interpolation identity
//!
//! ```text
//! f(x) = sum_n int A_n(x,z) f(sqrt(n) z) dz + sum_n int A~_n(x,z) f^(sqrt(n) z) dz
//! ```
//!
//! on a structured family of harmonic Gaussians, together with all the
//! modular, arithmetic and harmonic-analysis identities the construction
//! rests on.
//!
//! Module map:
//! - [`modular`]: upper half-plane arithmetic, branch-consistent powers,
//!   theta nullwerte and their transformation factors, Gauss sums.
//! - [`words`]: the free-group word sets in `Gamma(2)`, bottom-row
//!   enumeration and the completion entry `alpha(c, d)`.
//! - [`series`]: generating series over the word sets, Fourier coefficient
//!   extraction by contour integration, radial interpolation residuals.
//! - [`kloosterman`]: Bessel functions, Kloosterman-type sums, closed-form
//!   coefficients and the Poincare-series cross identity.
//! - [`harmonics`]: zonal spherical harmonics, sphere quadrature, lift
//!   operators and the harmonic Gaussian test family.
//! - [`kernels`]: kernel assembly and the end-to-end interpolation check.
//! - [`checks`]: the acceptance suite shared by `cargo test` and the CLI.

pub mod bessel;
pub mod checks;
pub mod dd;
mod error;
pub mod harmonics;
pub mod io;
pub mod kernels;
pub mod kloosterman;
pub mod modular;
mod quadrature1d;
pub mod series;
mod tables;
pub mod words;

pub use error::{Error, Result};

pub use modular::HalfPlanePoint;
pub use series::{CoefficientResult, Method};
