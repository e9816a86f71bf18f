//! Numerical verification toolkit for a family of exact identities tying
//! modified Bessel functions of imaginary order to Liouville quantum
//! mechanics, complex-time evolution, and the Backlund/duality structure of
//! the Liouville, sinh-Gordon and sine-Gordon field theories.
//!
//! The crate is organised as a library of pure evaluation and verification
//! routines plus a batch CLI (`cataplex`) that runs the checks and emits
//! machine-readable reports:
//!
//! - [`numeric`]: double-exponential quadrature and an adaptive Runge-Kutta
//!   initial-value solver.
//! - [`bessel`]: modified Bessel functions K of imaginary/complex order and
//!   I of real order, with integral, series and asymptotic regimes.
//! - [`liouville`]: the product kernel S(x,y,z), Liouville eigenfunctions,
//!   and the integral/spectral identities connecting them.
//! - [`timemap`]: the energy-dependent complex-time map t(z, E), its deep
//!   Euclidean series, and constant-modulus contour tracing.
//! - [`backlund`]: classical fixed-time Backlund machinery for the three
//!   exponential-potential models.
//! - [`entwine`]: lattice-discretised checks of the operator cross-weaving
//!   identities satisfied by the duality kernel.
//! - [`cli`]: batch runner, report types, and CSV/JSON serialization.

pub mod backlund;
pub mod bessel;
pub mod cli;
pub mod entwine;
pub mod liouville;
pub mod numeric;
pub mod timemap;

#[cfg(test)]
pub(crate) mod test_oracles;
