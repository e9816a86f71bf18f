//! Shared numerical engine: double-exponential quadrature over finite,
//! semi-infinite and infinite intervals, and an adaptive embedded
//! Runge-Kutta initial-value solver.
//!
//! Everything here is a pure function of its inputs and safe to call
//! concurrently.

mod ode;
mod quad;

pub use ode::{solve_ivp, solve_ivp_sampled, OdePath};
pub use quad::{integrate_finite, integrate_half_line, integrate_real_line, QuadratureResult};

use thiserror::Error;

/// Accuracy targets shared by the quadrature and ODE drivers.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerance {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_refinements: u32,
}

impl Tolerance {
    pub fn new(abs_tol: f64, rel_tol: f64, max_refinements: u32) -> Result<Self, NumericError> {
        if !(abs_tol > 0.0) || !(rel_tol > 0.0) || max_refinements < 1 {
            return Err(NumericError::InvalidTolerance {
                abs_tol,
                rel_tol,
                max_refinements,
            });
        }
        Ok(Self {
            abs_tol,
            rel_tol,
            max_refinements,
        })
    }

    /// Tight default used by the verification suites.
    pub fn strict() -> Self {
        Self {
            abs_tol: 1e-13,
            rel_tol: 1e-12,
            max_refinements: 13,
        }
    }

    pub fn with_abs(mut self, abs_tol: f64) -> Self {
        self.abs_tol = abs_tol;
        self
    }

    pub fn with_rel(mut self, rel_tol: f64) -> Self {
        self.rel_tol = rel_tol;
        self
    }
}

impl Default for Tolerance {
    fn default() -> Self {
        Self {
            abs_tol: 1e-10,
            rel_tol: 1e-10,
            max_refinements: 12,
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NumericError {
    #[error("quadrature did not converge: estimate {error_estimate:.3e} after {levels} refinement levels")]
    NonConvergence {
        value_re: f64,
        value_im: f64,
        error_estimate: f64,
        levels: u32,
    },
    #[error("ODE step size collapsed below machine resolution at sigma = {sigma}")]
    StepUnderflow { sigma: f64 },
    #[error("invalid tolerance: abs_tol = {abs_tol}, rel_tol = {rel_tol}, max_refinements = {max_refinements}")]
    InvalidTolerance {
        abs_tol: f64,
        rel_tol: f64,
        max_refinements: u32,
    },
    #[error("integration range is empty or not increasing: [{lo}, {hi}]")]
    BadRange { lo: f64, hi: f64 },
}
