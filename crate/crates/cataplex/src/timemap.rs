//! The energy-dependent complex-time correspondence.
//!
//! On the shell of energy E the evolution parameter t and the kernel
//! parameter z are tied by e^{-iEt} = K_{i sqrt(E)}(e^z), i.e.
//! t = (i/E) ln K_{i sqrt(E)}(e^z). Real z is Euclidean time; curves of
//! real-time evolution are contours of constant |K| in the complex z
//! plane, which the tracer here follows with a predictor-corrector walk.
//!
//! For deep Euclidean time t = -iT, T -> infinity, the asymptotic series
//! of K gives
//!
//!   T ~ (1/E) ( e^z + z/2 - ln sqrt(pi/2) + (1+4E)/8 e^{-z} + O(e^{-2z}) ).

use crate::bessel::{self, BesselError};
use crate::liouville::EnergyShell;
use crate::numeric::Tolerance;
use num_complex::Complex64;
use std::f64::consts::PI;
use thiserror::Error;

/// A point of the t <-> z correspondence on one energy shell. The branch
/// index b records which sheet of the logarithm was used:
/// t = (i/E)(ln|K| + i(Arg K + 2 pi b)), so e^{-iEt} = K holds exactly for
/// every recorded branch.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShellTime {
    pub shell: EnergyShell,
    pub z: Complex64,
    pub t: Complex64,
    pub branch: i32,
}

impl ShellTime {
    /// Continuous (unwrapped) phase of K implied by t.
    pub fn unwrapped_phase(&self) -> f64 {
        -self.shell.energy() * self.t.re
    }
}

/// Which representation of K evaluated a contour point.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KRegime {
    Integral,
    Asymptotic,
    /// Asymptotic prefactors continued beyond the principal strip.
    AsymptoticContinued,
}

/// Classify the evaluation regime at exponent z.
pub fn k_regime(z: Complex64) -> KRegime {
    let w = z.exp();
    if z.im.abs() > PI {
        KRegime::AsymptoticContinued
    } else if w.norm() >= bessel::REGIME_SWITCH_RADIUS {
        KRegime::Asymptotic
    } else {
        KRegime::Integral
    }
}

/// A traced constant-modulus contour of K_{i sqrt(E)}(e^z).
#[derive(Debug, Clone, PartialEq)]
pub struct Contour {
    pub points: Vec<Complex64>,
    /// The constant |K| value the corrector holds.
    pub level: f64,
    pub closed: bool,
    /// Branch index of the phase at each point.
    pub branch_track: Vec<i32>,
    /// Continuous (unwrapped) phase of K at each point.
    pub phases: Vec<f64>,
    /// |K| at each point, after correction.
    pub moduli: Vec<f64>,
    /// Evaluation regime at each point.
    pub regimes: Vec<KRegime>,
    /// Nominal arc step used for closure detection.
    pub step: f64,
    pub termination: Termination,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Termination {
    /// Returned to the start after at least 3 steps.
    ClosedLoop,
    /// max_steps exhausted.
    Budget,
    /// Left the evaluable domain of K.
    LeftDomain,
    /// The gradient of log|K| vanished along the way.
    Saddle,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ContourClass {
    Open,
    Closed,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TimeMapError {
    #[error("K_{{i sqrt(E)}}(e^z) vanishes at z = {z}; the logarithm is singular there")]
    BesselZero { z: Complex64 },
    #[error("gradient of log|K| vanishes at z = {z} (saddle or extremum)")]
    SaddlePoint { z: Complex64 },
    #[error("contour has too few points to classify")]
    Degenerate,
    #[error("step and max_steps must be positive")]
    InvalidStep,
    #[error("series order must be 0..=3, got {order}")]
    InvalidOrder { order: usize },
    #[error(transparent)]
    Bessel(#[from] BesselError),
}

/// Relative tolerance the corrector holds | |K| - level | / level to.
pub const CORRECTOR_TOL: f64 = 1e-10;

/// Guarded tracing domain: |Im z| below the asymptotic sector boundary
/// 3pi/2 with a safety margin.
pub const DOMAIN_GUARD: f64 = 1.5 * PI - 0.1;

/// Evaluate t = (i/E) ln K_{i sqrt(E)}(e^z). The branch is principal
/// unless `branch_hint` supplies a previous unwrapped phase, in which case
/// the sheet closest to the hint is chosen.
pub fn t_of_z(
    shell: EnergyShell,
    z: Complex64,
    branch_hint: Option<f64>,
    tol: &Tolerance,
) -> Result<ShellTime, TimeMapError> {
    let nu = Complex64::new(0.0, shell.mu());
    let k = bessel::k_from_log_argument(nu, z, tol)?;
    if k.norm() == 0.0 || !k.norm().is_finite() {
        return Err(TimeMapError::BesselZero { z });
    }
    let principal = k.arg();
    let branch = match branch_hint {
        Some(theta_prev) => ((theta_prev - principal) / (2.0 * PI)).round() as i32,
        None => 0,
    };
    let theta = principal + 2.0 * PI * branch as f64;
    let log_k = Complex64::new(k.norm().ln(), theta);
    let t = Complex64::new(0.0, 1.0) * log_k / shell.energy();
    Ok(ShellTime {
        shell,
        z,
        t,
        branch,
    })
}

/// The deep-Euclidean expansion of T = -(1/E) ln K_{i sqrt(E)}(e^z) for
/// real z, truncated after `order + 1` of its four displayed terms.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EuclideanSeries {
    pub shell: EnergyShell,
}

impl EuclideanSeries {
    pub fn new(shell: EnergyShell) -> Self {
        Self { shell }
    }

    /// Coefficient of the e^{-z} correction, (1 + 4E)/8.
    pub fn correction_coefficient(&self) -> f64 {
        (1.0 + 4.0 * self.shell.energy()) / 8.0
    }

    pub fn eval(&self, z: f64, order: usize) -> Result<f64, TimeMapError> {
        if order > 3 {
            return Err(TimeMapError::InvalidOrder { order });
        }
        let e = self.shell.energy();
        let mut t = z.exp();
        if order >= 1 {
            t += 0.5 * z;
        }
        if order >= 2 {
            t -= (PI / 2.0).sqrt().ln();
        }
        if order >= 3 {
            t += self.correction_coefficient() * (-z).exp();
        }
        Ok(t / e)
    }
}

/// Convenience wrapper over [`EuclideanSeries::eval`].
pub fn euclidean_t_series(shell: EnergyShell, z: f64, order: usize) -> Result<f64, TimeMapError> {
    EuclideanSeries::new(shell).eval(z, order)
}

/// d/dz ln K on the shell; the building block of the tracer.
fn log_k_gradient(
    nu: Complex64,
    z: Complex64,
    tol: &Tolerance,
) -> Result<(Complex64, Complex64), TimeMapError> {
    let k = bessel::k_from_log_argument(nu, z, tol)?;
    if k.norm() == 0.0 || !k.norm().is_finite() {
        return Err(TimeMapError::BesselZero { z });
    }
    let dk = bessel::k_log_argument_derivative(nu, z, tol)?;
    Ok((k, dk / k))
}

/// Trace the contour |K_{i sqrt(E)}(e^z)| = |K(e^{z0})| by arc-length
/// predictor steps tangent to the level set (the direction in which the
/// phase of K increases) followed by Newton corrector steps along the
/// modulus gradient. Tracing stops on closure, budget exhaustion, or
/// domain exit; a vanishing gradient at the seed is an error.
pub fn trace_level_contour(
    shell: EnergyShell,
    z0: Complex64,
    step: f64,
    max_steps: usize,
    tol: &Tolerance,
) -> Result<Contour, TimeMapError> {
    if !(step > 0.0) || max_steps == 0 {
        return Err(TimeMapError::InvalidStep);
    }
    let nu = Complex64::new(0.0, shell.mu());
    let (k0, g0) = log_k_gradient(nu, z0, tol)?;
    if g0.norm() < 1e-8 {
        return Err(TimeMapError::SaddlePoint { z: z0 });
    }
    let level = k0.norm();

    let mut points = vec![z0];
    let mut moduli = vec![k0.norm()];
    let mut phases = vec![k0.arg()];
    let mut branch_track = vec![0i32];
    let mut regimes = vec![k_regime(z0)];
    let mut termination = Termination::Budget;
    let mut closed = false;

    let mut z = z0;
    let mut grad = g0;
    let mut k_prev = k0;
    let mut h = step;

    'walk: for _ in 0..max_steps {
        // Predictor along the level set: i * conj(grad) points where the
        // phase grows.
        let mut accepted = None;
        for _attempt in 0..12 {
            let tangent = Complex64::new(0.0, 1.0) * grad.conj() / grad.norm();
            let mut z_try = z + tangent * h;
            // Newton corrector along the modulus gradient.
            let mut ok = false;
            let mut k_try = k_prev;
            let mut g_try = grad;
            for _ in 0..10 {
                match log_k_gradient(nu, z_try, tol) {
                    Ok((k, g)) => {
                        k_try = k;
                        g_try = g;
                        if g.norm() < 1e-10 {
                            termination = Termination::Saddle;
                            break 'walk;
                        }
                        let r = (k.norm() / level).ln();
                        if r.abs() <= CORRECTOR_TOL {
                            ok = true;
                            break;
                        }
                        z_try -= r * g.conj() / g.norm_sqr();
                    }
                    Err(TimeMapError::Bessel(BesselError::OutsideDomain { .. }))
                    | Err(TimeMapError::BesselZero { .. }) => {
                        termination = Termination::LeftDomain;
                        break 'walk;
                    }
                    Err(e) => return Err(e),
                }
            }
            if ok && (z_try - z).norm() <= 2.0 * h {
                accepted = Some((z_try, k_try, g_try));
                break;
            }
            // High curvature: shrink the step and retry.
            h *= 0.5;
            if h < step * 1e-3 {
                termination = Termination::Saddle;
                break 'walk;
            }
        }
        let (z_new, k_new, g_new) = match accepted {
            Some(t) => t,
            None => {
                termination = Termination::Saddle;
                break;
            }
        };

        if z_new.im.abs() >= DOMAIN_GUARD {
            termination = Termination::LeftDomain;
            break;
        }

        // Unwrapped phase continues by the principal increment.
        let delta = (k_new / k_prev).arg();
        let theta = phases.last().unwrap() + delta;
        points.push(z_new);
        moduli.push(k_new.norm());
        phases.push(theta);
        branch_track.push(((theta - k_new.arg()) / (2.0 * PI)).round() as i32);
        regimes.push(k_regime(z_new));

        z = z_new;
        k_prev = k_new;
        grad = g_new;
        h = (h * 2.0).min(step);

        if points.len() > 3 && (z - z0).norm() < step {
            closed = true;
            termination = Termination::ClosedLoop;
            break;
        }
    }

    Ok(Contour {
        points,
        level,
        closed,
        branch_track,
        phases,
        moduli,
        regimes,
        step,
        termination,
    })
}

/// Closed iff the endpoints coincide within the nominal step after at
/// least 3 steps; Open otherwise.
pub fn classify_contour(contour: &Contour) -> Result<ContourClass, TimeMapError> {
    if contour.points.len() < 2 {
        return Err(TimeMapError::Degenerate);
    }
    let first = contour.points[0];
    let last = *contour.points.last().unwrap();
    if contour.points.len() > 3 && (last - first).norm() < contour.step {
        Ok(ContourClass::Closed)
    } else {
        Ok(ContourClass::Open)
    }
}
