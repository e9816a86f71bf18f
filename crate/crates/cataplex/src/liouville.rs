//! Liouville quantum mechanics: the product kernel S(x,y,z), the continuum
//! eigenfunctions, and numerical verification of the exact identities that
//! tie them together.
//!
//! The kernel is an exponential of exponentials,
//!
//!   S(x,y,z) = (1/2) exp(-F),  F = (1/2)(e^{x+y-z} + e^{x-y+z} + e^{-x+y+z}),
//!
//! and satisfies the product identity
//!
//!   K_nu(e^x) K_nu(e^y) = int dz S(x,y,z) K_nu(e^z),
//!
//! which in spectral form says S is the propagator of H = p^2 + e^{2x}
//! evaluated at the energy-dependent complex time fixed by
//! e^{-iEt} = K_{i sqrt(E)}(e^z).

use crate::bessel::{self, BesselError, ImaginaryOrder};
use crate::numeric::{self, NumericError, Tolerance};
use num_complex::Complex64;
use std::f64::consts::PI;
use thiserror::Error;

/// A positive energy labelling a Liouville scattering state. There is no
/// state at E = 0, so construction rejects it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyShell {
    energy: f64,
}

impl EnergyShell {
    pub fn new(energy: f64) -> Result<Self, LiouvilleError> {
        if !(energy > 0.0) || !energy.is_finite() {
            return Err(LiouvilleError::InvalidEnergy { energy });
        }
        Ok(Self { energy })
    }

    pub fn energy(&self) -> f64 {
        self.energy
    }

    /// mu = sqrt(E), the imaginary part of the Bessel order on this shell.
    pub fn mu(&self) -> f64 {
        self.energy.sqrt()
    }
}

/// Argument triple of the kernel S(x,y,z).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelPoint {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl KernelPoint {
    pub fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }
}

/// Smooth energy profile used to smear the delta-normalized statements.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WavePacket {
    pub shape: PacketShape,
    pub center: f64,
    pub width: f64,
    pub amplitude: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PacketShape {
    Gaussian,
    /// Compactly supported bump exp(-1/(1-t^2)) on |t| < 1.
    Bump,
}

impl WavePacket {
    /// Construction enforces that the profile mass below E = 0 is below
    /// 1e-12 of the total, so the packet only smears physical shells.
    pub fn new(
        shape: PacketShape,
        center: f64,
        width: f64,
        amplitude: f64,
    ) -> Result<Self, LiouvilleError> {
        if !(width > 0.0) || !(center > 0.0) {
            return Err(LiouvilleError::InvalidPacket {
                center,
                width,
                reason: "center and width must be positive".into(),
            });
        }
        let ok = match shape {
            PacketShape::Gaussian => {
                0.5 * libm::erfc(center / (width * std::f64::consts::SQRT_2)) < 1e-12
            }
            PacketShape::Bump => center >= width,
        };
        if !ok {
            return Err(LiouvilleError::InvalidPacket {
                center,
                width,
                reason: "profile mass below E = 0 exceeds 1e-12 of total".into(),
            });
        }
        Ok(Self {
            shape,
            center,
            width,
            amplitude,
        })
    }

    pub fn gaussian(center: f64, width: f64) -> Result<Self, LiouvilleError> {
        Self::new(PacketShape::Gaussian, center, width, 1.0)
    }

    pub fn bump(center: f64, halfwidth: f64) -> Result<Self, LiouvilleError> {
        Self::new(PacketShape::Bump, center, halfwidth, 1.0)
    }

    pub fn scaled(mut self, factor: f64) -> Self {
        self.amplitude *= factor;
        self
    }

    pub fn eval(&self, energy: f64) -> f64 {
        let t = (energy - self.center) / self.width;
        match self.shape {
            PacketShape::Gaussian => self.amplitude * (-0.5 * t * t).exp(),
            PacketShape::Bump => {
                if t.abs() < 1.0 {
                    self.amplitude * (-1.0 / (1.0 - t * t)).exp()
                } else {
                    0.0
                }
            }
        }
    }

    /// Highest energy with non-negligible profile mass.
    fn support_hi(&self) -> f64 {
        match self.shape {
            PacketShape::Gaussian => self.center + 9.0 * self.width,
            PacketShape::Bump => self.center + self.width,
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LiouvilleError {
    #[error("energy must be positive and finite; there is no state at E = 0 (got {energy})")]
    InvalidEnergy { energy: f64 },
    #[error("invalid wave packet (center {center}, width {width}): {reason}")]
    InvalidPacket {
        center: f64,
        width: f64,
        reason: String,
    },
    #[error(transparent)]
    Bessel(#[from] BesselError),
    #[error(transparent)]
    Numeric(#[from] NumericError),
}

/// F(x,y,z) = (1/2)(e^{x+y-z} + e^{x-y+z} + e^{-x+y+z}). Saturates to
/// +infinity for extreme arguments, which drives S to zero.
pub fn macdonald_f(p: &KernelPoint) -> f64 {
    let (x, y, z) = (p.x, p.y, p.z);
    0.5 * ((x + y - z).exp() + (x - y + z).exp() + (-x + y + z).exp())
}

/// The kernel pair (F, S) with S = (1/2) e^{-F}.
pub fn propagator_closed_form(p: &KernelPoint) -> (f64, f64) {
    let f = macdonald_f(p);
    (f, 0.5 * (-f).exp())
}

/// S(x,y,z) alone.
pub fn macdonald_s(p: &KernelPoint) -> f64 {
    propagator_closed_form(p).1
}

/// psi_E(x) = (1/pi) sqrt(sinh(pi sqrt(E))) K_{i sqrt(E)}(e^x). Real by
/// construction; the positive square-root branch is used throughout.
pub fn eigenfunction(shell: EnergyShell, x: f64, tol: &Tolerance) -> Result<f64, LiouvilleError> {
    let mu = shell.mu();
    let k = bessel::k_imag(ImaginaryOrder::new(mu), x.exp(), tol)?;
    Ok((PI * mu).sinh().sqrt() / PI * k)
}

/// Outcome of one identity check: both sides and their absolute gap.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IdentityCheck {
    pub lhs: f64,
    pub rhs: f64,
    pub residual: f64,
}

/// Verify K_nu(e^x) K_nu(e^y) = int dz S(x,y,z) K_nu(e^z) at nu = i mu.
pub fn verify_macdonald(
    x: f64,
    y: f64,
    order: ImaginaryOrder,
    tol: &Tolerance,
) -> Result<IdentityCheck, LiouvilleError> {
    let lhs = bessel::k_imag(order, x.exp(), tol)? * bessel::k_imag(order, y.exp(), tol)?;
    let inner_tol = *tol;
    let rhs = numeric::integrate_real_line(
        |z| {
            let s = macdonald_s(&KernelPoint::new(x, y, z));
            if s == 0.0 {
                return Complex64::new(0.0, 0.0);
            }
            let w = z.exp();
            let k = if w.is_finite() && w > 0.0 {
                bessel::k_imag(order, w, &inner_tol).unwrap_or(0.0)
            } else {
                0.0
            };
            Complex64::new(s * k, 0.0)
        },
        tol,
    )?
    .value
    .re;
    Ok(IdentityCheck {
        lhs,
        rhs,
        residual: (lhs - rhs).abs(),
    })
}

/// Result of the sister-identity check. `slow_decay` warns that the
/// integrand only decays algebraically-times-exponentially, which happens
/// on the diagonal x = y.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SisterCheck {
    pub lhs: f64,
    pub rhs: f64,
    pub residual: f64,
    pub slow_decay: bool,
}

/// Verify the unbounded-solution identity
/// theta(y-x) I_nu(e^x) K_nu(e^y) + theta(x-y) I_nu(e^y) K_nu(e^x)
///   = int dz S(x,y,z) I_nu(e^z)
/// for real order nu >= 0.
pub fn verify_sister(
    x: f64,
    y: f64,
    nu: f64,
    tol: &Tolerance,
) -> Result<SisterCheck, LiouvilleError> {
    let nu_c = Complex64::new(nu, 0.0);
    let (lo, hi) = if x <= y { (x, y) } else { (y, x) };
    let lhs = bessel::i_real(nu, lo.exp(), tol)?
        * bessel::k_complex_integral(nu_c, Complex64::new(hi.exp(), 0.0), tol)?.re;
    let inner_tol = *tol;
    let rhs = numeric::integrate_real_line(
        |z| Complex64::new(sister_integrand(x, y, nu, z, &inner_tol), 0.0),
        tol,
    )?
    .value
    .re;
    Ok(SisterCheck {
        lhs,
        rhs,
        residual: (lhs - rhs).abs(),
        slow_decay: x == y,
    })
}

/// S(x,y,z) I_nu(e^z), organised so the S-suppression and the exponential
/// growth of I cancel in exponent space instead of meeting as 0 * inf.
fn sister_integrand(x: f64, y: f64, nu: f64, z: f64, tol: &Tolerance) -> f64 {
    let w = z.exp();
    if !w.is_finite() {
        return 0.0;
    }
    let f = macdonald_f(&KernelPoint::new(x, y, z));
    if w <= 300.0 {
        if f > 745.0 {
            // S underflows and I is still representable.
            return 0.0;
        }
        return 0.5 * (-f).exp() * bessel::i_real(nu, w, tol).unwrap_or(0.0);
    }
    // Large argument: I_nu(w) ~ e^w/sqrt(2 pi w) sum_k (-1)^k a_k w^{-k}.
    let exponent = -f + w - 0.5 * (2.0 * PI * w).ln();
    if exponent < -745.0 {
        return 0.0;
    }
    let four_nu_sq = 4.0 * nu * nu;
    let mut coeff = 1.0;
    let mut sum = 1.0;
    for k in 1..=8 {
        let kf = k as f64;
        let odd = 2.0 * kf - 1.0;
        coeff *= -(four_nu_sq - odd * odd) / (8.0 * kf) / w;
        sum += coeff;
    }
    0.5 * exponent.exp() * sum
}

/// Default upper energy cutoff: the integrand of the spectral form decays
/// like e^{-(pi/2) sqrt(E)}, so E_max = ((2/pi) ln(10/tail))^2 pushes the
/// tail below `tail`.
pub fn default_energy_cutoff(tail: f64) -> f64 {
    let mu_max = (2.0 / PI) * (10.0 / tail).ln();
    mu_max * mu_max
}

/// Spectral reconstruction of the kernel:
/// S(x,y,z) = int_0^{E_max} dE K_{i sqrt(E)}(e^z) psi_E(x) psi_E(y),
/// integrated in mu = sqrt(E) to flatten the sqrt singularity at zero.
pub fn spectral_propagator(
    p: &KernelPoint,
    e_max: f64,
    tol: &Tolerance,
) -> Result<f64, LiouvilleError> {
    let inner_tol = *tol;
    let (x, y, z) = (p.x, p.y, p.z);
    let r = numeric::integrate_finite(
        |mu| {
            let order = ImaginaryOrder::new(mu);
            let kx = bessel::k_imag(order, x.exp(), &inner_tol).unwrap_or(0.0);
            let ky = bessel::k_imag(order, y.exp(), &inner_tol).unwrap_or(0.0);
            let kz = bessel::k_imag(order, z.exp(), &inner_tol).unwrap_or(0.0);
            let weight = 2.0 * mu * (PI * mu).sinh() / (PI * PI);
            Complex64::new(weight * kx * ky * kz, 0.0)
        },
        0.0,
        e_max.sqrt(),
        tol,
    )?;
    Ok(r.value.re)
}

/// Precomputed cosine transform of a packet against the spectral measure:
/// Ghat(X) = (1/pi) int dE g(E) sqrt(sinh(pi sqrt(E))) cos(sqrt(E) X),
/// tabulated on a fixed composite grid so the smeared wave function
/// Psi_g(x) = int_0^inf dX e^{-e^x cosh X} Ghat(X) reuses it for every x.
struct PacketTransform {
    /// (X, weight, Ghat(X), cosh X), ordered by X.
    nodes: Vec<(f64, f64, f64, f64)>,
}

const PANEL_LEVEL_NODES: usize = 33;

/// Gauss-Legendre would do equally well here; a fixed-depth tanh-sinh panel
/// keeps the whole crate on one quadrature family.
fn panel_nodes(lo: f64, hi: f64) -> Vec<(f64, f64)> {
    let c = 0.5 * (lo + hi);
    let d = 0.5 * (hi - lo);
    let h = 4.0 / (PANEL_LEVEL_NODES - 1) as f64;
    let mut out = Vec::with_capacity(2 * PANEL_LEVEL_NODES);
    let mut t = -2.0 + 0.5 * h;
    while t < 2.0 {
        let s = std::f64::consts::FRAC_PI_2 * t.sinh();
        let x = c + d * s.tanh();
        let w = d * std::f64::consts::FRAC_PI_2 * t.cosh() / (s.cosh() * s.cosh()) * h;
        out.push((x, w));
        t += h;
    }
    out
}

impl PacketTransform {
    fn build(packet: &WavePacket, tol: &Tolerance) -> Result<Self, LiouvilleError> {
        let mu_hi = packet.support_hi().sqrt();
        let ghat = |big_x: f64| -> Result<f64, LiouvilleError> {
            let r = numeric::integrate_finite(
                |mu| {
                    let weight = 2.0 * mu * (PI * mu).sinh().sqrt() / PI;
                    Complex64::new(weight * packet.eval(mu * mu) * (mu * big_x).cos(), 0.0)
                },
                0.0,
                mu_hi,
                tol,
            )?;
            Ok(r.value.re)
        };

        let mut nodes = Vec::new();
        let mut peak: f64 = 0.0;
        let mut x_lo = 0.0;
        let mut quiet_panels = 0;
        while x_lo < 400.0 {
            let x_hi = x_lo + 1.0;
            let mut panel_max: f64 = 0.0;
            for (x, w) in panel_nodes(x_lo, x_hi) {
                let g = ghat(x)?;
                panel_max = panel_max.max(g.abs());
                nodes.push((x, w, g, x.cosh()));
            }
            peak = peak.max(panel_max);
            if panel_max < 1e-13 * peak.max(1e-300) {
                quiet_panels += 1;
                if quiet_panels >= 3 {
                    break;
                }
            } else {
                quiet_panels = 0;
            }
            x_lo = x_hi;
        }
        Ok(Self { nodes })
    }

    /// Psi_g(x) = int_0^inf dX e^{-e^x cosh X} Ghat(X).
    fn smeared_wavefunction(&self, x: f64) -> f64 {
        let w = x.exp();
        let mut acc = 0.0;
        for &(_, wt, g, cosh_x) in &self.nodes {
            let expo = -w * cosh_x;
            if expo < -745.0 {
                break;
            }
            acc += wt * g * expo.exp();
        }
        acc
    }
}

/// Smeared orthonormality: with Psi_g(x) = int dE g(E) psi_E(x),
/// lhs = int dx Psi_g(x) Psi_h(x) and rhs = int dE g(E) h(E); the
/// delta-normalization int psi_E1 psi_E2 = delta(E1 - E2) makes them equal.
pub fn smeared_orthonormality(
    g: &WavePacket,
    h: &WavePacket,
    tol: &Tolerance,
) -> Result<(f64, f64), LiouvilleError> {
    let tg = PacketTransform::build(g, tol)?;
    let th = PacketTransform::build(h, tol)?;

    // Panel the x axis downward from the barrier; the product of smeared
    // wave functions dies off both ways.
    let mut lhs = 0.0;
    let mut x_hi = 6.0f64;
    let mut quiet = 0;
    let panel_w = 2.0;
    let mut scale: f64 = 0.0;
    while x_hi > -420.0 {
        let x_lo = x_hi - panel_w;
        let mut panel = 0.0;
        for (x, w) in panel_nodes(x_lo, x_hi) {
            panel += w * tg.smeared_wavefunction(x) * th.smeared_wavefunction(x);
        }
        lhs += panel;
        scale = scale.max(panel.abs());
        if panel.abs() < 1e-11 * scale.max(1e-300) {
            quiet += 1;
            if quiet >= 4 {
                break;
            }
        } else {
            quiet = 0;
        }
        x_hi = x_lo;
    }

    let hi = g.support_hi().max(h.support_hi());
    let rhs = numeric::integrate_finite(
        |e| Complex64::new(g.eval(e) * h.eval(e), 0.0),
        0.0,
        hi,
        tol,
    )?
    .value
    .re;
    Ok((lhs, rhs))
}

/// Smeared completeness: int_0^{E_max} dE psi_E(x) int dy f(y) psi_E(y)
/// reconstructs f(x) because int dE psi_E(x) psi_E(y) = delta(x-y).
pub fn smeared_completeness<F>(
    f: F,
    x: f64,
    e_max: f64,
    tol: &Tolerance,
) -> Result<f64, LiouvilleError>
where
    F: Fn(f64) -> f64,
{
    let inner_tol = *tol;
    let r = numeric::integrate_finite(
        |mu| {
            if mu == 0.0 {
                return Complex64::new(0.0, 0.0);
            }
            let shell = EnergyShell { energy: mu * mu };
            let psi_x = match eigenfunction(shell, x, &inner_tol) {
                Ok(v) => v,
                Err(_) => return Complex64::new(0.0, 0.0),
            };
            let projection = numeric::integrate_real_line(
                |y| {
                    let fv = f(y);
                    if fv == 0.0 {
                        return Complex64::new(0.0, 0.0);
                    }
                    match eigenfunction(shell, y, &inner_tol) {
                        Ok(p) => Complex64::new(fv * p, 0.0),
                        Err(_) => Complex64::new(0.0, 0.0),
                    }
                },
                &inner_tol,
            )
            .map(|r| r.value.re)
            .unwrap_or(0.0);
            Complex64::new(2.0 * mu * psi_x * projection, 0.0)
        },
        0.0,
        e_max.sqrt(),
        tol,
    )?;
    Ok(r.value.re)
}

/// Each shell component of S solves the Liouville equation in every slot,
/// so (-d^2/dx^2 + e^{2x}) S = (-d^2/dz^2 + e^{2z}) S exactly; this returns
/// the central-difference residual of that relation at step h.
pub fn qm_entwine_check(p: &KernelPoint, h: f64) -> f64 {
    let s = |x: f64, y: f64, z: f64| macdonald_s(&KernelPoint::new(x, y, z));
    let (x, y, z) = (p.x, p.y, p.z);
    let s0 = s(x, y, z);
    let d2x = (s(x + h, y, z) - 2.0 * s0 + s(x - h, y, z)) / (h * h);
    let d2z = (s(x, y, z + h) - 2.0 * s0 + s(x, y, z - h)) / (h * h);
    let op_x = -d2x + (2.0 * x).exp() * s0;
    let op_z = -d2z + (2.0 * z).exp() * s0;
    (op_x - op_z).abs()
}

/// The free-particle limit of F: as y, z -> -inf with X = y - z fixed,
/// F(x, y, z) -> e^x cosh X. Returns the limiting evaluation
/// F(x, offset, offset - X) paired with the exact limit.
pub fn free_particle_limit(x: f64, big_x: f64, offset: f64) -> (f64, f64) {
    let f = macdonald_f(&KernelPoint::new(x, offset, offset - big_x));
    (f, x.exp() * big_x.cosh())
}
