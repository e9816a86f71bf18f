//! Modified Bessel functions for the verification suites: K of imaginary
//! and complex order, I of real order.
//!
//! K is evaluated through two representations. For arguments of moderate
//! size with positive real part, the integral transform
//!
//!   K_nu(w) = (1/2) int_{-inf}^{inf} exp(-w cosh X + nu X) dX,
//!
//! and for large arguments the asymptotic series
//!
//!   K_nu(w) ~ sqrt(pi/(2w)) e^{-w} { 1 + (4nu^2-1)/8 w^{-1} + ... },
//!
//! valid in the sector |arg w| < 3pi/2. The sector only opens up beyond the
//! principal branch when the argument is given as an exponent, which
//! [`k_from_log_argument`] supports for the complex-time map.

use crate::numeric::{self, NumericError, Tolerance};
use num_complex::Complex64;
use std::f64::consts::PI;
use thiserror::Error;

/// Order nu = i mu with mu >= 0; negative inputs fold by the evenness
/// K_nu = K_{-nu}.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ImaginaryOrder {
    mu: f64,
}

impl ImaginaryOrder {
    pub fn new(mu: f64) -> Self {
        Self { mu: mu.abs() }
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn as_complex(&self) -> Complex64 {
        Complex64::new(0.0, self.mu)
    }
}

/// Number of correction terms retained in the asymptotic series.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SeriesOrder {
    pub nterms: usize,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BesselError {
    #[error("argument outside the function domain: {reason}")]
    DomainError { reason: String },
    #[error("no evaluation regime applies at w = {w_re}+{w_im}i (|w| = {modulus:.3e})")]
    OutsideDomain { w_re: f64, w_im: f64, modulus: f64 },
    #[error("series overflow at argument {argument}")]
    Overflow { argument: f64 },
    #[error(transparent)]
    Quadrature(#[from] NumericError),
}

/// Arguments at or above this modulus use the asymptotic series; below it,
/// the integral transform.
pub const REGIME_SWITCH_RADIUS: f64 = 10.0;

/// K_{i mu}(x) for x > 0, via the cosine transform
/// K_{i mu}(x) = int_0^inf e^{-x cosh X} cos(mu X) dX.
pub fn k_imag(order: ImaginaryOrder, x: f64, tol: &Tolerance) -> Result<f64, BesselError> {
    if !(x > 0.0) {
        return Err(BesselError::DomainError {
            reason: format!("k_imag requires x > 0, got {x}"),
        });
    }
    let mu = order.mu();
    let r = numeric::integrate_half_line(
        |big_x| Complex64::new((-x * big_x.cosh()).exp() * (mu * big_x).cos(), 0.0),
        tol,
    )?;
    Ok(r.value.re)
}

/// K_nu(w) by the integral transform; requires Re w > 0.
pub fn k_complex_integral(
    nu: Complex64,
    w: Complex64,
    tol: &Tolerance,
) -> Result<Complex64, BesselError> {
    if !(w.re > 0.0) {
        return Err(BesselError::DomainError {
            reason: format!("integral regime requires Re w > 0, got {}", w.re),
        });
    }
    let r = numeric::integrate_real_line(
        |big_x| {
            let exponent = -w * big_x.cosh() + nu * big_x;
            if exponent.re > 700.0 {
                return Complex64::new(0.0, 0.0);
            }
            exponent.exp()
        },
        tol,
    )?;
    Ok(0.5 * r.value)
}

/// Truncated asymptotic series sqrt(pi/(2w)) e^{-w} sum_{k<=n} a_k w^{-k}
/// with a_0 = 1 and a_k = a_{k-1} (4 nu^2 - (2k-1)^2) / (8k).
pub fn k_asymptotic(nu: Complex64, w: Complex64, order: SeriesOrder) -> Result<Complex64, BesselError> {
    if w.norm() == 0.0 {
        return Err(BesselError::DomainError {
            reason: "asymptotic series undefined at w = 0".into(),
        });
    }
    let four_nu_sq = 4.0 * nu * nu;
    let mut coeff = Complex64::new(1.0, 0.0);
    let mut sum = coeff;
    for k in 1..=order.nterms {
        let kf = k as f64;
        let odd = 2.0 * kf - 1.0;
        coeff *= (four_nu_sq - odd * odd) / (8.0 * kf) / w;
        sum += coeff;
    }
    Ok((PI / (2.0 * w)).sqrt() * (-w).exp() * sum)
}

/// Asymptotic value with the truncation depth chosen by the
/// first-omitted-term rule: stop before the first term that grows.
fn k_asymptotic_auto(nu: Complex64, w: Complex64) -> Complex64 {
    let four_nu_sq = 4.0 * nu * nu;
    let mut coeff = Complex64::new(1.0, 0.0);
    let mut sum = coeff;
    let mut prev_mag = 1.0f64;
    for k in 1..64 {
        let kf = k as f64;
        let odd = 2.0 * kf - 1.0;
        let next = coeff * (four_nu_sq - odd * odd) / (8.0 * kf) / w;
        let mag = next.norm();
        if mag >= prev_mag || mag < 1e-18 * sum.norm() {
            if mag < prev_mag {
                sum += next;
            }
            break;
        }
        coeff = next;
        sum += coeff;
        prev_mag = mag;
    }
    (PI / (2.0 * w)).sqrt() * (-w).exp() * sum
}

/// K_nu(w) for complex order and argument, dispatching between the integral
/// transform (|w| below the switch radius, Re w > 0) and the asymptotic
/// series (|w| at or above it).
pub fn k_complex(nu: Complex64, w: Complex64, tol: &Tolerance) -> Result<Complex64, BesselError> {
    if w.norm() >= REGIME_SWITCH_RADIUS {
        return Ok(k_asymptotic_auto(nu, w));
    }
    if w.re > 0.0 {
        return k_complex_integral(nu, w, tol);
    }
    Err(BesselError::OutsideDomain {
        w_re: w.re,
        w_im: w.im,
        modulus: w.norm(),
    })
}

/// K_nu(e^z) as an analytic function of the exponent z, valid for
/// |Im z| < 3pi/2. Inside the principal strip |Im z| <= pi this agrees with
/// `k_complex` at w = e^z; beyond it the asymptotic prefactors are built
/// from z itself, which continues the function across the branch cut of the
/// principal argument.
pub fn k_from_log_argument(
    nu: Complex64,
    z: Complex64,
    tol: &Tolerance,
) -> Result<Complex64, BesselError> {
    let w = z.exp();
    if z.im.abs() <= PI {
        return k_complex(nu, w, tol);
    }
    if z.im.abs() < 1.5 * PI && w.norm() >= REGIME_SWITCH_RADIUS {
        // sqrt(pi/(2w)) continued through the exponent: sqrt(pi/2) e^{-z/2}.
        let four_nu_sq = 4.0 * nu * nu;
        let mut coeff = Complex64::new(1.0, 0.0);
        let mut sum = coeff;
        let mut prev_mag = 1.0f64;
        let inv_w = (-z).exp();
        for k in 1..64 {
            let kf = k as f64;
            let odd = 2.0 * kf - 1.0;
            let next = coeff * (four_nu_sq - odd * odd) / (8.0 * kf) * inv_w;
            let mag = next.norm();
            if mag >= prev_mag || mag < 1e-18 * sum.norm() {
                if mag < prev_mag {
                    sum += next;
                }
                break;
            }
            coeff = next;
            sum += coeff;
            prev_mag = mag;
        }
        let _ = tol;
        return Ok((PI / 2.0).sqrt() * (-0.5 * z).exp() * (-w).exp() * sum);
    }
    Err(BesselError::OutsideDomain {
        w_re: w.re,
        w_im: w.im,
        modulus: w.norm(),
    })
}

/// d/dz K_nu(e^z), from K'_nu(w) = -(K_{nu-1}(w) + K_{nu+1}(w))/2.
pub fn k_log_argument_derivative(
    nu: Complex64,
    z: Complex64,
    tol: &Tolerance,
) -> Result<Complex64, BesselError> {
    let one = Complex64::new(1.0, 0.0);
    let km = k_from_log_argument(nu - one, z, tol)?;
    let kp = k_from_log_argument(nu + one, z, tol)?;
    Ok(-0.5 * z.exp() * (km + kp))
}

/// I_nu(x) for real order nu >= 0 and x > 0, by the ascending series
/// sum_k (x/2)^{nu+2k} / (k! Gamma(nu+k+1)).
pub fn i_real(nu: f64, x: f64, tol: &Tolerance) -> Result<f64, BesselError> {
    if !(x > 0.0) || nu < 0.0 {
        return Err(BesselError::DomainError {
            reason: format!("i_real requires x > 0 and nu >= 0, got x = {x}, nu = {nu}"),
        });
    }
    let half = 0.5 * x;
    // Leading term in log space to survive large nu or tiny x.
    let log_t0 = nu * half.ln() - libm::lgamma(nu + 1.0);
    if log_t0 > 700.0 {
        return Err(BesselError::Overflow { argument: x });
    }
    let mut term = log_t0.exp();
    let mut sum = term;
    let q = half * half;
    for k in 1..500 {
        let kf = k as f64;
        term *= q / (kf * (nu + kf));
        sum += term;
        if !sum.is_finite() {
            return Err(BesselError::Overflow { argument: x });
        }
        if term < tol.abs_tol.min(tol.rel_tol * sum.abs()) && kf > half {
            break;
        }
    }
    Ok(sum)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::test_oracles::k0_series;
    use proptest::prelude::*;

    fn tol() -> Tolerance {
        Tolerance::strict()
    }

    #[test]
    fn order_folds_by_evenness() {
        let a = k_imag(ImaginaryOrder::new(-1.0), 2.0, &tol()).unwrap();
        let b = k_imag(ImaginaryOrder::new(1.0), 2.0, &tol()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn k_imag_zero_order_matches_series_oracle() {
        let got = k_imag(ImaginaryOrder::new(0.0), 1.0, &tol()).unwrap();
        assert!((got - k0_series(1.0)).abs() < 1e-12, "got {got}");
    }

    #[test]
    fn k_imag_asymptotic_tail_ratio() {
        // Leading asymptotic factor at x = 50; the first correction is
        // (4 nu^2 - 1)/(8 x) = -5/400, so the ratio sits ~1.25% below 1.
        let x = 50.0;
        let got = k_imag(ImaginaryOrder::new(1.0), x, &tol()).unwrap();
        let leading = (PI / (2.0 * x)).sqrt() * (-x).exp();
        let ratio = got / leading;
        assert!((ratio - 1.0).abs() < 0.02);
        assert!((ratio - (1.0 - 5.0 / (8.0 * x))).abs() < 1e-3);
    }

    #[test]
    fn k_complex_restricts_to_real_axis() {
        let a = k_complex(Complex64::new(0.0, 1.0), Complex64::new(2.0, 0.0), &tol()).unwrap();
        let b = k_imag(ImaginaryOrder::new(1.0), 2.0, &tol()).unwrap();
        assert!((a.re - b).abs() < 1e-12);
        assert!(a.im.abs() < 1e-12);
    }

    #[test]
    fn conjugation_symmetry_grid() {
        for &(nr, ni) in &[(0.0, 0.7), (0.5, 1.0), (0.3, -0.4)] {
            for &(wr, wi) in &[(1.5, 0.5), (2.0, -1.0), (0.8, 0.3)] {
                let nu = Complex64::new(nr, ni);
                let w = Complex64::new(wr, wi);
                let lhs = k_complex(nu.conj(), w.conj(), &tol()).unwrap();
                let rhs = k_complex(nu, w, &tol()).unwrap().conj();
                assert!((lhs - rhs).norm() < 1e-12 * (1.0 + rhs.norm()));
            }
        }
    }

    #[test]
    fn regime_agreement_on_overlap() {
        // w = 12 e^{i pi/6} is reachable by both regimes.
        let w = 12.0 * Complex64::new(0.0, PI / 6.0).exp();
        let nu = Complex64::new(0.0, 1.0);
        let by_integral = k_complex_integral(nu, w, &tol()).unwrap();
        let by_series = k_asymptotic_auto(nu, w);
        assert!(
            (by_integral - by_series).norm() < 1e-6 * by_integral.norm(),
            "integral {by_integral}, series {by_series}"
        );
    }

    #[test]
    fn asymptotic_leading_term() {
        let w = Complex64::new(3.0, 1.0);
        let nu = Complex64::new(0.0, 0.5);
        let got = k_asymptotic(nu, w, SeriesOrder { nterms: 0 }).unwrap();
        let want = (PI / (2.0 * w)).sqrt() * (-w).exp();
        assert!((got - want).norm() < 1e-15 * want.norm());
    }

    #[test]
    fn asymptotic_truncates_at_half_order() {
        // 4 nu^2 - 1 = 0 at nu = 1/2: every correction vanishes.
        let nu = Complex64::new(0.5, 0.0);
        let w = Complex64::new(5.0, 2.0);
        let t0 = k_asymptotic(nu, w, SeriesOrder { nterms: 0 }).unwrap();
        for n in [1, 3, 8] {
            let tn = k_asymptotic(nu, w, SeriesOrder { nterms: n }).unwrap();
            assert_eq!(t0, tn);
        }
        // And K_{1/2} is exactly its leading asymptotic term.
        let exact = k_complex_integral(nu, Complex64::new(5.0, 0.0), &tol()).unwrap();
        let series = k_asymptotic(nu, Complex64::new(5.0, 0.0), SeriesOrder { nterms: 0 }).unwrap();
        assert!((exact - series).norm() < 1e-11 * exact.norm());
    }

    #[test]
    fn asymptotic_error_decreases_with_terms() {
        let nu = Complex64::new(0.0, 1.0);
        let w = Complex64::new(10.0, 0.0);
        let reference = k_complex_integral(nu, w, &tol()).unwrap();
        let errs: Vec<f64> = [0, 1, 2]
            .iter()
            .map(|&n| {
                (k_asymptotic(nu, w, SeriesOrder { nterms: n }).unwrap() - reference).norm()
                    / reference.norm()
            })
            .collect();
        assert!(errs[1] < errs[0] && errs[2] < errs[1], "errors {errs:?}");
    }

    #[test]
    fn i_real_small_argument_limits() {
        let v = i_real(0.0, 1e-8, &tol()).unwrap();
        assert!((v - 1.0).abs() < 1e-12);
        for &x in &[1e-4, 1e-3, 1e-2] {
            let v1 = i_real(1.0, x, &tol()).unwrap();
            assert!((v1 / (0.5 * x) - 1.0).abs() < 1e-5, "x = {x}");
        }
    }

    #[test]
    fn i_half_closed_form() {
        // I_{1/2}(x) = sqrt(2/(pi x)) sinh x.
        for &x in &[0.5, 2.0, 5.0] {
            let got = i_real(0.5, x, &tol()).unwrap();
            let want = (2.0 / (PI * x)).sqrt() * x.sinh();
            assert!((got - want).abs() < 1e-12 * want.abs());
        }
    }

    #[test]
    fn i_real_overflows_gracefully() {
        assert!(matches!(
            i_real(0.0, 5000.0, &tol()),
            Err(BesselError::Overflow { .. })
        ));
    }

    #[test]
    fn wronskian_by_finite_differences() {
        // I_nu(x) K'_nu(x) - I'_nu(x) K_nu(x) = -1/x at (nu, x) = (0.5, 2).
        let nu = 0.5;
        let x = 2.0;
        let h = 1e-5;
        let t = tol();
        let k = |x: f64| {
            k_complex_integral(Complex64::new(nu, 0.0), Complex64::new(x, 0.0), &t)
                .unwrap()
                .re
        };
        let i = |x: f64| i_real(nu, x, &t).unwrap();
        let kp = (k(x + h) - k(x - h)) / (2.0 * h);
        let ip = (i(x + h) - i(x - h)) / (2.0 * h);
        let wronskian = i(x) * kp - ip * k(x);
        assert!(
            (wronskian + 1.0 / x).abs() < 1e-8,
            "wronskian {wronskian}, want {}",
            -1.0 / x
        );
    }

    #[test]
    fn satisfies_bessel_equation_in_log_variable() {
        // (-d^2/dz^2 + e^{2z}) K_{i mu}(e^z) = mu^2 K_{i mu}(e^z): the
        // central-difference residual shrinks ~4x when h halves.
        let mu = 1.5;
        let t = tol();
        let f = |z: f64| k_imag(ImaginaryOrder::new(mu), z.exp(), &t).unwrap();
        let resid = |z: f64, h: f64| {
            let second = (f(z + h) - 2.0 * f(z) + f(z - h)) / (h * h);
            (-second + (2.0 * z).exp() * f(z) - mu * mu * f(z)).abs()
        };
        let z = 0.3;
        let r1 = resid(z, 0.05);
        let r2 = resid(z, 0.025);
        let order = (r1 / r2).log2();
        assert!((order - 2.0).abs() < 0.3, "order {order}, r1 {r1}, r2 {r2}");
    }

    #[test]
    fn positive_in_monotone_tail() {
        for &mu in &[0.5, 1.0, 2.0, 3.0] {
            for i in 0..=10 {
                let x = 10.0 + 2.0 * i as f64;
                let v = k_imag(ImaginaryOrder::new(mu), x, &tol()).unwrap();
                assert!(v > 0.0, "K_i{mu}({x}) = {v}");
            }
        }
    }

    #[test]
    fn log_argument_agrees_on_principal_strip() {
        let nu = Complex64::new(0.0, 1.0);
        let z = Complex64::new(0.4, 2.0);
        let a = k_from_log_argument(nu, z, &tol()).unwrap();
        let b = k_complex(nu, z.exp(), &tol()).unwrap();
        assert!((a - b).norm() < 1e-12 * (1.0 + b.norm()));
    }

    #[test]
    fn log_argument_continuation_satisfies_ode() {
        // Beyond |Im z| = pi the continued value must still satisfy
        // d^2K/dz^2 = (e^{2z} + nu^2) K along the real-z direction.
        let nu = Complex64::new(0.0, 1.0);
        let z0 = Complex64::new(12.0f64.ln(), 1.2 * PI);
        let t = tol();
        let f = |dz: f64| k_from_log_argument(nu, z0 + Complex64::new(dz, 0.0), &t).unwrap();
        let h = 1e-3;
        let second = (f(h) - 2.0 * f(0.0) + f(-h)) / (h * h);
        let want = ((2.0 * z0).exp() + nu * nu) * f(0.0);
        let scale = want.norm().max(f(0.0).norm());
        assert!(
            (second - want).norm() < 1e-4 * scale,
            "residual {:.3e} of scale {:.3e}",
            (second - want).norm(),
            scale
        );
    }

    #[test]
    fn outside_domain_is_an_error() {
        let r = k_complex(Complex64::new(0.0, 1.0), Complex64::new(-1.0, 0.5), &tol());
        assert!(matches!(r, Err(BesselError::OutsideDomain { .. })));
        let r2 = k_imag(ImaginaryOrder::new(1.0), -2.0, &tol());
        assert!(matches!(r2, Err(BesselError::DomainError { .. })));
    }

    proptest! {
        #[test]
        fn k_imag_even_in_order(mu in -3.0f64..3.0, x in 0.2f64..5.0) {
            let a = k_imag(ImaginaryOrder::new(mu), x, &tol()).unwrap();
            let b = k_imag(ImaginaryOrder::new(-mu), x, &tol()).unwrap();
            prop_assert_eq!(a, b);
        }
    }
}
