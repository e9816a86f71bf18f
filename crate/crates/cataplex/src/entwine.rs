//! Lattice-discretised checks of the quantum entwining identities.
//!
//! The duality kernel is S = exp(iA) with the lattice action
//!
//!   A = sum_j [ phi_j (psi_{j+1} - psi_j) + a Fpot(phi_j, psi_j, z) ],
//!
//! periodic in j. The duality term uses a forward difference so that every
//! per-site derivative of A is available in closed form; derivative
//! operators appearing in the momentum/energy densities use central
//! differences. Periodicity makes every lattice total-difference sum vanish
//! identically, which is the discrete version of the boundary conditions
//! that kill the integrated d_rho F terms.
//!
//! First derivatives of A give the brackets
//!
//!   B_phi,j = (psi_{j+1} - psi_j)/a + W_phi(phi_j, psi_j, z)
//!   B_psi,j = (phi_{j-1} - phi_j)/a + W_psi(phi_j, psi_j, z)
//!
//! and second derivatives are exact: d^2A/dphi_j^2 = a Fpot'' with
//! Fpot''_phi = Fpot''_psi for all three models, so the antisymmetric
//! point-splitting term cancels identically on the lattice.

use crate::backlund::ModelKind;
use num_complex::Complex64;
use thiserror::Error;

/// Periodic one-dimensional lattice.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Lattice {
    pub n_sites: usize,
    pub spacing: f64,
}

impl Lattice {
    pub fn new(n_sites: usize, spacing: f64) -> Result<Self, EntwineError> {
        if n_sites < 2 || !(spacing > 0.0) {
            return Err(EntwineError::InvalidLattice { n_sites, spacing });
        }
        Ok(Self { n_sites, spacing })
    }
}

/// A pair of periodic field configurations entering the kernel, plus the
/// site-independent duality parameter z.
#[derive(Debug, Clone, PartialEq)]
pub struct LatticePair {
    pub lattice: Lattice,
    pub phi: Vec<f64>,
    pub psi: Vec<f64>,
    pub z: f64,
}

impl LatticePair {
    pub fn new(
        lattice: Lattice,
        phi: Vec<f64>,
        psi: Vec<f64>,
        z: f64,
    ) -> Result<Self, EntwineError> {
        if phi.len() != lattice.n_sites || psi.len() != lattice.n_sites {
            return Err(EntwineError::LengthMismatch {
                n_sites: lattice.n_sites,
                phi_len: phi.len(),
                psi_len: psi.len(),
            });
        }
        Ok(Self {
            lattice,
            phi,
            psi,
            z,
        })
    }

    pub fn constant(lattice: Lattice, phi: f64, psi: f64, z: f64) -> Result<Self, EntwineError> {
        let n = lattice.n_sites;
        Self::new(lattice, vec![phi; n], vec![psi; n], z)
    }

    /// Cyclic shift of both fields by `offset` sites.
    pub fn shifted(&self, offset: usize) -> Self {
        let n = self.lattice.n_sites;
        let rot = |v: &[f64]| -> Vec<f64> { (0..n).map(|j| v[(j + offset) % n]).collect() };
        Self {
            lattice: self.lattice,
            phi: rot(&self.phi),
            psi: rot(&self.psi),
            z: self.z,
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EntwineError {
    #[error("lattice needs at least 2 sites and positive spacing (n = {n_sites}, a = {spacing})")]
    InvalidLattice { n_sites: usize, spacing: f64 },
    #[error("field lengths must equal n_sites = {n_sites} (phi {phi_len}, psi {psi_len})")]
    LengthMismatch {
        n_sites: usize,
        phi_len: usize,
        psi_len: usize,
    },
}

/// The real lattice action A; the kernel itself is exp(iA).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelAction {
    pub action: f64,
}

impl KernelAction {
    /// S = e^{iA}; unimodular for real fields.
    pub fn kernel(&self) -> Complex64 {
        Complex64::new(0.0, self.action).exp()
    }
}

/// A = sum_j [phi_j (psi_{j+1} - psi_j) + a Fpot(phi_j, psi_j, z)].
pub fn kernel_action(model: ModelKind, pair: &LatticePair) -> KernelAction {
    let n = pair.lattice.n_sites;
    let a = pair.lattice.spacing;
    let mut action = 0.0;
    for j in 0..n {
        let jp = (j + 1) % n;
        action += pair.phi[j] * (pair.psi[jp] - pair.psi[j])
            + a * model.generator_potential(pair.phi[j], pair.psi[j], pair.z);
    }
    KernelAction { action }
}

/// Exact per-site derivatives (dA/dphi_j, dA/dpsi_j). The psi gradient
/// carries the transported duality contribution phi_{j-1} - phi_j from the
/// forward difference.
pub fn kernel_gradients(model: ModelKind, pair: &LatticePair) -> (Vec<f64>, Vec<f64>) {
    let n = pair.lattice.n_sites;
    let a = pair.lattice.spacing;
    let mut dphi = Vec::with_capacity(n);
    let mut dpsi = Vec::with_capacity(n);
    for j in 0..n {
        let jp = (j + 1) % n;
        let jm = (j + n - 1) % n;
        dphi.push(
            (pair.psi[jp] - pair.psi[j]) + a * model.w_phi(pair.phi[j], pair.psi[j], pair.z),
        );
        dpsi.push(
            (pair.phi[jm] - pair.phi[j]) + a * model.w_psi(pair.phi[j], pair.psi[j], pair.z),
        );
    }
    (dphi, dpsi)
}

/// Per-site ingredients of the densities acting on the kernel, as the
/// multipliers m with O S = m S.
struct SiteOps {
    /// B_phi,j = (1/a) dA/dphi_j
    b_phi: Vec<f64>,
    /// B_psi,j = (1/a) dA/dpsi_j
    b_psi: Vec<f64>,
    /// central difference of phi
    dphi: Vec<f64>,
    /// central difference of psi
    dpsi: Vec<f64>,
    n: usize,
    a: f64,
}

impl SiteOps {
    fn build(model: ModelKind, pair: &LatticePair) -> Self {
        let n = pair.lattice.n_sites;
        let a = pair.lattice.spacing;
        let (grad_phi, grad_psi) = kernel_gradients(model, pair);
        let b_phi: Vec<f64> = grad_phi.iter().map(|g| g / a).collect();
        let b_psi: Vec<f64> = grad_psi.iter().map(|g| g / a).collect();
        let central = |v: &[f64]| -> Vec<f64> {
            (0..n)
                .map(|j| (v[(j + 1) % n] - v[(j + n - 1) % n]) / (2.0 * a))
                .collect()
        };
        Self {
            dphi: central(&pair.phi),
            dpsi: central(&pair.psi),
            b_phi,
            b_psi,
            n,
            a,
        }
    }

    fn central_of(&self, v: &[f64], j: usize) -> f64 {
        (v[(j + 1) % self.n] - v[(j + self.n - 1) % self.n]) / (2.0 * self.a)
    }

    fn laplacian(&self, v: &[f64], j: usize) -> f64 {
        (v[(j + 1) % self.n] - 2.0 * v[j] + v[(j + self.n - 1) % self.n]) / (self.a * self.a)
    }
}

/// Multiplier of the energy density H_phi,j acting on the kernel:
/// (1/2) B_phi^2 - (i/(2a)) Fpot'' + (1/2)(D phi)^2 + V(phi_j).
fn energy_multiplier(
    model: ModelKind,
    pair: &LatticePair,
    ops: &SiteOps,
    j: usize,
    phi_side: bool,
) -> Complex64 {
    let second = model.generator_potential_second_deriv(pair.phi[j], pair.psi[j], pair.z);
    let (b, d, v) = if phi_side {
        (ops.b_phi[j], ops.dphi[j], model.potential(pair.phi[j]))
    } else {
        (ops.b_psi[j], ops.dpsi[j], model.potential(pair.psi[j]))
    };
    Complex64::new(0.5 * b * b + 0.5 * d * d + v, -0.5 * second / ops.a)
}

/// Global residual of the momentum cross-weave (P_phi + P_psi) S: the
/// total should telescope to zero under periodicity, up to the O(a^2)
/// discrete chain-rule error. Returned as the complex multiplier
/// (P_phi + P_psi) S / S; |S| = 1 for real fields.
pub fn momentum_entwine_residual(model: ModelKind, pair: &LatticePair) -> Complex64 {
    let ops = SiteOps::build(model, pair);
    let mut total = 0.0;
    for j in 0..ops.n {
        total += ops.a * (ops.dphi[j] * ops.b_phi[j] + ops.dpsi[j] * ops.b_psi[j]);
    }
    Complex64::new(total, 0.0)
}

/// Per-site residual of the energy cross-weave
/// [H_phi,j - H_psi,j] S - S (G_{j+1} - G_{j-1})/(2a),
/// with G the model's all-plus companion potential.
pub fn energy_entwine_residual(model: ModelKind, pair: &LatticePair, site: usize) -> Complex64 {
    let ops = SiteOps::build(model, pair);
    energy_site_residual(model, pair, &ops, site)
}

fn energy_site_residual(
    model: ModelKind,
    pair: &LatticePair,
    ops: &SiteOps,
    j: usize,
) -> Complex64 {
    let n = ops.n;
    let gj = |j: usize| model.crossweave_potential(pair.phi[j], pair.psi[j], pair.z);
    let dg = (gj((j + 1) % n) - gj((j + n - 1) % n)) / (2.0 * ops.a);
    energy_multiplier(model, pair, ops, j, true) - energy_multiplier(model, pair, ops, j, false)
        - Complex64::new(dg, 0.0)
}

/// Largest per-site energy residual magnitude over the lattice.
pub fn energy_entwine_max_residual(model: ModelKind, pair: &LatticePair) -> f64 {
    let ops = SiteOps::build(model, pair);
    (0..ops.n)
        .map(|j| energy_site_residual(model, pair, &ops, j).norm())
        .fold(0.0, f64::max)
}

/// Chirality of the improved identity: the sign with which the momentum
/// density joins the energy density.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Chirality {
    Plus,
    Minus,
}

/// Global residual of the conformally improved identities
///
///   (H_phi - lap phi +- (P_phi - D B_phi)) S
///     = (H_psi + D B_psi -+ (P_psi + lap psi)) S,
///
/// integrated over the lattice (sum_j a [...]). The improvements absorb the
/// companion-potential total derivative, so no explicit d_rho G term
/// appears on either side.
pub fn improved_entwine_residual(
    model: ModelKind,
    pair: &LatticePair,
    chirality: Chirality,
) -> Complex64 {
    let ops = SiteOps::build(model, pair);
    let sign = match chirality {
        Chirality::Plus => 1.0,
        Chirality::Minus => -1.0,
    };
    let mut total = Complex64::new(0.0, 0.0);
    for j in 0..ops.n {
        let h_phi = energy_multiplier(model, pair, &ops, j, true);
        let h_psi = energy_multiplier(model, pair, &ops, j, false);
        let p_phi = ops.dphi[j] * ops.b_phi[j];
        let p_psi = ops.dpsi[j] * ops.b_psi[j];
        let lap_phi = ops.laplacian(&pair.phi, j);
        let lap_psi = ops.laplacian(&pair.psi, j);
        let db_phi = ops.central_of(&ops.b_phi, j);
        let db_psi = ops.central_of(&ops.b_psi, j);

        let lhs = h_phi + Complex64::new(-lap_phi + sign * (p_phi - db_phi), 0.0);
        let rhs = h_psi + Complex64::new(db_psi - sign * (p_psi + lap_psi), 0.0);
        total += (lhs - rhs) * ops.a;
    }
    total
}

/// Free-field limit of the Liouville generator potential: with
/// psi = varphi - w and z = -w,
///   Fpot(phi, varphi - w, -w) -> e^phi sinh(varphi)
/// as w -> infinity; the discrepancy is exactly (1/2) e^{varphi-phi-2w}.
pub fn free_field_limit(w: f64, phi: f64, varphi: f64) -> f64 {
    let limit_density = phi.exp() * varphi.sinh();
    let fpot = ModelKind::Liouville.generator_potential(phi, varphi - w, -w);
    (fpot - limit_density).abs()
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Lcg(u64);
    impl Lcg {
        fn next_unit(&mut self) -> f64 {
            self.0 = self
                .0
                .wrapping_mul(6364136223846793005)
                .wrapping_add(1442695040888963407);
            (self.0 >> 11) as f64 / (1u64 << 53) as f64 * 2.0 - 1.0
        }
    }

    fn random_pair(seed: u64, n: usize, a: f64, z: f64) -> LatticePair {
        let mut rng = Lcg(seed);
        let lattice = Lattice::new(n, a).unwrap();
        let phi: Vec<f64> = (0..n).map(|_| rng.next_unit()).collect();
        let psi: Vec<f64> = (0..n).map(|_| rng.next_unit()).collect();
        LatticePair::new(lattice, phi, psi, z).unwrap()
    }

    /// Smooth single-Fourier-mode configuration on a lattice of fixed
    /// physical size, for refinement studies.
    fn smooth_pair(n: usize, size: f64, z: f64) -> LatticePair {
        let a = size / n as f64;
        let lattice = Lattice::new(n, a).unwrap();
        let phi: Vec<f64> = (0..n)
            .map(|j| 0.6 * (2.0 * std::f64::consts::PI * j as f64 / n as f64).sin())
            .collect();
        let psi: Vec<f64> = (0..n)
            .map(|j| 0.4 * (2.0 * std::f64::consts::PI * j as f64 / n as f64).cos())
            .collect();
        LatticePair::new(lattice, phi, psi, z).unwrap()
    }

    #[test]
    fn action_at_zero_fields() {
        let pair = LatticePair::constant(Lattice::new(32, 0.25).unwrap(), 0.0, 0.0, 0.0).unwrap();
        let a = kernel_action(ModelKind::Liouville, &pair);
        assert_eq!(a.action, -32.0 * 0.25 / 2.0);
    }

    #[test]
    fn constant_psi_kills_duality_term() {
        let lattice = Lattice::new(16, 0.5).unwrap();
        let mut rng = Lcg(3);
        let phi: Vec<f64> = (0..16).map(|_| rng.next_unit()).collect();
        let pair = LatticePair::new(lattice, phi.clone(), vec![0.7; 16], 0.2).unwrap();
        let expected: f64 = phi
            .iter()
            .map(|&p| 0.5 * ModelKind::SineGordon.generator_potential(p, 0.7, 0.2))
            .sum();
        let a = kernel_action(ModelKind::SineGordon, &pair);
        assert!((a.action - expected).abs() < 1e-13);
    }

    #[test]
    fn action_invariant_under_cyclic_shift() {
        let pair = random_pair(11, 24, 0.3, 0.4);
        let base = kernel_action(ModelKind::SinhGordon, &pair).action;
        for offset in [1, 7, 23] {
            let shifted = kernel_action(ModelKind::SinhGordon, &pair.shifted(offset)).action;
            assert!((shifted - base).abs() < 1e-12 * base.abs().max(1.0));
        }
    }

    #[test]
    fn kernel_is_unimodular() {
        let pair = random_pair(5, 20, 0.25, -0.3);
        for model in ModelKind::ALL {
            let s = kernel_action(model, &pair).kernel();
            assert!((s.norm() - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn gradients_match_finite_differences() {
        let h = 1e-4;
        for model in ModelKind::ALL {
            for trial in 0..34 {
                let pair = random_pair(100 + trial, 12, 0.3, 0.15);
                let (dphi, dpsi) = kernel_gradients(model, &pair);
                for j in [0usize, 5, 11] {
                    let mut plus = pair.clone();
                    plus.phi[j] += h;
                    let mut minus = pair.clone();
                    minus.phi[j] -= h;
                    let fd = (kernel_action(model, &plus).action
                        - kernel_action(model, &minus).action)
                        / (2.0 * h);
                    assert!(
                        (dphi[j] - fd).abs() < 1e-6 * (1.0 + fd.abs()),
                        "{model:?} dphi[{j}]: {} vs fd {fd}",
                        dphi[j]
                    );
                    let mut plus = pair.clone();
                    plus.psi[j] += h;
                    let mut minus = pair.clone();
                    minus.psi[j] -= h;
                    let fd = (kernel_action(model, &plus).action
                        - kernel_action(model, &minus).action)
                        / (2.0 * h);
                    assert!(
                        (dpsi[j] - fd).abs() < 1e-6 * (1.0 + fd.abs()),
                        "{model:?} dpsi[{j}]: {} vs fd {fd}",
                        dpsi[j]
                    );
                }
            }
        }
    }

    #[test]
    fn gradient_bracket_at_zero_fields() {
        let pair = LatticePair::constant(Lattice::new(8, 0.5).unwrap(), 0.0, 0.0, 0.0).unwrap();
        let (dphi, _) = kernel_gradients(ModelKind::Liouville, &pair);
        for g in &dphi {
            assert_eq!(g / 0.5, 0.5);
        }
    }

    #[test]
    fn gradients_site_covariant_under_shift() {
        let pair = random_pair(42, 16, 0.25, 0.1);
        let (dphi, dpsi) = kernel_gradients(ModelKind::SineGordon, &pair);
        let shifted = pair.shifted(5);
        let (sphi, spsi) = kernel_gradients(ModelKind::SineGordon, &shifted);
        for j in 0..16 {
            assert!((sphi[j] - dphi[(j + 5) % 16]).abs() < 1e-15);
            assert!((spsi[j] - dpsi[(j + 5) % 16]).abs() < 1e-15);
        }
    }

    #[test]
    fn momentum_residual_exactly_zero_for_constant_fields() {
        for model in ModelKind::ALL {
            let pair =
                LatticePair::constant(Lattice::new(16, 0.25).unwrap(), 0.4, -0.8, 0.3).unwrap();
            let r = momentum_entwine_residual(model, &pair);
            assert_eq!(r, Complex64::new(0.0, 0.0), "{model:?}");
        }
    }

    #[test]
    fn momentum_residual_second_order_in_spacing() {
        for model in ModelKind::ALL {
            let coarse = momentum_entwine_residual(model, &smooth_pair(32, 8.0, 0.2)).norm();
            let fine = momentum_entwine_residual(model, &smooth_pair(64, 8.0, 0.2)).norm();
            let ratio = coarse / fine;
            assert!(
                (3.0..5.5).contains(&ratio),
                "{model:?}: ratio {ratio} (coarse {coarse}, fine {fine})"
            );
        }
    }

    #[test]
    fn momentum_residual_shift_invariant() {
        let pair = smooth_pair(32, 8.0, -0.4);
        let base = momentum_entwine_residual(ModelKind::SinhGordon, &pair).norm();
        let shifted = momentum_entwine_residual(ModelKind::SinhGordon, &pair.shifted(9)).norm();
        assert!((base - shifted).abs() < 1e-12 * (1.0 + base));
    }

    #[test]
    fn energy_residual_exactly_zero_for_equal_constant_fields() {
        // With phi = psi = c the two brackets evaluate to bitwise-identical
        // numbers and every lattice difference is exactly zero.
        for model in ModelKind::ALL {
            for &(c, z) in &[(0.0, 0.0), (0.0, 0.7), (0.5, 0.3), (-0.9, -0.2)] {
                let pair =
                    LatticePair::constant(Lattice::new(12, 0.25).unwrap(), c, c, z).unwrap();
                for j in [0usize, 3, 11] {
                    let r = energy_entwine_residual(model, &pair, j);
                    assert_eq!(r, Complex64::new(0.0, 0.0), "{model:?} c={c} z={z}");
                }
            }
        }
    }

    #[test]
    fn energy_residual_algebraic_identity_for_generic_constants() {
        // For unequal constants the residual reduces to the product
        // relation (1/2)(W_phi^2 - W_psi^2) = V(psi) - V(phi), exact up to
        // floating-point rounding of the exponentials.
        for model in ModelKind::ALL {
            let pair =
                LatticePair::constant(Lattice::new(8, 0.5).unwrap(), 0.37, -0.52, 0.21).unwrap();
            let r = energy_entwine_residual(model, &pair, 2).norm();
            assert!(r < 1e-13, "{model:?}: residual {r}");
        }
    }

    #[test]
    fn energy_residual_first_order_under_refinement() {
        for model in ModelKind::ALL {
            let coarse = energy_entwine_max_residual(model, &smooth_pair(32, 8.0, 0.2));
            let fine = energy_entwine_max_residual(model, &smooth_pair(64, 8.0, 0.2));
            let order = (coarse / fine).log2();
            assert!(
                order >= 0.8,
                "{model:?}: order {order} (coarse {coarse}, fine {fine})"
            );
        }
    }

    #[test]
    fn improved_residuals_zero_for_equal_constant_fields() {
        for model in ModelKind::ALL {
            let pair = LatticePair::constant(Lattice::new(12, 0.25).unwrap(), 0.3, 0.3, 0.5).unwrap();
            for chirality in [Chirality::Plus, Chirality::Minus] {
                let r = improved_entwine_residual(model, &pair, chirality);
                assert_eq!(r, Complex64::new(0.0, 0.0), "{model:?} {chirality:?}");
            }
        }
    }

    #[test]
    fn improved_residuals_converge_under_refinement() {
        for model in ModelKind::ALL {
            for chirality in [Chirality::Plus, Chirality::Minus] {
                let coarse =
                    improved_entwine_residual(model, &smooth_pair(32, 8.0, 0.2), chirality).norm();
                let fine =
                    improved_entwine_residual(model, &smooth_pair(64, 8.0, 0.2), chirality).norm();
                let order = (coarse / fine).log2();
                assert!(
                    order >= 0.8,
                    "{model:?} {chirality:?}: order {order} ({coarse} -> {fine})"
                );
            }
        }
    }

    #[test]
    fn chirality_sum_recovers_unimproved_energy_identity() {
        // Adding the two improved identities cancels the momentum pieces
        // and the improvements telescope, leaving twice the global energy
        // residual up to lattice rounding.
        let pair = smooth_pair(48, 8.0, 0.3);
        for model in ModelKind::ALL {
            let plus = improved_entwine_residual(model, &pair, Chirality::Plus);
            let minus = improved_entwine_residual(model, &pair, Chirality::Minus);
            let ops_total: Complex64 = (0..48)
                .map(|j| energy_entwine_residual(model, &pair, j) * pair.lattice.spacing)
                .sum();
            let gap = (plus + minus - 2.0 * ops_total).norm();
            assert!(gap < 1e-10, "{model:?}: gap {gap}");
        }
    }

    #[test]
    fn improvement_never_worse_than_unimproved_plus_discretisation() {
        let pair = smooth_pair(32, 8.0, 0.2);
        for model in ModelKind::ALL {
            let unimproved: Complex64 = (0..32)
                .map(|j| energy_entwine_residual(model, &pair, j) * pair.lattice.spacing)
                .sum();
            let disc = energy_entwine_max_residual(model, &pair) * 8.0;
            for chirality in [Chirality::Plus, Chirality::Minus] {
                let imp = improved_entwine_residual(model, &pair, chirality).norm();
                assert!(
                    imp <= unimproved.norm() + disc,
                    "{model:?} {chirality:?}: {imp} vs {} + {disc}",
                    unimproved.norm()
                );
            }
        }
    }

    #[test]
    fn free_field_limit_exact_at_origin() {
        for &w in &[0.0, 1.0, 2.0, 4.0] {
            let d = free_field_limit(w, 0.0, 0.0);
            assert_eq!(d, 0.5 * (-2.0 * w).exp());
        }
    }

    #[test]
    fn free_field_limit_decay_rate() {
        let (phi, varphi) = (0.4, -0.3);
        let d2 = free_field_limit(2.0, phi, varphi);
        let d3 = free_field_limit(3.0, phi, varphi);
        let rate = (d2 / d3).ln();
        assert!((rate - 2.0).abs() < 1e-6, "rate {rate}");
    }

    #[test]
    fn free_field_limit_potential_vanishes_at_zero_dual_field() {
        let w = 3.0;
        let phi = 0.8;
        let d = free_field_limit(w, phi, 0.0);
        // sinh(0) = 0 kills the limit density; what is left is the dropped
        // term (1/2) e^{-phi-2w}.
        assert!((d - 0.5 * (-phi - 2.0 * w).exp()).abs() < 1e-15);
    }

    #[test]
    fn pair_validation() {
        let lattice = Lattice::new(4, 0.5).unwrap();
        assert!(LatticePair::new(lattice, vec![0.0; 3], vec![0.0; 4], 0.0).is_err());
        assert!(Lattice::new(1, 0.5).is_err());
        assert!(Lattice::new(4, 0.0).is_err());
    }
}
