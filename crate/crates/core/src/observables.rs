//! Measurement machinery: two-site reduced density matrices, Wootters
//! concurrence, total-spin and singlet-fidelity diagnostics.
//!
//! Partial traces are taken by direct bitmask accumulation over sector
//! configurations, so memory scales with the sector size rather than 2^N.

use nalgebra::{Matrix4, Vector4};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::solver::StateVector;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Reduced state of two spins in basis order {|00⟩, |01⟩, |10⟩, |11⟩} of
/// (site_a, site_b), where a set bit (label 1) is an up spin.
#[derive(Debug, Clone, PartialEq)]
pub struct TwoQubitDensityMatrix {
    m: Matrix4<Complex64>,
}

impl TwoQubitDensityMatrix {
    /// Validate Hermiticity and unit trace (to 1e−8) and wrap the matrix.
    pub fn from_matrix(m: Matrix4<Complex64>) -> Result<Self> {
        let mut herm_err: f64 = 0.0;
        for i in 0..4 {
            for j in 0..4 {
                herm_err = herm_err.max((m[(i, j)] - m[(j, i)].conj()).norm());
            }
        }
        if herm_err > 1e-8 {
            return Err(Error::invalid(format!(
                "density matrix is not Hermitian (deviation {herm_err:.3e})"
            )));
        }
        let tr = m.trace();
        if (tr.re - 1.0).abs() > 1e-8 || tr.im.abs() > 1e-8 {
            return Err(Error::invalid(format!(
                "density matrix trace is {tr} instead of 1"
            )));
        }
        Ok(TwoQubitDensityMatrix { m })
    }

    pub fn matrix(&self) -> &Matrix4<Complex64> {
        &self.m
    }

    pub fn element(&self, row: usize, col: usize) -> Complex64 {
        self.m[(row, col)]
    }

    pub fn trace(&self) -> Complex64 {
        self.m.trace()
    }

    /// ρ = I/4.
    pub fn maximally_mixed() -> Self {
        TwoQubitDensityMatrix {
            m: Matrix4::identity() * Complex64::new(0.25, 0.0),
        }
    }

    /// ρ = |ψ⁻⟩⟨ψ⁻|.
    pub fn singlet_projector() -> Self {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let psi = Vector4::new(
            ZERO,
            Complex64::new(s, 0.0),
            Complex64::new(-s, 0.0),
            ZERO,
        );
        TwoQubitDensityMatrix {
            m: &psi * psi.adjoint(),
        }
    }

    /// ρ → (U₁⊗U₂) ρ (U₁⊗U₂)†.
    pub fn rotate_local(
        &self,
        u1: &nalgebra::Matrix2<Complex64>,
        u2: &nalgebra::Matrix2<Complex64>,
    ) -> Self {
        let u = u1.kronecker(u2);
        TwoQubitDensityMatrix {
            m: &u * self.m * u.adjoint(),
        }
    }
}

fn pattern_index(cfg: u32, mask_a: u32, mask_b: u32) -> usize {
    let sa = (cfg & mask_a != 0) as usize;
    let sb = (cfg & mask_b != 0) as usize;
    2 * sa + sb
}

/// Partial trace of a sector state down to sites (site_a, site_b), 1-based
/// with `site_a < site_b`.
///
/// Within a fixed-magnetization sector the only off-diagonal block is the
/// |01⟩↔|10⟩ coherence; configurations differing in the (a, b) pattern by a
/// net magnetization change have no partners in the sector.
pub fn reduced_density_matrix(
    psi: &StateVector,
    site_a: usize,
    site_b: usize,
) -> Result<TwoQubitDensityMatrix> {
    let n = psi.n_sites();
    if site_a < 1 || site_b <= site_a || site_b > n {
        return Err(Error::invalid(format!(
            "need 1 <= site_a < site_b <= {n}, got ({site_a}, {site_b})"
        )));
    }
    let m = rdm_sector_raw(psi.basis(), psi.amps(), site_a, site_b);
    TwoQubitDensityMatrix::from_matrix(m)
}

/// Unvalidated sector partial trace on raw amplitudes; callers guarantee
/// site ordering. Trajectory averaging accumulates these before wrapping the
/// mean in a validated [`TwoQubitDensityMatrix`].
pub(crate) fn rdm_sector_raw(
    basis: &crate::model::SectorBasis,
    amps: &[Complex64],
    site_a: usize,
    site_b: usize,
) -> Matrix4<Complex64> {
    let ma = 1u32 << (site_a - 1);
    let mb = 1u32 << (site_b - 1);
    let flip = ma | mb;

    let mut m = Matrix4::from_element(ZERO);
    for (i, &cfg) in basis.configs().iter().enumerate() {
        let a = amps[i];
        if a == ZERO {
            continue;
        }
        let k = pattern_index(cfg, ma, mb);
        m[(k, k)] += Complex64::new(a.norm_sqr(), 0.0);
        let sa = cfg & ma != 0;
        let sb = cfg & mb != 0;
        if sa != sb {
            let partner = cfg ^ flip;
            let j = basis
                .index_of(partner)
                .expect("exchange partner left the sector");
            let kp = pattern_index(partner, ma, mb);
            // ρ[k, kp] = Σ ψ(rest,k) ψ*(rest,kp)
            m[(k, kp)] += a * amps[j].conj();
        }
    }
    m
}

/// Partial trace for a full 2^N amplitude vector (site 1 in the least
/// significant bit). Needed when magnetization is not conserved, e.g. under
/// random transverse fields.
pub fn reduced_density_matrix_full(
    amps: &[Complex64],
    n_sites: usize,
    site_a: usize,
    site_b: usize,
) -> Result<TwoQubitDensityMatrix> {
    if site_a < 1 || site_b <= site_a || site_b > n_sites {
        return Err(Error::invalid(format!(
            "need 1 <= site_a < site_b <= {n_sites}, got ({site_a}, {site_b})"
        )));
    }
    if amps.len() != 1usize << n_sites {
        return Err(Error::invalid(format!(
            "expected 2^{n_sites} amplitudes, got {}",
            amps.len()
        )));
    }
    TwoQubitDensityMatrix::from_matrix(rdm_full_raw(amps, site_a, site_b))
}

/// Unvalidated full-space partial trace on raw amplitudes.
pub(crate) fn rdm_full_raw(
    amps: &[Complex64],
    site_a: usize,
    site_b: usize,
) -> Matrix4<Complex64> {
    let ma = 1u32 << (site_a - 1);
    let mb = 1u32 << (site_b - 1);
    let mask = ma | mb;

    let mut m = Matrix4::from_element(ZERO);
    for (c, &a) in amps.iter().enumerate() {
        if a == ZERO {
            continue;
        }
        let c = c as u32;
        let k = pattern_index(c, ma, mb);
        let rest = c & !mask;
        for kp in 0..4usize {
            let partner = rest | ((kp as u32 >> 1) * ma) | ((kp as u32 & 1) * mb);
            m[(k, kp)] += a * amps[partner as usize].conj();
        }
    }
    m
}

/// σy⊗σy, the spin-flip kernel of the concurrence formula.
fn spin_flip_kernel() -> Matrix4<Complex64> {
    let mut s = Matrix4::from_element(ZERO);
    let one = Complex64::new(1.0, 0.0);
    s[(0, 3)] = -one;
    s[(1, 2)] = one;
    s[(2, 1)] = one;
    s[(3, 0)] = -one;
    s
}

/// Wootters concurrence of a two-qubit density matrix.
///
/// The λᵢ are the decreasing square roots of the eigenvalues of
/// ρ(σy⊗σy)ρ*(σy⊗σy); the result is max(0, λ₁−λ₂−λ₃−λ₄). The eigenvalues
/// are obtained from the Hermitian product √ρ·ρ̃·√ρ, which shares them with
/// the non-Hermitian ρρ̃ but is numerically stable near product states.
pub fn concurrence(rho: &TwoQubitDensityMatrix) -> Result<f64> {
    let m = rho.matrix();

    let eig = m.symmetric_eigen();
    let min_ev = eig.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min);
    if min_ev < -1e-8 {
        return Err(Error::invalid(format!(
            "density matrix has negative eigenvalue {min_ev:.3e}"
        )));
    }

    // √ρ with tiny negative eigenvalues clamped to zero.
    let mut sqrt_rho = Matrix4::from_element(ZERO);
    for k in 0..4 {
        let d = eig.eigenvalues[k].max(0.0).sqrt();
        if d == 0.0 {
            continue;
        }
        let v = eig.eigenvectors.column(k);
        sqrt_rho += (v * v.adjoint()) * Complex64::new(d, 0.0);
    }

    let s = spin_flip_kernel();
    let rho_conj = m.map(|z| z.conj());
    let rho_tilde = s * rho_conj * s;
    let k = sqrt_rho * rho_tilde * sqrt_rho;
    // Hermitize against roundoff before the final eigensolve.
    let k = (k + k.adjoint()) * Complex64::new(0.5, 0.0);

    let mut lambdas: Vec<f64> = k
        .symmetric_eigen()
        .eigenvalues
        .iter()
        .map(|&mu| mu.max(0.0).sqrt())
        .collect();
    lambdas.sort_by(|a, b| b.partial_cmp(a).unwrap());
    Ok((lambdas[0] - lambdas[1] - lambdas[2] - lambdas[3]).max(0.0))
}

/// ⟨(Σᵢ σ⃗ᵢ/2)²⟩ in spin-½ units: 0 for singlets, S(S+1) in general.
pub fn total_spin_squared(psi: &StateVector) -> f64 {
    let n = psi.n_sites();
    let basis = psi.basis();
    let amps = psi.amps();

    let mut exchange_sum = 0.0;
    for a in 1..=n {
        for b in (a + 1)..=n {
            let ma = 1u32 << (a - 1);
            let mb = 1u32 << (b - 1);
            let flip = ma | mb;
            let mut acc = 0.0;
            for (i, &cfg) in basis.configs().iter().enumerate() {
                let amp = amps[i];
                if amp == ZERO {
                    continue;
                }
                let same = (cfg & ma != 0) == (cfg & mb != 0);
                if same {
                    acc += amp.norm_sqr();
                } else {
                    acc -= amp.norm_sqr();
                    let j = basis
                        .index_of(cfg ^ flip)
                        .expect("exchange partner left the sector");
                    acc += 2.0 * (amps[j].conj() * amp).re;
                }
            }
            exchange_sum += acc;
        }
    }
    0.75 * n as f64 + 0.5 * exchange_sum
}

/// Overlap of a two-site state with the singlet, ⟨ψ⁻|ρ|ψ⁻⟩.
pub fn singlet_fidelity(rho: &TwoQubitDensityMatrix) -> f64 {
    let m = rho.matrix();
    0.5 * (m[(1, 1)] + m[(2, 2)] - m[(1, 2)] - m[(2, 1)]).re
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::foursite::{four_spin_concurrence, four_spin_state_sector};
    use crate::model::{
        build_chain_hamiltonian, build_sector_basis, embed_product_state, ChainSpec,
    };
    use crate::solver::{ground_state, SolverConfig, StateVector};
    use approx::assert_relative_eq;
    use nalgebra::Matrix2;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;
    use std::sync::Arc;

    fn two_site_singlet() -> StateVector {
        let basis = Arc::new(build_sector_basis(2, 1).unwrap());
        let inv = std::f64::consts::FRAC_1_SQRT_2;
        StateVector::new(
            basis,
            vec![Complex64::new(-inv, 0.0), Complex64::new(inv, 0.0)],
        )
        .unwrap()
    }

    fn two_singlet_product() -> StateVector {
        let cb = Arc::new(build_sector_basis(4, 2).unwrap());
        embed_product_state(&two_site_singlet(), &two_site_singlet(), &cb).unwrap()
    }

    #[test]
    fn rdm_of_unentangled_pair_is_singlet_projector() {
        let psi = two_singlet_product();
        let rho = reduced_density_matrix(&psi, 1, 2).unwrap();
        let target = TwoQubitDensityMatrix::singlet_projector();
        for i in 0..4 {
            for j in 0..4 {
                assert!((rho.element(i, j) - target.element(i, j)).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn rdm_across_pairs_is_maximally_mixed() {
        let psi = two_singlet_product();
        let rho = reduced_density_matrix(&psi, 1, 4).unwrap();
        let target = TwoQubitDensityMatrix::maximally_mixed();
        for i in 0..4 {
            for j in 0..4 {
                assert!((rho.element(i, j) - target.element(i, j)).norm() < 1e-12);
            }
        }
        assert_relative_eq!(concurrence(&rho).unwrap(), 0.0, epsilon = 1e-12);
        assert_relative_eq!(singlet_fidelity(&rho), 0.25, epsilon = 1e-12);
    }

    #[test]
    fn rdm_rejects_bad_sites() {
        let psi = two_singlet_product();
        assert!(reduced_density_matrix(&psi, 0, 2).is_err());
        assert!(reduced_density_matrix(&psi, 2, 2).is_err());
        assert!(reduced_density_matrix(&psi, 3, 5).is_err());
        assert!(reduced_density_matrix(&psi, 4, 1).is_err());
    }

    #[test]
    fn analytic_state_at_tstar_gives_boundary_singlet() {
        let jm = 0.8;
        let tstar = PI / (4.0 * jm);
        let psi = four_spin_state_sector(jm, tstar);
        let rho = reduced_density_matrix(&psi, 1, 4).unwrap();
        let target = TwoQubitDensityMatrix::singlet_projector();
        for i in 0..4 {
            for j in 0..4 {
                assert!((rho.element(i, j) - target.element(i, j)).norm() < 1e-10);
            }
        }
        assert_relative_eq!(concurrence(&rho).unwrap(), 1.0, epsilon = 1e-10);
        assert_relative_eq!(singlet_fidelity(&rho), 1.0, epsilon = 1e-10);
    }

    #[test]
    fn concurrence_of_singlet_projector_is_one() {
        let rho = TwoQubitDensityMatrix::singlet_projector();
        assert_relative_eq!(concurrence(&rho).unwrap(), 1.0, epsilon = 1e-12);
        assert_relative_eq!(singlet_fidelity(&rho), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn concurrence_trace_matches_closed_form() {
        let jm = 0.55;
        for step in 0..60 {
            let t = step as f64 * 0.09;
            let psi = four_spin_state_sector(jm, t);
            let rho = reduced_density_matrix(&psi, 1, 4).unwrap();
            let got = concurrence(&rho).unwrap();
            let want = four_spin_concurrence(jm, t);
            assert!(
                (got - want).abs() < 1e-10,
                "t = {t}: concurrence {got} vs closed form {want}"
            );
        }
    }

    fn random_unitary(rng: &mut impl Rng) -> Matrix2<Complex64> {
        // U(2) from three angles plus a phase.
        let theta: f64 = rng.gen::<f64>() * PI;
        let (a, b, g): (f64, f64, f64) = (
            rng.gen::<f64>() * 2.0 * PI,
            rng.gen::<f64>() * 2.0 * PI,
            rng.gen::<f64>() * 2.0 * PI,
        );
        let c = Complex64::from_polar(theta.cos(), a);
        let s = Complex64::from_polar(theta.sin(), b);
        let phase = Complex64::from_polar(1.0, g);
        Matrix2::new(c * phase, s * phase, -s.conj() * phase, c.conj() * phase)
    }

    #[test]
    fn concurrence_invariant_under_local_unitaries() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let jm = 0.7;
        for step in 0..20 {
            let t = 0.13 * step as f64;
            let psi = four_spin_state_sector(jm, t);
            let rho = reduced_density_matrix(&psi, 1, 4).unwrap();
            let base = concurrence(&rho).unwrap();
            let rotated = rho.rotate_local(&random_unitary(&mut rng), &random_unitary(&mut rng));
            let rotated_c = concurrence(&rotated).unwrap();
            assert!(
                (base - rotated_c).abs() < 1e-10,
                "local unitary changed concurrence: {base} -> {rotated_c}"
            );
        }
    }

    #[test]
    fn total_spin_of_bell_states() {
        assert!(total_spin_squared(&two_site_singlet()).abs() < 1e-12);

        let basis = Arc::new(build_sector_basis(2, 1).unwrap());
        let inv = std::f64::consts::FRAC_1_SQRT_2;
        let triplet = StateVector::new(
            basis,
            vec![Complex64::new(inv, 0.0), Complex64::new(inv, 0.0)],
        )
        .unwrap();
        assert_relative_eq!(total_spin_squared(&triplet), 2.0, epsilon = 1e-12);
    }

    #[test]
    fn chain_ground_state_is_global_singlet() {
        // An even chain with any positive impurity coupling has a singlet
        // ground state; J' = 0.300 is the tabulated 4-site value.
        let spec = ChainSpec::new(8, 0.0, 0.300).unwrap();
        let basis = Arc::new(build_sector_basis(8, 4).unwrap());
        let h = build_chain_hamiltonian(&spec, &basis).unwrap();
        let gs = ground_state(&h, &basis, &SolverConfig::default()).unwrap();
        assert!(total_spin_squared(&gs.state) < 1e-8);
    }

    #[test]
    fn embedded_product_is_global_singlet() {
        assert!(total_spin_squared(&two_singlet_product()) < 1e-12);
    }

    #[test]
    fn full_space_rdm_agrees_with_sector_rdm() {
        let jm = 0.9;
        let t = 0.43;
        let psi = four_spin_state_sector(jm, t);
        // Expand into the full 2^4 space.
        let mut full = vec![ZERO; 16];
        for (i, &cfg) in psi.basis().configs().iter().enumerate() {
            full[cfg as usize] = psi.amps()[i];
        }
        let a = reduced_density_matrix(&psi, 1, 4).unwrap();
        let b = reduced_density_matrix_full(&full, 4, 1, 4).unwrap();
        for i in 0..4 {
            for j in 0..4 {
                assert!((a.element(i, j) - b.element(i, j)).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn density_matrix_validation_catches_garbage() {
        let mut m = Matrix4::from_element(ZERO);
        m[(0, 0)] = Complex64::new(2.0, 0.0);
        assert!(TwoQubitDensityMatrix::from_matrix(m).is_err());

        let mut m = Matrix4::identity() * Complex64::new(0.25, 0.0);
        m[(0, 1)] = Complex64::new(0.1, 0.0);
        assert!(TwoQubitDensityMatrix::from_matrix(m).is_err());
    }
}
