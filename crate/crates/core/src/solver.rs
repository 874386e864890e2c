//! Ground-state solver and time propagators.
//!
//! Ground states come from a Lanczos iteration with full reorthogonalization
//! and a deterministic pseudo-random starting vector. Time evolution
//! `|ψ(t)⟩ = e^{−iHt}|ψ(0)⟩` uses Lanczos-based Krylov exponentiation with
//! adaptive substepping; a full symmetric eigendecomposition serves as the
//! brute-force reference propagator for small sectors.

use std::sync::Arc;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{build_sector_basis, SectorBasis, SparseOperator};

/// Hard cap on the dimension accepted by the dense reference propagator.
pub const DENSE_ORACLE_MAX_DIM: usize = 20_000;

/// Seed of the deterministic Lanczos starting vector.
const LANCZOS_SEED: u64 = 0x4b6f_6e64_6f21;

/// A β below this fraction of the running ‖T‖ scale means the Krylov space
/// is exhausted (invariant subspace); continuing would normalize roundoff
/// noise into a basis vector and corrupt the tridiagonal tail.
const BREAKDOWN_REL: f64 = 1e-10;

/// Normalized complex amplitudes over a shared sector basis.
#[derive(Debug, Clone)]
pub struct StateVector {
    basis: Arc<SectorBasis>,
    amps: Vec<Complex64>,
}

impl StateVector {
    /// Wrap amplitudes over `basis`, normalizing them. Fails on a length
    /// mismatch or an (effectively) zero vector.
    pub fn new(basis: Arc<SectorBasis>, mut amps: Vec<Complex64>) -> Result<Self> {
        if amps.len() != basis.dim() {
            return Err(Error::invalid(format!(
                "amplitude count {} does not match basis dimension {}",
                amps.len(),
                basis.dim()
            )));
        }
        let norm = l2_norm(&amps);
        if norm < 1e-14 {
            return Err(Error::invalid("cannot normalize a zero vector".to_string()));
        }
        if (norm - 1.0).abs() > 1e-15 {
            for a in &mut amps {
                *a /= norm;
            }
        }
        Ok(StateVector { basis, amps })
    }

    pub fn basis(&self) -> &Arc<SectorBasis> {
        &self.basis
    }

    pub fn n_sites(&self) -> usize {
        self.basis.n_sites()
    }

    pub fn n_up(&self) -> usize {
        self.basis.n_up()
    }

    pub fn dim(&self) -> usize {
        self.amps.len()
    }

    pub fn amps(&self) -> &[Complex64] {
        &self.amps
    }

    pub fn norm(&self) -> f64 {
        l2_norm(&self.amps)
    }

    /// ⟨self|other⟩.
    pub fn inner(&self, other: &StateVector) -> Complex64 {
        inner(&self.amps, &other.amps)
    }

    /// |⟨self|other⟩| — global-phase-insensitive agreement measure.
    pub fn overlap_modulus(&self, other: &StateVector) -> f64 {
        self.inner(other).norm()
    }

    /// Self-describing dump of the state (debug aid).
    pub fn to_dump(&self) -> StateDump {
        StateDump {
            n_sites: self.n_sites(),
            n_up: self.n_up(),
            amplitudes: self.amps.iter().map(|a| (a.re, a.im)).collect(),
        }
    }

    /// Rebuild a state from a dump, re-deriving the basis.
    pub fn from_dump(dump: &StateDump) -> Result<Self> {
        let basis = Arc::new(build_sector_basis(dump.n_sites, dump.n_up)?);
        let amps = dump
            .amplitudes
            .iter()
            .map(|&(re, im)| Complex64::new(re, im))
            .collect();
        StateVector::new(basis, amps)
    }
}

/// Serialized form of a state: sector numbers plus (real, imag) amplitude
/// pairs in basis order.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StateDump {
    pub n_sites: usize,
    pub n_up: usize,
    pub amplitudes: Vec<(f64, f64)>,
}

/// Tolerances and sizes for the iterative solvers.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct SolverConfig {
    /// Residual threshold ‖Hv − Ev‖ for ground states.
    pub lanczos_tol: f64,
    /// Iteration cap for the ground-state Lanczos.
    pub lanczos_max_iter: usize,
    /// Krylov subspace dimension per propagation step.
    pub krylov_dim: usize,
    /// Local error target per propagation step.
    pub step_tol: f64,
    /// Sampling interval for quench traces, in units of 1/J1.
    pub dt: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            lanczos_tol: 1e-10,
            lanczos_max_iter: 500,
            krylov_dim: 30,
            step_tol: 1e-9,
            dt: 0.05,
        }
    }
}

impl SolverConfig {
    fn validate(&self) -> Result<()> {
        if self.lanczos_tol <= 0.0
            || self.lanczos_max_iter == 0
            || self.krylov_dim < 3
            || self.step_tol <= 0.0
            || self.dt <= 0.0
        {
            return Err(Error::invalid(
                "solver config fields must be positive (krylov_dim >= 3)".to_string(),
            ));
        }
        Ok(())
    }
}

/// Anything that can act as a Hermitian operator on complex amplitudes.
///
/// [`SparseOperator`] is the real-symmetric implementation; the noise module
/// adds a complex full-space operator for random transverse fields.
pub trait HermitianOp: Sync {
    fn dim(&self) -> usize;
    /// `y = H x`.
    fn apply(&self, x: &[Complex64], y: &mut [Complex64]);
}

impl HermitianOp for SparseOperator {
    fn dim(&self) -> usize {
        self.dim()
    }

    fn apply(&self, x: &[Complex64], y: &mut [Complex64]) {
        SparseOperator::apply(self, x, y);
    }
}

/// `H_a + c · H_b` without materializing the sum.
pub struct ScaledSum<'a> {
    pub a: &'a SparseOperator,
    pub b: &'a SparseOperator,
    pub coeff: f64,
}

impl HermitianOp for ScaledSum<'_> {
    fn dim(&self) -> usize {
        self.a.dim()
    }

    fn apply(&self, x: &[Complex64], y: &mut [Complex64]) {
        self.a.apply(x, y);
        let mut tmp = vec![Complex64::new(0.0, 0.0); x.len()];
        self.b.apply(x, &mut tmp);
        for (yi, ti) in y.iter_mut().zip(tmp.iter()) {
            *yi += ti * self.coeff;
        }
    }
}

fn l2_norm(v: &[Complex64]) -> f64 {
    v.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt()
}

fn inner(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b.iter()).map(|(x, y)| x.conj() * y).sum()
}

/// Ground-state output with degeneracy diagnostics.
#[derive(Debug, Clone)]
pub struct GroundState {
    pub energy: f64,
    pub state: StateVector,
    /// Estimated gap to the next eigenvalue in the sector (Ritz-based).
    pub gap: f64,
    /// Set when the estimated gap falls below 1e−8; the returned vector is
    /// then an arbitrary member of the near-degenerate ground space.
    pub near_degenerate: bool,
}

/// Lowest eigenpair of a real symmetric operator in the sector spanned by
/// `basis`.
///
/// Deterministic: the starting vector comes from a fixed-seed generator, and
/// the iteration is serial.
pub fn ground_state(
    h: &SparseOperator,
    basis: &Arc<SectorBasis>,
    cfg: &SolverConfig,
) -> Result<GroundState> {
    if h.dim() != basis.dim() {
        return Err(Error::invalid(format!(
            "operator dimension {} does not match basis dimension {}",
            h.dim(),
            basis.dim()
        )));
    }
    cfg.validate()?;
    let dim = h.dim();
    if dim == 0 {
        return Err(Error::invalid("empty basis".to_string()));
    }
    if dim == 1 {
        let state = StateVector::new(Arc::clone(basis), vec![Complex64::new(1.0, 0.0)])?;
        return Ok(GroundState {
            energy: h.entry(0, 0),
            state,
            gap: f64::INFINITY,
            near_degenerate: false,
        });
    }

    let mut rng = ChaCha8Rng::seed_from_u64(LANCZOS_SEED);
    let mut v: Vec<f64> = (0..dim).map(|_| rng.gen::<f64>() - 0.5).collect();
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v.iter_mut().for_each(|x| *x /= norm);

    let max_iter = cfg.lanczos_max_iter.min(dim);
    let mut q: Vec<Vec<f64>> = vec![v];
    let mut alpha: Vec<f64> = Vec::new();
    let mut beta: Vec<f64> = Vec::new();
    let mut w = vec![0.0; dim];
    let mut last_residual = f64::INFINITY;
    let mut scale: f64 = 1.0;

    for j in 0..max_iter {
        h.apply_real(&q[j], &mut w);
        let a = dot(&q[j], &w);
        alpha.push(a);
        axpy(&mut w, -a, &q[j]);
        if j > 0 {
            let b_prev = beta[j - 1];
            axpy(&mut w, -b_prev, &q[j - 1]);
        }
        // Full reorthogonalization keeps the basis clean over long runs.
        for qi in &q {
            let c = dot(qi, &w);
            axpy(&mut w, -c, qi);
        }
        let b = w.iter().map(|x| x * x).sum::<f64>().sqrt();
        scale = scale.max(a.abs()).max(b);
        let breakdown = b < BREAKDOWN_REL * scale;
        let exhausted = j + 1 == max_iter;

        // Ritz check: cheap while the subspace is small, throttled later.
        let check = breakdown || exhausted || j < 64 || j % 4 == 0;
        if check {
            let m = alpha.len();
            let eig = tridiagonal_eigen(&alpha, &beta);
            let (kmin, &theta) = eig
                .0
                .iter()
                .enumerate()
                .min_by(|a, b| a.1.partial_cmp(b.1).unwrap())
                .unwrap();
            let est = if breakdown { 0.0 } else { b * eig.1[(m - 1, kmin)].abs() };
            last_residual = est;
            if est < cfg.lanczos_tol || breakdown || exhausted {
                // Assemble the Ritz vector and verify the true residual.
                let mut vec = vec![0.0; dim];
                for (i, qi) in q.iter().enumerate() {
                    axpy(&mut vec, eig.1[(i, kmin)], qi);
                }
                let n = vec.iter().map(|x| x * x).sum::<f64>().sqrt();
                vec.iter_mut().for_each(|x| *x /= n);
                let mut hv = vec![0.0; dim];
                h.apply_real(&vec, &mut hv);
                let residual = vec
                    .iter()
                    .zip(hv.iter())
                    .map(|(x, y)| (y - theta * x).powi(2))
                    .sum::<f64>()
                    .sqrt();
                if residual < cfg.lanczos_tol || breakdown {
                    if residual >= cfg.lanczos_tol {
                        return Err(Error::Convergence {
                            iterations: j + 1,
                            residual,
                        });
                    }
                    let mut second = f64::INFINITY;
                    for (k, &t) in eig.0.iter().enumerate() {
                        if k != kmin && t < second {
                            second = t;
                        }
                    }
                    let gap = second - theta;
                    let amps = vec.iter().map(|&x| Complex64::new(x, 0.0)).collect();
                    return Ok(GroundState {
                        energy: theta,
                        state: StateVector::new(Arc::clone(basis), amps)?,
                        gap,
                        near_degenerate: gap < 1e-8,
                    });
                }
                if exhausted {
                    return Err(Error::Convergence {
                        iterations: j + 1,
                        residual,
                    });
                }
            }
        }

        if breakdown {
            break;
        }
        beta.push(b);
        let mut next = w.clone();
        next.iter_mut().for_each(|x| *x /= b);
        q.push(next);
    }

    Err(Error::Convergence {
        iterations: max_iter,
        residual: last_residual,
    })
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| x * y).sum()
}

fn axpy(y: &mut [f64], a: f64, x: &[f64]) {
    for (yi, xi) in y.iter_mut().zip(x.iter()) {
        *yi += a * xi;
    }
}

/// Eigendecomposition of the symmetric tridiagonal (α on the diagonal, β on
/// the off-diagonals). Returns (eigenvalues, eigenvectors as columns).
fn tridiagonal_eigen(alpha: &[f64], beta: &[f64]) -> (Vec<f64>, DMatrix<f64>) {
    let m = alpha.len();
    let mut t = DMatrix::zeros(m, m);
    for i in 0..m {
        t[(i, i)] = alpha[i];
        if i > 0 {
            t[(i, i - 1)] = beta[i - 1];
            t[(i - 1, i)] = beta[i - 1];
        }
    }
    let eig = t.symmetric_eigen();
    let vals: Vec<f64> = eig.eigenvalues.iter().copied().collect();
    (vals, eig.eigenvectors)
}

/// One Krylov exponentiation attempt over time `tau`. Returns the propagated
/// amplitudes plus an a-posteriori local error estimate.
///
/// The plain three-term recurrence is used (no full reorthogonalization):
/// propagation subspaces are short and rebuilt every step, where the
/// orthogonality drift stays at roundoff level; the dense-oracle cross-check
/// suite pins the accuracy.
fn krylov_step(
    op: &(impl HermitianOp + ?Sized),
    x: &[Complex64],
    tau: f64,
    krylov_dim: usize,
) -> (Vec<Complex64>, f64) {
    let dim = x.len();
    let m_max = krylov_dim.min(dim);

    let mut q: Vec<Vec<Complex64>> = Vec::with_capacity(m_max);
    q.push(x.to_vec());
    let mut alpha: Vec<f64> = Vec::with_capacity(m_max);
    let mut beta: Vec<f64> = Vec::with_capacity(m_max);
    let mut beta_end = 0.0;
    let mut w = vec![Complex64::new(0.0, 0.0); dim];
    let mut scale: f64 = 1.0;

    for j in 0..m_max {
        op.apply(&q[j], &mut w);
        if j > 0 {
            let b_prev = beta[j - 1];
            for (wi, qi) in w.iter_mut().zip(q[j - 1].iter()) {
                *wi -= qi * b_prev;
            }
        }
        let a = inner(&q[j], &w).re;
        alpha.push(a);
        for (wi, qi) in w.iter_mut().zip(q[j].iter()) {
            *wi -= qi * a;
        }
        let b = l2_norm(&w);
        scale = scale.max(a.abs()).max(b);
        if j + 1 == m_max || b < BREAKDOWN_REL * scale {
            // An exhausted subspace (tiny b) makes the projection exact; the
            // discarded coupling is noise-level by construction.
            beta_end = if b < BREAKDOWN_REL * scale { 0.0 } else { b };
            break;
        }
        beta.push(b);
        let next: Vec<Complex64> = w.iter().map(|&c| c / b).collect();
        q.push(next);
    }

    let m = alpha.len();
    let (theta, s) = tridiagonal_eigen(&alpha, &beta[..m.saturating_sub(1)]);
    // u = exp(−iτT) e₁ expressed in the Krylov basis.
    let mut u = vec![Complex64::new(0.0, 0.0); m];
    for k in 0..m {
        let phase = Complex64::from_polar(1.0, -theta[k] * tau);
        let weight = phase * s[(0, k)];
        for (j, uj) in u.iter_mut().enumerate() {
            *uj += weight * s[(j, k)];
        }
    }

    let mut y = vec![Complex64::new(0.0, 0.0); dim];
    for (j, qj) in q.iter().enumerate().take(m) {
        let c = u[j];
        for (yi, qi) in y.iter_mut().zip(qj.iter()) {
            *yi += qi * c;
        }
    }
    let err = beta_end * u[m - 1].norm();
    (y, err)
}

/// Propagate raw amplitudes by `e^{−iH·dt}` in place, with adaptive
/// substepping until each substep's local error estimate is below
/// `cfg.step_tol`. The vector is renormalized after every substep.
pub fn krylov_propagate(
    op: &(impl HermitianOp + ?Sized),
    amps: &mut Vec<Complex64>,
    dt: f64,
    cfg: &SolverConfig,
) -> Result<()> {
    if op.dim() != amps.len() {
        return Err(Error::invalid(format!(
            "operator dimension {} does not match state dimension {}",
            op.dim(),
            amps.len()
        )));
    }
    cfg.validate()?;
    if dt == 0.0 {
        return Ok(());
    }
    if dt < 0.0 {
        return Err(Error::invalid("negative time step".to_string()));
    }

    let mut remaining = dt;
    let mut sub = dt;
    while remaining > 1e-15 * dt.max(1.0) {
        let tau = sub.min(remaining);
        let (y, err) = krylov_step(op, amps, tau, cfg.krylov_dim);
        if err <= cfg.step_tol {
            let norm = l2_norm(&y);
            if (norm - 1.0).abs() > 1e-10 {
                return Err(Error::Propagation(format!(
                    "norm drifted to {norm} within a single step"
                )));
            }
            *amps = y;
            for a in amps.iter_mut() {
                *a /= norm;
            }
            remaining -= tau;
            if err < 0.01 * cfg.step_tol {
                sub = (sub * 2.0).min(remaining.max(sub));
            }
        } else {
            sub = tau / 2.0;
            if sub < 1e-12 {
                return Err(Error::Propagation(format!(
                    "could not meet step tolerance {:.1e} (error {err:.3e} at substep {tau:.3e})",
                    cfg.step_tol
                )));
            }
        }
    }
    Ok(())
}

/// `e^{−iH·dt} ψ` via Krylov exponentiation.
pub fn evolve_krylov(
    h: &(impl HermitianOp + ?Sized),
    psi: &StateVector,
    dt: f64,
    cfg: &SolverConfig,
) -> Result<StateVector> {
    let mut amps = psi.amps().to_vec();
    krylov_propagate(h, &mut amps, dt, cfg)?;
    StateVector::new(Arc::clone(psi.basis()), amps)
}

/// Dense reference propagator: full symmetric eigendecomposition done once,
/// then exact phase evolution for any time.
pub struct DensePropagator {
    eigenvalues: Vec<f64>,
    eigenvectors: DMatrix<f64>,
}

impl DensePropagator {
    pub fn new(h: &SparseOperator) -> Result<Self> {
        if h.dim() > DENSE_ORACLE_MAX_DIM {
            return Err(Error::invalid(format!(
                "dimension {} exceeds the dense-oracle cap {DENSE_ORACLE_MAX_DIM}",
                h.dim()
            )));
        }
        let eig = h.to_dense().symmetric_eigen();
        Ok(DensePropagator {
            eigenvalues: eig.eigenvalues.iter().copied().collect(),
            eigenvectors: eig.eigenvectors,
        })
    }

    /// Exact `e^{−iHt}` applied to raw amplitudes.
    pub fn propagate(&self, amps: &[Complex64], t: f64) -> Vec<Complex64> {
        let dim = amps.len();
        let v = &self.eigenvectors;
        // Project onto the eigenbasis, apply phases, come back.
        let mut coeff = vec![Complex64::new(0.0, 0.0); dim];
        for k in 0..dim {
            let mut c = Complex64::new(0.0, 0.0);
            for i in 0..dim {
                c += Complex64::new(v[(i, k)], 0.0) * amps[i];
            }
            coeff[k] = c * Complex64::from_polar(1.0, -self.eigenvalues[k] * t);
        }
        let mut out = vec![Complex64::new(0.0, 0.0); dim];
        for k in 0..dim {
            let c = coeff[k];
            for (i, oi) in out.iter_mut().enumerate() {
                *oi += c * v[(i, k)];
            }
        }
        out
    }
}

/// Exact `e^{−iHt} ψ` via full symmetric eigendecomposition. Guarded against
/// accidental huge dense solves.
pub fn evolve_dense_oracle(h: &SparseOperator, psi: &StateVector, t: f64) -> Result<StateVector> {
    if h.dim() != psi.dim() {
        return Err(Error::invalid(
            "operator and state dimensions differ".to_string(),
        ));
    }
    let prop = DensePropagator::new(h)?;
    StateVector::new(Arc::clone(psi.basis()), prop.propagate(psi.amps(), t))
}

/// ⟨ψ|H|ψ⟩ for a Hermitian operator (real up to roundoff).
pub fn expectation(h: &(impl HermitianOp + ?Sized), psi: &StateVector) -> f64 {
    expectation_raw(h, psi.amps())
}

/// ⟨x|H|x⟩ for raw (not necessarily normalized) amplitudes.
pub fn expectation_raw(h: &(impl HermitianOp + ?Sized), amps: &[Complex64]) -> f64 {
    let mut hx = vec![Complex64::new(0.0, 0.0); amps.len()];
    h.apply(amps, &mut hx);
    let val = inner(amps, &hx);
    debug_assert!(val.im.abs() < 1e-10, "expectation has imaginary residue {}", val.im);
    val.re
}
