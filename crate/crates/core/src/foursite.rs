//! Closed-form model of two coupled two-spin singlets.
//!
//! Four spins in a row, pairs (1,2) and (3,4) bound into singlets with
//! couplings `J'₁` and `J'₂`, are suddenly joined by `J_m σ⃗₂·σ⃗₃`. On
//! resonance, `J_m = J'₁ + J'₂`, the state stays in a two-dimensional singlet
//! subspace and both the state and the boundary-spin concurrence have closed
//! forms:
//!
//! ```text
//! |ψ(t)⟩ = −(i/2) sin(2J_m t) (|0011⟩+|1100⟩)
//!          −(1/2) cos(2J_m t) (|1001⟩+|0110⟩)
//!          +(1/2) e^{i2J_m t} (|0101⟩+|1010⟩)
//! E(t)   = max{0, (1 − 3 cos(4J_m t))/4}
//! ```
//!
//! Spins 1 and 4 form a perfect singlet at `t* = π/(4J_m)`, and the dynamics
//! depends on `J_m` alone. The many-body simulator must reproduce these
//! curves for two 2-site chains, which makes this module the built-in
//! correctness oracle.
//!
//! Ket labels read left to right, so site 1 is the most significant bit of a
//! 16-component amplitude index. [`four_spin_state_sector`] converts to the
//! simulator's least-significant-bit-first sector convention.

use std::f64::consts::PI;
use std::sync::Arc;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::build_sector_basis;
use crate::solver::StateVector;

/// Couplings of the two singlet pairs and of the junction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FourSpinParams {
    /// Coupling of pair (1,2).
    pub j1_prime: f64,
    /// Coupling of pair (3,4).
    pub j2_prime: f64,
    /// Junction coupling between spins 2 and 3.
    pub j_m: f64,
}

impl FourSpinParams {
    pub fn new(j1_prime: f64, j2_prime: f64, j_m: f64) -> Result<Self> {
        if j1_prime < 0.0 || j2_prime < 0.0 || j_m < 0.0 {
            return Err(Error::invalid(
                "four-spin couplings must be nonnegative".to_string(),
            ));
        }
        Ok(FourSpinParams {
            j1_prime,
            j2_prime,
            j_m,
        })
    }

    /// Resonant parameters `J_m = J'₁ + J'₂` for the given pair couplings.
    pub fn resonant(j1_prime: f64, j2_prime: f64) -> Result<Self> {
        FourSpinParams::new(j1_prime, j2_prime, j1_prime + j2_prime)
    }

    /// Whether `J_m` matches `J'₁ + J'₂` to 1e−12.
    pub fn is_resonant(&self) -> bool {
        (self.j_m - (self.j1_prime + self.j2_prime)).abs() < 1e-12
    }
}

/// Index of the ket `|s₁s₂s₃s₄⟩` in a 16-component amplitude vector.
fn ket(s1: u8, s2: u8, s3: u8, s4: u8) -> usize {
    ((s1 as usize) << 3) | ((s2 as usize) << 2) | ((s3 as usize) << 1) | s4 as usize
}

/// Resonant four-spin state at time `t`, as 16 amplitudes in ket order.
///
/// Valid on resonance only; off resonance use [`four_spin_hamiltonian`] with
/// a dense propagator.
pub fn four_spin_state(j_m: f64, t: f64) -> [Complex64; 16] {
    let phase = 2.0 * j_m * t;
    let outer = Complex64::new(0.0, -phase.sin() / 2.0);
    let inner = Complex64::new(-phase.cos() / 2.0, 0.0);
    let aligned = Complex64::from_polar(0.5, phase);

    let mut amps = [Complex64::new(0.0, 0.0); 16];
    amps[ket(0, 0, 1, 1)] = outer;
    amps[ket(1, 1, 0, 0)] = outer;
    amps[ket(1, 0, 0, 1)] = inner;
    amps[ket(0, 1, 1, 0)] = inner;
    amps[ket(0, 1, 0, 1)] = aligned;
    amps[ket(1, 0, 1, 0)] = aligned;
    amps
}

/// The resonant state expressed over the simulator's `(4 sites, 2 up)` sector
/// basis (site 1 in the least significant bit).
pub fn four_spin_state_sector(j_m: f64, t: f64) -> StateVector {
    let paper = four_spin_state(j_m, t);
    let basis = Arc::new(build_sector_basis(4, 2).expect("static basis"));
    let mut amps = vec![Complex64::new(0.0, 0.0); basis.dim()];
    for (p, &a) in paper.iter().enumerate() {
        if a == Complex64::new(0.0, 0.0) {
            continue;
        }
        let cfg = (p as u32).reverse_bits() >> 28; // 4-bit reversal: ket MSB → site-1 LSB
        let idx = basis
            .index_of(cfg)
            .expect("analytic state lives in the half-filling sector");
        amps[idx] = a;
    }
    StateVector::new(basis, amps).expect("unit-norm analytic state")
}

/// Boundary-spin concurrence of the resonant four-spin state,
/// `max{0, (1 − 3 cos(4J_m t))/4}`.
pub fn four_spin_concurrence(j_m: f64, t: f64) -> f64 {
    ((1.0 - 3.0 * (4.0 * j_m * t).cos()) / 4.0).max(0.0)
}

/// Resonant junction coupling and first-maximum time for given pair
/// couplings: `J_m = J'₁ + J'₂`, `t* = π/(4J_m)`.
pub fn four_spin_optimal(j1_prime: f64, j2_prime: f64) -> Result<(f64, f64)> {
    if j1_prime <= 0.0 || j2_prime <= 0.0 {
        return Err(Error::invalid(
            "pair couplings must be positive".to_string(),
        ));
    }
    let j_m = j1_prime + j2_prime;
    Ok((j_m, PI / (4.0 * j_m)))
}

/// Energies of the two global singlets of the resonant Hamiltonian:
/// `(−4J_m, 0)`.
pub fn four_spin_singlet_energies(j_m: f64) -> (f64, f64) {
    (-4.0 * j_m, 0.0)
}

/// Dense 16×16 Hamiltonian `J'₁ σ⃗₁·σ⃗₂ + J'₂ σ⃗₃·σ⃗₄ + J_m σ⃗₂·σ⃗₃` in ket
/// ordering, for brute-force propagation at arbitrary parameters.
pub fn four_spin_hamiltonian(params: &FourSpinParams) -> DMatrix<f64> {
    let mut h = DMatrix::zeros(16, 16);
    add_bond(&mut h, 1, 2, params.j1_prime);
    add_bond(&mut h, 3, 4, params.j2_prime);
    add_bond(&mut h, 2, 3, params.j_m);
    h
}

/// `|ψ⁻⟩⊗|ψ⁻⟩` on pairs (1,2) and (3,4), in ket ordering.
pub fn four_spin_initial_state() -> [Complex64; 16] {
    let mut amps = [Complex64::new(0.0, 0.0); 16];
    let half = Complex64::new(0.5, 0.0);
    amps[ket(0, 1, 0, 1)] = half;
    amps[ket(0, 1, 1, 0)] = -half;
    amps[ket(1, 0, 0, 1)] = -half;
    amps[ket(1, 0, 1, 0)] = half;
    amps
}

/// Add `c σ⃗ₐ·σ⃗_b` to a dense operator in ket ordering (site 1 = bit 3).
fn add_bond(h: &mut DMatrix<f64>, a: usize, b: usize, c: f64) {
    if c == 0.0 {
        return;
    }
    let ma = 1usize << (4 - a);
    let mb = 1usize << (4 - b);
    for s in 0..16 {
        let same = (s & ma != 0) == (s & mb != 0);
        h[(s, s)] += if same { c } else { -c };
        if !same {
            h[(s ^ (ma | mb), s)] += 2.0 * c;
        }
    }
}
