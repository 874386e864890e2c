//! Chain and composite specifications, conserved-magnetization bases, and
//! sparse Heisenberg Hamiltonians.
//!
//! A single chain of `N_k` spins (site 1 is the impurity) is governed by
//!
//! ```text
//! H_k = J'_k (J1 σ⃗₁·σ⃗₂ + J2 σ⃗₁·σ⃗₃)
//!     + J1 Σ_{i=2}^{N_k−1} σ⃗ᵢ·σ⃗ᵢ₊₁ + J2 Σ_{i=2}^{N_k−2} σ⃗ᵢ·σ⃗ᵢ₊₂
//! ```
//!
//! and two chains are joined by the junction term
//!
//! ```text
//! H_I = J_m (J1 σ⃗^L_{N_L}·σ⃗^R_{N_R} + J2 σ⃗^L_{N_L−1}·σ⃗^R_{N_R} + J2 σ⃗^L_{N_L}·σ⃗^R_{N_R−1})
//! ```
//!
//! All couplings multiply vectors of Pauli matrices, so a single bond
//! `σ⃗ᵢ·σ⃗ⱼ` has eigenvalues −3 (singlet) and +1 (triplet). Every operator
//! here commutes with total `S^z`, so Hamiltonians are built over a
//! [`SectorBasis`] of fixed up-spin count.
//!
//! Global site numbering in a composite system: left chain sites `1..=N_L`
//! with the left impurity at site 1; the right chain counts inward from the
//! far end, so right-chain site `r` sits at global site `N + 1 − r` and the
//! right impurity is global site `N`.
//!
//! Basis configurations are bit sets with site 1 stored in the least
//! significant bit; a set bit is an up spin.

use std::collections::HashMap;
use std::sync::Arc;

use num_complex::Complex64;
use num_integer::binomial;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::solver::StateVector;

/// Critical next-nearest-neighbor ratio `J2^c = 0.2412 J1` separating the
/// gapless Kondo regime from the gapped dimer regime.
pub const J2_CRITICAL: f64 = 0.2412;

/// Largest chain/composite size the bit-set basis supports.
pub const MAX_SITES: usize = 30;

/// Coupling regime of a single chain, decided by `j2` against [`J2_CRITICAL`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Regime {
    Kondo,
    Dimer,
}

/// Physical parameters of one Kondo spin chain.
///
/// `j1` is fixed to 1 and sets the unit of energy; `j2` and `j_prime` are
/// dimensionless ratios.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChainSpec {
    pub n_sites: usize,
    pub j1: f64,
    pub j2: f64,
    pub j_prime: f64,
}

impl ChainSpec {
    pub fn new(n_sites: usize, j2: f64, j_prime: f64) -> Result<Self> {
        if n_sites < 2 || n_sites % 2 != 0 {
            return Err(Error::invalid(format!(
                "chain length must be even and >= 2, got {n_sites}"
            )));
        }
        if n_sites > MAX_SITES {
            return Err(Error::Capacity(format!(
                "chain length {n_sites} exceeds the {MAX_SITES}-site limit"
            )));
        }
        if !(j_prime > 0.0) {
            return Err(Error::invalid(format!(
                "impurity coupling must be positive, got {j_prime}"
            )));
        }
        if !(j2 >= 0.0) {
            return Err(Error::invalid(format!("j2 must be >= 0, got {j2}")));
        }
        Ok(ChainSpec {
            n_sites,
            j1: 1.0,
            j2,
            j_prime,
        })
    }

    /// Chain with the impurity coupling taken from the lookup table.
    pub fn with_table_coupling(n_sites: usize, j2: f64) -> Result<Self> {
        ChainSpec::new(n_sites, j2, impurity_coupling_for(n_sites)?)
    }

    /// Kondo for `j2 < J2^c`, dimer otherwise.
    pub fn regime(&self) -> Regime {
        if self.j2 < J2_CRITICAL {
            Regime::Kondo
        } else {
            Regime::Dimer
        }
    }
}

/// Two chains plus the junction coupling `j_m` that is switched on at the
/// quench. `j_m = 0` leaves the chains decoupled.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CompositeSpec {
    pub left: ChainSpec,
    pub right: ChainSpec,
    pub j_m: f64,
}

impl CompositeSpec {
    pub fn new(left: ChainSpec, right: ChainSpec, j_m: f64) -> Result<Self> {
        if !(j_m >= 0.0) {
            return Err(Error::invalid(format!("j_m must be >= 0, got {j_m}")));
        }
        if left.n_sites + right.n_sites > MAX_SITES {
            return Err(Error::Capacity(format!(
                "composite length {} exceeds the {MAX_SITES}-site limit",
                left.n_sites + right.n_sites
            )));
        }
        Ok(CompositeSpec { left, right, j_m })
    }

    /// Total number of sites `N = N_L + N_R`.
    pub fn n_total(&self) -> usize {
        self.left.n_sites + self.right.n_sites
    }

    /// Same chains with a different junction coupling.
    pub fn with_jm(&self, j_m: f64) -> Result<Self> {
        CompositeSpec::new(self.left, self.right, j_m)
    }
}

/// Impurity couplings `J'_k` that tune the screening cloud to span the whole
/// chain (`ξ_k = N_k − 1`), for even chain lengths 4 through 38.
const IMPURITY_COUPLING_TABLE: [(usize, f64); 18] = [
    (4, 0.300),
    (6, 0.280),
    (8, 0.260),
    (10, 0.250),
    (12, 0.240),
    (14, 0.230),
    (16, 0.220),
    (18, 0.215),
    (20, 0.210),
    (22, 0.205),
    (24, 0.202),
    (26, 0.198),
    (28, 0.195),
    (30, 0.190),
    (32, 0.187),
    (34, 0.184),
    (36, 0.180),
    (38, 0.175),
];

/// Tabulated impurity coupling for a chain of `n_sites` spins.
///
/// The table is a verbatim lookup; lengths outside it are rejected rather
/// than interpolated.
pub fn impurity_coupling_for(n_sites: usize) -> Result<f64> {
    IMPURITY_COUPLING_TABLE
        .iter()
        .find(|(n, _)| *n == n_sites)
        .map(|(_, j)| *j)
        .ok_or_else(|| {
            Error::NotFound(format!(
                "no tabulated impurity coupling for chain length {n_sites}"
            ))
        })
}

/// Ordered basis of all spin configurations with a fixed number of up spins.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SectorBasis {
    n_sites: usize,
    n_up: usize,
    configs: Vec<u32>,
    #[serde(skip)]
    index: HashMap<u32, usize>,
}

impl SectorBasis {
    pub fn n_sites(&self) -> usize {
        self.n_sites
    }

    pub fn n_up(&self) -> usize {
        self.n_up
    }

    pub fn dim(&self) -> usize {
        self.configs.len()
    }

    /// All configurations, strictly increasing in integer encoding.
    pub fn configs(&self) -> &[u32] {
        &self.configs
    }

    pub fn config(&self, i: usize) -> u32 {
        self.configs[i]
    }

    /// Ordinal of a configuration, if it belongs to this sector.
    pub fn index_of(&self, config: u32) -> Option<usize> {
        self.index.get(&config).copied()
    }
}

/// Enumerate the basis of all `n_sites`-bit configurations with exactly
/// `n_up` set bits, in increasing integer order, with an invertible index
/// map.
pub fn build_sector_basis(n_sites: usize, n_up: usize) -> Result<SectorBasis> {
    if n_sites == 0 || n_sites > MAX_SITES {
        return Err(Error::invalid(format!(
            "n_sites must be in 1..={MAX_SITES}, got {n_sites}"
        )));
    }
    if n_up > n_sites {
        return Err(Error::invalid(format!(
            "n_up = {n_up} exceeds n_sites = {n_sites}"
        )));
    }

    let dim = binomial(n_sites as u64, n_up as u64) as usize;
    let mut configs = Vec::with_capacity(dim);
    if n_up == 0 {
        configs.push(0u32);
    } else {
        // Gosper's hack: next integer with the same popcount.
        let limit: u32 = if n_sites == 32 {
            u32::MAX
        } else {
            (1u32 << n_sites) - 1
        };
        let mut c: u32 = (1u32 << n_up) - 1;
        while c <= limit {
            configs.push(c);
            let lowest = c & c.wrapping_neg();
            let ripple = c + lowest;
            if ripple > limit || lowest == 0 {
                break;
            }
            c = ripple | (((c ^ ripple) >> 2) / lowest);
        }
    }
    debug_assert_eq!(configs.len(), dim);

    let index = configs
        .iter()
        .enumerate()
        .map(|(i, &cfg)| (cfg, i))
        .collect();

    Ok(SectorBasis {
        n_sites,
        n_up,
        configs,
        index,
    })
}

/// Real symmetric operator over a sector basis, stored as compressed rows.
///
/// Both `(i, j)` and `(j, i)` are stored for every off-diagonal entry, so the
/// stored entries are symmetric as a set.
#[derive(Debug, Clone, Serialize)]
pub struct SparseOperator {
    dim: usize,
    row_ptr: Vec<usize>,
    cols: Vec<u32>,
    vals: Vec<f64>,
}

impl SparseOperator {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    /// Stored value at `(row, col)`; zero if the entry is absent.
    pub fn entry(&self, row: usize, col: usize) -> f64 {
        let lo = self.row_ptr[row];
        let hi = self.row_ptr[row + 1];
        match self.cols[lo..hi].binary_search(&(col as u32)) {
            Ok(k) => self.vals[lo + k],
            Err(_) => 0.0,
        }
    }

    /// `y = H x` for complex amplitudes.
    pub fn apply(&self, x: &[Complex64], y: &mut [Complex64]) {
        assert_eq!(x.len(), self.dim);
        assert_eq!(y.len(), self.dim);
        for (i, yi) in y.iter_mut().enumerate() {
            let mut acc = Complex64::new(0.0, 0.0);
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                acc += x[self.cols[k] as usize] * self.vals[k];
            }
            *yi = acc;
        }
    }

    /// `y = H x` for real vectors (Lanczos ground-state path).
    pub fn apply_real(&self, x: &[f64], y: &mut [f64]) {
        assert_eq!(x.len(), self.dim);
        assert_eq!(y.len(), self.dim);
        for (i, yi) in y.iter_mut().enumerate() {
            let mut acc = 0.0;
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                acc += x[self.cols[k] as usize] * self.vals[k];
            }
            *yi = acc;
        }
    }

    /// Dense copy, for small-dimension reference diagonalization.
    pub fn to_dense(&self) -> nalgebra::DMatrix<f64> {
        let mut m = nalgebra::DMatrix::zeros(self.dim, self.dim);
        for i in 0..self.dim {
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                m[(i, self.cols[k] as usize)] = self.vals[k];
            }
        }
        m
    }

    /// Exact check of the symmetric-storage invariant.
    pub fn is_symmetric(&self) -> bool {
        for i in 0..self.dim {
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                let j = self.cols[k] as usize;
                if self.entry(j, i) != self.vals[k] {
                    return false;
                }
            }
        }
        true
    }
}

/// Heisenberg bond list of a single chain, as (site, site, coupling) with
/// 1-based site indices. Zero-coupling bonds are dropped.
pub fn chain_bonds(spec: &ChainSpec) -> Vec<(usize, usize, f64)> {
    let n = spec.n_sites;
    let mut bonds = Vec::new();
    let mut push = |a: usize, b: usize, c: f64| {
        if c != 0.0 {
            bonds.push((a, b, c));
        }
    };
    push(1, 2, spec.j_prime * spec.j1);
    if n >= 3 {
        push(1, 3, spec.j_prime * spec.j2);
    }
    for i in 2..n {
        push(i, i + 1, spec.j1);
    }
    for i in 2..n.saturating_sub(1) {
        push(i, i + 2, spec.j2);
    }
    bonds
}

/// Bond list of the composite system in global site numbering, junction
/// included.
pub fn composite_bonds(comp: &CompositeSpec) -> Vec<(usize, usize, f64)> {
    let n_l = comp.left.n_sites;
    let n_r = comp.right.n_sites;
    let n = n_l + n_r;
    let mut bonds = chain_bonds(&comp.left);
    // Right-chain site r lives at global site N + 1 − r.
    for (a, b, c) in chain_bonds(&comp.right) {
        bonds.push((n + 1 - a, n + 1 - b, c));
    }
    if comp.j_m != 0.0 {
        let j1 = comp.left.j1;
        // Junction J2 terms inherit each chain's own next-nearest ratio.
        let last_l = n_l; // σ^L_{N_L}
        let first_r = n_l + 1; // σ^R_{N_R}
        bonds.push((last_l, first_r, comp.j_m * j1));
        if comp.left.j2 != 0.0 && n_l >= 2 {
            bonds.push((last_l - 1, first_r, comp.j_m * comp.left.j2));
        }
        if comp.right.j2 != 0.0 && n_r >= 2 {
            bonds.push((last_l, first_r + 1, comp.j_m * comp.right.j2));
        }
    }
    bonds
}

/// Assemble a sector Hamiltonian from a bond list.
///
/// A single bond `c σ⃗ₐ·σ⃗_b` contributes `±c` on the diagonal (+ for equal
/// bits, − for opposite) and `2c` between configurations related by flipping
/// both bits. Spin-flip terms are exchange terms, so every off-diagonal image
/// stays inside the sector; a missing index-map entry is a structural bug.
fn assemble_hamiltonian(basis: &SectorBasis, bonds: &[(usize, usize, f64)]) -> SparseOperator {
    let dim = basis.dim();
    let masks: Vec<(u32, u32, f64)> = bonds
        .iter()
        .map(|&(a, b, c)| (1u32 << (a - 1), 1u32 << (b - 1), c))
        .collect();

    let mut row_ptr = Vec::with_capacity(dim + 1);
    let mut cols: Vec<u32> = Vec::new();
    let mut vals: Vec<f64> = Vec::new();
    row_ptr.push(0);

    let mut row: Vec<(u32, f64)> = Vec::with_capacity(bonds.len() + 1);
    for (i, &cfg) in basis.configs().iter().enumerate() {
        row.clear();
        let mut diag = 0.0;
        for &(ma, mb, c) in &masks {
            let ba = cfg & ma != 0;
            let bb = cfg & mb != 0;
            if ba == bb {
                diag += c;
            } else {
                diag -= c;
                let flipped = cfg ^ (ma | mb);
                let j = basis
                    .index_of(flipped)
                    .expect("spin-flip image left the magnetization sector");
                row.push((j as u32, 2.0 * c));
            }
        }
        row.push((i as u32, diag));
        row.sort_unstable_by_key(|&(j, _)| j);
        for &(j, v) in &row {
            cols.push(j);
            vals.push(v);
        }
        row_ptr.push(cols.len());
    }

    SparseOperator {
        dim,
        row_ptr,
        cols,
        vals,
    }
}

/// Hamiltonian of a single chain restricted to `basis`.
pub fn build_chain_hamiltonian(spec: &ChainSpec, basis: &SectorBasis) -> Result<SparseOperator> {
    if basis.n_sites() != spec.n_sites {
        return Err(Error::invalid(format!(
            "basis is over {} sites but the chain has {}",
            basis.n_sites(),
            spec.n_sites
        )));
    }
    Ok(assemble_hamiltonian(basis, &chain_bonds(spec)))
}

/// Hamiltonian `H = H_L + H_R + H_I` of the composite system restricted to
/// `basis`. With `j_m = 0` this is the direct sum of the two chain
/// Hamiltonians.
pub fn build_composite_hamiltonian(
    comp: &CompositeSpec,
    basis: &SectorBasis,
) -> Result<SparseOperator> {
    let n = comp.n_total();
    if basis.n_sites() != n {
        return Err(Error::invalid(format!(
            "basis is over {} sites but the composite has {}",
            basis.n_sites(),
            n
        )));
    }
    Ok(assemble_hamiltonian(basis, &composite_bonds(comp)))
}

/// Map the tensor product of two chain states into the composite sector
/// basis.
///
/// The left factor keeps its site numbering; the right factor is mirrored so
/// that its impurity lands on global site `N`. Both factors must live in
/// their chains' half-filling sectors.
pub fn embed_product_state(
    left: &StateVector,
    right: &StateVector,
    composite_basis: &Arc<SectorBasis>,
) -> Result<StateVector> {
    let n_l = left.n_sites();
    let n_r = right.n_sites();
    let n = composite_basis.n_sites();
    if n_l + n_r != n {
        return Err(Error::invalid(format!(
            "chain lengths {n_l} + {n_r} do not match composite length {n}"
        )));
    }
    if left.n_up() * 2 != n_l || right.n_up() * 2 != n_r {
        return Err(Error::invalid(
            "chain states must live in their half-filling sectors".to_string(),
        ));
    }
    if composite_basis.n_up() * 2 != n {
        return Err(Error::invalid(
            "composite basis must be the half-filling sector".to_string(),
        ));
    }

    let mut amps = vec![Complex64::new(0.0, 0.0); composite_basis.dim()];
    let lb = left.basis();
    let rb = right.basis();
    for (ri, &rcfg) in rb.configs().iter().enumerate() {
        // Right-chain bit r−1 (site r) maps to global bit N − r.
        let mut mirrored: u32 = 0;
        for bit in 0..n_r {
            if rcfg & (1 << bit) != 0 {
                mirrored |= 1 << (n - 1 - bit);
            }
        }
        let ra = right.amps()[ri];
        if ra == Complex64::new(0.0, 0.0) {
            continue;
        }
        for (li, &lcfg) in lb.configs().iter().enumerate() {
            let la = left.amps()[li];
            if la == Complex64::new(0.0, 0.0) {
                continue;
            }
            let cfg = lcfg | mirrored;
            let idx = composite_basis
                .index_of(cfg)
                .expect("product configuration left the composite sector");
            amps[idx] = la * ra;
        }
    }

    StateVector::new(Arc::clone(composite_basis), amps)
}
