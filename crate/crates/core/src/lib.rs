//! Exact-diagonalization simulator for entanglement routing between two
//! suddenly coupled Kondo spin chains.
//!
//! Two open Heisenberg chains with boundary impurities are prepared in their
//! ground states, a junction coupling `J_m` is switched on at `t = 0`, and the
//! concurrence between the two outermost (impurity) spins is tracked through
//! the quench. The crate provides:
//!
//! - [`model`] — chain/composite specifications, fixed-magnetization bases,
//!   sparse Hamiltonians, and the impurity-coupling lookup table;
//! - [`foursite`] — the closed-form two-singlet four-spin model used as an
//!   analytic oracle for the many-body dynamics;
//! - [`solver`] — Lanczos ground states, Krylov time propagation, and a dense
//!   eigendecomposition reference propagator;
//! - [`observables`] — two-site reduced density matrices, Wootters
//!   concurrence, total-spin and singlet-fidelity diagnostics;
//! - [`experiments`] — quench traces, junction-coupling optimization, scaling
//!   fits, regime comparisons, noise models, and router orchestration.
//!
//! Conventions: couplings multiply Pauli matrices (`σ⃗·σ⃗` has two-spin
//! eigenvalues −3 and +1), the nearest-neighbor bulk coupling `J1 = 1` sets
//! the unit of energy, `ħ = 1`, and times are in units of `1/J1`.

pub mod error;
pub mod experiments;
pub mod foursite;
pub mod model;
pub mod observables;
pub mod solver;

pub use error::{Error, Result};
