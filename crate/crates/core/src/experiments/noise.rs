//! Noise models for the quench dynamics: Markovian dephasing via quantum
//! trajectories, and static random magnetic fields via disorder averaging.
//!
//! Dephasing uses jump operators `√γ σᶻᵢ` at the same rate on every site.
//! Because `σᶻ² = 1`, the no-jump drift is a uniform norm decay, so the
//! unravelling is exact: jump times are Poisson with total rate `γN`, the
//! jump site is uniform, and the state evolves unitarily in between. The
//! per-step averaged two-site density matrix feeds the concurrence.
//!
//! A random field `Σᵢ h⃗ᵢ·σ⃗ᵢ` with fixed magnitude and uniform direction
//! breaks magnetization conservation, so each realization evolves in the
//! full 2^N space; that path is capped at N = 14.

use nalgebra::Matrix4;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, UnitSphere};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{run_quench, sample_times, QuenchTrace, TraceMeta};
use crate::error::{Error, Result};
use crate::model::{build_composite_hamiltonian, composite_bonds, CompositeSpec, SectorBasis};
use crate::observables::{rdm_full_raw, rdm_sector_raw, concurrence, TwoQubitDensityMatrix};
use crate::solver::{expectation_raw, krylov_propagate, HermitianOp, SolverConfig};

/// Largest composite size for full-space (2^N) random-field evolution.
pub const RANDOM_FIELD_MAX_SITES: usize = 14;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseKind {
    Dephasing,
    RandomField,
}

/// Noise parameters; `gamma` and `h_mag` are in units of J1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    pub kind: NoiseKind,
    /// Dephasing rate per site.
    pub gamma: f64,
    /// Magnetic-field magnitude per site.
    pub h_mag: f64,
    /// Trajectories or disorder realizations to average.
    pub n_samples: usize,
    pub seed: u64,
    /// Draw field magnitudes from |N(0, h_mag)| instead of using the fixed
    /// value (alternative reading of "a very strong magnetic field").
    pub gaussian_magnitude: bool,
}

impl NoiseSpec {
    pub fn dephasing(gamma: f64, n_samples: usize, seed: u64) -> Result<Self> {
        let spec = NoiseSpec {
            kind: NoiseKind::Dephasing,
            gamma,
            h_mag: 0.0,
            n_samples,
            seed,
            gaussian_magnitude: false,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn random_field(h_mag: f64, n_samples: usize, seed: u64) -> Result<Self> {
        let spec = NoiseSpec {
            kind: NoiseKind::RandomField,
            gamma: 0.0,
            h_mag,
            n_samples,
            seed,
            gaussian_magnitude: false,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.gamma < 0.0 || self.h_mag < 0.0 || self.n_samples == 0 {
            return Err(Error::invalid(
                "noise requires gamma >= 0, h_mag >= 0, n_samples >= 1".to_string(),
            ));
        }
        Ok(())
    }
}

/// Decorrelated per-sample RNG stream.
fn stream_rng(seed: u64, sample: usize) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed ^ (sample as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15))
}

/// Average accumulated per-sample observations into a trace.
struct NoiseAccumulator {
    rho: Vec<Matrix4<Complex64>>,
    energy: Vec<f64>,
    norm: Vec<f64>,
}

impl NoiseAccumulator {
    fn average(samples: Vec<NoiseAccumulator>, times: Vec<f64>, meta: TraceMeta) -> Result<QuenchTrace> {
        let n = samples.len() as f64;
        let len = times.len();
        let mut rho = vec![Matrix4::from_element(Complex64::new(0.0, 0.0)); len];
        let mut energy = vec![0.0; len];
        let mut norm = vec![0.0; len];
        // Fixed accumulation order keeps results independent of threading.
        for s in &samples {
            for k in 0..len {
                rho[k] += s.rho[k];
                energy[k] += s.energy[k];
                norm[k] += s.norm[k];
            }
        }
        let inv = Complex64::new(1.0 / n, 0.0);
        let mut conc = Vec::with_capacity(len);
        for k in 0..len {
            let avg = rho[k] * inv;
            conc.push(concurrence(&TwoQubitDensityMatrix::from_matrix(avg)?)?.clamp(0.0, 1.0));
            energy[k] /= n;
            norm[k] /= n;
        }
        Ok(QuenchTrace {
            times,
            concurrence: conc,
            energy,
            norm,
            meta,
        })
    }
}

/// Quench under Markovian dephasing, averaged over stochastic trajectories.
///
/// `gamma = 0` takes the noiseless path and reproduces [`run_quench`]
/// exactly. Given a seed the result is deterministic, also across thread
/// counts.
pub fn run_dephasing(
    comp: &CompositeSpec,
    noise: &NoiseSpec,
    t_max: f64,
    cfg: &SolverConfig,
) -> Result<QuenchTrace> {
    if noise.kind != NoiseKind::Dephasing {
        return Err(Error::invalid(format!(
            "run_dephasing called with noise kind {:?}",
            noise.kind
        )));
    }
    noise.validate()?;
    if noise.gamma == 0.0 {
        return run_quench(comp, t_max, cfg);
    }

    let init = super::prepare_initial_state(comp, cfg)?;
    let basis = init.state.basis().clone();
    let h = build_composite_hamiltonian(comp, &basis)?;
    let n = comp.n_total();
    let times = sample_times(t_max, cfg.dt);
    let total_rate = noise.gamma * n as f64;

    let samples: Vec<Result<NoiseAccumulator>> = (0..noise.n_samples)
        .into_par_iter()
        .map(|k| {
            dephasing_trajectory(
                &h,
                &basis,
                init.state.amps(),
                n,
                total_rate,
                &times,
                cfg,
                stream_rng(noise.seed, k),
            )
        })
        .collect();
    let samples: Result<Vec<NoiseAccumulator>> = samples.into_iter().collect();

    NoiseAccumulator::average(
        samples?,
        times,
        TraceMeta {
            comp: *comp,
            solver: *cfg,
        },
    )
}

#[allow(clippy::too_many_arguments)]
fn dephasing_trajectory(
    h: &crate::model::SparseOperator,
    basis: &SectorBasis,
    psi0: &[Complex64],
    n_sites: usize,
    total_rate: f64,
    times: &[f64],
    cfg: &SolverConfig,
    mut rng: ChaCha8Rng,
) -> Result<NoiseAccumulator> {
    let mut amps = psi0.to_vec();
    let mut t_cur = 0.0;
    let mut next_jump = exponential_wait(&mut rng, total_rate);

    let mut acc = NoiseAccumulator {
        rho: Vec::with_capacity(times.len()),
        energy: Vec::with_capacity(times.len()),
        norm: Vec::with_capacity(times.len()),
    };

    for &ts in times {
        while t_cur + next_jump <= ts {
            let dt = next_jump;
            krylov_propagate(h, &mut amps, dt, cfg)?;
            t_cur += dt;
            apply_sigma_z(basis, &mut amps, rng.gen_range(0..n_sites));
            next_jump = exponential_wait(&mut rng, total_rate);
        }
        let dt = ts - t_cur;
        krylov_propagate(h, &mut amps, dt, cfg)?;
        t_cur = ts;
        next_jump -= dt;

        acc.rho.push(rdm_sector_raw(basis, &amps, 1, n_sites));
        acc.energy.push(expectation_raw(h, &amps));
        acc.norm
            .push(amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt());
    }
    Ok(acc)
}

fn exponential_wait(rng: &mut ChaCha8Rng, rate: f64) -> f64 {
    let u: f64 = rng.gen::<f64>();
    -(1.0 - u).ln() / rate
}

/// `σᶻ` on one 0-based site: sign flip on every configuration with that spin
/// down. Norm-preserving.
fn apply_sigma_z(basis: &SectorBasis, amps: &mut [Complex64], site: usize) {
    let mask = 1u32 << site;
    for (i, &cfg) in basis.configs().iter().enumerate() {
        if cfg & mask == 0 {
            amps[i] = -amps[i];
        }
    }
}

/// Heisenberg bonds plus per-site fields in the full 2^N space. The
/// transverse field components make this operator complex Hermitian.
pub struct FullSpaceOp {
    n_sites: usize,
    /// (mask_a, mask_b, coupling) per bond.
    bonds: Vec<(u32, u32, f64)>,
    /// (h_x, h_y, h_z) per site, site 1 first.
    fields: Vec<[f64; 3]>,
}

impl FullSpaceOp {
    pub fn new(comp: &CompositeSpec, fields: Vec<[f64; 3]>) -> Result<Self> {
        let n = comp.n_total();
        if n > RANDOM_FIELD_MAX_SITES {
            return Err(Error::Capacity(format!(
                "full-space evolution capped at N = {RANDOM_FIELD_MAX_SITES}, got N = {n}"
            )));
        }
        if fields.len() != n {
            return Err(Error::invalid(format!(
                "expected {n} site fields, got {}",
                fields.len()
            )));
        }
        let bonds = composite_bonds(comp)
            .into_iter()
            .map(|(a, b, c)| (1u32 << (a - 1), 1u32 << (b - 1), c))
            .collect();
        Ok(FullSpaceOp {
            n_sites: n,
            bonds,
            fields,
        })
    }

    /// Expand sector amplitudes into the full 2^N space.
    pub fn expand_sector(basis: &SectorBasis, amps: &[Complex64]) -> Vec<Complex64> {
        let mut full = vec![Complex64::new(0.0, 0.0); 1 << basis.n_sites()];
        for (i, &cfg) in basis.configs().iter().enumerate() {
            full[cfg as usize] = amps[i];
        }
        full
    }
}

impl HermitianOp for FullSpaceOp {
    fn dim(&self) -> usize {
        1 << self.n_sites
    }

    fn apply(&self, x: &[Complex64], y: &mut [Complex64]) {
        y.fill(Complex64::new(0.0, 0.0));
        for (c, &xc) in x.iter().enumerate() {
            if xc == Complex64::new(0.0, 0.0) {
                continue;
            }
            let cfg = c as u32;
            let mut diag = 0.0;
            for &(ma, mb, cpl) in &self.bonds {
                let same = (cfg & ma != 0) == (cfg & mb != 0);
                if same {
                    diag += cpl;
                } else {
                    diag -= cpl;
                    y[(cfg ^ (ma | mb)) as usize] += xc * (2.0 * cpl);
                }
            }
            for (site, f) in self.fields.iter().enumerate() {
                let up = cfg & (1 << site) != 0;
                diag += if up { f[2] } else { -f[2] };
                if f[0] != 0.0 || f[1] != 0.0 {
                    // ⟨down|h_xσˣ + h_yσʸ|up⟩ = h_x + i h_y and its conjugate.
                    let coeff = if up {
                        Complex64::new(f[0], f[1])
                    } else {
                        Complex64::new(f[0], -f[1])
                    };
                    y[(cfg ^ (1 << site)) as usize] += xc * coeff;
                }
            }
            y[c] += xc * diag;
        }
    }
}

/// Quench with a static random field on every site, averaged over disorder
/// realizations. Each realization evolves unitarily in the full 2^N space.
///
/// `h_mag = 0` takes the noiseless sector path and reproduces [`run_quench`]
/// exactly.
pub fn run_random_field(
    comp: &CompositeSpec,
    noise: &NoiseSpec,
    t_max: f64,
    cfg: &SolverConfig,
) -> Result<QuenchTrace> {
    if noise.kind != NoiseKind::RandomField {
        return Err(Error::invalid(format!(
            "run_random_field called with noise kind {:?}",
            noise.kind
        )));
    }
    noise.validate()?;
    if noise.h_mag == 0.0 {
        return run_quench(comp, t_max, cfg);
    }
    let n = comp.n_total();
    if n > RANDOM_FIELD_MAX_SITES {
        return Err(Error::Capacity(format!(
            "full-space evolution capped at N = {RANDOM_FIELD_MAX_SITES}, got N = {n}"
        )));
    }

    let init = super::prepare_initial_state(comp, cfg)?;
    let basis = init.state.basis().clone();
    let full0 = FullSpaceOp::expand_sector(&basis, init.state.amps());
    let times = sample_times(t_max, cfg.dt);

    let samples: Vec<Result<NoiseAccumulator>> = (0..noise.n_samples)
        .into_par_iter()
        .map(|k| {
            let mut rng = stream_rng(noise.seed, k);
            let fields = sample_fields(comp.n_total(), noise, &mut rng);
            let op = FullSpaceOp::new(comp, fields)?;
            field_realization(&op, &full0, n, &times, cfg)
        })
        .collect();
    let samples: Result<Vec<NoiseAccumulator>> = samples.into_iter().collect();

    NoiseAccumulator::average(
        samples?,
        times,
        TraceMeta {
            comp: *comp,
            solver: *cfg,
        },
    )
}

fn sample_fields(n: usize, noise: &NoiseSpec, rng: &mut ChaCha8Rng) -> Vec<[f64; 3]> {
    (0..n)
        .map(|_| {
            let dir: [f64; 3] = UnitSphere.sample(rng);
            let mag = if noise.gaussian_magnitude {
                Normal::new(0.0, noise.h_mag).unwrap().sample(rng).abs()
            } else {
                noise.h_mag
            };
            [dir[0] * mag, dir[1] * mag, dir[2] * mag]
        })
        .collect()
}

fn field_realization(
    op: &FullSpaceOp,
    full0: &[Complex64],
    n_sites: usize,
    times: &[f64],
    cfg: &SolverConfig,
) -> Result<NoiseAccumulator> {
    let mut amps = full0.to_vec();
    let mut acc = NoiseAccumulator {
        rho: Vec::with_capacity(times.len()),
        energy: Vec::with_capacity(times.len()),
        norm: Vec::with_capacity(times.len()),
    };
    for (k, _) in times.iter().enumerate() {
        if k > 0 {
            krylov_propagate(op, &mut amps, cfg.dt, cfg)?;
        }
        acc.rho.push(rdm_full_raw(&amps, 1, n_sites));
        // Per-realization energy includes the field term and is conserved.
        acc.energy.push(expectation_raw(op, &amps));
        acc.norm
            .push(amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt());
    }
    Ok(acc)
}
