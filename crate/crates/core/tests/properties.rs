//! Cross-module property checks at small system sizes.

use kondo_router::experiments::{extract_peak, jm_grid, optimize_jm, run_quench};
use kondo_router::model::{ChainSpec, CompositeSpec};
use kondo_router::solver::SolverConfig;

/// Halving the sweep step moves the selected coupling by at most one
/// original step.
#[test]
fn optimizer_is_grid_resolution_stable() {
    let chain = ChainSpec::with_table_coupling(4, 0.0).unwrap();
    let cfg = SolverConfig::default();
    let coarse = optimize_jm(&chain, &chain, &jm_grid(0.5, 0.08, 1.3), 4.5, &cfg).unwrap();
    let fine = optimize_jm(&chain, &chain, &jm_grid(0.5, 0.04, 1.3), 4.5, &cfg).unwrap();
    assert!(
        (coarse.j_m_opt - fine.j_m_opt).abs() <= 0.08 + 1e-12,
        "coarse {} vs fine {}",
        coarse.j_m_opt,
        fine.j_m_opt
    );
}

/// The oscillation recurs: a second concurrence peak appears near 3·t* with
/// height within 25% of the first maximum.
#[test]
fn concurrence_peak_recurs_near_three_t_star() {
    let chain = ChainSpec::with_table_coupling(4, 0.0).unwrap();
    let comp = CompositeSpec::new(chain, chain, 0.78).unwrap();
    let cfg = SolverConfig::default();
    let trace = run_quench(&comp, 8.5, &cfg).unwrap();
    let first = extract_peak(&trace).unwrap();

    let c = &trace.concurrence;
    let mut second: Option<(f64, f64)> = None;
    for k in 1..c.len() - 1 {
        if trace.times[k] > 2.0 * first.t_star && c[k] >= c[k - 1] && c[k] > c[k + 1] {
            if second.map_or(true, |(_, e)| c[k] > e) {
                second = Some((trace.times[k], c[k]));
            }
        }
    }
    let (t2, e2) = second.expect("no recurrence found");
    assert!(
        (t2 - 3.0 * first.t_star).abs() < 0.25 * first.t_star,
        "second peak at {t2}, expected near {}",
        3.0 * first.t_star
    );
    assert!(
        e2 > 0.75 * first.e_max,
        "second peak {e2} is not within 25% of {}",
        first.e_max
    );
}

/// Mirrored splits of the same composite give identical optimized peaks.
#[test]
fn mirrored_splits_are_equivalent() {
    let a = ChainSpec::with_table_coupling(4, 0.0).unwrap();
    let b = ChainSpec::with_table_coupling(6, 0.0).unwrap();
    let cfg = SolverConfig::default();
    let grid = jm_grid(0.7, 0.1, 1.1);
    let ab = optimize_jm(&a, &b, &grid, 5.5, &cfg).unwrap();
    let ba = optimize_jm(&b, &a, &grid, 5.5, &cfg).unwrap();
    assert_eq!(ab.j_m_opt, ba.j_m_opt);
    assert!((ab.e_max - ba.e_max).abs() < 1e-9);
    assert!((ab.t_star - ba.t_star).abs() < 1e-9);
}
