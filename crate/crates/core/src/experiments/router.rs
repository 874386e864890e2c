//! Router orchestration: connect exclusive pairs of nodes simultaneously.
//!
//! Each node owns one chain whose boundary spin is the user's qubit. A
//! dispatcher switches on a junction between two chosen nodes, which quenches
//! that pair exactly like a standalone composite system; pairs never share a
//! node, so they are simulated independently.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{extract_peak, run_quench, OptimizationResult};
use crate::error::{Error, Result};
use crate::model::{ChainSpec, CompositeSpec};
use crate::solver::SolverConfig;

/// Named chain endpoint of the router.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RouterNode {
    pub name: String,
    pub chain: ChainSpec,
}

/// A requested connection and its junction coupling.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RouterPair {
    pub a: String,
    pub b: String,
    pub j_m: f64,
}

/// Nodes plus the set of simultaneous connections.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RouterPlan {
    pub nodes: Vec<RouterNode>,
    pub pairs: Vec<RouterPair>,
}

impl RouterPlan {
    /// Check node-name uniqueness, pair references, and pair disjointness.
    pub fn validate(&self) -> Result<()> {
        let mut names = std::collections::HashSet::new();
        for node in &self.nodes {
            if !names.insert(node.name.as_str()) {
                return Err(Error::invalid(format!(
                    "duplicate node name {}",
                    node.name
                )));
            }
        }
        let mut used = std::collections::HashSet::new();
        for pair in &self.pairs {
            for name in [&pair.a, &pair.b] {
                if !names.contains(name.as_str()) {
                    return Err(Error::NotFound(format!("unknown node {name}")));
                }
            }
            if pair.a == pair.b {
                return Err(Error::ExclusivityViolation {
                    node: pair.a.clone(),
                });
            }
            for name in [&pair.a, &pair.b] {
                if !used.insert(name.clone()) {
                    return Err(Error::ExclusivityViolation { node: name.clone() });
                }
            }
        }
        Ok(())
    }

    fn chain(&self, name: &str) -> &ChainSpec {
        &self
            .nodes
            .iter()
            .find(|n| n.name == name)
            .expect("validated node name")
            .chain
    }
}

/// Peak data for one connected pair.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PairOutcome {
    pub a: String,
    pub b: String,
    pub result: OptimizationResult,
}

/// Quench every requested pair independently at its planned coupling.
///
/// Each outcome is bit-identical to a standalone [`run_quench`] of the same
/// composite system; the single-point "grid" records the planned coupling.
pub fn route(plan: &RouterPlan, t_max: f64, cfg: &SolverConfig) -> Result<Vec<PairOutcome>> {
    plan.validate()?;
    let outcomes: Vec<Result<PairOutcome>> = plan
        .pairs
        .par_iter()
        .map(|pair| {
            let comp = CompositeSpec::new(*plan.chain(&pair.a), *plan.chain(&pair.b), pair.j_m)?;
            let trace = run_quench(&comp, t_max, cfg)?;
            let peak = extract_peak(&trace)?;
            Ok(PairOutcome {
                a: pair.a.clone(),
                b: pair.b.clone(),
                result: OptimizationResult {
                    j_m_opt: pair.j_m,
                    t_star: peak.t_star,
                    e_max: peak.e_max,
                    grid: vec![pair.j_m],
                    per_point: vec![Some(peak)],
                },
            })
        })
        .collect();
    outcomes.into_iter().collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn node(name: &str, n: usize) -> RouterNode {
        RouterNode {
            name: name.to_string(),
            chain: ChainSpec::with_table_coupling(n, 0.0).unwrap(),
        }
    }

    fn four_node_plan() -> RouterPlan {
        RouterPlan {
            nodes: vec![node("A", 4), node("B", 4), node("C", 4), node("D", 4)],
            pairs: vec![
                RouterPair {
                    a: "A".into(),
                    b: "B".into(),
                    j_m: 0.86,
                },
                RouterPair {
                    a: "C".into(),
                    b: "D".into(),
                    j_m: 0.86,
                },
            ],
        }
    }

    #[test]
    fn overlapping_pairs_name_the_conflicting_node() {
        let mut plan = four_node_plan();
        plan.pairs[1].a = "B".into();
        match route(&plan, 4.0, &SolverConfig::default()) {
            Err(Error::ExclusivityViolation { node }) => assert_eq!(node, "B"),
            other => panic!("expected exclusivity violation, got {other:?}"),
        }
    }

    #[test]
    fn self_pair_is_rejected() {
        let mut plan = four_node_plan();
        plan.pairs[0].b = "A".into();
        assert!(matches!(
            route(&plan, 4.0, &SolverConfig::default()),
            Err(Error::ExclusivityViolation { .. })
        ));
    }

    #[test]
    fn unknown_node_is_rejected() {
        let mut plan = four_node_plan();
        plan.pairs[0].b = "Z".into();
        assert!(matches!(
            route(&plan, 4.0, &SolverConfig::default()),
            Err(Error::NotFound(_))
        ));
    }

    #[test]
    fn pairs_match_standalone_runs_bit_for_bit() {
        let plan = four_node_plan();
        let cfg = SolverConfig::default();
        let outcomes = route(&plan, 4.0, &cfg).unwrap();
        assert_eq!(outcomes.len(), 2);

        let comp = CompositeSpec::new(
            plan.nodes[0].chain,
            plan.nodes[1].chain,
            plan.pairs[0].j_m,
        )
        .unwrap();
        let standalone = run_quench(&comp, 4.0, &cfg).unwrap();
        let peak = extract_peak(&standalone).unwrap();
        assert_eq!(outcomes[0].result.t_star, peak.t_star);
        assert_eq!(outcomes[0].result.e_max, peak.e_max);

        // Identical nodes: both pairs give identical outcomes.
        assert_eq!(outcomes[0].result.e_max, outcomes[1].result.e_max);
        assert_eq!(outcomes[0].result.t_star, outcomes[1].result.t_star);
    }
}
