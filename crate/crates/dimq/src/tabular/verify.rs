//! Randomized verification suites for the tabular operators: consistency
//! against full-action value iteration, the contraction bound, and the
//! conservative fixed point against gradient descent. Used by both the
//! test suite and `dimq verify-tabular`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

use crate::env::{random_tabular_mdp, RandomMdpParams};
use crate::error::Result;
use crate::tabular::backup::{
    contraction_check, full_action_value_iteration, per_dim_value_iteration_intra,
};
use crate::tabular::behavior::EmpiricalBehavior;
use crate::tabular::conservative::{conservative_fixed_point, minimize_tabular_objective};
use crate::tabular::mdp::TabularMdp;
use crate::tabular::qtable::QTable;

pub const CONSISTENCY_TOL: f64 = 1e-8;
pub const CONTRACTION_SLACK: f64 = 1e-12;
pub const FIXED_POINT_TOL: f64 = 1e-4;

/// Outcome of one randomized suite.
#[derive(Debug, Clone)]
pub struct SuiteReport {
    pub name: &'static str,
    pub trials: usize,
    pub failures: usize,
    pub worst_residual: f64,
    pub threshold: f64,
}

impl SuiteReport {
    pub fn passed(&self) -> bool {
        self.failures == 0
    }

    pub fn summary(&self) -> String {
        format!(
            "{}: {} over {} trials (worst residual {:.3e}, threshold {:.1e})",
            self.name,
            if self.passed() { "PASS" } else { "FAIL" },
            self.trials,
            self.worst_residual,
            self.threshold
        )
    }
}

fn random_params<R: Rng>(rng: &mut R, gamma: f64) -> RandomMdpParams {
    let num_dims = rng.gen_range(1..=3usize);
    let bins: Vec<u16> = (0..num_dims).map(|_| rng.gen_range(2..=4u16)).collect();
    RandomMdpParams {
        num_states: rng.gen_range(2..=6),
        bins,
        gamma,
        zero_rewards: false,
        reward_density: 0.2,
    }
}

/// Per-dimension value iteration must reproduce the full-action optimal
/// state values. `intra_discount` is 1.0 for the real operator; other
/// values exist to show the suite catches a wrong within-timestep discount.
pub fn consistency_suite(trials: usize, seed: u64, intra_discount: f64) -> Result<SuiteReport> {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut report = SuiteReport {
        name: "consistency",
        trials,
        failures: 0,
        worst_residual: 0.0,
        threshold: CONSISTENCY_TOL,
    };
    for trial in 0..trials {
        let params = random_params(&mut rng, 0.9);
        let mdp = random_tabular_mdp(seed.wrapping_add(trial as u64), &params)?;
        let joint = full_action_value_iteration(&mdp, 1e-11)?;
        let per_dim = per_dim_value_iteration_intra(&mdp, 1e-11, intra_discount)?;
        let residual = (0..mdp.num_states)
            .map(|s| (per_dim.root_max(s) - joint.state_value(s)).abs())
            .fold(0.0, f64::max);
        report.worst_residual = report.worst_residual.max(residual);
        if residual >= CONSISTENCY_TOL {
            report.failures += 1;
        }
    }
    Ok(report)
}

/// ||B*Q1 - B*Q2||_inf <= gamma * ||Q1 - Q2||_inf on random triples.
pub fn contraction_suite(trials: usize, seed: u64) -> Result<SuiteReport> {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut report = SuiteReport {
        name: "contraction",
        trials,
        failures: 0,
        worst_residual: 0.0,
        threshold: CONTRACTION_SLACK,
    };
    for trial in 0..trials {
        let gamma = rng.gen_range(0.5..0.99);
        let params = random_params(&mut rng, gamma);
        let mdp = random_tabular_mdp(seed.wrapping_add(0x5eed ^ trial as u64), &params)?;
        let q1 = QTable::random(mdp.num_states, &mdp.action_spec, 1.0, &mut rng);
        let q2 = QTable::random(mdp.num_states, &mdp.action_spec, 1.0, &mut rng);
        let (lhs, rhs) = contraction_check(&mdp, &q1, &q2)?;
        let residual = lhs - rhs;
        report.worst_residual = report.worst_residual.max(residual);
        if residual > CONTRACTION_SLACK {
            report.failures += 1;
        }
    }
    Ok(report)
}

fn random_behavior<R: Rng>(mdp: &TabularMdp, dirac: bool, rng: &mut R) -> Result<EmpiricalBehavior> {
    let num_joint = mdp.num_joint_actions();
    let mut counts = Vec::new();
    for s in 0..mdp.num_states {
        let k = if dirac { 1 } else { rng.gen_range(1..=num_joint.min(4)) };
        for _ in 0..k {
            let joint = rng.gen_range(0..num_joint);
            let count = rng.gen_range(1..=5) as f64;
            counts.push((s, mdp.joint_action(joint), count));
        }
    }
    EmpiricalBehavior::from_counts(mdp.num_states, &mdp.action_spec, &counts)
}

/// Gradient descent on the conservative objective must land on the
/// weighted backup m * B*Q. Every third instance uses Dirac behavior and
/// additionally checks that unseen-action values reach 0.
pub fn fixed_point_suite(trials: usize, seed: u64) -> Result<SuiteReport> {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut report = SuiteReport {
        name: "fixed-point",
        trials,
        failures: 0,
        worst_residual: 0.0,
        threshold: FIXED_POINT_TOL,
    };
    for trial in 0..trials {
        let gamma = rng.gen_range(0.5..0.95);
        let params = random_params(&mut rng, gamma);
        let mdp = random_tabular_mdp(seed.wrapping_add(0xf1ed ^ trial as u64), &params)?;
        let dirac = trial % 3 == 0;
        let behavior = random_behavior(&mdp, dirac, &mut rng)?;
        let alpha = [1.0, 0.5, 2.0][trial % 3];
        let q_target = QTable::random(mdp.num_states, &mdp.action_spec, 1.0, &mut rng);
        let closed_form = conservative_fixed_point(&mdp, &behavior, alpha, &q_target)?;
        let step = 0.9 / (1.0 + alpha);
        let descended =
            minimize_tabular_objective(&mdp, &behavior, alpha, &q_target, step, 60_000)?;
        let mut residual = closed_form.sup_dist(&descended)?;
        if dirac {
            // unseen joint actions must be driven to zero
            let mut unseen_max = 0.0f64;
            descended.for_each_node_dfs(|s, prefix, v| {
                if behavior.pi_beta(s, prefix) == 0.0 {
                    unseen_max = unseen_max.max(v.abs());
                }
            });
            residual = residual.max(unseen_max);
        }
        report.worst_residual = report.worst_residual.max(residual);
        if residual >= FIXED_POINT_TOL {
            report.failures += 1;
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn consistency_suite_passes_quickly() {
        let report = consistency_suite(10, 42, 1.0).unwrap();
        assert!(report.passed(), "{}", report.summary());
        assert!(report.worst_residual < 1e-8);
    }

    #[test]
    fn consistency_suite_catches_wrong_intra_discount() {
        // Mutation check: flipping the within-timestep discount to gamma
        // breaks the equivalence with the full-action MDP.
        let report = consistency_suite(10, 42, 0.9).unwrap();
        assert!(!report.passed());
    }

    #[test]
    fn contraction_suite_passes_quickly() {
        let report = contraction_suite(50, 7).unwrap();
        assert!(report.passed(), "{}", report.summary());
    }

    #[test]
    fn fixed_point_suite_passes_quickly() {
        let report = fixed_point_suite(6, 3).unwrap();
        assert!(report.passed(), "{}", report.summary());
    }
}
