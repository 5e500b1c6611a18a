//! Conservative (weighted) Bellman backup and its gradient-descent
//! counterpart.
//!
//! Minimizing the TD objective plus the squared penalty on low-density
//! actions, with the backup target frozen, has the closed-form minimizer
//! Q(s,a) = m(s,a) * (B*Q_target)(s,a) with m = pi_beta / (pi_beta +
//! alpha * pi_tilde). `conservative_fixed_point` evaluates that closed
//! form; `minimize_tabular_objective` reaches it the long way by gradient
//! descent so the two can be checked against each other.

use crate::error::{Error, Result};
use crate::tabular::backup::per_dim_backup;
use crate::tabular::behavior::EmpiricalBehavior;
use crate::tabular::mdp::TabularMdp;
use crate::tabular::qtable::QTable;

/// Per-node coefficients m(s, prefix) for a given alpha.
fn backup_weights(mdp: &TabularMdp, behavior: &EmpiricalBehavior, alpha: f64) -> Result<QTable> {
    let mut weights = QTable::zeros(mdp.num_states, &mdp.action_spec);
    let mut nodes: Vec<(usize, Vec<u16>)> = Vec::new();
    weights.for_each_node_dfs(|s, p, _| nodes.push((s, p.to_vec())));
    for (s, p) in nodes {
        let w = behavior.backup_weight(s, &p, alpha)?;
        weights.set(s, &p, w);
    }
    Ok(weights)
}

/// One application of the weighted backup: m(s,a) * (B*q_prev)(s,a).
pub fn conservative_fixed_point(
    mdp: &TabularMdp,
    behavior: &EmpiricalBehavior,
    alpha: f64,
    q_prev: &QTable,
) -> Result<QTable> {
    if !(alpha >= 0.0) {
        return Err(Error::InvalidConfig(format!("alpha {alpha} must be >= 0")));
    }
    let weights = backup_weights(mdp, behavior, alpha)?;
    let mut backed = per_dim_backup(mdp, q_prev);
    for (v, w) in backed.values_mut().iter_mut().zip(weights.values()) {
        *v *= w;
    }
    Ok(backed)
}

/// Gradient descent on the frozen-target objective
///
///   J(Q) = 1/2 sum_s sum_nodes [ pi_beta (Q - B*q_target)^2
///                                + alpha * pi_tilde * Q^2 ]
///
/// starting from Q = 0. Aborts with an error if J ever increases (step too
/// large). Nodes with zero objective weight stay at their initial 0.
pub fn minimize_tabular_objective(
    mdp: &TabularMdp,
    behavior: &EmpiricalBehavior,
    alpha: f64,
    q_target: &QTable,
    step: f64,
    iters: usize,
) -> Result<QTable> {
    if !(alpha >= 0.0) {
        return Err(Error::InvalidConfig(format!("alpha {alpha} must be >= 0")));
    }
    let target = per_dim_backup(mdp, q_target);

    // Gather per-node (pi_beta, pi_tilde) once.
    let mut nodes: Vec<(usize, Vec<u16>)> = Vec::new();
    target.for_each_node_dfs(|s, p, _| nodes.push((s, p.to_vec())));
    let mut pb = Vec::with_capacity(nodes.len());
    let mut pt = Vec::with_capacity(nodes.len());
    for (s, p) in &nodes {
        // Surfaces the degenerate alpha = 0 / unvisited-state case.
        behavior.backup_weight(*s, p, alpha)?;
        pb.push(behavior.pi_beta(*s, p));
        pt.push(behavior.pi_tilde(*s, p));
    }
    let targets: Vec<f64> = nodes.iter().map(|(s, p)| target.get(*s, p)).collect();

    let mut q = vec![0.0; nodes.len()];
    let mut prev_objective = f64::INFINITY;
    for iter in 0..iters {
        let mut objective = 0.0;
        for i in 0..q.len() {
            let td = q[i] - targets[i];
            objective += 0.5 * (pb[i] * td * td + alpha * pt[i] * q[i] * q[i]);
        }
        // Genuine divergence grows geometrically; allow last-ulp noise once
        // the quadratic has settled.
        if objective > prev_objective * (1.0 + 1e-9) {
            return Err(Error::Divergence {
                iter,
                from: prev_objective,
                to: objective,
            });
        }
        prev_objective = objective;
        for i in 0..q.len() {
            let grad = pb[i] * (q[i] - targets[i]) + alpha * pt[i] * q[i];
            q[i] -= step * grad;
        }
    }

    let mut out = QTable::zeros(mdp.num_states, &mdp.action_spec);
    for ((s, p), v) in nodes.iter().zip(&q) {
        out.set(*s, p, *v);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::action::ActionSpec;
    use crate::tabular::mdp::tests::one_step_reward_on_11;

    fn dirac_behavior(mdp: &TabularMdp) -> EmpiricalBehavior {
        EmpiricalBehavior::from_counts(
            mdp.num_states,
            &mdp.action_spec,
            &[(0, vec![1, 1], 1.0), (1, vec![0, 0], 1.0)],
        )
        .unwrap()
    }

    #[test]
    fn alpha_zero_is_plain_backup_on_observed_nodes() {
        let mdp = one_step_reward_on_11();
        let behavior = dirac_behavior(&mdp);
        let q0 = QTable::zeros(mdp.num_states, &mdp.action_spec);
        let plain = per_dim_backup(&mdp, &q0);
        let fixed = conservative_fixed_point(&mdp, &behavior, 0.0, &q0).unwrap();
        // observed nodes at state 0: prefixes [1] and [1,1]
        assert_eq!(fixed.get(0, &[1]), plain.get(0, &[1]));
        assert_eq!(fixed.get(0, &[1, 1]), plain.get(0, &[1, 1]));
    }

    #[test]
    fn dirac_case_zeroes_unseen_nodes() {
        let mdp = one_step_reward_on_11();
        let behavior = dirac_behavior(&mdp);
        let q0 = QTable::zeros(mdp.num_states, &mdp.action_spec);
        let fixed = conservative_fixed_point(&mdp, &behavior, 1.0, &q0).unwrap();
        assert!((fixed.get(0, &[1, 1]) - 1.0).abs() < 1e-12);
        assert_eq!(fixed.get(0, &[0]), 0.0);
        assert_eq!(fixed.get(0, &[1, 0]), 0.0);
        assert_eq!(fixed.get(0, &[0, 1]), 0.0);
    }

    #[test]
    fn gradient_descent_matches_fixed_point() {
        let mdp = one_step_reward_on_11();
        let behavior = dirac_behavior(&mdp);
        let q0 = QTable::zeros(mdp.num_states, &mdp.action_spec);
        let fixed = conservative_fixed_point(&mdp, &behavior, 1.0, &q0).unwrap();
        let descended =
            minimize_tabular_objective(&mdp, &behavior, 1.0, &q0, 0.8, 20_000).unwrap();
        assert!(fixed.sup_dist(&descended).unwrap() < 1e-6);
    }

    #[test]
    fn oversized_step_diverges_with_error() {
        let mdp = one_step_reward_on_11();
        let behavior = dirac_behavior(&mdp);
        let q0 = QTable::zeros(mdp.num_states, &mdp.action_spec);
        let err = minimize_tabular_objective(&mdp, &behavior, 1.0, &q0, 5.0, 1000);
        assert!(matches!(err, Err(Error::Divergence { .. })));
    }

    #[test]
    fn repeated_weighted_backup_converges_and_zeroes_unseen() {
        let mdp = crate::env::random_tabular_mdp(
            9,
            &crate::env::RandomMdpParams {
                num_states: 4,
                bins: vec![3, 2],
                gamma: 0.9,
                zero_rewards: false,
                reward_density: 0.3,
            },
        )
        .unwrap();
        // Dirac behavior: one observed joint action per state.
        let counts: Vec<(usize, Vec<u16>, f64)> = (0..4)
            .map(|s| (s, mdp.joint_action(s % mdp.num_joint_actions()), 1.0))
            .collect();
        let behavior =
            EmpiricalBehavior::from_counts(mdp.num_states, &mdp.action_spec, &counts).unwrap();
        let mut q = QTable::zeros(mdp.num_states, &mdp.action_spec);
        let mut converged = false;
        for _ in 0..10_000 {
            let next = conservative_fixed_point(&mdp, &behavior, 1.0, &q).unwrap();
            let delta = q.sup_dist(&next).unwrap();
            q = next;
            if delta < 1e-12 {
                converged = true;
                break;
            }
        }
        assert!(converged);
        q.for_each_node_dfs(|s, prefix, v| {
            if behavior.pi_beta(s, prefix) == 0.0 {
                assert_eq!(v, 0.0, "unseen node ({s}, {prefix:?}) must settle at 0");
            }
        });
    }

    #[test]
    fn uniform_two_action_fixed_point_is_half_backup() {
        let spec = ActionSpec::discrete(vec![2]).unwrap();
        let n = 1;
        let transition = vec![1.0, 1.0]; // both actions self-loop
        let reward = vec![1.0, 1.0];
        let mdp = TabularMdp::new(n, spec, 0.5, transition, reward, vec![false]).unwrap();
        let behavior = EmpiricalBehavior::from_counts(
            1,
            &mdp.action_spec,
            &[(0, vec![0], 1.0), (0, vec![1], 1.0)],
        )
        .unwrap();
        let q0 = QTable::zeros(1, &mdp.action_spec);
        let fixed = conservative_fixed_point(&mdp, &behavior, 1.0, &q0).unwrap();
        // backup of zero table: R = 1 everywhere; m = 1/2 on both actions
        assert!((fixed.get(0, &[0]) - 0.5).abs() < 1e-12);
        assert!((fixed.get(0, &[1]) - 0.5).abs() < 1e-12);
    }
}
