//! Bellman backup operators: full-action, per-dimension, and the
//! per-dimension variant with discounting at every level used by the
//! contraction bound.

use crate::error::{Error, Result};
use crate::tabular::mdp::TabularMdp;
use crate::tabular::qtable::QTable;

/// Maximum backup sweeps before value iteration gives up.
const MAX_SWEEPS: usize = 10_000_000;

/// Optimal Q-values over (state, joint action), from plain value iteration.
#[derive(Debug, Clone)]
pub struct JointQ {
    pub num_states: usize,
    pub num_joint: usize,
    pub values: Vec<f64>,
}

impl JointQ {
    pub fn zeros(mdp: &TabularMdp) -> JointQ {
        JointQ {
            num_states: mdp.num_states,
            num_joint: mdp.num_joint_actions(),
            values: vec![0.0; mdp.num_states * mdp.num_joint_actions()],
        }
    }

    pub fn get(&self, state: usize, joint_action: usize) -> f64 {
        self.values[state * self.num_joint + joint_action]
    }

    /// V(s) = max_a Q(s, a).
    pub fn state_value(&self, state: usize) -> f64 {
        self.values[state * self.num_joint..(state + 1) * self.num_joint]
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

/// One synchronous application of the full-action Bellman operator:
/// (B*Q)(s,a) = R(s,a) + gamma * sum_s' T(s'|s,a) max_a' Q(s',a').
pub fn full_backup(mdp: &TabularMdp, q: &JointQ) -> JointQ {
    let mut out = JointQ::zeros(mdp);
    let state_values: Vec<f64> = (0..mdp.num_states).map(|s| q.state_value(s)).collect();
    for s in 0..mdp.num_states {
        for a in 0..q.num_joint {
            let expected: f64 = mdp
                .transition_row(s, a)
                .iter()
                .zip(&state_values)
                .map(|(&p, &v)| p * v)
                .sum();
            out.values[s * q.num_joint + a] = mdp.reward_at(s, a) + mdp.gamma * expected;
        }
    }
    out
}

/// Iterates the full-action backup from zero until the sup-norm change
/// drops below `tol`.
pub fn full_action_value_iteration(mdp: &TabularMdp, tol: f64) -> Result<JointQ> {
    let mut q = JointQ::zeros(mdp);
    for _ in 0..MAX_SWEEPS {
        let next = full_backup(mdp, &q);
        let delta = q
            .values
            .iter()
            .zip(&next.values)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        q = next;
        if delta < tol {
            return Ok(q);
        }
    }
    Err(Error::InvalidMdp(format!(
        "value iteration did not converge within {MAX_SWEEPS} sweeps"
    )))
}

/// One synchronous application of the per-dimension backup to every
/// (state, prefix) node:
///
/// * prefix shorter than the action: max over the next dimension's bins,
///   scaled by `intra_discount` (1.0 in the standard update — discounting
///   happens only between time steps);
/// * full-length prefix: R(s,a) + gamma * E_s' [ max_b Q(s', [b]) ].
pub fn per_dim_backup_intra(mdp: &TabularMdp, q: &QTable, intra_discount: f64) -> QTable {
    let shape = q.shape().clone();
    let d = shape.num_dims();
    let mut out = QTable::zeros(mdp.num_states, &mdp.action_spec);
    // Value of each next state under the table: max over first-dim nodes.
    let next_values: Vec<f64> = (0..mdp.num_states).map(|s| q.root_max(s)).collect();
    for s in 0..mdp.num_states {
        let src = q.state_block(s);
        let dst = out.state_block_mut(s);
        // Intermediate levels: each node's children are contiguous.
        for level in 0..d - 1 {
            let n_child = shape.dims[level + 1] as usize;
            let child_base = shape.level_offsets[level + 1];
            let base = shape.level_offsets[level];
            for node in 0..shape.level_sizes[level] {
                let children = &src[child_base + node * n_child..child_base + (node + 1) * n_child];
                let best = children.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                dst[base + node] = intra_discount * best;
            }
        }
        // Final level: joint-action rank equals the node rank.
        let base = shape.level_offsets[d - 1];
        for a in 0..shape.level_sizes[d - 1] {
            let expected: f64 = mdp
                .transition_row(s, a)
                .iter()
                .zip(&next_values)
                .map(|(&p, &v)| p * v)
                .sum();
            dst[base + a] = mdp.reward_at(s, a) + mdp.gamma * expected;
        }
    }
    out
}

/// The standard per-dimension backup (within-timestep discount 1.0).
pub fn per_dim_backup(mdp: &TabularMdp, q: &QTable) -> QTable {
    per_dim_backup_intra(mdp, q, 1.0)
}

/// Iterates the per-dimension backup until the sup-norm change drops below
/// `tol`. `intra_discount` other than 1.0 exists only to demonstrate that
/// the consistency check catches a wrong within-timestep discount.
pub fn per_dim_value_iteration_intra(
    mdp: &TabularMdp,
    tol: f64,
    intra_discount: f64,
) -> Result<QTable> {
    let mut q = QTable::zeros(mdp.num_states, &mdp.action_spec);
    for _ in 0..MAX_SWEEPS {
        let next = per_dim_backup_intra(mdp, &q, intra_discount);
        let delta = q.sup_dist(&next)?;
        q = next;
        if delta < tol {
            return Ok(q);
        }
    }
    Err(Error::InvalidMdp(format!(
        "per-dimension value iteration did not converge within {MAX_SWEEPS} sweeps"
    )))
}

pub fn per_dim_value_iteration(mdp: &TabularMdp, tol: f64) -> Result<QTable> {
    per_dim_value_iteration_intra(mdp, tol, 1.0)
}

/// The per-dimension operator with gamma applied at every level (the form
/// whose one-step contraction modulus is gamma):
///
/// * partial prefix: gamma * max over the next dimension's bins;
/// * full-length prefix: R(s,a) + gamma * max_b E_s' [ Q(s', [b]) ].
pub fn contraction_backup(mdp: &TabularMdp, q: &QTable) -> QTable {
    let shape = q.shape().clone();
    let d = shape.num_dims();
    let mut out = QTable::zeros(mdp.num_states, &mdp.action_spec);
    let n_first = shape.dims[0] as usize;
    for s in 0..mdp.num_states {
        let src = q.state_block(s);
        let dst = out.state_block_mut(s);
        for level in 0..d - 1 {
            let n_child = shape.dims[level + 1] as usize;
            let child_base = shape.level_offsets[level + 1];
            let base = shape.level_offsets[level];
            for node in 0..shape.level_sizes[level] {
                let children = &src[child_base + node * n_child..child_base + (node + 1) * n_child];
                let best = children.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                dst[base + node] = mdp.gamma * best;
            }
        }
        let base = shape.level_offsets[d - 1];
        for a in 0..shape.level_sizes[d - 1] {
            let row = mdp.transition_row(s, a);
            let mut best = f64::NEG_INFINITY;
            for b in 0..n_first {
                let expected: f64 = row
                    .iter()
                    .enumerate()
                    .map(|(s2, &p)| p * q.state_block(s2)[b])
                    .sum();
                best = best.max(expected);
            }
            dst[base + a] = mdp.reward_at(s, a) + mdp.gamma * best;
        }
    }
    out
}

/// Evaluates both sides of the contraction bound for the discounted
/// per-dimension operator: returns (||B*q1 - B*q2||_inf, gamma * ||q1 - q2||_inf).
pub fn contraction_check(mdp: &TabularMdp, q1: &QTable, q2: &QTable) -> Result<(f64, f64)> {
    if !q1.same_nodes(q2) {
        return Err(Error::NodeSetMismatch);
    }
    let b1 = contraction_backup(mdp, q1);
    let b2 = contraction_backup(mdp, q2);
    let lhs = b1.sup_dist(&b2)?;
    let rhs = mdp.gamma * q1.sup_dist(q2)?;
    Ok((lhs, rhs))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::action::ActionSpec;
    use crate::tabular::mdp::tests::one_step_reward_on_11;

    #[test]
    fn full_vi_on_single_step_mdp() {
        let mdp = one_step_reward_on_11();
        let q = full_action_value_iteration(&mdp, 1e-12).unwrap();
        assert!((q.get(0, 3) - 1.0).abs() < 1e-9);
        for a in 0..3 {
            assert!(q.get(0, a).abs() < 1e-9);
        }
        assert!((q.state_value(0) - 1.0).abs() < 1e-9);
    }

    #[test]
    fn full_vi_zero_rewards_is_zero() {
        let spec = ActionSpec::discrete(vec![2, 2]).unwrap();
        let n = 2;
        let nj = 4;
        let mut transition = vec![0.0; n * nj * n];
        for s in 0..n {
            for a in 0..nj {
                transition[(s * nj + a) * n + (s + 1) % n] = 1.0;
            }
        }
        let mdp =
            TabularMdp::new(n, spec, 0.9, transition, vec![0.0; n * nj], vec![false; n]).unwrap();
        let q = full_action_value_iteration(&mdp, 1e-12).unwrap();
        assert!(q.values.iter().all(|&v| v.abs() < 1e-9));
        let qpd = per_dim_value_iteration(&mdp, 1e-12).unwrap();
        assert!(qpd.values().iter().all(|&v| v.abs() < 1e-9));
    }

    #[test]
    fn per_dim_vi_on_single_step_mdp() {
        // Hand-enumerated backup over the 4 joint actions:
        // Q(s0, a1=1) = max(Q(s0,(1,0)), Q(s0,(1,1))) = 1, Q(s0, a1=0) = 0.
        let mdp = one_step_reward_on_11();
        let q = per_dim_value_iteration(&mdp, 1e-12).unwrap();
        assert!((q.get(0, &[1]) - 1.0).abs() < 1e-9);
        assert!(q.get(0, &[0]).abs() < 1e-9);
        assert!((q.get(0, &[1, 1]) - 1.0).abs() < 1e-9);
        assert!(q.get(0, &[1, 0]).abs() < 1e-9);
    }

    #[test]
    fn full_vi_matches_long_brute_force_backup() {
        let mdp = crate::env::random_tabular_mdp(
            1,
            &crate::env::RandomMdpParams {
                num_states: 4,
                bins: vec![3, 3],
                gamma: 0.9,
                zero_rewards: false,
                reward_density: 0.2,
            },
        )
        .unwrap();
        let fast = full_action_value_iteration(&mdp, 1e-12).unwrap();
        // Independent oracle: a fixed large number of raw backups from zero.
        let mut brute = JointQ::zeros(&mdp);
        for _ in 0..100_000 {
            brute = full_backup(&mdp, &brute);
        }
        let worst = fast
            .values
            .iter()
            .zip(&brute.values)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        assert!(worst < 1e-8, "max deviation {worst}");
    }

    #[test]
    fn contraction_trivial_cases() {
        let mdp = one_step_reward_on_11();
        let q = QTable::zeros(mdp.num_states, &mdp.action_spec);
        let (lhs, rhs) = contraction_check(&mdp, &q, &q).unwrap();
        assert_eq!(lhs, 0.0);
        assert_eq!(rhs, 0.0);
    }

    #[test]
    fn contraction_constant_shift_single_dim() {
        // On a single-dimension action space the only nodes are full-length,
        // so shifting by a constant moves both sides to exactly gamma*|c|.
        let spec = ActionSpec::discrete(vec![3]).unwrap();
        let n = 2;
        let nj = 3;
        let mut transition = vec![0.0; n * nj * n];
        for s in 0..n {
            for a in 0..nj {
                transition[(s * nj + a) * n + (s + 1) % n] = 1.0;
            }
        }
        let mut reward = vec![0.0; n * nj];
        reward[1] = 1.0;
        let mdp = TabularMdp::new(n, spec, 0.9, transition, reward, vec![false; n]).unwrap();
        let q1 = QTable::zeros(n, &mdp.action_spec);
        let mut q2 = q1.clone();
        for v in q2.values_mut() {
            *v += 0.7;
        }
        let (lhs, rhs) = contraction_check(&mdp, &q1, &q2).unwrap();
        assert!((lhs - 0.9 * 0.7).abs() < 1e-12);
        assert!((rhs - 0.9 * 0.7).abs() < 1e-12);
        assert!(lhs <= rhs + 1e-12);
    }
}
