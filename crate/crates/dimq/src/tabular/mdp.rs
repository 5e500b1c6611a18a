//! Enumerable MDPs over multi-dimensional discrete actions.

use crate::action::{ActionSpec, DimRange};
use crate::error::{Error, Result};

/// A finite MDP with explicit transition and reward tables over joint
/// actions. Joint actions are indexed in mixed radix with dimension 0 most
/// significant.
#[derive(Debug, Clone)]
pub struct TabularMdp {
    pub num_states: usize,
    pub action_spec: ActionSpec,
    pub gamma: f64,
    /// T(s'|s,a), flattened as [(s * num_joint + a) * num_states + s'].
    transition: Vec<f64>,
    /// R(s,a), flattened as [s * num_joint + a].
    reward: Vec<f64>,
    pub terminal: Vec<bool>,
}

impl TabularMdp {
    pub fn new(
        num_states: usize,
        action_spec: ActionSpec,
        gamma: f64,
        transition: Vec<f64>,
        reward: Vec<f64>,
        terminal: Vec<bool>,
    ) -> Result<Self> {
        let mdp = TabularMdp {
            num_states,
            action_spec,
            gamma,
            transition,
            reward,
            terminal,
        };
        mdp.validate()?;
        Ok(mdp)
    }

    pub fn validate(&self) -> Result<()> {
        self.action_spec.validate()?;
        self.action_spec.check_tabular()?;
        if self
            .action_spec
            .ranges
            .iter()
            .any(|r| !matches!(r, DimRange::Discrete))
        {
            return Err(Error::InvalidMdp(
                "tabular MDPs require natively discrete action dimensions".into(),
            ));
        }
        if self.num_states == 0 {
            return Err(Error::InvalidMdp("num_states must be >= 1".into()));
        }
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return Err(Error::InvalidMdp(format!(
                "gamma {} not in (0, 1)",
                self.gamma
            )));
        }
        let num_joint = self.num_joint_actions();
        if self.transition.len() != self.num_states * num_joint * self.num_states {
            return Err(Error::InvalidMdp("transition table has wrong size".into()));
        }
        if self.reward.len() != self.num_states * num_joint {
            return Err(Error::InvalidMdp("reward table has wrong size".into()));
        }
        if self.terminal.len() != self.num_states {
            return Err(Error::InvalidMdp("terminal flags have wrong size".into()));
        }
        for s in 0..self.num_states {
            for a in 0..num_joint {
                let r = self.reward[s * num_joint + a];
                if !r.is_finite() {
                    return Err(Error::InvalidMdp(format!("reward R({s},{a}) is not finite")));
                }
                let row = self.transition_row(s, a);
                let sum: f64 = row.iter().sum();
                if (sum - 1.0).abs() > 1e-12 || row.iter().any(|&p| p < 0.0) {
                    return Err(Error::InvalidMdp(format!(
                        "transition row ({s},{a}) sums to {sum}, expected 1"
                    )));
                }
                if self.terminal[s] && (r != 0.0 || row[s] != 1.0) {
                    return Err(Error::InvalidMdp(format!(
                        "terminal state {s} must self-loop with zero reward"
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn num_joint_actions(&self) -> usize {
        self.action_spec.joint_cardinality() as usize
    }

    pub fn transition_row(&self, state: usize, joint_action: usize) -> &[f64] {
        let start = (state * self.num_joint_actions() + joint_action) * self.num_states;
        &self.transition[start..start + self.num_states]
    }

    pub fn reward_at(&self, state: usize, joint_action: usize) -> f64 {
        self.reward[state * self.num_joint_actions() + joint_action]
    }

    /// Mixed-radix index of a full bin-vector.
    pub fn joint_index(&self, action: &[u16]) -> usize {
        debug_assert_eq!(action.len(), self.action_spec.num_dims);
        action
            .iter()
            .zip(&self.action_spec.bins)
            .fold(0usize, |acc, (&b, &n)| acc * n as usize + b as usize)
    }

    /// Inverse of [`joint_index`](Self::joint_index).
    pub fn joint_action(&self, mut index: usize) -> Vec<u16> {
        let mut bins = vec![0u16; self.action_spec.num_dims];
        for dim in (0..self.action_spec.num_dims).rev() {
            let n = self.action_spec.bins[dim] as usize;
            bins[dim] = (index % n) as u16;
            index /= n;
        }
        bins
    }
}
