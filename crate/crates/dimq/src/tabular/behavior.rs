//! Empirical behavior policy and its low-density complement.
//!
//! pi_beta is the empirical frequency of observed actions (and, per level,
//! of action prefixes); pi_tilde is proportional to 1 - pi_beta and
//! normalized to sum to 1 over each level, concentrating on actions the
//! data rarely (or never) takes.

use crate::action::ActionSpec;
use crate::episode::OfflineDataset;
use crate::error::{Error, Result};
use crate::tabular::qtable::QShape;

#[derive(Debug, Clone)]
pub struct EmpiricalBehavior {
    pub num_states: usize,
    shape: QShape,
    /// Prefix-marginal counts, one per (state, prefix) node.
    node_counts: Vec<f64>,
    /// Observation count per state.
    totals: Vec<f64>,
}

impl EmpiricalBehavior {
    /// Builds from explicit (state, joint action, count) triples.
    pub fn from_counts(
        num_states: usize,
        spec: &ActionSpec,
        counts: &[(usize, Vec<u16>, f64)],
    ) -> Result<Self> {
        let shape = QShape::of(spec);
        let mut behavior = EmpiricalBehavior {
            num_states,
            node_counts: vec![0.0; num_states * shape.stride],
            totals: vec![0.0; num_states],
            shape,
        };
        for (state, action, count) in counts {
            if *state >= num_states {
                return Err(Error::InvalidDataset(format!(
                    "state {state} out of range ({num_states} states)"
                )));
            }
            spec.check_action(action)?;
            if !(*count >= 0.0) {
                return Err(Error::InvalidDataset(format!("negative count {count}")));
            }
            behavior.add(*state, action, *count);
        }
        Ok(behavior)
    }

    /// Builds from a tabular dataset whose observations are length-1
    /// vectors holding the state index.
    pub fn from_dataset(num_states: usize, dataset: &OfflineDataset) -> Result<Self> {
        let shape = QShape::of(&dataset.action_spec);
        let mut behavior = EmpiricalBehavior {
            num_states,
            node_counts: vec![0.0; num_states * shape.stride],
            totals: vec![0.0; num_states],
            shape,
        };
        for ep in &dataset.episodes {
            for (obs, action) in ep.observations.iter().zip(&ep.actions) {
                if obs.len() != 1 || obs[0].fract() != 0.0 || obs[0] < 0.0 {
                    return Err(Error::InvalidDataset(
                        "tabular behavior needs state-index observations".into(),
                    ));
                }
                let state = obs[0] as usize;
                if state >= num_states {
                    return Err(Error::InvalidDataset(format!(
                        "state index {state} out of range ({num_states} states)"
                    )));
                }
                behavior.add(state, action, 1.0);
            }
        }
        Ok(behavior)
    }

    fn add(&mut self, state: usize, action: &[u16], count: f64) {
        let block = state * self.shape.stride;
        for len in 1..=action.len() {
            self.node_counts[block + self.shape.node_offset(&action[..len])] += count;
        }
        self.totals[state] += count;
    }

    pub fn shape(&self) -> &QShape {
        &self.shape
    }

    /// States with no observations at all.
    pub fn unvisited_states(&self) -> Vec<usize> {
        (0..self.num_states)
            .filter(|&s| self.totals[s] == 0.0)
            .collect()
    }

    /// Empirical frequency of an action prefix at a state (0 when the state
    /// was never observed).
    pub fn pi_beta(&self, state: usize, prefix: &[u16]) -> f64 {
        if self.totals[state] == 0.0 {
            return 0.0;
        }
        self.node_counts[state * self.shape.stride + self.shape.node_offset(prefix)]
            / self.totals[state]
    }

    /// Complement distribution over the prefix's level, proportional to
    /// 1 - pi_beta and normalized to sum to 1.
    pub fn pi_tilde(&self, state: usize, prefix: &[u16]) -> f64 {
        let level = prefix.len() - 1;
        let k = self.shape.level_sizes[level] as f64;
        // sum over the level of (1 - pi_beta) = k - (1 if visited else 0)
        let z = if self.totals[state] > 0.0 { k - 1.0 } else { k };
        (1.0 - self.pi_beta(state, prefix)) / z
    }

    /// Weighted-backup coefficient m = pi_beta / (pi_beta + alpha*pi_tilde).
    ///
    /// With alpha = 0 the coefficient is 1 wherever pi_beta > 0 and 0 on
    /// unobserved prefixes at observed states (where the objective puts no
    /// weight); a fully unobserved state with alpha = 0 has no defined
    /// backup at all and is an error.
    pub fn backup_weight(&self, state: usize, prefix: &[u16], alpha: f64) -> Result<f64> {
        if self.totals[state] == 0.0 && alpha == 0.0 {
            return Err(Error::DegenerateBehavior { state });
        }
        let pb = self.pi_beta(state, prefix);
        let denom = pb + alpha * self.pi_tilde(state, prefix);
        if denom == 0.0 {
            return Ok(0.0);
        }
        Ok(pb / denom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec22() -> ActionSpec {
        ActionSpec::discrete(vec![2, 2]).unwrap()
    }

    #[test]
    fn dirac_behavior_weights() {
        let spec = spec22();
        let b = EmpiricalBehavior::from_counts(1, &spec, &[(0, vec![1, 0], 5.0)]).unwrap();
        assert_eq!(b.pi_beta(0, &[1, 0]), 1.0);
        assert_eq!(b.pi_beta(0, &[1]), 1.0);
        assert_eq!(b.pi_tilde(0, &[1, 0]), 0.0);
        // pi_tilde uniform over the complement: 3 unseen joint actions, Z = 3
        assert!((b.pi_tilde(0, &[0, 0]) - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(b.backup_weight(0, &[1, 0], 1.0).unwrap(), 1.0);
        assert_eq!(b.backup_weight(0, &[0, 1], 1.0).unwrap(), 0.0);
        assert_eq!(b.backup_weight(0, &[1], 1.0).unwrap(), 1.0);
        assert_eq!(b.backup_weight(0, &[0], 1.0).unwrap(), 0.0);
    }

    #[test]
    fn uniform_two_action_weight_is_half() {
        // One binary dimension, both actions equally frequent:
        // m = (1/2) / (1/2 + 1 * 1/2) = 1/2.
        let spec = ActionSpec::discrete(vec![2]).unwrap();
        let b = EmpiricalBehavior::from_counts(
            1,
            &spec,
            &[(0, vec![0], 3.0), (0, vec![1], 3.0)],
        )
        .unwrap();
        assert!((b.backup_weight(0, &[0], 1.0).unwrap() - 0.5).abs() < 1e-15);
        assert!((b.backup_weight(0, &[1], 1.0).unwrap() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn rows_sum_to_one() {
        let spec = spec22();
        let b = EmpiricalBehavior::from_counts(
            2,
            &spec,
            &[
                (0, vec![0, 0], 2.0),
                (0, vec![1, 1], 1.0),
                (1, vec![0, 1], 4.0),
            ],
        )
        .unwrap();
        for s in 0..2 {
            for level_prefixes in [vec![vec![0u16], vec![1]], crate::tabular::tests_all_joint(&spec)] {
                let pb: f64 = level_prefixes.iter().map(|p| b.pi_beta(s, p)).sum();
                let pt: f64 = level_prefixes.iter().map(|p| b.pi_tilde(s, p)).sum();
                assert!((pb - 1.0).abs() < 1e-12);
                assert!((pt - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn degenerate_only_when_unvisited_and_alpha_zero() {
        let spec = spec22();
        let b = EmpiricalBehavior::from_counts(2, &spec, &[(0, vec![0, 0], 1.0)]).unwrap();
        assert_eq!(b.unvisited_states(), vec![1]);
        assert!(matches!(
            b.backup_weight(1, &[0], 0.0),
            Err(Error::DegenerateBehavior { state: 1 })
        ));
        // alpha > 0: defined (m = 0) even at unvisited states
        assert_eq!(b.backup_weight(1, &[0], 1.0).unwrap(), 0.0);
        // alpha = 0 at a visited state: 1 on observed, 0 on unobserved
        assert_eq!(b.backup_weight(0, &[0, 0], 0.0).unwrap(), 1.0);
        assert_eq!(b.backup_weight(0, &[1, 1], 0.0).unwrap(), 0.0);
    }
}
