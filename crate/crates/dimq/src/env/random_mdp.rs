//! Seeded random tabular MDPs for the oracle suites.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

use crate::action::ActionSpec;
use crate::error::{Error, Result};
use crate::tabular::TabularMdp;

#[derive(Debug, Clone)]
pub struct RandomMdpParams {
    pub num_states: usize,
    pub bins: Vec<u16>,
    pub gamma: f64,
    /// Force all rewards to zero.
    pub zero_rewards: bool,
    /// Probability a (state, action) pair pays reward 1.
    pub reward_density: f64,
}

impl Default for RandomMdpParams {
    fn default() -> Self {
        RandomMdpParams {
            num_states: 4,
            bins: vec![3, 3],
            gamma: 0.9,
            zero_rewards: false,
            reward_density: 0.2,
        }
    }
}

/// Generates a random MDP, deterministic per seed. Transition rows are
/// normalized uniform randoms; rewards are sparse {0, 1}.
pub fn random_tabular_mdp(seed: u64, params: &RandomMdpParams) -> Result<TabularMdp> {
    if params.num_states == 0 || params.num_states > 6 {
        return Err(Error::InvalidMdp(format!(
            "random MDPs support 1..=6 states, got {}",
            params.num_states
        )));
    }
    if params.bins.is_empty() || params.bins.len() > 3 {
        return Err(Error::InvalidMdp(format!(
            "random MDPs support 1..=3 action dimensions, got {}",
            params.bins.len()
        )));
    }
    if params.bins.iter().any(|&n| n < 2 || n > 4) {
        return Err(Error::InvalidMdp("random MDPs support 2..=4 bins per dimension".into()));
    }
    let spec = ActionSpec::discrete(params.bins.clone())?;
    let num_joint = spec.joint_cardinality() as usize;
    let n = params.num_states;
    let mut rng = ChaCha20Rng::seed_from_u64(seed);

    let mut transition = vec![0.0; n * num_joint * n];
    for row in transition.chunks_mut(n) {
        let mut sum = 0.0;
        for p in row.iter_mut() {
            // away from zero so every row has full support
            *p = rng.gen_range(0.05..1.0);
            sum += *p;
        }
        for p in row.iter_mut() {
            *p /= sum;
        }
        // make the row sum exactly 1.0 within strict tolerance
        let correction: f64 = 1.0 - row.iter().sum::<f64>();
        row[n - 1] += correction;
    }

    let reward: Vec<f64> = (0..n * num_joint)
        .map(|_| {
            let hit = rng.gen_bool(params.reward_density.clamp(0.0, 1.0));
            if params.zero_rewards || !hit {
                0.0
            } else {
                1.0
            }
        })
        .collect();

    TabularMdp::new(n, spec, params.gamma, transition, reward, vec![false; n])
}
