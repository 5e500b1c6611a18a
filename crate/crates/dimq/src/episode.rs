//! Episodes and offline datasets.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::action::ActionSpec;
use crate::error::{Error, Result};

/// Metadata key holding one origin char per episode ('d' demo, 'r' replay).
pub const ORIGINS_KEY: &str = "origins";

/// One trajectory: per-step observations, tokenized actions, rewards, and
/// (optionally) Monte-Carlo returns-to-go.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Episode {
    pub task_id: u32,
    pub observations: Vec<Vec<f64>>,
    pub actions: Vec<Vec<u16>>,
    pub rewards: Vec<f64>,
    #[serde(default)]
    pub mc_returns: Option<Vec<f64>>,
}

impl Episode {
    pub fn len(&self) -> usize {
        self.rewards.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rewards.is_empty()
    }

    /// Terminal reward (the only step allowed to be nonzero).
    pub fn final_reward(&self) -> f64 {
        *self.rewards.last().unwrap_or(&0.0)
    }

    pub fn is_success(&self) -> bool {
        self.final_reward() == 1.0
    }

    /// Structural checks: equal lengths, sparse binary reward, and the MC
    /// recursion when returns are present.
    pub fn validate(&self, gamma: f64) -> Result<()> {
        let t = self.rewards.len();
        if t == 0 {
            return Err(Error::InvalidEpisode("episode has no steps".into()));
        }
        if self.observations.len() != t || self.actions.len() != t {
            return Err(Error::InvalidEpisode(format!(
                "length mismatch: {} observations, {} actions, {} rewards",
                self.observations.len(),
                self.actions.len(),
                t
            )));
        }
        for (i, &r) in self.rewards.iter().enumerate() {
            if i + 1 < t && r != 0.0 {
                return Err(Error::InvalidEpisode(format!(
                    "nonzero reward {r} at non-terminal step {i}"
                )));
            }
        }
        let last = self.rewards[t - 1];
        if last != 0.0 && last != 1.0 {
            return Err(Error::InvalidEpisode(format!(
                "terminal reward {last} not in {{0, 1}}"
            )));
        }
        if let Some(mc) = &self.mc_returns {
            if mc.len() != t {
                return Err(Error::InvalidEpisode(format!(
                    "mc_returns has {} entries, expected {t}",
                    mc.len()
                )));
            }
            let mut expect = 0.0;
            for i in (0..t).rev() {
                expect = self.rewards[i] + gamma * expect;
                if (mc[i] - expect).abs() > 1e-9 {
                    return Err(Error::InvalidEpisode(format!(
                        "mc_returns[{i}] = {} does not satisfy the return recursion (expected {expect})",
                        mc[i]
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Discounted returns-to-go of an arbitrary reward sequence.
pub fn discounted_returns(rewards: &[f64], gamma: f64) -> Vec<f64> {
    let mut mc = vec![0.0; rewards.len()];
    let mut acc = 0.0;
    for i in (0..rewards.len()).rev() {
        acc = rewards[i] + gamma * acc;
        mc[i] = acc;
    }
    mc
}

/// Fills `mc_returns` with discounted returns-to-go; other fields unchanged.
pub fn compute_mc_returns(mut episode: Episode, gamma: f64) -> Episode {
    episode.mc_returns = Some(discounted_returns(&episode.rewards, gamma));
    episode
}

/// A collection of episodes sharing one action space and observation layout.
#[derive(Debug, Clone, PartialEq)]
pub struct OfflineDataset {
    pub episodes: Vec<Episode>,
    pub action_spec: ActionSpec,
    pub gamma: f64,
    pub obs_dim: usize,
    pub metadata: BTreeMap<String, String>,
}

impl OfflineDataset {
    pub fn validate(&self) -> Result<()> {
        self.action_spec.validate()?;
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return Err(Error::InvalidDataset(format!(
                "gamma {} not in (0, 1]",
                self.gamma
            )));
        }
        if self.obs_dim == 0 {
            return Err(Error::InvalidDataset("obs_dim must be >= 1".into()));
        }
        for (idx, ep) in self.episodes.iter().enumerate() {
            ep.validate(self.gamma)
                .map_err(|e| Error::InvalidDataset(format!("episode {idx}: {e}")))?;
            for obs in &ep.observations {
                if obs.len() != self.obs_dim {
                    return Err(Error::InvalidDataset(format!(
                        "episode {idx}: observation has {} components, dataset obs_dim is {}",
                        obs.len(),
                        self.obs_dim
                    )));
                }
                if obs.iter().any(|x| !x.is_finite()) {
                    return Err(Error::InvalidDataset(format!(
                        "episode {idx}: non-finite observation component"
                    )));
                }
            }
            for action in &ep.actions {
                self.action_spec
                    .check_action(action)
                    .map_err(|e| Error::InvalidDataset(format!("episode {idx}: {e}")))?;
            }
        }
        if let Some(origins) = self.metadata.get(ORIGINS_KEY) {
            if origins.chars().count() != self.episodes.len()
                || origins.chars().any(|c| c != 'd' && c != 'r')
            {
                return Err(Error::InvalidDataset(format!(
                    "origin tags {origins:?} do not match {} episodes",
                    self.episodes.len()
                )));
            }
        }
        Ok(())
    }

    pub fn num_transitions(&self) -> usize {
        self.episodes.iter().map(Episode::len).sum()
    }

    pub fn num_successes(&self) -> usize {
        self.episodes.iter().filter(|e| e.is_success()).count()
    }

    /// Per-episode origin tags, when the generator recorded them.
    pub fn origins(&self) -> Option<Vec<char>> {
        let tags: Vec<char> = self.metadata.get(ORIGINS_KEY)?.chars().collect();
        (tags.len() == self.episodes.len()).then_some(tags)
    }
}
