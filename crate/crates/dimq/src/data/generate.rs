//! Mixed-quality dataset generation: scripted demonstrations plus noisy
//! replays, mirroring a demo-heavy/replay-heavy offline data regime.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

use crate::config::EnvConfig;
use crate::env::{grid_pick_action_spec, scripted_expert, GridPickEnv, GridPickState, OBS_DIM};
use crate::episode::{compute_mc_returns, Episode, OfflineDataset, ORIGINS_KEY};
use crate::error::{Error, Result};

/// Replay perturbation: each action dimension is independently replaced by
/// a uniform random bin with this probability.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseSpec {
    pub per_dim_flip_prob: f64,
}

impl Default for NoiseSpec {
    fn default() -> Self {
        NoiseSpec {
            per_dim_flip_prob: 0.3,
        }
    }
}

impl NoiseSpec {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.per_dim_flip_prob) {
            return Err(Error::InvalidConfig(format!(
                "per_dim_flip_prob {} not in [0, 1]",
                self.per_dim_flip_prob
            )));
        }
        Ok(())
    }
}

struct Rollout {
    start: GridPickState,
    episode: Episode,
}

fn run_actions(env: &mut GridPickEnv, start: GridPickState, actions: &[Vec<u16>]) -> Episode {
    let mut observations = vec![env.reset_to(start)];
    let mut taken = Vec::new();
    let mut rewards = Vec::new();
    for action in actions {
        let (obs, reward, done) = env
            .step(action)
            .expect("actions never outlive the episode");
        taken.push(action.clone());
        rewards.push(reward);
        if done {
            break;
        }
        observations.push(obs);
    }
    observations.truncate(taken.len());
    Episode {
        task_id: 0,
        observations,
        actions: taken,
        rewards,
        mc_returns: None,
    }
}

fn run_expert(env: &mut GridPickEnv, start: GridPickState) -> Rollout {
    let mut observations = vec![env.reset_to(start)];
    let mut actions = Vec::new();
    let mut rewards = Vec::new();
    while !env.is_done() {
        let action = scripted_expert(&env.state()).to_vec();
        let (obs, reward, done) = env.step(&action).expect("stepping a live episode");
        actions.push(action);
        rewards.push(reward);
        if !done {
            observations.push(obs);
        }
    }
    Rollout {
        start,
        episode: Episode {
            task_id: 0,
            observations,
            actions,
            rewards,
            mc_returns: None,
        },
    }
}

/// Builds `num_episodes` episodes: `demo_fraction` of them scripted-expert
/// demonstrations, the rest demonstrations replayed with per-dimension bin
/// flips and re-simulated so rewards reflect the perturbed actions.
/// Deterministic per seed; per-episode RNG streams allow reproduction of
/// any single episode.
pub fn generate_mixed_dataset(
    env_config: EnvConfig,
    num_episodes: usize,
    demo_fraction: f64,
    noise: NoiseSpec,
    gamma: f64,
    seed: u64,
) -> Result<OfflineDataset> {
    if !(demo_fraction > 0.0 && demo_fraction <= 1.0) {
        return Err(Error::InvalidConfig(format!(
            "demo_fraction {demo_fraction} not in (0, 1]"
        )));
    }
    noise.validate()?;
    if num_episodes == 0 {
        return Err(Error::InvalidConfig("num_episodes must be >= 1".into()));
    }
    let mut env = GridPickEnv::new(env_config)?;
    let num_demos = ((num_episodes as f64 * demo_fraction).round() as usize)
        .clamp(1, num_episodes);
    let spec = grid_pick_action_spec();

    // Demonstrations start from the staging lane (agent on the left edge),
    // the way a fleet would collect them; evaluation starts are uniform.
    // The expert never moves left from there, so that direction has to be
    // learned from the noisy replays.
    let mut demos = Vec::with_capacity(num_demos);
    for i in 0..num_demos {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        rng.set_stream(i as u64);
        let g = env_config.grid_size;
        let start = GridPickState {
            agent: (0, rng.gen_range(0..g)),
            object: (rng.gen_range(0..g), rng.gen_range(0..g)),
            holding: false,
            steps: 0,
        };
        demos.push(run_expert(&mut env, start));
    }

    let mut episodes: Vec<Episode> = demos.iter().map(|r| r.episode.clone()).collect();
    let mut origins = String::from_utf8(vec![b'd'; num_demos]).unwrap();

    for j in 0..num_episodes - num_demos {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        rng.set_stream((num_demos + j) as u64);
        let source = &demos[j % num_demos];
        let perturbed: Vec<Vec<u16>> = source
            .episode
            .actions
            .iter()
            .map(|action| {
                action
                    .iter()
                    .enumerate()
                    .map(|(dim, &bin)| {
                        if rng.gen_bool(noise.per_dim_flip_prob) {
                            rng.gen_range(0..spec.bins[dim])
                        } else {
                            bin
                        }
                    })
                    .collect()
            })
            .collect();
        episodes.push(run_actions(&mut env, source.start, &perturbed));
        origins.push('r');
    }

    let episodes = episodes
        .into_iter()
        .map(|ep| compute_mc_returns(ep, gamma))
        .collect();

    let mut metadata = BTreeMap::new();
    metadata.insert("generator".to_string(), "grid-pick-mixed".to_string());
    metadata.insert("seed".to_string(), seed.to_string());
    metadata.insert(
        "noise".to_string(),
        noise.per_dim_flip_prob.to_string(),
    );
    metadata.insert("demo_fraction".to_string(), demo_fraction.to_string());
    metadata.insert("grid_size".to_string(), env_config.grid_size.to_string());
    metadata.insert("horizon".to_string(), env_config.horizon.to_string());
    metadata.insert(ORIGINS_KEY.to_string(), origins);

    let dataset = OfflineDataset {
        episodes,
        action_spec: spec,
        gamma,
        obs_dim: OBS_DIM,
        metadata,
    };
    dataset.validate()?;
    Ok(dataset)
}

/// Keeps every demonstration but drops replay episodes that ended in
/// success, so offline RL never sees more successes than imitation
/// learning would.
pub fn filter_successes(dataset: &OfflineDataset) -> Result<OfflineDataset> {
    let origins = dataset.origins().ok_or(Error::MissingOriginTags)?;
    let mut episodes = Vec::new();
    let mut kept_origins = String::new();
    for (ep, origin) in dataset.episodes.iter().zip(origins) {
        if origin == 'r' && ep.is_success() {
            continue;
        }
        episodes.push(ep.clone());
        kept_origins.push(origin);
    }
    let mut metadata = dataset.metadata.clone();
    metadata.insert(ORIGINS_KEY.to_string(), kept_origins);
    metadata.insert("filtered".to_string(), "true".to_string());
    Ok(OfflineDataset {
        episodes,
        action_spec: dataset.action_spec.clone(),
        gamma: dataset.gamma,
        obs_dim: dataset.obs_dim,
        metadata,
    })
}

/// Reassigns an episode to a different task, zeroing rewards and MC
/// returns; observations and actions are untouched.
pub fn relabel_episode(episode: &Episode, alternate_task_id: u32) -> Result<Episode> {
    if alternate_task_id == episode.task_id {
        return Err(Error::SameTaskRelabel {
            task: alternate_task_id,
        });
    }
    Ok(Episode {
        task_id: alternate_task_id,
        observations: episode.observations.clone(),
        actions: episode.actions.clone(),
        rewards: vec![0.0; episode.len()],
        mc_returns: Some(vec![0.0; episode.len()]),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_dataset(noise: f64, episodes: usize, demo_fraction: f64) -> OfflineDataset {
        generate_mixed_dataset(
            EnvConfig::default(),
            episodes,
            demo_fraction,
            NoiseSpec {
                per_dim_flip_prob: noise,
            },
            0.98,
            7,
        )
        .unwrap()
    }

    #[test]
    fn all_demo_dataset_is_all_success() {
        let ds = small_dataset(0.3, 20, 1.0);
        assert_eq!(ds.episodes.len(), 20);
        assert!(ds.episodes.iter().all(|e| e.is_success()));
        assert_eq!(ds.origins().unwrap(), vec!['d'; 20]);
    }

    #[test]
    fn zero_noise_replays_match_their_demos() {
        let ds = small_dataset(0.0, 30, 0.5);
        let demos = &ds.episodes[..15];
        for (j, replay) in ds.episodes[15..].iter().enumerate() {
            let source = &demos[j % 15];
            assert_eq!(replay.actions, source.actions);
            assert_eq!(replay.rewards, source.rewards);
        }
    }

    #[test]
    fn demo_count_and_replay_success_rate() {
        let ds = small_dataset(0.3, 500, 0.08);
        let origins = ds.origins().unwrap();
        assert_eq!(origins.iter().filter(|&&c| c == 'd').count(), 40);
        let replay_successes = ds
            .episodes
            .iter()
            .zip(&origins)
            .filter(|(e, &o)| o == 'r' && e.is_success())
            .count();
        let replays = 460;
        assert!(replay_successes < replays, "noisy replays cannot all succeed");
    }

    #[test]
    fn deterministic_per_seed() {
        let a = small_dataset(0.3, 50, 0.1);
        let b = small_dataset(0.3, 50, 0.1);
        assert_eq!(a, b);
    }

    #[test]
    fn filter_drops_exactly_successful_replays() {
        let ds = small_dataset(0.3, 200, 0.1);
        let origins = ds.origins().unwrap();
        let successful_replays = ds
            .episodes
            .iter()
            .zip(&origins)
            .filter(|(e, &o)| o == 'r' && e.is_success())
            .count();
        let filtered = filter_successes(&ds).unwrap();
        assert_eq!(filtered.episodes.len(), ds.episodes.len() - successful_replays);
        // all remaining successes are demos
        assert_eq!(filtered.num_successes(), 20);
        // idempotent on all-demo and all-failed datasets
        let demos_only = small_dataset(0.3, 10, 1.0);
        assert_eq!(filter_successes(&demos_only).unwrap().episodes.len(), 10);

        let mut untagged = ds.clone();
        untagged.metadata.remove(ORIGINS_KEY);
        assert!(matches!(
            filter_successes(&untagged),
            Err(Error::MissingOriginTags)
        ));
    }

    #[test]
    fn relabel_zeroes_rewards_and_returns() {
        let ds = small_dataset(0.0, 5, 1.0);
        let ep = &ds.episodes[0];
        assert!(ep.is_success());
        let relabeled = relabel_episode(ep, 3).unwrap();
        assert_eq!(relabeled.task_id, 3);
        assert!(relabeled.rewards.iter().all(|&r| r == 0.0));
        assert!(relabeled.mc_returns.unwrap().iter().all(|&m| m == 0.0));
        assert_eq!(relabeled.observations, ep.observations);
        assert_eq!(relabeled.actions, ep.actions);
        assert!(matches!(
            relabel_episode(ep, ep.task_id),
            Err(Error::SameTaskRelabel { .. })
        ));
    }
}
