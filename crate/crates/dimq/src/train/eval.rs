//! Policy evaluation by greedy rollout.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rayon::prelude::*;

use crate::config::EnvConfig;
use crate::env::GridPickEnv;
use crate::error::{Error, Result};
use crate::model::SeqQModel;

/// Rollout outcome over a batch of evaluation episodes.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub success_rate: f64,
    pub episodes: usize,
    pub mean_return: f64,
}

/// Maintains the last `w` observations as the model's state window.
pub struct WindowBuffer {
    w: usize,
    obs_dim: usize,
    history: Vec<Vec<f64>>,
}

impl WindowBuffer {
    pub fn new(w: usize, obs_dim: usize) -> WindowBuffer {
        WindowBuffer {
            w,
            obs_dim,
            history: Vec::new(),
        }
    }

    pub fn reset(&mut self, obs: Vec<f64>) {
        self.history.clear();
        self.history.push(obs);
    }

    pub fn push(&mut self, obs: Vec<f64>) {
        self.history.push(obs);
    }

    /// Zero-padded window and pad flags, newest observation last.
    pub fn window(&self) -> (Vec<Vec<f64>>, Vec<bool>) {
        let mut window = Vec::with_capacity(self.w);
        let mut pad = Vec::with_capacity(self.w);
        let have = self.history.len();
        for k in 0..self.w {
            if k + have < self.w {
                window.push(vec![0.0; self.obs_dim]);
                pad.push(true);
            } else {
                let idx = have - (self.w - k);
                window.push(self.history[idx].clone());
                pad.push(false);
            }
        }
        (window, pad)
    }
}

/// Rolls one greedy episode; returns the total reward.
pub fn rollout_greedy(model: &SeqQModel, env: &mut GridPickEnv, rng: &mut impl Rng) -> Result<f64> {
    rollout_greedy_from(model, env, rng, StartDist::Uniform)
}

fn rollout_greedy_from(
    model: &SeqQModel,
    env: &mut GridPickEnv,
    rng: &mut impl Rng,
    starts: StartDist,
) -> Result<f64> {
    let mut buffer = WindowBuffer::new(model.shape.window, model.shape.obs_dim);
    let first = match starts {
        StartDist::Uniform => env.reset(rng),
        StartDist::Staged => env.reset_staged(rng),
    };
    buffer.reset(first);
    let mut total = 0.0;
    while !env.is_done() {
        let (window, pad) = buffer.window();
        let action = model.greedy_decode(&window, &pad)?;
        let (obs, reward, done) = env.step(&action)?;
        total += reward;
        if !done {
            buffer.push(obs);
        }
    }
    Ok(total)
}

/// Which start distribution evaluation rollouts draw from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StartDist {
    /// Agent and object cells independent and uniform (the task).
    Uniform,
    /// The demonstration-collection distribution (agent in the staging
    /// lane); measures how well a policy reproduces the demo regime.
    Staged,
}

/// Greedy-decode rollouts over `num_episodes` independent starts; success
/// is a terminal reward of 1.0. Deterministic per seed (episodes use
/// derived RNG streams, so the count can be parallelized without changing
/// results).
pub fn evaluate_from(
    model: &SeqQModel,
    env_config: EnvConfig,
    num_episodes: usize,
    seed: u64,
    starts: StartDist,
) -> Result<EvalReport> {
    if num_episodes == 0 {
        return Err(Error::InvalidConfig(
            "evaluation needs at least one episode".into(),
        ));
    }
    let returns: Vec<f64> = (0..num_episodes)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha20Rng::seed_from_u64(seed);
            rng.set_stream(i as u64);
            let mut env = GridPickEnv::new(env_config)?;
            rollout_greedy_from(model, &mut env, &mut rng, starts)
        })
        .collect::<Result<Vec<f64>>>()?;
    let successes = returns.iter().filter(|&&r| r == 1.0).count();
    Ok(EvalReport {
        success_rate: successes as f64 / num_episodes as f64,
        episodes: num_episodes,
        mean_return: returns.iter().sum::<f64>() / num_episodes as f64,
    })
}

/// Uniform-start evaluation (the task's success metric).
pub fn evaluate(
    model: &SeqQModel,
    env_config: EnvConfig,
    num_episodes: usize,
    seed: u64,
) -> Result<EvalReport> {
    evaluate_from(model, env_config, num_episodes, seed, StartDist::Uniform)
}
