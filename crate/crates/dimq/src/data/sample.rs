//! Uniform transition sampling with fixed-width state-history windows.

use rand::Rng;

use crate::episode::OfflineDataset;
use crate::error::{Error, Result};

/// One training transition. Windows hold exactly `w` observation slots,
/// zero-padded before the episode start with the padding flagged.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    /// Provenance for diagnostics: which (episode, timestep) this came from.
    pub episode: usize,
    pub t: usize,
    /// s_{t-w+1..t}; index w-1 is the current observation.
    pub window: Vec<Vec<f64>>,
    pub pad: Vec<bool>,
    pub action: Vec<u16>,
    /// s_{t-w+2..t+1}; None at the episode's final step.
    pub next_window: Option<Vec<Vec<f64>>>,
    pub next_pad: Vec<bool>,
    /// The next step's dataset action, for n-step bootstrapping.
    pub next_action: Option<Vec<u16>>,
    pub reward: f64,
    pub mc_return: Option<f64>,
    pub done: bool,
    pub task_id: u32,
}

#[derive(Debug, Clone)]
pub struct Batch {
    pub samples: Vec<Sample>,
}

/// Extracts the window ending at step `t` of episode `ep`.
fn window_at(dataset: &OfflineDataset, ep: usize, t: isize, w: usize) -> (Vec<Vec<f64>>, Vec<bool>) {
    let obs = &dataset.episodes[ep].observations;
    let mut window = Vec::with_capacity(w);
    let mut pad = Vec::with_capacity(w);
    for k in 0..w as isize {
        let idx = t - (w as isize - 1) + k;
        if idx < 0 {
            window.push(vec![0.0; dataset.obs_dim]);
            pad.push(true);
        } else {
            window.push(obs[idx as usize].clone());
            pad.push(false);
        }
    }
    (window, pad)
}

/// Builds the sample for transition (episode, t).
pub fn make_sample(dataset: &OfflineDataset, ep: usize, t: usize, w: usize) -> Sample {
    let episode = &dataset.episodes[ep];
    let done = t + 1 == episode.len();
    let (window, pad) = window_at(dataset, ep, t as isize, w);
    let (next_window, next_pad) = if done {
        (None, vec![false; w])
    } else {
        let (nw, np) = window_at(dataset, ep, t as isize + 1, w);
        (Some(nw), np)
    };
    Sample {
        episode: ep,
        t,
        window,
        pad,
        action: episode.actions[t].clone(),
        next_window,
        next_pad,
        next_action: (!done).then(|| episode.actions[t + 1].clone()),
        reward: episode.rewards[t],
        mc_return: episode.mc_returns.as_ref().map(|mc| mc[t]),
        done,
        task_id: episode.task_id,
    }
}

/// Draws `batch_size` transitions uniformly over all (episode, timestep)
/// pairs, so episodes are weighted by their length.
pub fn sample_batch<R: Rng>(
    dataset: &OfflineDataset,
    batch_size: usize,
    window_w: usize,
    rng: &mut R,
) -> Result<Batch> {
    let total = dataset.num_transitions();
    if total == 0 {
        return Err(Error::InvalidDataset("dataset has no transitions".into()));
    }
    // episode boundaries for index -> (episode, t) lookup
    let mut bounds = Vec::with_capacity(dataset.episodes.len());
    let mut acc = 0usize;
    for ep in &dataset.episodes {
        acc += ep.len();
        bounds.push(acc);
    }
    let samples = (0..batch_size)
        .map(|_| {
            let idx = rng.gen_range(0..total);
            let ep = bounds.partition_point(|&end| end <= idx);
            let t = idx - if ep == 0 { 0 } else { bounds[ep - 1] };
            make_sample(dataset, ep, t, window_w)
        })
        .collect();
    Ok(Batch { samples })
}
