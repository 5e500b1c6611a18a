//! Behavior-cloning baseline: the same architecture trained with
//! per-dimension cross-entropy on successful episodes only.

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

use crate::data::sample_batch;
use crate::episode::OfflineDataset;
use crate::error::{Error, Result};
use crate::model::{bc_loss_grad, ModelShape, SeqQModel};
use crate::train::optim::Optim;
use crate::train::trainer::TrainOptions;

const STREAM_BC: u64 = 0xbc;

/// Restricts a dataset to its reward-1 episodes.
pub fn successes_only(dataset: &OfflineDataset) -> Result<OfflineDataset> {
    let episodes: Vec<_> = dataset
        .episodes
        .iter()
        .filter(|e| e.is_success())
        .cloned()
        .collect();
    if episodes.is_empty() {
        return Err(Error::NoSuccessfulEpisodes);
    }
    let mut metadata = dataset.metadata.clone();
    metadata.remove(crate::episode::ORIGINS_KEY);
    metadata.insert("successes_only".to_string(), "true".to_string());
    Ok(OfflineDataset {
        episodes,
        action_spec: dataset.action_spec.clone(),
        gamma: dataset.gamma,
        obs_dim: dataset.obs_dim,
        metadata,
    })
}

/// Trains a BC policy on the dataset's successful episodes; greedy decode
/// defines its action choice (argmax over logits equals argmax over the
/// sigmoid values, so the usual decoder applies unchanged).
pub fn bc_baseline_train(dataset: &OfflineDataset, opts: &TrainOptions) -> Result<SeqQModel> {
    let cfg = &opts.train;
    cfg.validate()?;
    let demos = successes_only(dataset)?;
    let shape = ModelShape::new(&demos.action_spec, demos.obs_dim, cfg.window_w, &opts.model)?;
    let mut model = SeqQModel::init(shape, cfg.seed);
    let mut optim = Optim::new(cfg, model.params.len());
    let mut grad = vec![0.0; model.params.len()];
    let mut rng = ChaCha20Rng::seed_from_u64(cfg.seed);
    rng.set_stream(STREAM_BC);

    for step in 1..=cfg.grad_steps {
        let batch = sample_batch(&demos, cfg.batch_size, cfg.window_w, &mut rng)?;
        grad.fill(0.0);
        let mut loss = 0.0;
        for sample in &batch.samples {
            loss += bc_loss_grad(&model, sample, Some(&mut grad))?;
        }
        if !loss.is_finite() {
            return Err(Error::NanLoss {
                step,
                indices: Vec::new(),
            });
        }
        optim.step(&mut model.params.data, &grad, 1.0 / cfg.batch_size as f64);
    }
    Ok(model)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::{EnvConfig, HarnessConfig, ModelConfig, TrainConfig};
    use crate::data::{generate_mixed_dataset, NoiseSpec};

    #[test]
    fn successes_only_counts() {
        let ds = generate_mixed_dataset(
            EnvConfig::default(),
            40,
            0.25,
            NoiseSpec::default(),
            0.98,
            2,
        )
        .unwrap();
        let demos = successes_only(&ds).unwrap();
        assert_eq!(demos.episodes.len(), ds.num_successes());
        assert!(demos.episodes.iter().all(|e| e.is_success()));
    }

    #[test]
    fn no_successes_is_an_error() {
        let ds = generate_mixed_dataset(
            EnvConfig::default(),
            4,
            1.0,
            NoiseSpec::default(),
            0.98,
            2,
        )
        .unwrap();
        let mut failed = ds.clone();
        for ep in &mut failed.episodes {
            let t = ep.len();
            ep.rewards[t - 1] = 0.0;
            ep.mc_returns = Some(vec![0.0; t]);
        }
        let opts = TrainOptions::default();
        assert!(matches!(
            bc_baseline_train(&failed, &opts),
            Err(Error::NoSuccessfulEpisodes)
        ));
    }

    #[test]
    fn bc_fits_a_handful_of_demos() {
        let ds = generate_mixed_dataset(
            EnvConfig::default(),
            10,
            1.0,
            NoiseSpec::default(),
            0.98,
            6,
        )
        .unwrap();
        let opts = TrainOptions {
            train: TrainConfig {
                grad_steps: 300,
                batch_size: 16,
                learning_rate: 0.05,
                seed: 1,
                ..TrainConfig::default()
            },
            model: ModelConfig { width: 16, blocks: 1 },
            env: EnvConfig::default(),
            harness: HarnessConfig::default(),
        };
        let model = bc_baseline_train(&ds, &opts).unwrap();
        // the cloned policy should reproduce most dataset actions
        let mut hits = 0usize;
        let mut total = 0usize;
        for ep in &ds.episodes {
            for (t, action) in ep.actions.iter().enumerate() {
                let window = vec![ep.observations[t].clone()];
                let decoded = model.greedy_decode(&window, &[false]).unwrap();
                for (a, b) in decoded.iter().zip(action) {
                    total += 1;
                    hits += (a == b) as usize;
                }
            }
        }
        assert!(
            hits as f64 / total as f64 > 0.8,
            "per-dimension accuracy {hits}/{total}"
        );
    }
}
