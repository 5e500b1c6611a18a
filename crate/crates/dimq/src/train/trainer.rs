//! The offline training loop: sample a batch, accumulate per-dimension
//! losses over every action dimension of every sample, take one momentum
//! SGD step, and track the target network by EMA.

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

use crate::config::{EnvConfig, HarnessConfig, ModelConfig, TrainConfig};
use crate::data::sample_batch;
use crate::episode::OfflineDataset;
use crate::error::{Error, Result};
use crate::model::{
    ema_update, per_dim_targets, sample_loss_grad, Checkpoint, LossStats, ModelShape, ParamVector,
    SeqQModel,
};
use crate::train::eval::evaluate;
use crate::train::metrics::MetricsRow;
use crate::train::optim::Optim;

/// RNG stream ids, kept distinct so adding consumers never shifts others.
const STREAM_BATCH: u64 = 0x0b;
const STREAM_EVAL: u64 = 0xe0;

/// Everything a training run needs besides the dataset.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainOptions {
    pub train: TrainConfig,
    pub model: ModelConfig,
    pub env: EnvConfig,
    pub harness: HarnessConfig,
}

/// Mutable state of one training run.
#[derive(Debug, Clone)]
pub struct TrainState {
    pub model: SeqQModel,
    pub target: ParamVector,
    pub grad_step: usize,
    optim: Optim,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub state: TrainState,
    pub metrics: Vec<MetricsRow>,
    /// (grad step, success rate) at every evaluation point.
    pub eval_history: Vec<(usize, f64)>,
}

impl TrainOutcome {
    pub fn checkpoint(&self, config: &TrainConfig) -> Checkpoint {
        Checkpoint {
            config: config.clone(),
            model: self.state.model.clone(),
            target: self.state.target.clone(),
            grad_step: self.state.grad_step,
        }
    }

    pub fn final_success(&self) -> Option<f64> {
        self.eval_history.last().map(|&(_, s)| s)
    }
}

/// Trains on the dataset for `opts.train.grad_steps` steps. Deterministic:
/// identical (dataset, options) produce identical parameters and metrics.
pub fn train_offline(dataset: &OfflineDataset, opts: &TrainOptions) -> Result<TrainOutcome> {
    let cfg = &opts.train;
    cfg.validate()?;
    dataset.validate()?;
    if cfg.use_mc_max && dataset.episodes.iter().any(|e| e.mc_returns.is_none()) {
        return Err(Error::MissingMcReturn);
    }

    let shape = ModelShape::new(&dataset.action_spec, dataset.obs_dim, cfg.window_w, &opts.model)?;
    let model = SeqQModel::init(shape, cfg.seed);
    let target = model.params.clone();
    let mut state = TrainState {
        optim: Optim::new(cfg, model.params.len()),
        target,
        model,
        grad_step: 0,
    };

    let mut rng = ChaCha20Rng::seed_from_u64(cfg.seed);
    rng.set_stream(STREAM_BATCH);

    let mut metrics = Vec::new();
    let mut eval_history = Vec::new();
    let mut grad = vec![0.0; state.model.params.len()];

    for step in 1..=cfg.grad_steps {
        let batch = sample_batch(dataset, cfg.batch_size, cfg.window_w, &mut rng)?;
        grad.fill(0.0);
        let mut stats = LossStats::default();
        let mut bad: Vec<usize> = Vec::new();
        for (idx, sample) in batch.samples.iter().enumerate() {
            let targets =
                per_dim_targets(&state.model.with_params(&state.target), sample, cfg)?;
            let s = sample_loss_grad(&state.model, sample, &targets, cfg, &mut grad)?;
            if !s.loss.is_finite() {
                bad.push(idx);
            }
            stats.accumulate(&s);
        }
        if !bad.is_empty() || !stats.loss.is_finite() {
            return Err(Error::NanLoss { step, indices: bad });
        }

        let scale = 1.0 / cfg.batch_size as f64;
        state
            .optim
            .step(&mut state.model.params.data, &grad, scale);
        ema_update(&mut state.target, &state.model.params, cfg.ema_rate)?;
        state.grad_step = step;

        let do_eval = opts.harness.eval_every > 0 && step % opts.harness.eval_every == 0;
        let eval_success = if do_eval {
            // fixed benchmark start set across the whole run
            let report = evaluate(
                &state.model,
                opts.env,
                opts.harness.eval_episodes,
                cfg.seed ^ STREAM_EVAL,
            )?;
            eval_history.push((step, report.success_rate));
            Some(report.success_rate)
        } else {
            None
        };

        if do_eval || (opts.harness.metrics_every > 0 && step % opts.harness.metrics_every == 0) {
            let n = cfg.batch_size as f64;
            metrics.push(MetricsRow {
                step,
                loss_td: stats.td / n,
                loss_reg: stats.reg / n,
                mean_q_dataset: stats.q_dataset_sum / stats.q_dataset_count.max(1) as f64,
                mean_q_unseen: stats.q_unseen_sum / stats.q_unseen_count.max(1) as f64,
                eval_success,
            });
        }
    }

    Ok(TrainOutcome {
        state,
        metrics,
        eval_history,
    })
}
