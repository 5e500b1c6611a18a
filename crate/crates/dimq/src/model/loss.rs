//! Per-dimension TD losses with conservative regularization, Monte-Carlo
//! maximization, and n-step bootstrapping. Targets always come from the
//! (frozen) target parameter vector; no gradient flows through them.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

use crate::config::{ConservatismMode, TrainConfig};
use crate::data::Sample;
use crate::error::{Error, Result};
use crate::model::net::{SeqQModel, SeqQModelView};
use crate::model::params::ParamVector;
use crate::model::tape::Tape;

/// Loss pieces and Q statistics for one sample (summed over dimensions).
#[derive(Debug, Clone, Copy, Default)]
pub struct LossStats {
    pub loss: f64,
    pub td: f64,
    pub reg: f64,
    pub q_dataset_sum: f64,
    pub q_dataset_count: usize,
    pub q_unseen_sum: f64,
    pub q_unseen_count: usize,
}

impl LossStats {
    pub fn accumulate(&mut self, other: &LossStats) {
        self.loss += other.loss;
        self.td += other.td;
        self.reg += other.reg;
        self.q_dataset_sum += other.q_dataset_sum;
        self.q_dataset_count += other.q_dataset_count;
        self.q_unseen_sum += other.q_unseen_sum;
        self.q_unseen_count += other.q_unseen_count;
    }
}

fn max_q(values: &[f64]) -> f64 {
    values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
}

fn mc_for(sample: &Sample, cfg: &TrainConfig) -> Result<Option<f64>> {
    if !cfg.use_mc_max {
        return Ok(None);
    }
    sample.mc_return.map(Some).ok_or(Error::MissingMcReturn)
}

fn next_state_max(target: &SeqQModelView, sample: &Sample, dim: usize) -> Result<f64> {
    let window = sample
        .next_window
        .as_ref()
        .ok_or_else(|| Error::InvalidEpisode("non-done sample lacks a next window".into()))?;
    let prefix: &[u16] = match &sample.next_action {
        Some(a) => a,
        None if dim == 0 => &[],
        None => {
            return Err(Error::InvalidEpisode(
                "non-done sample lacks the next action".into(),
            ))
        }
    };
    Ok(max_q(&target.forward_dim(
        window,
        &sample.next_pad,
        prefix,
        dim,
    )?))
}

/// Shared bootstrap for every dimension of the step: reward plus the
/// discounted maximum over the *last* dimension of the next time step,
/// conditioned on the next step's dataset prefix. MC-max applies on top.
pub fn n_step_target(target: &SeqQModelView, sample: &Sample, cfg: &TrainConfig) -> Result<f64> {
    let d = target.shape.num_dims();
    let bootstrap = if sample.done {
        0.0
    } else {
        next_state_max(target, sample, d - 1)?
    };
    let mut t = sample.reward + cfg.gamma * bootstrap;
    if let Some(mc) = mc_for(sample, cfg)? {
        t = t.max(mc);
    }
    Ok(t)
}

/// Q-targets for all dimensions of one sample.
///
/// 1-step mode chains within the time step: dimension i bootstraps from the
/// maximum over dimension i+1 under the dataset prefix (discount 1.0), and
/// the last dimension bootstraps from the first dimension of the next
/// state with discount gamma. n-step mode gives all dimensions the shared
/// bootstrap from [`n_step_target`].
pub fn per_dim_targets(target: &SeqQModelView, sample: &Sample, cfg: &TrainConfig) -> Result<Vec<f64>> {
    let d = target.shape.num_dims();
    if cfg.use_n_step {
        return Ok(vec![n_step_target(target, sample, cfg)?; d]);
    }
    let mc = mc_for(sample, cfg)?;
    let mut tape = Tape::new(target.params);
    let heads = target.forward_all(&mut tape, &sample.window, &sample.pad, &sample.action)?;
    let mut targets = Vec::with_capacity(d);
    for i in 0..d {
        let mut t = if i + 1 < d {
            max_q(&tape.value(heads[i + 1].q).data)
        } else {
            let bootstrap = if sample.done {
                0.0
            } else {
                next_state_max(target, sample, 0)?
            };
            sample.reward + cfg.gamma * bootstrap
        };
        if let Some(mc) = mc {
            t = t.max(mc);
        }
        targets.push(t);
    }
    Ok(targets)
}

fn loss_impl(
    model: &SeqQModel,
    sample: &Sample,
    targets: &[f64],
    cfg: &TrainConfig,
    mut grad: Option<&mut [f64]>,
) -> Result<LossStats> {
    let d = model.shape.num_dims();
    debug_assert_eq!(targets.len(), d);
    let mut tape = Tape::new(&model.params);
    let heads = model
        .view()
        .forward_all(&mut tape, &sample.window, &sample.pad, &sample.action)?;
    let mut stats = LossStats::default();
    let mut seeds = Vec::with_capacity(d);
    for i in 0..d {
        let q = &tape.value(heads[i].q).data;
        let n = q.len();
        let a = sample.action[i] as usize;
        let mut seed = vec![0.0; n];

        let diff = q[a] - targets[i];
        stats.td += 0.5 * diff * diff;
        seed[a] += diff;

        match cfg.conservatism_mode {
            ConservatismMode::Paper => {
                let scale = cfg.alpha / (n as f64 - 1.0);
                let mut reg = 0.0;
                for (b, &qb) in q.iter().enumerate() {
                    if b != a {
                        reg += qb * qb;
                        seed[b] += scale * qb;
                    }
                }
                stats.reg += 0.5 * scale * reg;
            }
            ConservatismMode::Softmax => {
                let m = max_q(q);
                let exps: Vec<f64> = q.iter().map(|&v| (v - m).exp()).collect();
                let z: f64 = exps.iter().sum();
                stats.reg += cfg.alpha * (z.ln() - (q[a] - m));
                for (b, &e) in exps.iter().enumerate() {
                    let p = e / z;
                    seed[b] += cfg.alpha * (p - if b == a { 1.0 } else { 0.0 });
                }
            }
            ConservatismMode::None => {}
        }

        stats.q_dataset_sum += q[a];
        stats.q_dataset_count += 1;
        stats.q_unseen_sum += q.iter().sum::<f64>() - q[a];
        stats.q_unseen_count += n - 1;
        seeds.push((heads[i].q, seed));
    }
    stats.loss = stats.td + stats.reg;
    if let Some(grad) = grad.as_deref_mut() {
        tape.backward(&seeds, grad);
    }
    Ok(stats)
}

/// Loss only (used by finite differences and monitoring).
pub fn sample_loss(model: &SeqQModel, sample: &Sample, targets: &[f64], cfg: &TrainConfig) -> Result<LossStats> {
    loss_impl(model, sample, targets, cfg, None)
}

/// Loss plus parameter gradient accumulated into `grad` (flat, same layout
/// as the parameter vector).
pub fn sample_loss_grad(
    model: &SeqQModel,
    sample: &Sample,
    targets: &[f64],
    cfg: &TrainConfig,
    grad: &mut [f64],
) -> Result<LossStats> {
    loss_impl(model, sample, targets, cfg, Some(grad))
}

/// Behavior-cloning loss: per-dimension cross-entropy between a softmax
/// over the raw logits (sigmoid bypassed) and the dataset bin.
pub fn bc_loss_grad(model: &SeqQModel, sample: &Sample, grad: Option<&mut [f64]>) -> Result<f64> {
    let d = model.shape.num_dims();
    let mut tape = Tape::new(&model.params);
    let heads = model
        .view()
        .forward_all(&mut tape, &sample.window, &sample.pad, &sample.action)?;
    let mut loss = 0.0;
    let mut seeds = Vec::with_capacity(d);
    for i in 0..d {
        let logits = &tape.value(heads[i].logits).data;
        let a = sample.action[i] as usize;
        let m = max_q(logits);
        let exps: Vec<f64> = logits.iter().map(|&v| (v - m).exp()).collect();
        let z: f64 = exps.iter().sum();
        loss += z.ln() - (logits[a] - m);
        let seed: Vec<f64> = exps
            .iter()
            .enumerate()
            .map(|(b, &e)| e / z - if b == a { 1.0 } else { 0.0 })
            .collect();
        seeds.push((heads[i].logits, seed));
    }
    if let Some(grad) = grad {
        tape.backward(&seeds, grad);
    }
    Ok(loss)
}

/// Compares the analytic gradient of the per-dimension loss against
/// central finite differences on a seeded subset of at least
/// `min(subset, #params)` parameters; returns the maximum relative error.
pub fn grad_check(
    model: &SeqQModel,
    target_params: &ParamVector,
    sample: &Sample,
    cfg: &TrainConfig,
    eps: f64,
    subset: Option<usize>,
    seed: u64,
) -> Result<f64> {
    if !(1e-6..=1e-3).contains(&eps) {
        return Err(Error::InvalidConfig(format!(
            "grad_check eps {eps} outside [1e-6, 1e-3]"
        )));
    }
    let targets = per_dim_targets(&model.with_params(target_params), sample, cfg)?;
    let mut analytic = vec![0.0; model.params.len()];
    sample_loss_grad(model, sample, &targets, cfg, &mut analytic)?;

    let total = model.params.len();
    let indices: Vec<usize> = match subset {
        Some(k) if k < total => {
            let mut rng = ChaCha20Rng::seed_from_u64(seed);
            let mut all: Vec<usize> = (0..total).collect();
            all.shuffle(&mut rng);
            all.truncate(k);
            all
        }
        _ => (0..total).collect(),
    };

    let mut probe = model.clone();
    let mut worst = 0.0f64;
    for &k in &indices {
        let original = probe.params.data[k];
        let mut central = |h: f64| -> Result<f64> {
            probe.params.data[k] = original + h;
            let plus = sample_loss(&probe, sample, &targets, cfg)?.loss;
            probe.params.data[k] = original - h;
            let minus = sample_loss(&probe, sample, &targets, cfg)?.loss;
            probe.params.data[k] = original;
            Ok((plus - minus) / (2.0 * h))
        };
        // Richardson-extrapolated central difference (steps eps and 2*eps):
        // truncation drops to O(eps^4) without shrinking the step that
        // dominates f64 roundoff.
        let fine = central(eps)?;
        let coarse = central(2.0 * eps)?;
        let fd = (4.0 * fine - coarse) / 3.0;
        let rel = (analytic[k] - fd).abs() / (analytic[k].abs() + fd.abs()).max(1e-8);
        worst = worst.max(rel);
    }
    Ok(worst)
}
