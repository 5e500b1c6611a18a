//! Training and run configuration.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Gradient-step rule.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Optimizer {
    /// Stochastic gradient with momentum.
    Sgd,
    /// Adam with betas (momentum, 0.999) and eps 1e-8.
    Adam,
}

/// Which regularizer keeps unseen-action values down.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ConservatismMode {
    /// Squared penalty pushing every unseen bin's Q toward 0.
    Paper,
    /// Cross-entropy between a softmax over Q-values and the dataset bin.
    Softmax,
    /// Regularizer disabled.
    None,
}

/// Hyperparameters of the offline Q-learning loop.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub gamma: f64,
    pub alpha: f64,
    pub window_w: usize,
    pub use_mc_max: bool,
    pub use_n_step: bool,
    pub ema_rate: f64,
    pub optimizer: Optimizer,
    pub learning_rate: f64,
    pub momentum: f64,
    pub batch_size: usize,
    pub grad_steps: usize,
    pub seed: u64,
    pub conservatism_mode: ConservatismMode,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            gamma: 0.98,
            alpha: 1.0,
            window_w: 1,
            use_mc_max: true,
            use_n_step: true,
            ema_rate: 0.01,
            optimizer: Optimizer::Sgd,
            learning_rate: 1e-2,
            momentum: 0.9,
            batch_size: 64,
            grad_steps: 20_000,
            seed: 0,
            conservatism_mode: ConservatismMode::Paper,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return Err(Error::InvalidConfig(format!("gamma {} not in (0, 1]", self.gamma)));
        }
        if !(self.alpha >= 0.0) {
            return Err(Error::InvalidConfig(format!("alpha {} must be >= 0", self.alpha)));
        }
        if self.window_w == 0 {
            return Err(Error::InvalidConfig("window_w must be >= 1".into()));
        }
        if !(self.ema_rate > 0.0 && self.ema_rate <= 1.0) {
            return Err(Error::InvalidConfig(format!(
                "ema_rate {} not in (0, 1]",
                self.ema_rate
            )));
        }
        if !(self.learning_rate > 0.0) {
            return Err(Error::InvalidConfig("learning_rate must be > 0".into()));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::InvalidConfig(format!(
                "momentum {} not in [0, 1)",
                self.momentum
            )));
        }
        if self.batch_size == 0 {
            return Err(Error::InvalidConfig("batch_size must be >= 1".into()));
        }
        Ok(())
    }
}

/// Shape of the sequence Q-model (everything except the action spec and
/// observation width, which come from the dataset).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelConfig {
    pub width: usize,
    pub blocks: usize,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig { width: 32, blocks: 2 }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        if self.width == 0 {
            return Err(Error::InvalidConfig("model width must be >= 1".into()));
        }
        Ok(())
    }
}

/// Grid-pick environment parameters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EnvConfig {
    pub grid_size: usize,
    pub horizon: usize,
}

impl Default for EnvConfig {
    fn default() -> Self {
        EnvConfig { grid_size: 5, horizon: 10 }
    }
}

impl EnvConfig {
    pub fn validate(&self) -> Result<()> {
        if self.grid_size == 0 || self.horizon == 0 {
            return Err(Error::InvalidConfig(
                "grid_size and horizon must be >= 1".into(),
            ));
        }
        Ok(())
    }
}

/// Dataset-generation parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DataConfig {
    pub episodes: usize,
    pub demo_fraction: f64,
    pub noise: f64,
    pub seed: u64,
    pub filter_successes: bool,
}

impl Default for DataConfig {
    fn default() -> Self {
        DataConfig {
            episodes: 500,
            demo_fraction: 0.08,
            noise: 0.3,
            seed: 0,
            filter_successes: false,
        }
    }
}

/// Evaluation / logging cadence of the training harness.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct HarnessConfig {
    pub eval_every: usize,
    pub eval_episodes: usize,
    pub metrics_every: usize,
}

impl Default for HarnessConfig {
    fn default() -> Self {
        HarnessConfig {
            eval_every: 1000,
            eval_episodes: 200,
            metrics_every: 100,
        }
    }
}

/// Full run configuration as loaded from a TOML document. Every field is
/// optional; unknown keys are rejected.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub train: TrainConfig,
    pub model: ModelConfig,
    pub env: EnvConfig,
    pub data: DataConfig,
    pub harness: HarnessConfig,
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: RunConfig =
            toml::from_str(text).map_err(|e| Error::InvalidConfig(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        self.train.validate()?;
        self.model.validate()?;
        self.env.validate()?;
        if !(self.data.demo_fraction > 0.0 && self.data.demo_fraction <= 1.0) {
            return Err(Error::InvalidConfig(format!(
                "demo_fraction {} not in (0, 1]",
                self.data.demo_fraction
            )));
        }
        if !(0.0..=1.0).contains(&self.data.noise) {
            return Err(Error::InvalidConfig(format!(
                "noise {} not in [0, 1]",
                self.data.noise
            )));
        }
        Ok(())
    }
}
