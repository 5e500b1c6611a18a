use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid action spec: {0}")]
    InvalidActionSpec(String),

    #[error("action dimension {dim} out of range (spec has {num_dims} dimensions)")]
    DimOutOfRange { dim: usize, num_dims: usize },

    #[error("bin {bin} out of range for dimension {dim} ({bins} bins)")]
    BinOutOfRange { dim: usize, bin: u16, bins: u16 },

    #[error("dimension {dim} is discrete; continuous quantization does not apply")]
    NotContinuous { dim: usize },

    #[error("non-finite value {value} for dimension {dim}")]
    NonFiniteValue { dim: usize, value: f64 },

    #[error("invalid episode: {0}")]
    InvalidEpisode(String),

    #[error("invalid dataset: {0}")]
    InvalidDataset(String),

    #[error("dataset parse error at line {line}: {msg}")]
    DatasetParse { line: usize, msg: String },

    #[error("invalid MDP: {0}")]
    InvalidMdp(String),

    #[error("Q-tables are defined on different node sets")]
    NodeSetMismatch,

    #[error("degenerate behavior at state {state}: no observations and alpha = 0")]
    DegenerateBehavior { state: usize },

    #[error("objective increased at iteration {iter} ({from} -> {to}); step size too large")]
    Divergence { iter: usize, from: f64, to: f64 },

    #[error("episode is done; reset before stepping")]
    EpisodeDone,

    #[error("relabel target task {task} equals the episode's task")]
    SameTaskRelabel { task: u32 },

    #[error("dataset metadata is missing per-episode origin tags")]
    MissingOriginTags,

    #[error("action prefix has length {got}, expected {want} for query dimension {dim}")]
    PrefixMismatch { dim: usize, got: usize, want: usize },

    #[error("sample is missing an MC return but use_mc_max is enabled")]
    MissingMcReturn,

    #[error("parameter layouts differ ({a} vs {b} values)")]
    LayoutMismatch { a: usize, b: usize },

    #[error("checkpoint parse error: {0}")]
    CheckpointParse(String),

    #[error("invalid config: {0}")]
    InvalidConfig(String),

    #[error("no successful episodes; behavior cloning needs at least one")]
    NoSuccessfulEpisodes,

    #[error("non-finite loss at grad step {step} (batch indices {indices:?})")]
    NanLoss { step: usize, indices: Vec<usize> },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
