//! Offline training, evaluation, behavior cloning, and ablations.

mod ablate;
mod optim;
mod bc;
mod eval;
mod metrics;
mod trainer;

pub use ablate::{
    default_cells, full_matrix_cells, render_ablation_table, run_ablation_matrix, steps_to_90pct,
    AblationCell, CellResult, SeedRun,
};
pub use bc::{bc_baseline_train, successes_only};
pub use eval::{evaluate, evaluate_from, rollout_greedy, EvalReport, StartDist, WindowBuffer};
pub use metrics::{render_metrics, MetricsRow, METRICS_HEADER};
pub use trainer::{train_offline, TrainOptions, TrainOutcome, TrainState};
