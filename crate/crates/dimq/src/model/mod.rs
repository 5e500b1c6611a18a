//! The function-approximation Q-network and its training math.

mod checkpoint;
mod loss;
mod net;
mod params;
mod tape;

pub use checkpoint::{
    checkpoint_from_str, checkpoint_to_string, read_checkpoint, write_checkpoint, Checkpoint,
};
pub use loss::{
    bc_loss_grad, grad_check, n_step_target, per_dim_targets, sample_loss, sample_loss_grad,
    LossStats,
};
pub use net::{HeadOut, ModelShape, SeqQModel, SeqQModelView};
pub use params::{ema_update, Layout, LayoutEntry, ParamRef, ParamVector};
pub use tape::{NodeId, Tape, Tensor};
