//! Task sources: the grid-pick toy environment and random tabular MDPs.

mod grid_pick;
mod random_mdp;

pub use grid_pick::{
    grid_pick_action_spec, scripted_expert, GridPickEnv, GridPickState, NUM_ACTION_DIMS, OBS_DIM,
};
pub use random_mdp::{random_tabular_mdp, RandomMdpParams};
