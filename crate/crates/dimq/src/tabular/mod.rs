//! Exact, enumerable backup operators and their oracles.

mod backup;
mod behavior;
mod conservative;
mod mdp;
mod qtable;
pub mod verify;

pub use backup::{
    contraction_backup, contraction_check, full_action_value_iteration, full_backup,
    per_dim_backup, per_dim_backup_intra, per_dim_value_iteration, per_dim_value_iteration_intra,
    JointQ,
};
pub use behavior::EmpiricalBehavior;
pub use conservative::{conservative_fixed_point, minimize_tabular_objective};
pub use mdp::TabularMdp;
pub use qtable::{QShape, QTable};

#[cfg(test)]
pub(crate) fn tests_all_joint(spec: &crate::action::ActionSpec) -> Vec<Vec<u16>> {
    let mut out = vec![vec![]];
    for &n in &spec.bins {
        let mut next = Vec::new();
        for prefix in &out {
            for b in 0..n {
                let mut p = prefix.clone();
                p.push(b);
                next.push(p);
            }
        }
        out = next;
    }
    out
}
