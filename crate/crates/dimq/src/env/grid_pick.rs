//! Grid-pick: a deterministic G x G pick-and-terminate task with a
//! 4-dimensional discrete action and sparse binary reward.
//!
//! The agent must move onto the object cell, grasp it, and then choose to
//! terminate while holding. Reward 1.0 is paid only on a terminate step
//! with the object held; everything else pays 0.

use rand::Rng;

use crate::action::ActionSpec;
use crate::config::EnvConfig;
use crate::error::{Error, Result};

pub const OBS_DIM: usize = 6;
pub const NUM_ACTION_DIMS: usize = 4;

/// Action dimension order: dx, dy, grasp, terminate.
pub fn grid_pick_action_spec() -> ActionSpec {
    ActionSpec::discrete(vec![3, 3, 2, 2]).expect("static spec is valid")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GridPickState {
    pub agent: (usize, usize),
    pub object: (usize, usize),
    pub holding: bool,
    pub steps: usize,
}

#[derive(Debug, Clone)]
pub struct GridPickEnv {
    pub grid_size: usize,
    pub horizon: usize,
    state: GridPickState,
    done: bool,
}

fn move_bin(bin: u16) -> isize {
    bin as isize - 1
}

impl GridPickEnv {
    pub fn new(config: EnvConfig) -> Result<Self> {
        config.validate()?;
        Ok(GridPickEnv {
            grid_size: config.grid_size,
            horizon: config.horizon,
            state: GridPickState {
                agent: (0, 0),
                object: (0, 0),
                holding: false,
                steps: 0,
            },
            done: false,
        })
    }

    pub fn state(&self) -> GridPickState {
        self.state
    }

    pub fn is_done(&self) -> bool {
        self.done
    }

    /// Random start: agent and object cells drawn independently.
    pub fn reset<R: Rng>(&mut self, rng: &mut R) -> Vec<f64> {
        let g = self.grid_size;
        let start = GridPickState {
            agent: (rng.gen_range(0..g), rng.gen_range(0..g)),
            object: (rng.gen_range(0..g), rng.gen_range(0..g)),
            holding: false,
            steps: 0,
        };
        self.reset_to(start)
    }

    /// Demonstration start: the agent begins in the staging lane on the
    /// left edge, only its row and the object position vary. Starting
    /// there, the expert never needs to move left, which leaves that
    /// action to be learned from the noisy replays.
    pub fn reset_staged<R: Rng>(&mut self, rng: &mut R) -> Vec<f64> {
        let g = self.grid_size;
        let start = GridPickState {
            agent: (0, rng.gen_range(0..g)),
            object: (rng.gen_range(0..g), rng.gen_range(0..g)),
            holding: false,
            steps: 0,
        };
        self.reset_to(start)
    }

    pub fn reset_to(&mut self, state: GridPickState) -> Vec<f64> {
        self.state = state;
        self.state.holding = false;
        self.state.steps = 0;
        self.done = false;
        self.observe()
    }

    /// Normalized observation in [0,1]^6:
    /// agent x/y, object x/y, holding flag, step fraction.
    pub fn observe(&self) -> Vec<f64> {
        let g = (self.grid_size - 1).max(1) as f64;
        vec![
            self.state.agent.0 as f64 / g,
            self.state.agent.1 as f64 / g,
            self.state.object.0 as f64 / g,
            self.state.object.1 as f64 / g,
            self.state.holding as u8 as f64,
            self.state.steps as f64 / self.horizon as f64,
        ]
    }

    /// Applies one 4-dimensional action. Movement clamps at the walls, a
    /// held object moves with the agent, grasp picks up only when
    /// co-located, and terminate ends the episode (reward 1 iff holding).
    pub fn step(&mut self, action: &[u16]) -> Result<(Vec<f64>, f64, bool)> {
        if self.done {
            return Err(Error::EpisodeDone);
        }
        grid_pick_action_spec().check_action(action)?;
        let (dx, dy, grasp, terminate) = (
            move_bin(action[0]),
            move_bin(action[1]),
            action[2] == 1,
            action[3] == 1,
        );
        let g = self.grid_size as isize;
        let clamp = |v: isize| v.clamp(0, g - 1) as usize;
        self.state.agent = (
            clamp(self.state.agent.0 as isize + dx),
            clamp(self.state.agent.1 as isize + dy),
        );
        if self.state.holding {
            self.state.object = self.state.agent;
        }
        if grasp && self.state.agent == self.state.object {
            self.state.holding = true;
        }
        let reward = if terminate && self.state.holding { 1.0 } else { 0.0 };
        self.state.steps += 1;
        self.done = terminate || self.state.steps >= self.horizon;
        Ok((self.observe(), reward, self.done))
    }
}

/// Greedy hand-written policy: walk toward the object one axis at a time
/// (x until aligned, then y), grasp when co-located, terminate once
/// holding. Worst-case success takes 2(G-1)+2 steps.
pub fn scripted_expert(state: &GridPickState) -> [u16; NUM_ACTION_DIMS] {
    if state.holding {
        return [1, 1, 0, 1];
    }
    if state.agent == state.object {
        return [1, 1, 1, 0];
    }
    let step_toward = |from: usize, to: usize| -> u16 {
        match to.cmp(&from) {
            std::cmp::Ordering::Greater => 2,
            std::cmp::Ordering::Equal => 1,
            std::cmp::Ordering::Less => 0,
        }
    };
    if state.agent.0 != state.object.0 {
        [step_toward(state.agent.0, state.object.0), 1, 0, 0]
    } else {
        [1, step_toward(state.agent.1, state.object.1), 0, 0]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    fn env() -> GridPickEnv {
        GridPickEnv::new(EnvConfig::default()).unwrap()
    }

    #[test]
    fn grasp_rule() {
        let mut e = env();
        e.reset_to(GridPickState {
            agent: (2, 2),
            object: (2, 2),
            holding: false,
            steps: 0,
        });
        let (_, reward, done) = e.step(&[1, 1, 1, 0]).unwrap();
        assert!(e.state().holding);
        assert_eq!(reward, 0.0);
        assert!(!done);
    }

    #[test]
    fn success_and_failure_rules() {
        let mut e = env();
        e.reset_to(GridPickState {
            agent: (1, 1),
            object: (1, 1),
            holding: false,
            steps: 0,
        });
        e.step(&[1, 1, 1, 0]).unwrap();
        let (_, reward, done) = e.step(&[1, 1, 0, 1]).unwrap();
        assert_eq!(reward, 1.0);
        assert!(done);
        assert!(e.step(&[1, 1, 0, 0]).is_err());

        let mut e = env();
        e.reset_to(GridPickState {
            agent: (0, 0),
            object: (3, 3),
            holding: false,
            steps: 0,
        });
        let (_, reward, done) = e.step(&[1, 1, 0, 1]).unwrap();
        assert_eq!(reward, 0.0);
        assert!(done);
    }

    #[test]
    fn movement_clamps_and_held_object_follows() {
        let mut e = env();
        e.reset_to(GridPickState {
            agent: (0, 0),
            object: (0, 0),
            holding: false,
            steps: 0,
        });
        e.step(&[1, 1, 1, 0]).unwrap();
        let (_, _, _) = e.step(&[0, 0, 0, 0]).unwrap(); // push into the corner
        assert_eq!(e.state().agent, (0, 0));
        assert_eq!(e.state().object, (0, 0));
        e.step(&[2, 2, 0, 0]).unwrap();
        assert_eq!(e.state().agent, (1, 1));
        assert_eq!(e.state().object, (1, 1));
    }

    #[test]
    fn expert_greedy_move() {
        let s = GridPickState {
            agent: (0, 0),
            object: (2, 0),
            holding: false,
            steps: 0,
        };
        assert_eq!(scripted_expert(&s), [2, 1, 0, 0]);
        let co = GridPickState {
            agent: (2, 0),
            object: (2, 0),
            holding: false,
            steps: 0,
        };
        assert_eq!(scripted_expert(&co), [1, 1, 1, 0]);
        let holding = GridPickState {
            holding: true,
            ..co
        };
        assert_eq!(scripted_expert(&holding), [1, 1, 0, 1]);
    }

    #[test]
    fn expert_succeeds_from_every_start() {
        let g = 5;
        let mut e = GridPickEnv::new(EnvConfig {
            grid_size: g,
            horizon: 2 * (g - 1) + 2,
        })
        .unwrap();
        for ax in 0..g {
            for ay in 0..g {
                for ox in 0..g {
                    for oy in 0..g {
                        e.reset_to(GridPickState {
                            agent: (ax, ay),
                            object: (ox, oy),
                            holding: false,
                            steps: 0,
                        });
                        let mut total = 0.0;
                        while !e.is_done() {
                            let a = scripted_expert(&e.state());
                            let (_, r, _) = e.step(&a).unwrap();
                            total += r;
                        }
                        assert_eq!(total, 1.0, "start ({ax},{ay})/({ox},{oy})");
                    }
                }
            }
        }
    }

    #[test]
    fn observations_stay_in_unit_box() {
        let mut e = env();
        let mut rng = ChaCha20Rng::seed_from_u64(5);
        for _ in 0..50 {
            e.reset(&mut rng);
            while !e.is_done() {
                let action = [
                    rng.gen_range(0..3u16),
                    rng.gen_range(0..3u16),
                    rng.gen_range(0..2u16),
                    rng.gen_range(0..2u16),
                ];
                let (obs, _, _) = e.step(&action).unwrap();
                assert_eq!(obs.len(), OBS_DIM);
                assert!(obs.iter().all(|&x| (0.0..=1.0).contains(&x)));
            }
        }
    }

    #[test]
    fn replaying_actions_reproduces_episode() {
        let mut rng = ChaCha20Rng::seed_from_u64(11);
        let mut e = env();
        e.reset(&mut rng);
        let start = e.state();
        let mut actions = Vec::new();
        let mut trace = Vec::new();
        while !e.is_done() {
            let a = [
                rng.gen_range(0..3u16),
                rng.gen_range(0..3u16),
                rng.gen_range(0..2u16),
                rng.gen_range(0..2u16),
            ];
            let out = e.step(&a).unwrap();
            actions.push(a);
            trace.push(out);
        }
        let mut e2 = env();
        e2.reset_to(start);
        for (a, expect) in actions.iter().zip(&trace) {
            let out = e2.step(a).unwrap();
            assert_eq!(&out, expect);
        }
    }
}
