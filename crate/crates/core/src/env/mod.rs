//! Episodic environments with a uniform interface.

mod maze;
mod swingup;
mod visitation;

pub use maze::{MazeEnv, MazeLayout, DEFAULT_LAYOUT, MAZE_MAX_STEPS};
pub use swingup::{SparseCartPoleSwingupEnv, SwingupParams, SWINGUP_MAX_STEPS};
pub use visitation::{CellMap, VisitationLog};

use rand::RngCore;

use crate::error::Result;

#[derive(Debug, Clone, PartialEq)]
pub enum ActionSpace {
    Discrete(usize),
    Box { low: Vec<f64>, high: Vec<f64> },
}

/// Result of one environment step. `terminal` marks a true episode end
/// (bootstrap 0), `timeout` a truncation by the step cap.
#[derive(Debug, Clone, PartialEq)]
pub struct Step {
    pub observation: Vec<f64>,
    pub reward: f64,
    pub terminal: bool,
    pub timeout: bool,
}

impl Step {
    pub fn done(&self) -> bool {
        self.terminal || self.timeout
    }
}

pub trait EpisodicEnv: Send {
    fn obs_dim(&self) -> usize;
    fn action_space(&self) -> ActionSpace;
    fn max_episode_steps(&self) -> usize;
    fn reset(&mut self, rng: &mut dyn RngCore) -> Vec<f64>;
    /// Errors when called before `reset` or after the episode ended.
    fn step(&mut self, action: &[f64]) -> Result<Step>;
    /// Empty log whose cells match this environment's observations.
    fn visitation_log(&self) -> VisitationLog;
}
