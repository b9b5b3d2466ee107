//! 21x21 gridworld with a single sparse reward at the goal cell.

use std::fmt;
use std::str::FromStr;

use rand::RngCore;

use super::{ActionSpace, CellMap, EpisodicEnv, Step, VisitationLog};
use crate::error::{Error, Result};

pub const MAZE_SIZE: usize = 21;
pub const MAZE_MAX_STEPS: usize = 1000;

/// Shipped layout: a vertical wall splits the grid, passable only near the top.
pub const DEFAULT_LAYOUT: &str = include_str!("../../assets/maze21.txt");

/// Action indices: up, down, left, right.
const MOVES: [(isize, isize); 4] = [(-1, 0), (1, 0), (0, -1), (0, 1)];

/// Parsed maze grid. Text format: `#` wall, `.` free, `S` start, `G` goal,
/// one row per line, exactly 21 rows of 21 cells.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MazeLayout {
    walls: Vec<bool>,
    pub start: (usize, usize),
    pub goal: (usize, usize),
}

impl FromStr for MazeLayout {
    type Err = Error;

    fn from_str(text: &str) -> Result<Self> {
        let rows: Vec<&str> = text.lines().map(str::trim_end).filter(|l| !l.is_empty()).collect();
        if rows.len() != MAZE_SIZE {
            return Err(Error::InvalidInput(format!("maze layout: expected {MAZE_SIZE} rows, got {}", rows.len())));
        }
        let mut walls = vec![false; MAZE_SIZE * MAZE_SIZE];
        let (mut start, mut goal) = (None, None);
        for (r, line) in rows.iter().enumerate() {
            let cells: Vec<char> = line.chars().collect();
            if cells.len() != MAZE_SIZE {
                return Err(Error::InvalidInput(format!("maze layout: row {r} has {} cells", cells.len())));
            }
            for (c, ch) in cells.into_iter().enumerate() {
                match ch {
                    '#' => walls[r * MAZE_SIZE + c] = true,
                    '.' => {}
                    'S' if start.is_none() => start = Some((r, c)),
                    'G' if goal.is_none() => goal = Some((r, c)),
                    other => {
                        return Err(Error::InvalidInput(format!("maze layout: unexpected {other:?} at ({r}, {c})")))
                    }
                }
            }
        }
        match (start, goal) {
            (Some(start), Some(goal)) => Ok(Self { walls, start, goal }),
            _ => Err(Error::InvalidInput("maze layout: needs exactly one S and one G".into())),
        }
    }
}

impl fmt::Display for MazeLayout {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for r in 0..MAZE_SIZE {
            for c in 0..MAZE_SIZE {
                let ch = if (r, c) == self.start {
                    'S'
                } else if (r, c) == self.goal {
                    'G'
                } else if self.is_wall(r, c) {
                    '#'
                } else {
                    '.'
                };
                write!(f, "{ch}")?;
            }
            writeln!(f)?;
        }
        Ok(())
    }
}

impl Default for MazeLayout {
    fn default() -> Self {
        DEFAULT_LAYOUT.parse().expect("shipped maze layout parses")
    }
}

impl MazeLayout {
    pub fn is_wall(&self, r: usize, c: usize) -> bool {
        self.walls[r * MAZE_SIZE + c]
    }

    /// Cell reached from `pos` by `action`; walls and the boundary block moves.
    pub fn next_cell(&self, pos: (usize, usize), action: usize) -> (usize, usize) {
        let (dr, dc) = MOVES[action];
        let r = pos.0 as isize + dr;
        let c = pos.1 as isize + dc;
        if r < 0 || c < 0 || r >= MAZE_SIZE as isize || c >= MAZE_SIZE as isize {
            return pos;
        }
        let (r, c) = (r as usize, c as usize);
        if self.is_wall(r, c) {
            pos
        } else {
            (r, c)
        }
    }

    /// Normalized `(row, col)` observation of a cell.
    pub fn observe(pos: (usize, usize)) -> Vec<f64> {
        let s = (MAZE_SIZE - 1) as f64;
        vec![pos.0 as f64 / s, pos.1 as f64 / s]
    }
}

#[derive(Debug, Clone)]
pub struct MazeEnv {
    layout: MazeLayout,
    pos: (usize, usize),
    steps: usize,
    active: bool,
    max_steps: usize,
}

impl MazeEnv {
    pub fn new(layout: MazeLayout) -> Self {
        let pos = layout.start;
        Self { layout, pos, steps: 0, active: false, max_steps: MAZE_MAX_STEPS }
    }

    pub fn with_max_steps(mut self, max_steps: usize) -> Self {
        self.max_steps = max_steps;
        self
    }

    pub fn layout(&self) -> &MazeLayout {
        &self.layout
    }

    pub fn position(&self) -> (usize, usize) {
        self.pos
    }

    /// Places the agent on a free cell and starts an episode there.
    pub fn set_position(&mut self, pos: (usize, usize)) -> Result<()> {
        if pos.0 >= MAZE_SIZE || pos.1 >= MAZE_SIZE || self.layout.is_wall(pos.0, pos.1) {
            return Err(Error::InvalidInput(format!("maze: {pos:?} is not a free cell")));
        }
        self.pos = pos;
        self.steps = 0;
        self.active = true;
        Ok(())
    }
}

impl Default for MazeEnv {
    fn default() -> Self {
        Self::new(MazeLayout::default())
    }
}

impl EpisodicEnv for MazeEnv {
    fn obs_dim(&self) -> usize {
        2
    }

    fn action_space(&self) -> ActionSpace {
        ActionSpace::Discrete(4)
    }

    fn max_episode_steps(&self) -> usize {
        self.max_steps
    }

    fn reset(&mut self, _rng: &mut dyn RngCore) -> Vec<f64> {
        self.pos = self.layout.start;
        self.steps = 0;
        self.active = true;
        MazeLayout::observe(self.pos)
    }

    fn step(&mut self, action: &[f64]) -> Result<Step> {
        if !self.active {
            return Err(Error::InvalidState("maze: step called outside an active episode".into()));
        }
        let a = action.first().copied().unwrap_or(f64::NAN);
        if !(a >= 0.0 && a < 4.0 && a.fract() == 0.0) {
            return Err(Error::InvalidInput(format!("maze: invalid action {action:?}")));
        }
        self.pos = self.layout.next_cell(self.pos, a as usize);
        self.steps += 1;
        let terminal = self.pos == self.layout.goal;
        let timeout = !terminal && self.steps >= self.max_steps;
        if terminal || timeout {
            self.active = false;
        }
        Ok(Step {
            observation: MazeLayout::observe(self.pos),
            reward: if terminal { 1.0 } else { 0.0 },
            terminal,
            timeout,
        })
    }

    fn visitation_log(&self) -> VisitationLog {
        VisitationLog::new(MAZE_SIZE, MAZE_SIZE, CellMap::NormalizedGrid)
    }
}
