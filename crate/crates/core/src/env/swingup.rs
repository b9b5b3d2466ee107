//! Cart-pole swing-up with a sparse upright reward.
//!
//! The pole angle `beta` is 0 when upright and `pi` when hanging down. The
//! reward is 1 exactly when `cos(beta) > 0.8`. Episodes never fail; they are
//! truncated after [`SWINGUP_MAX_STEPS`] steps.

use std::f64::consts::PI;

use rand::{Rng, RngCore};

use super::{ActionSpace, CellMap, EpisodicEnv, Step, VisitationLog};
use crate::error::{check_finite, check_len, Error, Result};

pub const SWINGUP_MAX_STEPS: usize = 500;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SwingupParams {
    pub gravity: f64,
    pub cart_mass: f64,
    pub pole_mass: f64,
    /// Half the pole length.
    pub half_length: f64,
    pub force_bound: f64,
    pub dt: f64,
    /// Cart stops inelastically at `+-track_limit`.
    pub track_limit: f64,
    pub reset_noise: f64,
}

impl Default for SwingupParams {
    fn default() -> Self {
        Self {
            gravity: 9.8,
            cart_mass: 1.0,
            pole_mass: 0.1,
            half_length: 0.5,
            force_bound: 10.0,
            dt: 0.02,
            track_limit: 3.0,
            reset_noise: 0.01,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SparseCartPoleSwingupEnv {
    pub params: SwingupParams,
    /// `[x, x_dot, beta, beta_dot]`
    state: [f64; 4],
    steps: usize,
    active: bool,
}

impl Default for SparseCartPoleSwingupEnv {
    fn default() -> Self {
        Self::new(SwingupParams::default())
    }
}

impl SparseCartPoleSwingupEnv {
    pub fn new(params: SwingupParams) -> Self {
        Self { params, state: [0.0, 0.0, PI, 0.0], steps: 0, active: false }
    }

    pub fn state(&self) -> [f64; 4] {
        self.state
    }

    /// Starts an episode from an explicit physical state.
    pub fn set_state(&mut self, state: [f64; 4]) -> Result<Vec<f64>> {
        check_finite("swing-up state", &state)?;
        self.state = state;
        self.state[2] = wrap_angle(state[2]);
        self.steps = 0;
        self.active = true;
        Ok(self.observe())
    }

    /// `[x, x_dot, cos(beta), sin(beta), beta_dot]`
    pub fn observe(&self) -> Vec<f64> {
        let [x, xd, b, bd] = self.state;
        vec![x, xd, b.cos(), b.sin(), bd]
    }

    fn integrate(&mut self, force: f64) {
        let p = &self.params;
        let [mut x, mut xd, mut b, mut bd] = self.state;
        let total = p.cart_mass + p.pole_mass;
        let (sin, cos) = b.sin_cos();
        let temp = (force + p.pole_mass * p.half_length * bd * bd * sin) / total;
        let b_acc = (p.gravity * sin - cos * temp)
            / (p.half_length * (4.0 / 3.0 - p.pole_mass * cos * cos / total));
        let x_acc = temp - p.pole_mass * p.half_length * b_acc * cos / total;
        // semi-implicit Euler: velocities first
        xd += p.dt * x_acc;
        bd += p.dt * b_acc;
        x += p.dt * xd;
        b = wrap_angle(b + p.dt * bd);
        if x.abs() > p.track_limit {
            x = x.signum() * p.track_limit;
            xd = 0.0;
        }
        self.state = [x, xd, b, bd];
    }
}

fn wrap_angle(a: f64) -> f64 {
    let mut a = (a + PI).rem_euclid(2.0 * PI) - PI;
    if a == -PI {
        a = PI;
    }
    a
}

impl EpisodicEnv for SparseCartPoleSwingupEnv {
    fn obs_dim(&self) -> usize {
        5
    }

    fn action_space(&self) -> ActionSpace {
        ActionSpace::Box { low: vec![-1.0], high: vec![1.0] }
    }

    fn max_episode_steps(&self) -> usize {
        SWINGUP_MAX_STEPS
    }

    fn reset(&mut self, rng: &mut dyn RngCore) -> Vec<f64> {
        let n = self.params.reset_noise;
        let mut noise = [0.0; 4];
        if n > 0.0 {
            for v in &mut noise {
                *v = rng.random_range(-n..=n);
            }
        }
        self.state = [noise[0], noise[1], wrap_angle(PI + noise[2]), noise[3]];
        self.steps = 0;
        self.active = true;
        self.observe()
    }

    /// The action is a normalized force in `[-1, 1]`; larger magnitudes are clipped.
    fn step(&mut self, action: &[f64]) -> Result<Step> {
        if !self.active {
            return Err(Error::InvalidState("swing-up: step called outside an active episode".into()));
        }
        check_len("swing-up action", action.len(), 1)?;
        check_finite("swing-up action", action)?;
        let force = action[0].clamp(-1.0, 1.0) * self.params.force_bound;
        self.integrate(force);
        self.steps += 1;
        let reward = if self.state[2].cos() > 0.8 { 1.0 } else { 0.0 };
        let timeout = self.steps >= SWINGUP_MAX_STEPS;
        if timeout {
            self.active = false;
        }
        Ok(Step { observation: self.observe(), reward, terminal: false, timeout })
    }

    /// Cart position against pole angle (via `cos(beta)`).
    fn visitation_log(&self) -> VisitationLog {
        VisitationLog::new(
            21,
            21,
            CellMap::Bins { dims: (0, 2), lo: (-self.params.track_limit, -1.0), hi: (self.params.track_limit, 1.0) },
        )
    }
}
