//! Sample collection and greedy evaluation.

use std::collections::HashMap;

use rand::RngCore;

use crate::advantage::TrajectoryBatch;
use crate::env::{EpisodicEnv, VisitationLog};
use crate::error::Result;
use crate::policy::Policy;

/// Memoizes network outputs per observation while the policy is fixed.
/// Only worthwhile when observations repeat (gridworlds).
struct OutputCache<'a> {
    policy: &'a Policy,
    map: Option<HashMap<Vec<u64>, Vec<f64>>>,
}

impl<'a> OutputCache<'a> {
    fn new(policy: &'a Policy, enabled: bool) -> Self {
        Self { policy, map: enabled.then(HashMap::new) }
    }

    fn get(&mut self, obs: &[f64]) -> Result<Vec<f64>> {
        match &mut self.map {
            None => self.policy.output(obs),
            Some(map) => {
                let key: Vec<u64> = obs.iter().map(|x| x.to_bits()).collect();
                if let Some(out) = map.get(&key) {
                    return Ok(out.clone());
                }
                let out = self.policy.output(obs)?;
                map.insert(key, out.clone());
                Ok(out)
            }
        }
    }
}

/// One batch of experience plus episode statistics.
#[derive(Debug, Clone)]
pub struct Rollout {
    pub batch: TrajectoryBatch,
    /// `(step, next observation)` for every step that truncated an episode.
    pub truncated_next: Vec<(usize, Vec<f64>)>,
    /// Observation after the final step, used to bootstrap an unfinished episode.
    pub last_obs: Vec<f64>,
    pub last_done: bool,
    /// Undiscounted returns of episodes that ended inside the batch.
    pub episode_returns: Vec<f64>,
    /// Return accumulated so far by the unfinished final episode.
    pub partial_return: f64,
}

impl Rollout {
    /// Mean return of completed episodes; the partial episode's return when
    /// none completed.
    pub fn mean_return(&self) -> f64 {
        if self.episode_returns.is_empty() {
            self.partial_return
        } else {
            self.episode_returns.iter().sum::<f64>() / self.episode_returns.len() as f64
        }
    }

    /// Standard error of [`mean_return`](Self::mean_return); 0 with fewer
    /// than two completed episodes.
    pub fn return_std_error(&self) -> f64 {
        let n = self.episode_returns.len();
        if n < 2 {
            return 0.0;
        }
        let m = self.mean_return();
        let var = self.episode_returns.iter().map(|r| (r - m) * (r - m)).sum::<f64>() / (n - 1) as f64;
        (var / n as f64).sqrt()
    }
}

/// Rolls `policy` out for exactly `n_steps` environment steps, starting a
/// fresh episode. Every visited observation is logged in `visits`.
pub fn collect(
    env: &mut dyn EpisodicEnv,
    policy: &Policy,
    n_steps: usize,
    repeated_obs: bool,
    rng: &mut dyn RngCore,
    mut visits: Option<&mut VisitationLog>,
) -> Result<Rollout> {
    let mut cache = OutputCache::new(policy, repeated_obs);
    let mut batch = TrajectoryBatch::default();
    let mut truncated_next = Vec::new();
    let mut episode_returns = Vec::new();
    let mut obs = env.reset(rng);
    let mut ep_return = 0.0;
    let mut done = false;
    for t in 0..n_steps {
        if done {
            obs = env.reset(rng);
            ep_return = 0.0;
        }
        if let Some(v) = visits.as_deref_mut() {
            v.log_visit(&obs);
        }
        let out = cache.get(&obs)?;
        let action = policy.sample_from_output(&out, rng);
        let lp = policy.log_prob_from_output(&out, &action);
        let step = env.step(&action)?;
        ep_return += step.reward;
        if step.timeout && !step.terminal {
            truncated_next.push((t, step.observation.clone()));
        }
        done = step.done();
        if done {
            episode_returns.push(ep_return);
        }
        batch.states.push(std::mem::replace(&mut obs, step.observation));
        batch.actions.push(action);
        batch.rewards.push(step.reward);
        batch.terminals.push(step.terminal);
        batch.timeouts.push(step.timeout);
        batch.old_log_probs.push(lp);
    }
    Ok(Rollout {
        batch,
        truncated_next,
        last_obs: obs,
        last_done: done,
        episode_returns,
        partial_return: if done { 0.0 } else { ep_return },
    })
}

/// Returns of `episodes` greedy episodes.
pub fn evaluate(
    env: &mut dyn EpisodicEnv,
    policy: &Policy,
    episodes: usize,
    repeated_obs: bool,
    rng: &mut dyn RngCore,
) -> Result<Vec<f64>> {
    let mut cache = OutputCache::new(policy, repeated_obs);
    let mut returns = Vec::with_capacity(episodes);
    for _ in 0..episodes {
        let mut obs = env.reset(rng);
        let mut total = 0.0;
        loop {
            let out = cache.get(&obs)?;
            let step = env.step(&policy.greedy_from_output(&out))?;
            total += step.reward;
            if step.done() {
                break;
            }
            obs = step.observation;
        }
        returns.push(total);
    }
    Ok(returns)
}
