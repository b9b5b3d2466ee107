//! Clipped-surrogate policy step optimized by minibatch Adam ascent.

use log::warn;
use rand::seq::SliceRandom;
use rand::Rng;

use crate::advantage::TrajectoryBatch;
use crate::error::{check_len, Error, Result};
use crate::neuralnet::Activations;
use crate::optim::{clip_global_norm, Adam};
use crate::parallel;
use crate::policy::Policy;
use crate::trpo::StepContext;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PpoConfig {
    pub clip_eps: f64,
    pub epochs: usize,
    pub minibatch: usize,
    pub step_size: f64,
    pub max_grad_norm: f64,
}

impl Default for PpoConfig {
    fn default() -> Self {
        Self { clip_eps: 0.2, epochs: 10, minibatch: 64, step_size: 3e-4, max_grad_norm: 10.0 }
    }
}

impl PpoConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.clip_eps > 0.0 && self.clip_eps < 1.0) {
            return Err(Error::InvalidConfig(format!("clip_eps must lie in (0, 1), got {}", self.clip_eps)));
        }
        if self.epochs == 0 || self.minibatch == 0 || !(self.step_size > 0.0) {
            return Err(Error::InvalidConfig("epochs, minibatch and step_size must be positive".into()));
        }
        Ok(())
    }
}

/// `min(r A, clip(r, 1-eps, 1+eps) A)` for one sample.
pub fn clipped_term(ratio: f64, advantage: f64, clip_eps: f64) -> f64 {
    (ratio * advantage).min(ratio.clamp(1.0 - clip_eps, 1.0 + clip_eps) * advantage)
}

/// Mean clipped objective over `idx` and its gradient. The gradient flows
/// through a sample only when the unclipped branch attains the minimum.
pub fn clipped_loss_on(policy: &Policy, batch: &TrajectoryBatch, idx: &[usize], clip_eps: f64) -> Result<(f64, Vec<f64>)> {
    let net = policy.net();
    let n_net = net.num_params();
    let m = idx.len() as f64;
    // last slot carries the loss itself
    let mut acc = parallel::sum_vec(
        idx.len(),
        policy.num_params() + 1,
        || (Activations::default(), vec![0.0; policy.out_dim()]),
        |(acts, d_out), k, acc| {
            let t = idx[k];
            net.forward_into(&batch.states[t], acts);
            let lp = policy.log_prob_from_output(acts.output(), &batch.actions[t]);
            let ratio = (lp - batch.old_log_probs[t]).exp();
            let a = batch.advantages[t];
            let unclipped = ratio * a;
            let clipped = ratio.clamp(1.0 - clip_eps, 1.0 + clip_eps) * a;
            let last = acc.len() - 1;
            acc[last] += unclipped.min(clipped) / m;
            if unclipped <= clipped && a != 0.0 {
                d_out.iter_mut().for_each(|d| *d = 0.0);
                let out = acts.output().to_vec();
                let (head, tail) = acc[..last].split_at_mut(n_net);
                policy.log_prob_grad_from_output(&out, &batch.actions[t], ratio * a / m, d_out, tail);
                net.backward_into(acts, d_out, head);
            }
        },
    );
    let loss = acc.pop().unwrap();
    if !loss.is_finite() || acc.iter().any(|g| !g.is_finite()) {
        return Err(Error::Numerical("clipped objective is not finite".into()));
    }
    Ok((loss, acc))
}

/// Clipped objective over the whole batch.
pub fn clipped_loss(policy: &Policy, batch: &TrajectoryBatch, clip_eps: f64) -> Result<(f64, Vec<f64>)> {
    check_len("old log-probabilities", batch.old_log_probs.len(), batch.len())?;
    check_len("advantages", batch.advantages.len(), batch.len())?;
    let idx: Vec<usize> = (0..batch.len()).collect();
    clipped_loss_on(policy, batch, &idx, clip_eps)
}

#[derive(Debug, Clone)]
pub struct PpoOutcome {
    pub policy: Policy,
    /// Unclipped importance-weighted advantage mean of the final parameters.
    pub gain: f64,
    pub accepted: bool,
}

/// `epochs` passes of shuffled minibatch Adam ascent on the clipped
/// objective. A fresh optimizer is used for every call.
pub fn ppo_step<R: Rng + ?Sized>(policy: &Policy, batch: &TrajectoryBatch, cfg: &PpoConfig, rng: &mut R) -> Result<PpoOutcome> {
    cfg.validate()?;
    let ctx = StepContext::new(policy, batch)?;
    let mut current = policy.clone();
    let mut params = policy.get_flat();
    let mut opt = Adam::new(params.len(), cfg.step_size);
    let mut order: Vec<usize> = (0..batch.len()).collect();
    for _ in 0..cfg.epochs {
        order.shuffle(rng);
        for mb in order.chunks(cfg.minibatch) {
            let grad = match clipped_loss_on(&current, batch, mb, cfg.clip_eps) {
                Ok((_, g)) => g,
                Err(Error::Numerical(msg)) => {
                    warn!("ppo step reverted: {msg}");
                    return Ok(PpoOutcome { policy: policy.clone(), gain: 0.0, accepted: false });
                }
                Err(e) => return Err(e),
            };
            let mut descent: Vec<f64> = grad.iter().map(|g| -g).collect();
            clip_global_norm(&mut descent, cfg.max_grad_norm);
            opt.step(&mut params, &descent);
            current.set_flat(&params)?;
        }
    }
    match ctx.surrogate(&current) {
        Ok(gain) => Ok(PpoOutcome { policy: current, gain, accepted: true }),
        Err(Error::Numerical(msg)) => {
            warn!("ppo step reverted: {msg}");
            Ok(PpoOutcome { policy: policy.clone(), gain: 0.0, accepted: false })
        }
        Err(e) => Err(e),
    }
}
