//! Trust-region policy step: surrogate gradient, Fisher-vector products,
//! conjugate gradient and a KL-constrained backtracking line search.

use log::warn;

use crate::advantage::TrajectoryBatch;
use crate::error::{check_len, Error, Result};
use crate::policy::{kl_grad_single, mean_kl_table, Policy, StateTable};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Curvature {
    /// Hessian of the mean KL at the old parameters, via central differences
    /// of the KL gradient.
    Fisher,
    /// `H = I`; the step follows the plain gradient.
    Identity,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrpoConfig {
    pub max_kl: f64,
    pub cg_iters: usize,
    pub cg_damping: f64,
    pub backtrack_coef: f64,
    pub max_backtracks: usize,
    /// Central-difference width of the Fisher-vector product.
    pub fvp_eps: f64,
    pub curvature: Curvature,
}

impl Default for TrpoConfig {
    fn default() -> Self {
        Self {
            max_kl: 0.01,
            cg_iters: 20,
            cg_damping: 0.1,
            backtrack_coef: 0.5,
            max_backtracks: 10,
            fvp_eps: 1e-4,
            curvature: Curvature::Fisher,
        }
    }
}

impl TrpoConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.max_kl > 0.0) {
            return Err(Error::InvalidConfig(format!("max_kl must be positive, got {}", self.max_kl)));
        }
        if self.cg_iters == 0 {
            return Err(Error::InvalidConfig("cg_iters must be at least 1".into()));
        }
        if !(self.backtrack_coef > 0.0 && self.backtrack_coef < 1.0) {
            return Err(Error::InvalidConfig(format!("backtrack_coef must lie in (0, 1), got {}", self.backtrack_coef)));
        }
        if !(self.cg_damping >= 0.0) || !(self.fvp_eps > 0.0) {
            return Err(Error::InvalidConfig("cg_damping must be >= 0 and fvp_eps > 0".into()));
        }
        Ok(())
    }
}

/// Old-policy quantities shared by every evaluation within one step.
pub struct StepContext<'a> {
    pub old: &'a Policy,
    pub batch: &'a TrajectoryBatch,
    pub table: StateTable,
    pub old_out: Vec<Vec<f64>>,
}

impl<'a> StepContext<'a> {
    pub fn new(old: &'a Policy, batch: &'a TrajectoryBatch) -> Result<Self> {
        let n = batch.len();
        if n == 0 {
            return Err(Error::InvalidInput("empty batch".into()));
        }
        check_len("actions", batch.actions.len(), n)?;
        check_len("old log-probabilities", batch.old_log_probs.len(), n)?;
        check_len("advantages", batch.advantages.len(), n)?;
        let table = batch.state_table()?;
        let old_out = old.outputs(&table);
        Ok(Self { old, batch, table, old_out })
    }

    /// Importance-weighted advantage mean of `policy` against `advantages`.
    pub fn surrogate_with(&self, policy: &Policy, out: &[Vec<f64>], advantages: &[f64]) -> Result<f64> {
        let b = self.batch;
        let mut total = 0.0;
        for t in 0..b.len() {
            let lp = policy.log_prob_from_output(&out[self.table.index[t]], &b.actions[t]);
            total += (lp - b.old_log_probs[t]).exp() * advantages[t];
        }
        let l = total / b.len() as f64;
        if l.is_finite() {
            Ok(l)
        } else {
            Err(Error::Numerical("surrogate is not finite".into()))
        }
    }

    pub fn surrogate(&self, policy: &Policy) -> Result<f64> {
        let out = policy.outputs(&self.table);
        self.surrogate_with(policy, &out, &self.batch.advantages)
    }

    pub fn surrogate_and_grad(&self, policy: &Policy) -> Result<(f64, Vec<f64>)> {
        let b = self.batch;
        let n = b.len() as f64;
        let out = policy.outputs(&self.table);
        let mut d_out = vec![vec![0.0; policy.out_dim()]; self.table.len()];
        let mut d_log_std = vec![0.0; policy.log_std().len()];
        let mut total = 0.0;
        for t in 0..b.len() {
            let u = self.table.index[t];
            let lp = policy.log_prob_from_output(&out[u], &b.actions[t]);
            let ratio = (lp - b.old_log_probs[t]).exp();
            let a = b.advantages[t];
            total += ratio * a;
            if a != 0.0 {
                policy.log_prob_grad_from_output(&out[u], &b.actions[t], ratio * a / n, &mut d_out[u], &mut d_log_std);
            }
        }
        let loss = total / n;
        let grad = policy.grad_from_cotangents(&self.table, &d_out, &d_log_std);
        if !loss.is_finite() || grad.iter().any(|g| !g.is_finite()) {
            return Err(Error::Numerical("surrogate or its gradient is not finite".into()));
        }
        Ok((loss, grad))
    }

    pub fn mean_kl(&self, new: &Policy) -> f64 {
        let new_out = new.outputs(&self.table);
        mean_kl_table(self.old, &self.old_out, new, &new_out, &self.table)
    }

    /// Gradient of the mean `KL(old || new)` with respect to the new parameters.
    pub fn kl_grad(&self, new: &Policy) -> Vec<f64> {
        let new_out = new.outputs(&self.table);
        let total = self.table.total() as f64;
        let mut d_out = vec![vec![0.0; new.out_dim()]; self.table.len()];
        let mut d_log_std = vec![0.0; new.log_std().len()];
        for u in 0..self.table.len() {
            let w = self.table.counts[u] as f64 / total;
            kl_grad_single(self.old, &self.old_out[u], new, &new_out[u], w, &mut d_out[u], &mut d_log_std);
        }
        new.grad_from_cotangents(&self.table, &d_out, &d_log_std)
    }

    /// `H v + damping v`, with `H v` from central differences of the KL
    /// gradient at `theta_old +- eps v`.
    pub fn fisher_vector_product(&self, v: &[f64], damping: f64, eps: f64) -> Result<Vec<f64>> {
        check_len("fvp vector", v.len(), self.old.num_params())?;
        if v.iter().all(|&x| x == 0.0) {
            return Ok(vec![0.0; v.len()]);
        }
        let theta = self.old.get_flat();
        let plus: Vec<f64> = theta.iter().zip(v).map(|(t, d)| t + eps * d).collect();
        let minus: Vec<f64> = theta.iter().zip(v).map(|(t, d)| t - eps * d).collect();
        let gp = self.kl_grad(&self.old.with_flat(&plus)?);
        let gm = self.kl_grad(&self.old.with_flat(&minus)?);
        let hv: Vec<f64> = gp
            .iter()
            .zip(&gm)
            .zip(v)
            .map(|((p, m), vi)| (p - m) / (2.0 * eps) + damping * vi)
            .collect();
        if hv.iter().any(|x| !x.is_finite()) {
            return Err(Error::Numerical("fisher-vector product is not finite".into()));
        }
        Ok(hv)
    }
}

/// Mean surrogate and its gradient for `policy` on `batch`.
pub fn surrogate_and_grad(policy: &Policy, old: &Policy, batch: &TrajectoryBatch) -> Result<(f64, Vec<f64>)> {
    StepContext::new(old, batch)?.surrogate_and_grad(policy)
}

/// Approximately solves `H x = g` for a symmetric positive-definite `H`.
///
/// Stops after `iters` iterations, when the residual vanishes, or when a
/// search direction has no positive curvature.
pub fn conjugate_gradient<F>(mut op: F, g: &[f64], iters: usize) -> Result<Vec<f64>>
where
    F: FnMut(&[f64]) -> Result<Vec<f64>>,
{
    let mut x = vec![0.0; g.len()];
    let mut r = g.to_vec();
    let mut p = g.to_vec();
    let mut rr = dot(&r, &r);
    for _ in 0..iters {
        if rr <= 1e-20 {
            break;
        }
        let ap = op(&p)?;
        let p_ap = dot(&p, &ap);
        if !(p_ap > 1e-300) {
            break;
        }
        let alpha = rr / p_ap;
        for i in 0..x.len() {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        let rr_new = dot(&r, &r);
        let beta = rr_new / rr;
        for i in 0..p.len() {
            p[i] = r[i] + beta * p[i];
        }
        rr = rr_new;
    }
    Ok(x)
}

#[derive(Debug, Clone)]
pub struct TrpoOutcome {
    pub policy: Policy,
    /// Surrogate of the accepted parameters on the batch; 0 when rejected.
    pub gain: f64,
    pub kl: f64,
    pub accepted: bool,
    pub backtracks: usize,
}

impl TrpoOutcome {
    fn rejected(policy: &Policy, backtracks: usize) -> Self {
        Self { policy: policy.clone(), gain: 0.0, kl: 0.0, accepted: false, backtracks }
    }
}

/// One trust-region update of `policy` on `batch`.
///
/// Numerical failures never propagate: the policy comes back unchanged with
/// `accepted = false`.
pub fn trpo_step(policy: &Policy, batch: &TrajectoryBatch, cfg: &TrpoConfig) -> Result<TrpoOutcome> {
    cfg.validate()?;
    let ctx = StepContext::new(policy, batch)?;
    match step_inner(&ctx, cfg) {
        Ok(out) => Ok(out),
        Err(Error::Numerical(msg)) => {
            warn!("trpo step rejected: {msg}");
            Ok(TrpoOutcome::rejected(policy, 0))
        }
        Err(e) => Err(e),
    }
}

fn step_inner(ctx: &StepContext<'_>, cfg: &TrpoConfig) -> Result<TrpoOutcome> {
    let old = ctx.old;
    let (loss_old, g) = ctx.surrogate_and_grad(old)?;
    if g.iter().all(|&x| x == 0.0) {
        return Ok(TrpoOutcome::rejected(old, 0));
    }
    let hvp = |v: &[f64]| -> Result<Vec<f64>> {
        match cfg.curvature {
            Curvature::Fisher => ctx.fisher_vector_product(v, cfg.cg_damping, cfg.fvp_eps),
            Curvature::Identity => Ok(v.to_vec()),
        }
    };
    let x = conjugate_gradient(hvp, &g, cfg.cg_iters)?;
    let shs = dot(&x, &hvp(&x)?);
    if !(shs > 0.0) || !shs.is_finite() {
        return Err(Error::Numerical(format!("non-positive step curvature {shs}")));
    }
    let scale = (2.0 * cfg.max_kl / shs).sqrt();
    let theta = old.get_flat();
    let mut frac = 1.0;
    for j in 0..cfg.max_backtracks {
        let cand: Vec<f64> = theta.iter().zip(&x).map(|(t, xi)| t + frac * scale * xi).collect();
        let new = old.with_flat(&cand)?;
        let new_out = new.outputs(&ctx.table);
        let loss = ctx.surrogate_with(&new, &new_out, &ctx.batch.advantages)?;
        let kl = mean_kl_table(old, &ctx.old_out, &new, &new_out, &ctx.table);
        if !kl.is_finite() {
            return Err(Error::Numerical("kl is not finite".into()));
        }
        if loss - loss_old > 0.0 && kl <= cfg.max_kl {
            return Ok(TrpoOutcome { policy: new, gain: loss, kl, accepted: true, backtracks: j });
        }
        frac *= cfg.backtrack_coef;
    }
    Ok(TrpoOutcome::rejected(old, cfg.max_backtracks))
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
