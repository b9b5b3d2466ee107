//! Action distributions on top of [`FlatParamNet`].
//!
//! A policy owns one network mapping a state to distribution parameters:
//! logits for a categorical policy, the mean for a diagonal Gaussian. The
//! Gaussian log-std is state independent and is stored after the network
//! parameters in the policy's flat vector.
//!
//! Actions are passed as `&[f64]` for both families; a categorical action is
//! a single entry holding the action index.

use std::collections::HashMap;
use std::f64::consts::{E, PI};

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{check_finite, check_len, Error, Result};
use crate::neuralnet::{Activations, Checkpoint, FlatParamNet};
use crate::parallel;

/// Final-layer weight scale at initialization, keeping initial policies
/// close to uniform (categorical) or zero-mean (Gaussian).
pub const OUTPUT_INIT_SCALE: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Family {
    Gaussian,
    Categorical,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Policy {
    net: FlatParamNet,
    log_std: Vec<f64>,
    family: Family,
}

impl Policy {
    /// Diagonal Gaussian with initial log-std 0.
    pub fn gaussian<R: Rng + ?Sized>(obs_dim: usize, act_dim: usize, rng: &mut R) -> Result<Self> {
        let net = FlatParamNet::mlp(obs_dim, act_dim, OUTPUT_INIT_SCALE, rng)?;
        Ok(Self { net, log_std: vec![0.0; act_dim], family: Family::Gaussian })
    }

    pub fn categorical<R: Rng + ?Sized>(obs_dim: usize, n_actions: usize, rng: &mut R) -> Result<Self> {
        let net = FlatParamNet::mlp(obs_dim, n_actions, OUTPUT_INIT_SCALE, rng)?;
        Ok(Self { net, log_std: Vec::new(), family: Family::Categorical })
    }

    /// Wraps an existing network. `log_std` must be empty for categorical
    /// policies and match the output width for Gaussian ones.
    pub fn from_parts(net: FlatParamNet, log_std: Vec<f64>, family: Family) -> Result<Self> {
        let want = match family {
            Family::Gaussian => net.output_dim(),
            Family::Categorical => 0,
        };
        check_len("log_std", log_std.len(), want)?;
        Ok(Self { net, log_std, family })
    }

    pub fn family(&self) -> Family {
        self.family
    }

    pub fn net(&self) -> &FlatParamNet {
        &self.net
    }

    pub fn log_std(&self) -> &[f64] {
        &self.log_std
    }

    pub fn obs_dim(&self) -> usize {
        self.net.input_dim()
    }

    /// Width of the distribution-parameter output (logits or mean).
    pub fn out_dim(&self) -> usize {
        self.net.output_dim()
    }

    /// Length of an action vector.
    pub fn action_len(&self) -> usize {
        match self.family {
            Family::Gaussian => self.out_dim(),
            Family::Categorical => 1,
        }
    }

    pub fn num_params(&self) -> usize {
        self.net.num_params() + self.log_std.len()
    }

    /// Network parameters followed by the log-std block.
    pub fn get_flat(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.num_params());
        v.extend_from_slice(self.net.get_flat());
        v.extend_from_slice(&self.log_std);
        v
    }

    pub fn set_flat(&mut self, v: &[f64]) -> Result<()> {
        check_len("policy parameters", v.len(), self.num_params())?;
        let n = self.net.num_params();
        self.net.set_flat(&v[..n])?;
        self.log_std.copy_from_slice(&v[n..]);
        Ok(())
    }

    /// Copy of `self` with parameters `v`.
    pub fn with_flat(&self, v: &[f64]) -> Result<Self> {
        let mut p = self.clone();
        p.set_flat(v)?;
        Ok(p)
    }

    pub fn checkpoint(&self) -> Checkpoint {
        Checkpoint {
            layer_sizes: self.net.layer_sizes().to_vec(),
            extra: self.log_std.len(),
            params: self.get_flat(),
        }
    }

    pub fn from_checkpoint(ck: &Checkpoint, family: Family) -> Result<Self> {
        let mut net = FlatParamNet::zeros(&ck.layer_sizes)?;
        let n = net.num_params();
        check_len("checkpoint parameters", ck.params.len(), n + ck.extra)?;
        net.set_flat(&ck.params[..n])?;
        Self::from_parts(net, ck.params[n..].to_vec(), family)
    }

    /// Distribution parameters (logits or mean) at `state`.
    pub fn output(&self, state: &[f64]) -> Result<Vec<f64>> {
        check_len("state", state.len(), self.obs_dim())?;
        check_finite("state", state)?;
        self.net.forward(state)
    }

    pub fn log_prob(&self, state: &[f64], action: &[f64]) -> Result<f64> {
        check_len("action", action.len(), self.action_len())?;
        let out = self.output(state)?;
        if self.family == Family::Categorical {
            action_index(action[0], out.len())?;
        }
        Ok(self.log_prob_from_output(&out, action))
    }

    /// Log-probability of `action` given the network output at its state.
    pub fn log_prob_from_output(&self, out: &[f64], action: &[f64]) -> f64 {
        match self.family {
            Family::Categorical => {
                let a = action[0] as usize;
                out[a] - log_sum_exp(out)
            }
            Family::Gaussian => {
                let mut lp = 0.0;
                for ((&mu, &ls), &a) in out.iter().zip(&self.log_std).zip(action) {
                    let z = (a - mu) * (-ls).exp();
                    lp += -0.5 * z * z - ls - 0.5 * (2.0 * PI).ln();
                }
                lp
            }
        }
    }

    /// Adds `scale * d log_prob` into `d_out` (network output) and `d_log_std`.
    pub fn log_prob_grad_from_output(
        &self,
        out: &[f64],
        action: &[f64],
        scale: f64,
        d_out: &mut [f64],
        d_log_std: &mut [f64],
    ) {
        match self.family {
            Family::Categorical => {
                let a = action[0] as usize;
                let probs = softmax(out);
                for (k, p) in probs.iter().enumerate() {
                    let ind = if k == a { 1.0 } else { 0.0 };
                    d_out[k] += scale * (ind - p);
                }
            }
            Family::Gaussian => {
                for i in 0..out.len() {
                    let inv_var = (-2.0 * self.log_std[i]).exp();
                    let diff = action[i] - out[i];
                    d_out[i] += scale * diff * inv_var;
                    d_log_std[i] += scale * (diff * diff * inv_var - 1.0);
                }
            }
        }
    }

    /// Closed-form entropy of the Gaussian head.
    pub fn gaussian_entropy(log_std: &[f64]) -> f64 {
        log_std.iter().sum::<f64>() + 0.5 * log_std.len() as f64 * (2.0 * PI * E).ln()
    }

    /// Gaussian: closed form, `states` ignored. Categorical: mean over
    /// `states` of the per-state Shannon entropy.
    pub fn entropy(&self, states: &[Vec<f64>]) -> Result<f64> {
        match self.family {
            Family::Gaussian => Ok(Self::gaussian_entropy(&self.log_std)),
            Family::Categorical => {
                if states.is_empty() {
                    return Err(Error::InvalidInput("categorical entropy needs at least one state".into()));
                }
                let table = StateTable::from_states(states.iter().map(Vec::as_slice))?;
                let outs = self.outputs(&table);
                let total: f64 = outs
                    .iter()
                    .zip(&table.counts)
                    .map(|(o, &c)| c as f64 * categorical_entropy(o))
                    .sum();
                Ok(total / states.len() as f64)
            }
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, state: &[f64], rng: &mut R) -> Result<Vec<f64>> {
        let out = self.output(state)?;
        Ok(self.sample_from_output(&out, rng))
    }

    pub fn sample_from_output<R: Rng + ?Sized>(&self, out: &[f64], rng: &mut R) -> Vec<f64> {
        match self.family {
            Family::Categorical => {
                let probs = softmax(out);
                let u: f64 = rng.random();
                let mut acc = 0.0;
                let mut pick = probs.len() - 1;
                for (k, p) in probs.iter().enumerate() {
                    acc += p;
                    if u < acc {
                        pick = k;
                        break;
                    }
                }
                vec![pick as f64]
            }
            Family::Gaussian => out
                .iter()
                .zip(&self.log_std)
                .map(|(&mu, &ls)| {
                    let z: f64 = rng.sample(StandardNormal);
                    mu + ls.exp() * z
                })
                .collect(),
        }
    }

    /// Deterministic action: the mean, or the most probable index (lowest on ties).
    pub fn greedy_from_output(&self, out: &[f64]) -> Vec<f64> {
        match self.family {
            Family::Gaussian => out.to_vec(),
            Family::Categorical => vec![argmax(out) as f64],
        }
    }

    pub fn greedy(&self, state: &[f64]) -> Result<Vec<f64>> {
        let out = self.output(state)?;
        Ok(self.greedy_from_output(&out))
    }

    /// Network outputs for every unique state of `table`.
    pub fn outputs(&self, table: &StateTable) -> Vec<Vec<f64>> {
        let net = &self.net;
        parallel::map(table.len(), |u| {
            let mut acts = Activations::default();
            net.forward_into(&table.states[u], &mut acts);
            acts.output().to_vec()
        })
    }

    /// Flat gradient given output cotangents per unique state and a
    /// cotangent for the log-std block.
    pub fn grad_from_cotangents(&self, table: &StateTable, d_out: &[Vec<f64>], d_log_std: &[f64]) -> Vec<f64> {
        let net = &self.net;
        let n_net = net.num_params();
        let mut g = parallel::sum_vec(table.len(), n_net, Activations::default, |acts, u, acc| {
            if d_out[u].iter().all(|&c| c == 0.0) {
                return;
            }
            net.forward_into(&table.states[u], acts);
            net.backward_into(acts, &d_out[u], acc);
        });
        g.extend_from_slice(d_log_std);
        g
    }
}

/// Mean over `states` of `KL(old(.|s) || new(.|s))`.
pub fn kl(old: &Policy, new: &Policy, states: &[Vec<f64>]) -> Result<f64> {
    if old.family != new.family || old.out_dim() != new.out_dim() || old.obs_dim() != new.obs_dim() {
        return Err(Error::InvalidInput("kl: policies differ in family or dimensions".into()));
    }
    if states.is_empty() {
        return Err(Error::InvalidInput("kl: empty state batch".into()));
    }
    let table = StateTable::from_states(states.iter().map(Vec::as_slice))?;
    Ok(mean_kl_table(old, &old.outputs(&table), new, &new.outputs(&table), &table))
}

/// Mean KL over a state table given precomputed outputs.
pub fn mean_kl_table(old: &Policy, old_out: &[Vec<f64>], new: &Policy, new_out: &[Vec<f64>], table: &StateTable) -> f64 {
    let total: f64 = old_out
        .iter()
        .zip(new_out)
        .zip(&table.counts)
        .map(|((o, n), &c)| c as f64 * kl_single(old, o, new, n))
        .sum();
    total / table.total() as f64
}

/// KL between the distributions with outputs `o` (old) and `n` (new).
pub fn kl_single(old: &Policy, o: &[f64], new: &Policy, n: &[f64]) -> f64 {
    match old.family {
        Family::Categorical => {
            let lo = log_softmax(o);
            let ln = log_softmax(n);
            lo.iter().zip(&ln).map(|(a, b)| a.exp() * (a - b)).sum::<f64>().max(0.0)
        }
        Family::Gaussian => {
            let mut kl = 0.0;
            for i in 0..o.len() {
                let (ls_o, ls_n) = (old.log_std[i], new.log_std[i]);
                let var_o = (2.0 * ls_o).exp();
                let var_n = (2.0 * ls_n).exp();
                let d = o[i] - n[i];
                kl += ls_n - ls_o + (var_o + d * d) / (2.0 * var_n) - 0.5;
            }
            kl.max(0.0)
        }
    }
}

/// Adds `scale * d KL(old||new) / d(new params)` for one state into the
/// output and log-std cotangents.
pub fn kl_grad_single(
    old: &Policy,
    o: &[f64],
    new: &Policy,
    n: &[f64],
    scale: f64,
    d_out: &mut [f64],
    d_log_std: &mut [f64],
) {
    match old.family {
        Family::Categorical => {
            let po = softmax(o);
            let pn = softmax(n);
            for k in 0..n.len() {
                d_out[k] += scale * (pn[k] - po[k]);
            }
        }
        Family::Gaussian => {
            for i in 0..n.len() {
                let var_o = (2.0 * old.log_std[i]).exp();
                let inv_var_n = (-2.0 * new.log_std[i]).exp();
                let d = n[i] - o[i];
                d_out[i] += scale * d * inv_var_n;
                d_log_std[i] += scale * (1.0 - (var_o + d * d) * inv_var_n);
            }
        }
    }
}

pub fn log_sum_exp(xs: &[f64]) -> f64 {
    let m = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    m + xs.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

pub fn log_softmax(xs: &[f64]) -> Vec<f64> {
    let lse = log_sum_exp(xs);
    xs.iter().map(|x| x - lse).collect()
}

pub fn softmax(xs: &[f64]) -> Vec<f64> {
    let m = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = xs.iter().map(|x| (x - m).exp()).collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|x| x / s).collect()
}

pub fn categorical_entropy(logits: &[f64]) -> f64 {
    log_softmax(logits)
        .iter()
        .map(|lp| if lp.is_finite() { -lp.exp() * lp } else { 0.0 })
        .sum()
}

fn argmax(xs: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in xs.iter().enumerate() {
        if x > xs[best] {
            best = i;
        }
    }
    best
}

fn action_index(a: f64, n: usize) -> Result<usize> {
    if a >= 0.0 && a.fract() == 0.0 && (a as usize) < n {
        Ok(a as usize)
    } else {
        Err(Error::InvalidInput(format!("categorical action {a} outside 0..{n}")))
    }
}

/// Batch states de-duplicated by bit pattern, in first-occurrence order.
///
/// Discrete environments revisit the same observations many times within a
/// batch; every per-state network pass runs once per unique state and
/// per-sample terms are folded into that state's cotangent.
#[derive(Debug, Clone, Default)]
pub struct StateTable {
    pub states: Vec<Vec<f64>>,
    /// Unique-state index of every sample.
    pub index: Vec<usize>,
    /// Number of samples mapping to each unique state.
    pub counts: Vec<usize>,
}

impl StateTable {
    pub fn from_states<'a, I>(states: I) -> Result<Self>
    where
        I: IntoIterator<Item = &'a [f64]>,
    {
        let mut table = StateTable::default();
        let mut seen: HashMap<Vec<u64>, usize> = HashMap::new();
        for s in states {
            check_finite("state", s)?;
            let key: Vec<u64> = s.iter().map(|x| x.to_bits()).collect();
            let u = *seen.entry(key).or_insert_with(|| {
                table.states.push(s.to_vec());
                table.counts.push(0);
                table.states.len() - 1
            });
            table.counts[u] += 1;
            table.index.push(u);
        }
        Ok(table)
    }

    /// Number of unique states.
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    /// Number of samples.
    pub fn total(&self) -> usize {
        self.index.len()
    }
}
