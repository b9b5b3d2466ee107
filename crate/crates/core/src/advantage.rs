//! Rollout batches, generalized advantage estimation and the shared value
//! regression.

use rand::seq::SliceRandom;
use rand::Rng;

use crate::error::{check_len, Error, Result};
use crate::neuralnet::{Activations, FlatParamNet};
use crate::optim::Adam;
use crate::parallel;
use crate::policy::StateTable;

/// One rollout of `N` environment steps.
///
/// `timeout_values[t]` holds the value of the observation reached after step
/// `t` when that step truncated its episode; it is ignored elsewhere.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrajectoryBatch {
    pub states: Vec<Vec<f64>>,
    pub actions: Vec<Vec<f64>>,
    pub rewards: Vec<f64>,
    pub terminals: Vec<bool>,
    pub timeouts: Vec<bool>,
    pub old_log_probs: Vec<f64>,
    pub values: Vec<f64>,
    pub timeout_values: Vec<f64>,
    pub advantages: Vec<f64>,
    pub returns: Vec<f64>,
}

impl TrajectoryBatch {
    pub fn len(&self) -> usize {
        self.rewards.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rewards.is_empty()
    }

    pub fn state_table(&self) -> Result<StateTable> {
        StateTable::from_states(self.states.iter().map(Vec::as_slice))
    }

    /// Fills `values` and `timeout_values` from `value_net`. `truncated_next`
    /// lists `(step, next observation)` for every truncated step.
    pub fn fill_values(&mut self, value_net: &FlatParamNet, truncated_next: &[(usize, Vec<f64>)]) -> Result<()> {
        let table = self.state_table()?;
        let v = predict_table(value_net, &table);
        self.values = table.index.iter().map(|&u| v[u]).collect();
        self.timeout_values = vec![0.0; self.len()];
        for (t, s) in truncated_next {
            self.timeout_values[*t] = value_net.forward(s)?[0];
        }
        Ok(())
    }
}

/// Fills advantages and returns.
///
/// `A_t = sum_l (gamma*lam)^l delta_{t+l}` with
/// `delta_t = r_t + gamma*V(s_{t+1}) - V(s_t)`; the sum stops at episode
/// boundaries. A terminal step bootstraps with 0, a truncated step with
/// `timeout_values[t]`, and the final step of an unfinished episode with
/// `bootstrap_value`. `returns = advantages + values`.
pub fn compute_gae(batch: &mut TrajectoryBatch, bootstrap_value: f64, gamma: f64, lam: f64) -> Result<()> {
    let n = batch.len();
    if batch.values.len() != n {
        return Err(Error::InvalidState("compute_gae: values not filled".into()));
    }
    if !(0.0..1.0).contains(&gamma) || !(0.0..=1.0).contains(&lam) {
        return Err(Error::InvalidConfig(format!("compute_gae: gamma={gamma}, lam={lam}")));
    }
    check_len("terminal flags", batch.terminals.len(), n)?;
    check_len("timeout flags", batch.timeouts.len(), n)?;
    let timeout_values = if batch.timeout_values.len() == n { batch.timeout_values.clone() } else { vec![0.0; n] };
    let mut adv = vec![0.0; n];
    let mut carry = 0.0;
    for t in (0..n).rev() {
        let next_value = if batch.terminals[t] {
            carry = 0.0;
            0.0
        } else if batch.timeouts[t] {
            carry = 0.0;
            timeout_values[t]
        } else if t + 1 == n {
            carry = 0.0;
            bootstrap_value
        } else {
            batch.values[t + 1]
        };
        let delta = batch.rewards[t] + gamma * next_value - batch.values[t];
        carry = delta + gamma * lam * carry;
        adv[t] = carry;
    }
    batch.returns = adv.iter().zip(&batch.values).map(|(a, v)| a + v).collect();
    batch.advantages = adv;
    Ok(())
}

/// Standardizes in place: `(a - mean) / (std + 1e-8)`.
pub fn normalize_advantages(adv: &mut [f64]) {
    if adv.is_empty() {
        return;
    }
    let n = adv.len() as f64;
    let mean = adv.iter().sum::<f64>() / n;
    let var = adv.iter().map(|a| (a - mean) * (a - mean)).sum::<f64>() / n;
    let denom = var.sqrt() + 1e-8;
    adv.iter_mut().for_each(|a| *a = (*a - mean) / denom);
}

/// Scalar predictions of a single-output network for each unique state.
pub fn predict_table(net: &FlatParamNet, table: &StateTable) -> Vec<f64> {
    parallel::map(table.len(), |u| {
        let mut acts = Activations::default();
        net.forward_into(&table.states[u], &mut acts);
        acts.output()[0]
    })
}

pub fn mse(net: &FlatParamNet, states: &[Vec<f64>], targets: &[f64]) -> f64 {
    if states.is_empty() {
        return 0.0;
    }
    let s = parallel::sum_scalar(states.len(), |i| {
        let mut acts = Activations::default();
        net.forward_into(&states[i], &mut acts);
        let e = acts.output()[0] - targets[i];
        e * e
    });
    s / states.len() as f64
}

/// Shared state-value function: a network plus its persistent optimizer.
#[derive(Debug, Clone)]
pub struct ValueFunction {
    pub net: FlatParamNet,
    pub opt: Adam,
}

/// Mean-squared error before and after a fit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitReport {
    pub loss_before: f64,
    pub loss_after: f64,
    pub steps: usize,
}

impl ValueFunction {
    pub fn new<R: Rng + ?Sized>(obs_dim: usize, step_size: f64, rng: &mut R) -> Result<Self> {
        let net = FlatParamNet::mlp(obs_dim, 1, 1.0, rng)?;
        let opt = Adam::new(net.num_params(), step_size);
        Ok(Self { net, opt })
    }

    pub fn from_net(net: FlatParamNet, step_size: f64) -> Self {
        let opt = Adam::new(net.num_params(), step_size);
        Self { net, opt }
    }

    pub fn predict(&self, state: &[f64]) -> Result<f64> {
        Ok(self.net.forward(state)?[0])
    }

    /// Regresses the network onto `returns` by mean-squared error:
    /// `iterations` passes over shuffled minibatches, one optimizer step per
    /// minibatch.
    pub fn fit<R: Rng + ?Sized>(
        &mut self,
        states: &[Vec<f64>],
        returns: &[f64],
        iterations: usize,
        minibatch: usize,
        rng: &mut R,
    ) -> Result<FitReport> {
        check_len("value targets", returns.len(), states.len())?;
        if iterations == 0 || minibatch == 0 {
            return Err(Error::InvalidConfig("fit_value: iterations and minibatch must be positive".into()));
        }
        let loss_before = mse(&self.net, states, returns);
        let mut order: Vec<usize> = (0..states.len()).collect();
        let mut steps = 0;
        for _ in 0..iterations {
            order.shuffle(rng);
            for mb in order.chunks(minibatch) {
                let grad = mse_grad(&self.net, states, returns, mb);
                self.opt.step(self.net.params_mut(), &grad);
                steps += 1;
            }
        }
        let loss_after = mse(&self.net, states, returns);
        Ok(FitReport { loss_before, loss_after, steps })
    }
}

/// Gradient of the minibatch mean-squared error.
pub fn mse_grad(net: &FlatParamNet, states: &[Vec<f64>], targets: &[f64], idx: &[usize]) -> Vec<f64> {
    let m = idx.len() as f64;
    parallel::sum_vec(idx.len(), net.num_params(), Activations::default, |acts, k, acc| {
        let i = idx[k];
        net.forward_into(&states[i], acts);
        let e = acts.output()[0] - targets[i];
        net.backward_into(acts, &[2.0 * e / m], acc);
    })
}

/// Functional form of [`ValueFunction::fit`] with a fresh optimizer.
pub fn fit_value<R: Rng + ?Sized>(
    value_net: FlatParamNet,
    states: &[Vec<f64>],
    returns: &[f64],
    iterations: usize,
    minibatch: usize,
    step_size: f64,
    rng: &mut R,
) -> Result<(FlatParamNet, FitReport)> {
    let mut vf = ValueFunction::from_net(value_net, step_size);
    let report = vf.fit(states, returns, iterations, minibatch, rng)?;
    Ok((vf.net, report))
}
