//! The multi-path training loop.
//!
//! A buffer of `K` policies carries a performance estimate `J` and an
//! entropy `H` per slot. Each iteration normalizes both buffers to `[0, 1]`,
//! scores every slot with `(1 - alpha) * J_hat + alpha * H_hat`, rolls out
//! only the best-scoring policy, refits the shared value function, improves
//! the picked policy with the backend (TRPO or PPO) and writes it back. The
//! picked slot's `J` is refreshed from the rollout and then advanced by the
//! surrogate gain of the update, so no extra samples are spent evaluating
//! the improved policy.

use std::fmt;
use std::str::FromStr;

use rand::RngCore;
use rand_chacha::ChaCha8Rng;

use crate::advantage::{compute_gae, normalize_advantages, ValueFunction};
use crate::env::{ActionSpace, EpisodicEnv, VisitationLog};
use crate::error::{Error, Result};
use crate::policy::Policy;
use crate::ppo::{ppo_step, PpoConfig};
use crate::rollout::{collect, Rollout};
use crate::trpo::{trpo_step, StepContext, TrpoConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Mode {
    /// Plain backend, one policy.
    SinglePath,
    /// Pick rule with self-replacement.
    Mppo,
    /// Pick rule; the improved policy overwrites the worst slot.
    MppoReplaceWorst,
    /// All K policies roll out N/K steps each and share one value function.
    MultiSharedValue,
    /// As `MultiSharedValue` with one value function per policy.
    MultiIndependent,
}

impl Mode {
    pub const ALL: [Mode; 5] =
        [Mode::SinglePath, Mode::Mppo, Mode::MppoReplaceWorst, Mode::MultiSharedValue, Mode::MultiIndependent];

    pub fn name(self) -> &'static str {
        match self {
            Mode::SinglePath => "single_path",
            Mode::Mppo => "mppo",
            Mode::MppoReplaceWorst => "mppo_replace_worst",
            Mode::MultiSharedValue => "multi_shared_value",
            Mode::MultiIndependent => "multi_independent",
        }
    }

    pub fn uses_pick_rule(self) -> bool {
        matches!(self, Mode::Mppo | Mode::MppoReplaceWorst)
    }

    pub fn is_multi(self) -> bool {
        matches!(self, Mode::MultiSharedValue | Mode::MultiIndependent)
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Mode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Mode::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::InvalidConfig(format!("unknown mode {s:?}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VariantConfig {
    pub mode: Mode,
    pub alpha: f64,
    pub k: usize,
}

impl VariantConfig {
    /// Checks ranges and forces `k = 1` for the single-path mode.
    pub fn validated(mut self) -> Result<Self> {
        if !(0.0..1.0).contains(&self.alpha) {
            return Err(Error::InvalidConfig(format!("alpha must lie in [0, 1), got {}", self.alpha)));
        }
        if self.mode == Mode::SinglePath {
            self.k = 1;
        }
        if self.k == 0 {
            return Err(Error::InvalidConfig("K must be at least 1".into()));
        }
        Ok(self)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Backend {
    Trpo(TrpoConfig),
    Ppo(PpoConfig),
}

impl Backend {
    pub fn name(&self) -> &'static str {
        match self {
            Backend::Trpo(_) => "trpo",
            Backend::Ppo(_) => "ppo",
        }
    }
}

/// Which advantages weight the surrogate gain added to the performance buffer.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GainAdvantages {
    /// GAE advantages before standardization, in return units.
    Raw,
    /// The standardized advantages the backend optimized.
    Normalized,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AlgoConfig {
    pub gamma: f64,
    pub lam: f64,
    pub batch_size: usize,
    pub value_iters: usize,
    pub value_minibatch: usize,
    pub value_step_size: f64,
    pub backend: Backend,
    pub gain_advantages: GainAdvantages,
}

impl AlgoConfig {
    pub fn trpo() -> Self {
        Self {
            gamma: 0.995,
            lam: 0.97,
            batch_size: 5000,
            value_iters: 5,
            value_minibatch: 64,
            value_step_size: 1e-3,
            backend: Backend::Trpo(TrpoConfig::default()),
            gain_advantages: GainAdvantages::Raw,
        }
    }

    pub fn ppo() -> Self {
        Self { batch_size: 2048, backend: Backend::Ppo(PpoConfig::default()), ..Self::trpo() }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.gamma) || !(0.0..=1.0).contains(&self.lam) {
            return Err(Error::InvalidConfig(format!("gamma={} lam={}", self.gamma, self.lam)));
        }
        if self.batch_size == 0 || self.value_iters == 0 || self.value_minibatch == 0 {
            return Err(Error::InvalidConfig("batch sizes and value iterations must be positive".into()));
        }
        match &self.backend {
            Backend::Trpo(c) => c.validate(),
            Backend::Ppo(c) => c.validate(),
        }
    }
}

// ---------------------------------------------------------------------------
// Pick rule
// ---------------------------------------------------------------------------

/// Affine map of `values` onto `[0, 1]`. When all entries are equal every
/// output is 0.5.
pub fn min_max_normalize(values: &[f64]) -> Result<Vec<f64>> {
    if values.is_empty() {
        return Err(Error::InvalidInput("min_max_normalize: empty input".into()));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("min_max_normalize: non-finite value".into()));
    }
    let lo = values.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if hi == lo {
        return Ok(vec![0.5; values.len()]);
    }
    Ok(values.iter().map(|v| (v - lo) / (hi - lo)).collect())
}

/// `(1 - alpha) * j_hat + alpha * h_hat` without range checks on `alpha`.
pub fn weighted_score(j_hat: &[f64], h_hat: &[f64], alpha: f64) -> Vec<f64> {
    j_hat.iter().zip(h_hat).map(|(j, h)| (1.0 - alpha) * j + alpha * h).collect()
}

pub fn score(j_hat: &[f64], h_hat: &[f64], alpha: f64) -> Result<Vec<f64>> {
    if !(0.0..1.0).contains(&alpha) {
        return Err(Error::InvalidConfig(format!("alpha must lie in [0, 1), got {alpha}")));
    }
    if j_hat.len() != h_hat.len() {
        return Err(Error::InvalidInput("score: buffer lengths differ".into()));
    }
    Ok(weighted_score(j_hat, h_hat, alpha))
}

/// Index of the largest score, lowest index on ties.
pub fn argmax_lowest(xs: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in xs.iter().enumerate().skip(1) {
        if x > xs[best] {
            best = i;
        }
    }
    best
}

/// Index of the smallest value, lowest index on ties.
pub fn argmin_lowest(xs: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in xs.iter().enumerate().skip(1) {
        if x < xs[best] {
            best = i;
        }
    }
    best
}

/// Lower bound on the performance change when the pick moves from one
/// policy to another: `-alpha / (1 - alpha) * (max J - min J) + sigma`.
pub fn theorem1_bound(alpha: f64, j_next: &[f64], sigma: f64) -> f64 {
    let lo = j_next.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = j_next.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let range = if j_next.is_empty() { 0.0 } else { hi - lo };
    -alpha / (1.0 - alpha) * range + sigma
}

#[derive(Debug, Clone, PartialEq)]
pub struct PolicyBuffer {
    pub policies: Vec<Policy>,
    pub perf: Vec<f64>,
    pub entropy: Vec<f64>,
    pub picked_history: Vec<(usize, usize)>,
}

impl PolicyBuffer {
    pub fn new(policies: Vec<Policy>, entropy: Vec<f64>) -> Self {
        let k = policies.len();
        Self { policies, perf: vec![0.0; k], entropy, picked_history: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.policies.len()
    }

    pub fn is_empty(&self) -> bool {
        self.policies.is_empty()
    }

    /// Scores of every slot.
    pub fn scores(&self, alpha: f64) -> Result<Vec<f64>> {
        score(&min_max_normalize(&self.perf)?, &min_max_normalize(&self.entropy)?, alpha)
    }

    pub fn pick(&self, alpha: f64) -> Result<usize> {
        Ok(argmax_lowest(&self.scores(alpha)?))
    }

    /// Stores an improved version of slot `i`, returning the slot written.
    ///
    /// Self-replacement overwrites slot `i`. Replace-worst overwrites the slot
    /// with the lowest `J` (lowest index on ties) and leaves slot `i` as it was.
    pub fn replace(&mut self, i: usize, improved: Policy, perf: f64, entropy: f64, mode: Mode) -> usize {
        let slot = match mode {
            Mode::MppoReplaceWorst => argmin_lowest(&self.perf),
            _ => i,
        };
        self.policies[slot] = improved;
        self.perf[slot] = perf;
        self.entropy[slot] = entropy;
        slot
    }

    /// Mean Euclidean distance between the parameter vectors of all pairs.
    pub fn mean_pairwise_distance(&self) -> f64 {
        let flats: Vec<Vec<f64>> = self.policies.iter().map(Policy::get_flat).collect();
        let mut total = 0.0;
        let mut pairs = 0usize;
        for a in 0..flats.len() {
            for b in a + 1..flats.len() {
                total += flats[a].iter().zip(&flats[b]).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt();
                pairs += 1;
            }
        }
        if pairs == 0 {
            0.0
        } else {
            total / pairs as f64
        }
    }
}

// ---------------------------------------------------------------------------
// Policy improvement on one rollout
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
pub struct Improvement {
    pub policy: Policy,
    pub gain: f64,
    pub kl: f64,
    pub accepted: bool,
    pub value_loss: f64,
}

/// Fits the value function on the rollout, computes advantages with the
/// refitted values and runs one backend step.
///
/// Value targets are the lambda-returns under the value function as it was
/// before this fit.
pub fn improve(
    policy: &Policy,
    rollout: Rollout,
    vf: &mut ValueFunction,
    algo: &AlgoConfig,
    rng: &mut ChaCha8Rng,
) -> Result<Improvement> {
    let Rollout { mut batch, truncated_next, last_obs, last_done, .. } = rollout;
    let bootstrap = |vf: &ValueFunction| -> Result<f64> { if last_done { Ok(0.0) } else { vf.predict(&last_obs) } };

    batch.fill_values(&vf.net, &truncated_next)?;
    compute_gae(&mut batch, bootstrap(vf)?, algo.gamma, algo.lam)?;
    let targets = std::mem::take(&mut batch.returns);
    let fit = vf.fit(&batch.states, &targets, algo.value_iters, algo.value_minibatch, rng)?;

    batch.fill_values(&vf.net, &truncated_next)?;
    compute_gae(&mut batch, bootstrap(vf)?, algo.gamma, algo.lam)?;
    let raw_advantages = batch.advantages.clone();
    normalize_advantages(&mut batch.advantages);

    let (new_policy, step_gain, kl, accepted) = match &algo.backend {
        Backend::Trpo(cfg) => {
            let out = trpo_step(policy, &batch, cfg)?;
            (out.policy, out.gain, out.kl, out.accepted)
        }
        Backend::Ppo(cfg) => {
            let out = ppo_step(policy, &batch, cfg, rng)?;
            let kl = if out.accepted { StepContext::new(policy, &batch)?.mean_kl(&out.policy) } else { 0.0 };
            (out.policy, out.gain, kl, out.accepted)
        }
    };
    let gain = if !accepted {
        0.0
    } else {
        match algo.gain_advantages {
            GainAdvantages::Normalized => step_gain,
            GainAdvantages::Raw => {
                let ctx = StepContext::new(policy, &batch)?;
                let out = new_policy.outputs(&ctx.table);
                ctx.surrogate_with(&new_policy, &out, &raw_advantages)?
            }
        }
    };
    Ok(Improvement { policy: new_policy, gain, kl, accepted, value_loss: fit.loss_after })
}

/// Entropy recorded in the buffer: closed form for Gaussian policies, mean
/// over `states` for categorical ones.
pub fn buffer_entropy(policy: &Policy, states: &[Vec<f64>]) -> Result<f64> {
    policy.entropy(states)
}

// ---------------------------------------------------------------------------
// Trainer
// ---------------------------------------------------------------------------

/// A pick that moved away from the previously picked slot.
#[derive(Debug, Clone, PartialEq)]
pub struct SwitchRecord {
    pub iteration: usize,
    pub from: usize,
    pub to: usize,
    /// Rollout return of the new pick minus the rollout return of the
    /// previous pick one iteration earlier.
    pub measured_delta: f64,
    pub bound: f64,
    /// Two standard errors of the difference of the two rollout returns.
    pub eps_est: f64,
}

impl SwitchRecord {
    pub fn holds(&self) -> bool {
        self.measured_delta >= self.bound - self.eps_est
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IterationRecord {
    pub iteration: usize,
    pub env_steps: usize,
    pub picked: usize,
    /// Buffers and scores as seen by the pick rule.
    pub perf: Vec<f64>,
    pub entropy: Vec<f64>,
    pub scores: Vec<f64>,
    pub gain: f64,
    pub kl: f64,
    pub accepted: bool,
    pub rollout_return: f64,
    pub rollout_se: f64,
    pub diversity: f64,
    pub switch: Option<SwitchRecord>,
}

#[derive(Debug, Clone, Copy)]
struct LastPick {
    index: usize,
    rollout_return: f64,
    rollout_se: f64,
    gain: f64,
}

pub struct Trainer {
    env: Box<dyn EpisodicEnv>,
    repeated_obs: bool,
    algo: AlgoConfig,
    variant: VariantConfig,
    buffer: PolicyBuffer,
    values: Vec<ValueFunction>,
    rng: ChaCha8Rng,
    iteration: usize,
    env_steps: usize,
    current: usize,
    last: Option<LastPick>,
    visits: VisitationLog,
}

impl Trainer {
    /// Initializes the value function(s) and then the `K` policies from
    /// `init_rng`; all sampling afterwards draws from `rollout_rng`.
    pub fn new(
        mut env: Box<dyn EpisodicEnv>,
        repeated_obs: bool,
        algo: AlgoConfig,
        variant: VariantConfig,
        init_rng: &mut ChaCha8Rng,
        rollout_rng: ChaCha8Rng,
    ) -> Result<Self> {
        algo.validate()?;
        let variant = variant.validated()?;
        let obs_dim = env.obs_dim();
        let n_values = if variant.mode == Mode::MultiIndependent { variant.k } else { 1 };
        let values = (0..n_values)
            .map(|_| ValueFunction::new(obs_dim, algo.value_step_size, init_rng))
            .collect::<Result<Vec<_>>>()?;
        let policies = (0..variant.k)
            .map(|_| match env.action_space() {
                ActionSpace::Discrete(n) => Policy::categorical(obs_dim, n, init_rng),
                ActionSpace::Box { low, .. } => Policy::gaussian(obs_dim, low.len(), init_rng),
            })
            .collect::<Result<Vec<_>>>()?;
        let start = vec![env.reset(init_rng as &mut dyn RngCore)];
        let entropy = policies.iter().map(|p| buffer_entropy(p, &start)).collect::<Result<Vec<_>>>()?;
        let visits = env.visitation_log();
        let mut trainer = Self {
            env,
            repeated_obs,
            algo,
            variant,
            buffer: PolicyBuffer::new(policies, entropy),
            values,
            rng: rollout_rng,
            iteration: 0,
            env_steps: 0,
            current: 0,
            last: None,
            visits,
        };
        trainer.current = trainer.initial_pick()?;
        Ok(trainer)
    }

    fn initial_pick(&self) -> Result<usize> {
        if self.variant.mode.uses_pick_rule() {
            self.buffer.pick(self.variant.alpha)
        } else {
            Ok(argmax_lowest(&self.buffer.perf))
        }
    }

    pub fn buffer(&self) -> &PolicyBuffer {
        &self.buffer
    }

    pub fn variant(&self) -> &VariantConfig {
        &self.variant
    }

    pub fn algo(&self) -> &AlgoConfig {
        &self.algo
    }

    pub fn env_steps(&self) -> usize {
        self.env_steps
    }

    pub fn iteration(&self) -> usize {
        self.iteration
    }

    pub fn visits(&self) -> &VisitationLog {
        &self.visits
    }

    pub fn value_functions(&self) -> &[ValueFunction] {
        &self.values
    }

    /// Slot holding the most recently picked (and improved) policy.
    pub fn current_index(&self) -> usize {
        self.current
    }

    pub fn current_policy(&self) -> &Policy {
        &self.buffer.policies[self.current]
    }

    pub fn iterate(&mut self) -> Result<IterationRecord> {
        let rec = match self.variant.mode {
            Mode::SinglePath => self.iterate_single()?,
            Mode::Mppo | Mode::MppoReplaceWorst => self.iterate_mppo()?,
            Mode::MultiSharedValue | Mode::MultiIndependent => self.iterate_multi()?,
        };
        self.iteration += 1;
        Ok(rec)
    }

    fn rollout(&mut self, slot: usize, n: usize) -> Result<Rollout> {
        let r = collect(
            self.env.as_mut(),
            &self.buffer.policies[slot],
            n,
            self.repeated_obs,
            &mut self.rng,
            Some(&mut self.visits),
        )?;
        self.env_steps += n;
        Ok(r)
    }

    /// The plain backend: roll out, refit, step, overwrite.
    fn iterate_single(&mut self) -> Result<IterationRecord> {
        let perf = self.buffer.perf.clone();
        let entropy = self.buffer.entropy.clone();
        let rollout = self.rollout(0, self.algo.batch_size)?;
        let (ret, se) = (rollout.mean_return(), rollout.return_std_error());
        let states = rollout.batch.states.clone();
        let imp = improve(&self.buffer.policies[0], rollout, &mut self.values[0], &self.algo, &mut self.rng)?;
        self.buffer.perf[0] = ret + imp.gain;
        if imp.accepted {
            self.buffer.entropy[0] = buffer_entropy(&imp.policy, &states)?;
            self.buffer.policies[0] = imp.policy;
        }
        self.buffer.picked_history.push((self.iteration, 0));
        Ok(IterationRecord {
            iteration: self.iteration,
            env_steps: self.env_steps,
            picked: 0,
            perf,
            entropy,
            scores: vec![0.5],
            gain: imp.gain,
            kl: imp.kl,
            accepted: imp.accepted,
            rollout_return: ret,
            rollout_se: se,
            diversity: 0.0,
            switch: None,
        })
    }

    fn iterate_mppo(&mut self) -> Result<IterationRecord> {
        let alpha = self.variant.alpha;
        let perf = self.buffer.perf.clone();
        let entropy = self.buffer.entropy.clone();
        let scores = self.buffer.scores(alpha)?;
        let i = argmax_lowest(&scores);
        self.buffer.picked_history.push((self.iteration, i));

        let rollout = self.rollout(i, self.algo.batch_size)?;
        let (ret, se) = (rollout.mean_return(), rollout.return_std_error());
        let switch = match self.last {
            Some(prev) if prev.index != i => Some(SwitchRecord {
                iteration: self.iteration,
                from: prev.index,
                to: i,
                measured_delta: ret - prev.rollout_return,
                bound: theorem1_bound(alpha, &perf, prev.gain),
                eps_est: 2.0 * (se * se + prev.rollout_se * prev.rollout_se).sqrt(),
            }),
            _ => None,
        };

        self.buffer.perf[i] = ret;
        let states = rollout.batch.states.clone();
        let imp = improve(&self.buffer.policies[i], rollout, &mut self.values[0], &self.algo, &mut self.rng)?;
        let slot = if imp.accepted {
            let h = buffer_entropy(&imp.policy, &states)?;
            self.buffer.replace(i, imp.policy, ret + imp.gain, h, self.variant.mode)
        } else {
            i
        };
        self.current = slot;
        self.last = Some(LastPick { index: i, rollout_return: ret, rollout_se: se, gain: imp.gain });
        Ok(IterationRecord {
            iteration: self.iteration,
            env_steps: self.env_steps,
            picked: i,
            perf,
            entropy,
            scores,
            gain: imp.gain,
            kl: imp.kl,
            accepted: imp.accepted,
            rollout_return: ret,
            rollout_se: se,
            diversity: self.buffer.mean_pairwise_distance(),
            switch,
        })
    }

    /// Every policy rolls out its share of the batch and is improved on it.
    fn iterate_multi(&mut self) -> Result<IterationRecord> {
        let k = self.variant.k;
        let perf = self.buffer.perf.clone();
        let entropy = self.buffer.entropy.clone();
        let (mut gain, mut kl, mut accepted, mut ret_sum) = (0.0, 0.0, false, 0.0);
        let base = self.algo.batch_size / k;
        let extra = self.algo.batch_size % k;
        for slot in 0..k {
            let n = base + usize::from(slot < extra);
            if n == 0 {
                continue;
            }
            let rollout = self.rollout(slot, n)?;
            let ret = rollout.mean_return();
            ret_sum += ret;
            let states = rollout.batch.states.clone();
            let v = if self.variant.mode == Mode::MultiIndependent { slot } else { 0 };
            let imp = improve(&self.buffer.policies[slot], rollout, &mut self.values[v], &self.algo, &mut self.rng)?;
            self.buffer.perf[slot] = ret + imp.gain;
            if imp.accepted {
                self.buffer.entropy[slot] = buffer_entropy(&imp.policy, &states)?;
                self.buffer.policies[slot] = imp.policy;
            }
            gain += imp.gain / k as f64;
            kl += imp.kl / k as f64;
            accepted |= imp.accepted;
        }
        self.current = argmax_lowest(&self.buffer.perf);
        self.buffer.picked_history.push((self.iteration, self.current));
        Ok(IterationRecord {
            iteration: self.iteration,
            env_steps: self.env_steps,
            picked: self.current,
            perf,
            entropy,
            scores: min_max_normalize(&self.buffer.perf)?,
            gain,
            kl,
            accepted,
            rollout_return: ret_sum / k as f64,
            rollout_se: 0.0,
            diversity: self.buffer.mean_pairwise_distance(),
            switch: None,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::neuralnet::FlatParamNet;
    use crate::policy::Family;

    #[test]
    fn normalize_examples() {
        assert_eq!(min_max_normalize(&[1.0, 3.0, 5.0]).unwrap(), vec![0.0, 0.5, 1.0]);
        assert_eq!(min_max_normalize(&[2.0, 2.0, 2.0]).unwrap(), vec![0.5; 3]);
        assert_eq!(min_max_normalize(&[7.0]).unwrap(), vec![0.5]);
        assert!(min_max_normalize(&[1.0, f64::NAN]).is_err());
        let v = [0.3, -1.2, 4.0, 2.2];
        let t: Vec<f64> = v.iter().map(|x| 2.5 * x + 7.0).collect();
        let (a, b) = (min_max_normalize(&v).unwrap(), min_max_normalize(&t).unwrap());
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() < 1e-15);
        }
    }

    #[test]
    fn score_examples() {
        let j = [0.2, 1.0, 0.0];
        let h = [0.9, 0.1, 1.0];
        assert_eq!(score(&j, &h, 0.0).unwrap(), j.to_vec());
        assert_eq!(weighted_score(&j, &h, 1.0), h.to_vec());
        let s = score(&[1.0, 0.0], &[0.0, 1.0], 0.1).unwrap();
        assert!((s[0] - 0.9).abs() < 1e-15 && (s[1] - 0.1).abs() < 1e-15);
        assert!(matches!(score(&j, &h, 1.0), Err(Error::InvalidConfig(_))));
        assert!(score(&j, &h, -0.1).is_err());
    }

    #[test]
    fn argmax_ties_go_low() {
        assert_eq!(argmax_lowest(&[0.2, 0.9, 0.9]), 1);
        assert_eq!(argmax_lowest(&[0.5]), 0);
        assert_eq!(argmin_lowest(&[5.0, 1.0, 1.0]), 1);
    }

    #[test]
    fn bound_examples() {
        assert_eq!(theorem1_bound(0.0, &[1.0, 5.0], 0.25), 0.25);
        assert!((theorem1_bound(0.1, &[0.0, 9.0, 3.0], 0.0) - -1.0).abs() < 1e-15);
        assert!((theorem1_bound(0.5, &[1.0, 5.0], 0.5) - -3.5).abs() < 1e-15);
    }

    fn marker_policy(v: f64) -> Policy {
        let mut net = FlatParamNet::zeros(&[1, 2, 2]).unwrap();
        let n = net.num_params();
        net.set_flat(&vec![v; n]).unwrap();
        Policy::from_parts(net, vec![], Family::Categorical).unwrap()
    }

    fn buffer_with(perf: &[f64]) -> PolicyBuffer {
        let mut b = PolicyBuffer::new((0..perf.len()).map(|k| marker_policy(k as f64)).collect(), vec![1.0; perf.len()]);
        b.perf = perf.to_vec();
        b
    }

    #[test]
    fn pick_with_alpha_zero_ignores_entropy() {
        let mut b = buffer_with(&[5.0, 1.0, 3.0]);
        b.entropy = vec![0.0, 2.0, 1.0];
        assert_eq!(b.pick(0.0).unwrap(), 0);
        let single = buffer_with(&[0.0]);
        assert_eq!(single.pick(0.1).unwrap(), 0);
    }

    #[test]
    fn self_replacement_touches_only_its_slot() {
        let mut b = buffer_with(&[1.0, 2.0, 3.0]);
        let before = b.clone();
        let slot = b.replace(1, marker_policy(9.0), 4.0, 0.5, Mode::Mppo);
        assert_eq!(slot, 1);
        assert_eq!(b.policies[0], before.policies[0]);
        assert_eq!(b.policies[2], before.policies[2]);
        assert_eq!(b.policies[1], marker_policy(9.0));
    }

    #[test]
    fn replace_worst_semantics() {
        let mut b = buffer_with(&[5.0, 1.0, 3.0]);
        let pre = b.policies[0].clone();
        let slot = b.replace(0, marker_policy(9.0), 6.0, 0.5, Mode::MppoReplaceWorst);
        assert_eq!(slot, 1);
        assert_eq!(b.policies[1], marker_policy(9.0));
        assert_eq!(b.policies[0], pre);

        let mut a = buffer_with(&[5.0, 1.0, 3.0]);
        let mut c = a.clone();
        a.replace(1, marker_policy(9.0), 2.0, 0.5, Mode::MppoReplaceWorst);
        c.replace(1, marker_policy(9.0), 2.0, 0.5, Mode::Mppo);
        assert_eq!(a, c);
    }

    #[test]
    fn variant_validation() {
        let v = VariantConfig { mode: Mode::SinglePath, alpha: 0.1, k: 8 }.validated().unwrap();
        assert_eq!(v.k, 1);
        assert!(VariantConfig { mode: Mode::Mppo, alpha: 1.0, k: 8 }.validated().is_err());
        assert!(VariantConfig { mode: Mode::Mppo, alpha: 0.1, k: 0 }.validated().is_err());
        for m in Mode::ALL {
            assert_eq!(m.name().parse::<Mode>().unwrap(), m);
        }
    }
}
