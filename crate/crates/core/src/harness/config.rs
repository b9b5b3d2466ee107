//! Run configuration and its flat `key = value` text form.
//!
//! Blank lines and lines starting with `#` are ignored. Unknown keys are
//! rejected. Every key is optional; missing keys take the defaults of the
//! chosen algorithm.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::controller::{AlgoConfig, Backend, GainAdvantages, Mode, VariantConfig};
use crate::env::{EpisodicEnv, MazeEnv, MazeLayout, SparseCartPoleSwingupEnv};
use crate::error::{Error, Result};
use crate::ppo::PpoConfig;
use crate::trpo::TrpoConfig;

/// Environment variable naming the directory runs are written under when a
/// config has no explicit `output_dir`.
pub const OUTPUT_ROOT_VAR: &str = "MPPO_OUTPUT_ROOT";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EnvKind {
    Maze,
    Swingup,
}

impl EnvKind {
    pub fn name(self) -> &'static str {
        match self {
            EnvKind::Maze => "maze",
            EnvKind::Swingup => "swingup",
        }
    }
}

impl FromStr for EnvKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "maze" => Ok(EnvKind::Maze),
            "swingup" => Ok(EnvKind::Swingup),
            _ => Err(Error::InvalidConfig(format!("unknown env {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Algorithm {
    Trpo,
    Ppo,
}

impl Algorithm {
    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Trpo => "trpo",
            Algorithm::Ppo => "ppo",
        }
    }
}

impl FromStr for Algorithm {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "trpo" => Ok(Algorithm::Trpo),
            "ppo" => Ok(Algorithm::Ppo),
            _ => Err(Error::InvalidConfig(format!("unknown algorithm {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub env: EnvKind,
    pub algorithm: Algorithm,
    pub mode: Mode,
    pub k: usize,
    pub alpha: f64,
    pub total_steps: usize,
    pub eval_interval: usize,
    pub eval_episodes: usize,
    pub seed: u64,
    pub gamma: f64,
    pub lam: f64,
    pub batch_size: usize,
    pub value_iters: usize,
    pub value_minibatch: usize,
    pub value_step_size: f64,
    pub gain_advantages: GainAdvantages,
    pub trpo: TrpoConfig,
    pub ppo: PpoConfig,
    /// Maze layout file; the shipped layout when unset.
    pub maze_layout: Option<PathBuf>,
    pub output_dir: Option<PathBuf>,
}

impl RunConfig {
    /// Defaults for `algorithm` with the given variant.
    pub fn new(env: EnvKind, algorithm: Algorithm, mode: Mode, k: usize, alpha: f64, seed: u64) -> Self {
        let algo = match algorithm {
            Algorithm::Trpo => AlgoConfig::trpo(),
            Algorithm::Ppo => AlgoConfig::ppo(),
        };
        Self {
            env,
            algorithm,
            mode,
            k: if mode == Mode::SinglePath { 1 } else { k },
            alpha,
            total_steps: 1_000_000,
            eval_interval: 10_000,
            eval_episodes: 10,
            seed,
            gamma: algo.gamma,
            lam: algo.lam,
            batch_size: algo.batch_size,
            value_iters: algo.value_iters,
            value_minibatch: algo.value_minibatch,
            value_step_size: algo.value_step_size,
            gain_advantages: algo.gain_advantages,
            trpo: TrpoConfig::default(),
            ppo: PpoConfig::default(),
            maze_layout: None,
            output_dir: None,
        }
    }

    pub fn algo(&self) -> AlgoConfig {
        AlgoConfig {
            gamma: self.gamma,
            lam: self.lam,
            batch_size: self.batch_size,
            value_iters: self.value_iters,
            value_minibatch: self.value_minibatch,
            value_step_size: self.value_step_size,
            backend: match self.algorithm {
                Algorithm::Trpo => Backend::Trpo(self.trpo),
                Algorithm::Ppo => Backend::Ppo(self.ppo),
            },
            gain_advantages: self.gain_advantages,
        }
    }

    pub fn variant(&self) -> VariantConfig {
        VariantConfig { mode: self.mode, alpha: self.alpha, k: self.k }
    }

    pub fn validate(&self) -> Result<()> {
        self.algo().validate()?;
        self.variant().validated()?;
        if self.eval_interval == 0 || self.eval_episodes == 0 {
            return Err(Error::InvalidConfig("eval_interval and eval_episodes must be positive".into()));
        }
        if self.mode.is_multi() && self.batch_size < self.k {
            return Err(Error::InvalidConfig("batch_size must be at least K for population modes".into()));
        }
        Ok(())
    }

    /// Fresh training environment.
    pub fn make_env(&self) -> Result<Box<dyn EpisodicEnv>> {
        Ok(match self.env {
            EnvKind::Maze => {
                let layout = match &self.maze_layout {
                    Some(p) => std::fs::read_to_string(p)?.parse::<MazeLayout>()?,
                    None => MazeLayout::default(),
                };
                Box::new(MazeEnv::new(layout))
            }
            EnvKind::Swingup => Box::new(SparseCartPoleSwingupEnv::default()),
        })
    }

    /// Directory name shared by every seed of this variant.
    pub fn variant_label(&self) -> String {
        format!("{}_{}_{}_k{}_a{}", self.env.name(), self.algorithm.name(), self.mode, self.k, self.alpha)
    }

    /// `output_dir` if set, else `$MPPO_OUTPUT_ROOT/<variant>/seed<seed>`
    /// (`runs/` when the variable is unset).
    pub fn resolved_output_dir(&self) -> PathBuf {
        if let Some(d) = &self.output_dir {
            return d.clone();
        }
        let root = std::env::var_os(OUTPUT_ROOT_VAR).map(PathBuf::from).unwrap_or_else(|| PathBuf::from("runs"));
        root.join(self.variant_label()).join(format!("seed{}", self.seed))
    }

    pub fn to_kv(&self) -> String {
        let mut s = String::new();
        let mut kv = |k: &str, v: String| {
            let _ = writeln!(s, "{k} = {v}");
        };
        kv("env", self.env.name().into());
        kv("algorithm", self.algorithm.name().into());
        kv("mode", self.mode.to_string());
        kv("k", self.k.to_string());
        kv("alpha", self.alpha.to_string());
        kv("total_steps", self.total_steps.to_string());
        kv("eval_interval", self.eval_interval.to_string());
        kv("eval_episodes", self.eval_episodes.to_string());
        kv("seed", self.seed.to_string());
        kv("gamma", self.gamma.to_string());
        kv("lam", self.lam.to_string());
        kv("batch_size", self.batch_size.to_string());
        kv("value_iters", self.value_iters.to_string());
        kv("value_minibatch", self.value_minibatch.to_string());
        kv("value_step_size", self.value_step_size.to_string());
        kv(
            "gain_advantages",
            match self.gain_advantages {
                GainAdvantages::Raw => "raw",
                GainAdvantages::Normalized => "normalized",
            }
            .into(),
        );
        kv("max_kl", self.trpo.max_kl.to_string());
        kv("cg_iters", self.trpo.cg_iters.to_string());
        kv("cg_damping", self.trpo.cg_damping.to_string());
        kv("backtrack_coef", self.trpo.backtrack_coef.to_string());
        kv("max_backtracks", self.trpo.max_backtracks.to_string());
        kv("fvp_eps", self.trpo.fvp_eps.to_string());
        kv("clip_eps", self.ppo.clip_eps.to_string());
        kv("ppo_epochs", self.ppo.epochs.to_string());
        kv("ppo_minibatch", self.ppo.minibatch.to_string());
        kv("ppo_step_size", self.ppo.step_size.to_string());
        kv("max_grad_norm", self.ppo.max_grad_norm.to_string());
        if let Some(p) = &self.maze_layout {
            kv("maze_layout", p.display().to_string());
        }
        if let Some(p) = &self.output_dir {
            kv("output_dir", p.display().to_string());
        }
        s
    }

    /// Parses the key-value form. `env` and `algorithm` select the defaults
    /// every other key overrides.
    pub fn from_kv(text: &str) -> Result<Self> {
        let mut pairs = Vec::new();
        for (n, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::InvalidConfig(format!("line {}: expected `key = value`", n + 1)))?;
            pairs.push((k.trim().to_string(), v.trim().to_string()));
        }
        let get = |key: &str| pairs.iter().rev().find(|(k, _)| k == key).map(|(_, v)| v.as_str());
        let env: EnvKind = get("env").unwrap_or("maze").parse()?;
        let algorithm: Algorithm = get("algorithm").unwrap_or("trpo").parse()?;
        let mode: Mode = get("mode").unwrap_or("mppo").parse()?;
        let mut cfg = RunConfig::new(env, algorithm, mode, 8, 0.1, 0);
        for (k, v) in &pairs {
            cfg.set(k, v)?;
        }
        cfg.normalize();
        Ok(cfg)
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        fn num<T: FromStr>(key: &str, v: &str) -> Result<T> {
            v.parse().map_err(|_| Error::InvalidConfig(format!("{key}: cannot parse {v:?}")))
        }
        match key {
            "env" => self.env = value.parse()?,
            "algorithm" => self.algorithm = value.parse()?,
            "mode" => self.mode = value.parse()?,
            "k" => self.k = num(key, value)?,
            "alpha" => self.alpha = num(key, value)?,
            "total_steps" => self.total_steps = num(key, value)?,
            "eval_interval" => self.eval_interval = num(key, value)?,
            "eval_episodes" => self.eval_episodes = num(key, value)?,
            "seed" => self.seed = num(key, value)?,
            "gamma" => self.gamma = num(key, value)?,
            "lam" => self.lam = num(key, value)?,
            "batch_size" => self.batch_size = num(key, value)?,
            "value_iters" => self.value_iters = num(key, value)?,
            "value_minibatch" => self.value_minibatch = num(key, value)?,
            "value_step_size" => self.value_step_size = num(key, value)?,
            "gain_advantages" => {
                self.gain_advantages = match value {
                    "raw" => GainAdvantages::Raw,
                    "normalized" => GainAdvantages::Normalized,
                    _ => return Err(Error::InvalidConfig(format!("gain_advantages: unknown {value:?}"))),
                }
            }
            "max_kl" => self.trpo.max_kl = num(key, value)?,
            "cg_iters" => self.trpo.cg_iters = num(key, value)?,
            "cg_damping" => self.trpo.cg_damping = num(key, value)?,
            "backtrack_coef" => self.trpo.backtrack_coef = num(key, value)?,
            "max_backtracks" => self.trpo.max_backtracks = num(key, value)?,
            "fvp_eps" => self.trpo.fvp_eps = num(key, value)?,
            "clip_eps" => self.ppo.clip_eps = num(key, value)?,
            "ppo_epochs" => self.ppo.epochs = num(key, value)?,
            "ppo_minibatch" => self.ppo.minibatch = num(key, value)?,
            "ppo_step_size" => self.ppo.step_size = num(key, value)?,
            "max_grad_norm" => self.ppo.max_grad_norm = num(key, value)?,
            "maze_layout" => self.maze_layout = Some(PathBuf::from(value)),
            "output_dir" => self.output_dir = Some(PathBuf::from(value)),
            _ => return Err(Error::InvalidConfig(format!("unknown key {key:?}"))),
        }
        Ok(())
    }

    /// Forces `k = 1` for the plain backend. Call after a batch of [`set`](Self::set)s.
    pub fn normalize(&mut self) {
        if self.mode == Mode::SinglePath {
            self.k = 1;
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_kv(&std::fs::read_to_string(path)?)
    }

    /// Same experiment up to the seed and output location.
    pub fn same_experiment(&self, other: &RunConfig) -> bool {
        let strip = |c: &RunConfig| {
            let mut c = c.clone();
            c.seed = 0;
            c.output_dir = None;
            c.to_kv()
        };
        strip(self) == strip(other)
    }
}
