//! One seeded training run and its CSV artifacts.

use std::fs;
use std::path::{Path, PathBuf};

use log::info;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::config::{EnvKind, RunConfig};
use crate::controller::{IterationRecord, Trainer};
use crate::env::VisitationLog;
use crate::error::Result;
use crate::rollout::evaluate;

/// Stream labels of the three per-run generators.
pub const INIT_STREAM: u64 = 1;
pub const ROLLOUT_STREAM: u64 = 2;
pub const EVAL_STREAM: u64 = 3;

pub fn stream(seed: u64, label: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(label);
    rng
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalRecord {
    pub env_steps: usize,
    pub mean_return: f64,
    pub returns: Vec<f64>,
    pub picked: usize,
    pub perf: Vec<f64>,
    pub entropy: Vec<f64>,
}

/// Everything a run produces, also written to disk by [`run`].
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub evals: Vec<EvalRecord>,
    pub iterations: Vec<IterationRecord>,
    pub visits: VisitationLog,
}

/// Trains until `total_steps` environment steps are consumed, evaluating the
/// current policy greedily at step 0 and at the first iteration boundary
/// past every multiple of `eval_interval`.
pub fn train(cfg: &RunConfig) -> Result<RunOutput> {
    cfg.validate()?;
    let repeated_obs = cfg.env == EnvKind::Maze;
    let mut init_rng = stream(cfg.seed, INIT_STREAM);
    let mut eval_rng = stream(cfg.seed, EVAL_STREAM);
    let mut eval_env = cfg.make_env()?;
    let mut trainer = Trainer::new(
        cfg.make_env()?,
        repeated_obs,
        cfg.algo(),
        cfg.variant(),
        &mut init_rng,
        stream(cfg.seed, ROLLOUT_STREAM),
    )?;

    let mut evals = Vec::new();
    let mut iterations = Vec::new();
    let mut eval_now = |trainer: &Trainer, rng: &mut ChaCha8Rng| -> Result<EvalRecord> {
        let returns = evaluate(eval_env.as_mut(), trainer.current_policy(), cfg.eval_episodes, repeated_obs, rng)?;
        Ok(EvalRecord {
            env_steps: trainer.env_steps(),
            mean_return: returns.iter().sum::<f64>() / returns.len() as f64,
            returns,
            picked: trainer.current_index(),
            perf: trainer.buffer().perf.clone(),
            entropy: trainer.buffer().entropy.clone(),
        })
    };
    evals.push(eval_now(&trainer, &mut eval_rng)?);
    let mut next_eval = cfg.eval_interval;
    while trainer.env_steps() < cfg.total_steps {
        iterations.push(trainer.iterate()?);
        if trainer.env_steps() >= next_eval {
            let rec = eval_now(&trainer, &mut eval_rng)?;
            info!(
                "seed {} {} steps {}: eval {:.3} picked {}",
                cfg.seed,
                cfg.variant_label(),
                rec.env_steps,
                rec.mean_return,
                rec.picked
            );
            evals.push(rec);
            while next_eval <= trainer.env_steps() {
                next_eval += cfg.eval_interval;
            }
        }
    }
    Ok(RunOutput { evals, iterations, visits: trainer.visits().clone() })
}

/// Trains and writes the artifacts into the config's output directory.
pub fn run(cfg: &RunConfig) -> Result<PathBuf> {
    let dir = cfg.resolved_output_dir();
    let out = train(cfg)?;
    write_artifacts(&dir, cfg, &out)?;
    Ok(dir)
}

fn fmt_all(xs: &[f64]) -> impl Iterator<Item = String> + '_ {
    xs.iter().map(|x| x.to_string())
}

pub fn write_artifacts(dir: &Path, cfg: &RunConfig, out: &RunOutput) -> Result<()> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join("config.txt"), cfg.to_kv())?;

    let mut w = csv::Writer::from_path(dir.join("eval.csv"))?;
    let mut header = vec!["env_steps".to_string(), "mean_return".into()];
    header.extend((0..cfg.eval_episodes).map(|i| format!("ep_return_{i}")));
    header.push("picked_index".into());
    w.write_record(&header)?;
    for e in &out.evals {
        let mut row = vec![e.env_steps.to_string(), e.mean_return.to_string()];
        row.extend(fmt_all(&e.returns));
        row.push(e.picked.to_string());
        w.write_record(&row)?;
    }
    w.flush()?;

    let mut w = csv::Writer::from_path(dir.join("entropy.csv"))?;
    w.write_record(["env_steps", "picked_index", "picked_entropy", "mean_entropy"])?;
    for e in &out.evals {
        let mean = e.entropy.iter().sum::<f64>() / e.entropy.len() as f64;
        w.write_record([e.env_steps.to_string(), e.picked.to_string(), e.entropy[e.picked].to_string(), mean.to_string()])?;
    }
    w.flush()?;

    let k = cfg.k;
    let mut w = csv::Writer::from_path(dir.join("buffer.csv"))?;
    let mut header = vec!["iteration".to_string(), "picked".into()];
    for name in ["J", "H", "score"] {
        header.extend((0..k).map(|i| format!("{name}_{i}")));
    }
    header.extend(["gain".into(), "kl".into()]);
    w.write_record(&header)?;
    for r in &out.iterations {
        let mut row = vec![r.iteration.to_string(), r.picked.to_string()];
        row.extend(fmt_all(&r.perf));
        row.extend(fmt_all(&r.entropy));
        row.extend(fmt_all(&r.scores));
        row.extend([r.gain.to_string(), r.kl.to_string()]);
        w.write_record(&row)?;
    }
    w.flush()?;

    let mut w = csv::Writer::from_path(dir.join("switches.csv"))?;
    w.write_record(["iteration", "from", "to", "measured_delta", "theorem1_bound", "eps_est"])?;
    for s in out.iterations.iter().filter_map(|r| r.switch.as_ref()) {
        w.write_record([
            s.iteration.to_string(),
            s.from.to_string(),
            s.to.to_string(),
            s.measured_delta.to_string(),
            s.bound.to_string(),
            s.eps_est.to_string(),
        ])?;
    }
    w.flush()?;

    let mut w = csv::Writer::from_path(dir.join("diversity.csv"))?;
    w.write_record(["iteration", "env_steps", "mean_pairwise_distance"])?;
    for r in &out.iterations {
        w.write_record([r.iteration.to_string(), r.env_steps.to_string(), r.diversity.to_string()])?;
    }
    w.flush()?;

    write_heatmap(&dir.join("heatmap.csv"), &out.visits)
}

pub fn write_heatmap(path: &Path, log: &VisitationLog) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["row", "col", "count"])?;
    for r in 0..log.rows {
        for c in 0..log.cols {
            w.write_record([r.to_string(), c.to_string(), log.get(r, c).to_string()])?;
        }
    }
    w.flush()?;
    Ok(())
}
