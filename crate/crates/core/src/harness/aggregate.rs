//! Multi-seed summaries: mean final return with a 75% t-interval, and
//! per-checkpoint mean curves.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use statrs::distribution::{ContinuousCDF, StudentsT};

use super::config::RunConfig;
use crate::error::{Error, Result};

pub const CONFIDENCE: f64 = 0.75;
pub const CI_METHOD: &str = "student_t_75";

/// One finished run as read back from disk.
#[derive(Debug, Clone)]
pub struct RunRecord {
    pub dir: PathBuf,
    pub config: RunConfig,
    /// `(env_steps, mean_return)` per evaluation.
    pub curve: Vec<(usize, f64)>,
}

impl RunRecord {
    pub fn load(dir: &Path) -> Result<Self> {
        let config = RunConfig::load(&dir.join("config.txt"))?;
        let mut rdr = csv::Reader::from_path(dir.join("eval.csv"))?;
        let mut curve = Vec::new();
        for row in rdr.records() {
            let row = row?;
            let parse_err = || Error::InvalidInput(format!("{}: malformed eval.csv", dir.display()));
            let steps = row.get(0).and_then(|s| s.parse().ok()).ok_or_else(parse_err)?;
            let ret = row.get(1).and_then(|s| s.parse().ok()).ok_or_else(parse_err)?;
            curve.push((steps, ret));
        }
        if curve.is_empty() {
            return Err(Error::InvalidInput(format!("{}: eval.csv has no records", dir.display())));
        }
        Ok(Self { dir: dir.to_path_buf(), config, curve })
    }

    pub fn final_return(&self) -> f64 {
        self.curve.last().map(|c| c.1).unwrap_or(0.0)
    }
}

/// Mean and 75% two-sided t-interval half-width. A single value gives a
/// zero half-width with `degenerate` set.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval {
    pub n: usize,
    pub mean: f64,
    pub half_width: f64,
    pub degenerate: bool,
}

pub fn t_interval(xs: &[f64], confidence: f64) -> Result<Interval> {
    if xs.is_empty() {
        return Err(Error::InvalidInput("no values to summarize".into()));
    }
    let n = xs.len();
    let mean = xs.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return Ok(Interval { n, mean, half_width: 0.0, degenerate: true });
    }
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1) as f64;
    let t = StudentsT::new(0.0, 1.0, (n - 1) as f64)
        .map_err(|e| Error::Numerical(e.to_string()))?
        .inverse_cdf(0.5 + confidence / 2.0);
    Ok(Interval { n, mean, half_width: t * (var / n as f64).sqrt(), degenerate: false })
}

#[derive(Debug, Clone)]
pub struct GroupSummary {
    /// Representative config (seed of the first run).
    pub config: RunConfig,
    pub seeds: Vec<u64>,
    pub final_returns: Vec<f64>,
    pub interval: Interval,
    /// `(env_steps, mean over seeds, seeds contributing)`.
    pub curve: Vec<(usize, f64, usize)>,
}

/// Groups runs by (env, algorithm, mode, K, alpha). Runs in a group must
/// agree on every other setting and have distinct seeds.
pub fn summarize(runs: &[RunRecord]) -> Result<Vec<GroupSummary>> {
    let mut groups: BTreeMap<String, Vec<&RunRecord>> = BTreeMap::new();
    for r in runs {
        groups.entry(r.config.variant_label()).or_default().push(r);
    }
    let mut out = Vec::new();
    for (label, members) in groups {
        let first = members[0];
        let mut seeds = Vec::new();
        for m in &members {
            if !first.config.same_experiment(&m.config) {
                return Err(Error::InvalidInput(format!(
                    "{label}: {} and {} were run with different settings",
                    first.dir.display(),
                    m.dir.display()
                )));
            }
            if seeds.contains(&m.config.seed) {
                return Err(Error::InvalidInput(format!("{label}: seed {} appears twice", m.config.seed)));
            }
            seeds.push(m.config.seed);
        }
        let final_returns: Vec<f64> = members.iter().map(|m| m.final_return()).collect();
        let interval = t_interval(&final_returns, CONFIDENCE)?;
        let mut by_step: BTreeMap<usize, (f64, usize)> = BTreeMap::new();
        for m in &members {
            for &(s, r) in &m.curve {
                let e = by_step.entry(s).or_default();
                e.0 += r;
                e.1 += 1;
            }
        }
        let curve = by_step.into_iter().map(|(s, (sum, n))| (s, sum / n as f64, n)).collect();
        out.push(GroupSummary { config: first.config.clone(), seeds, final_returns, interval, curve });
    }
    Ok(out)
}

/// Every directory at or below `root` that holds a `config.txt` and an `eval.csv`.
pub fn find_runs(root: &Path) -> Result<Vec<PathBuf>> {
    let mut found = Vec::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        if dir.join("config.txt").is_file() && dir.join("eval.csv").is_file() {
            found.push(dir);
            continue;
        }
        if dir.is_dir() {
            for entry in fs::read_dir(&dir)? {
                let p = entry?.path();
                if p.is_dir() {
                    stack.push(p);
                }
            }
        }
    }
    found.sort();
    Ok(found)
}

/// Loads the runs under `roots`, writes `summary.csv` and `curves.csv` into
/// `out_dir`, and returns the summaries.
pub fn aggregate(roots: &[PathBuf], out_dir: &Path) -> Result<Vec<GroupSummary>> {
    let mut runs = Vec::new();
    for root in roots {
        for dir in find_runs(root)? {
            runs.push(RunRecord::load(&dir)?);
        }
    }
    if runs.is_empty() {
        return Err(Error::InvalidInput("no completed runs found".into()));
    }
    let groups = summarize(&runs)?;
    fs::create_dir_all(out_dir)?;

    let mut w = csv::Writer::from_path(out_dir.join("summary.csv"))?;
    w.write_record([
        "env",
        "algorithm",
        "mode",
        "k",
        "alpha",
        "n_seeds",
        "mean_final_return",
        "ci75_half_width",
        "ci_method",
        "degenerate",
    ])?;
    for g in &groups {
        let c = &g.config;
        w.write_record([
            c.env.name().to_string(),
            c.algorithm.name().into(),
            c.mode.to_string(),
            c.k.to_string(),
            c.alpha.to_string(),
            g.interval.n.to_string(),
            g.interval.mean.to_string(),
            g.interval.half_width.to_string(),
            CI_METHOD.into(),
            g.interval.degenerate.to_string(),
        ])?;
    }
    w.flush()?;

    let mut w = csv::Writer::from_path(out_dir.join("curves.csv"))?;
    w.write_record(["env", "algorithm", "mode", "k", "alpha", "env_steps", "mean_return", "n_seeds"])?;
    for g in &groups {
        let c = &g.config;
        for &(s, m, n) in &g.curve {
            w.write_record([
                c.env.name().to_string(),
                c.algorithm.name().into(),
                c.mode.to_string(),
                c.k.to_string(),
                c.alpha.to_string(),
                s.to_string(),
                m.to_string(),
                n.to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(groups)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn interval_edge_cases() {
        let one = t_interval(&[0.7], CONFIDENCE).unwrap();
        assert!(one.degenerate && one.half_width == 0.0 && one.mean == 0.7);
        let same = t_interval(&[2.0; 4], CONFIDENCE).unwrap();
        assert_eq!(same.half_width, 0.0);
        assert!(!same.degenerate);
        assert!(t_interval(&[], CONFIDENCE).is_err());
    }
}
