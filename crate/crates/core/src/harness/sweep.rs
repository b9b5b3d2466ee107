//! Seed-by-config cross products dispatched over the worker pool.

use std::path::PathBuf;

use super::config::RunConfig;
use super::run::run;
use crate::error::{Error, Result};
use crate::parallel;

/// Parses `"0-5"`, `"3"` or `"0,2,7"`.
pub fn parse_seeds(spec: &str) -> Result<Vec<u64>> {
    let bad = || Error::InvalidConfig(format!("cannot parse seed list {spec:?}"));
    let mut seeds = Vec::new();
    for part in spec.split(',') {
        let part = part.trim();
        match part.split_once('-') {
            Some((a, b)) => {
                let (a, b): (u64, u64) = (a.trim().parse().map_err(|_| bad())?, b.trim().parse().map_err(|_| bad())?);
                if a > b {
                    return Err(bad());
                }
                seeds.extend(a..=b);
            }
            None => seeds.push(part.parse().map_err(|_| bad())?),
        }
    }
    Ok(seeds)
}

/// One config per (variant, seed), with output directories resolved so
/// that runs never share a directory.
pub fn expand(variants: &[RunConfig], seeds: &[u64]) -> Vec<RunConfig> {
    let mut out = Vec::with_capacity(variants.len() * seeds.len());
    for v in variants {
        for &s in seeds {
            let mut c = v.clone();
            c.seed = s;
            c.output_dir = Some(match &v.output_dir {
                Some(d) => d.join(c.variant_label()).join(format!("seed{s}")),
                None => c.resolved_output_dir(),
            });
            out.push(c);
        }
    }
    out
}

/// Runs every config; results come back in input order.
pub fn sweep(configs: &[RunConfig]) -> Vec<Result<PathBuf>> {
    for c in configs {
        if let Err(e) = c.validate() {
            return configs.iter().map(|_| Err(e.clone())).collect();
        }
    }
    parallel::map(configs.len(), |i| run(&configs[i]))
}
