use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use mppo::harness::{self, aggregate, heatmap, sweep, RunConfig};
use mppo::{Error, Result};

#[derive(Parser)]
#[command(name = "mppo", version, about = "Multi-path policy optimization experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train one configuration.
    Run {
        /// Config file; defaults apply when omitted.
        config: Option<PathBuf>,
        /// `key=value` overrides applied after the file.
        #[arg(long = "set", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
    },
    /// Train every config file for every seed, several runs at a time.
    Sweep {
        #[arg(required = true)]
        configs: Vec<PathBuf>,
        /// Seed list such as `0-5` or `0,3,4`.
        #[arg(long, default_value = "0-5")]
        seeds: String,
        #[arg(long = "set", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
    },
    /// Summarize finished runs found under the given directories.
    Aggregate {
        #[arg(required = true)]
        roots: Vec<PathBuf>,
        /// Where summary.csv and curves.csv go.
        #[arg(long, short, default_value = ".")]
        out: PathBuf,
    },
    /// Merge heatmap.csv files of runs under the given directories and print them.
    Heatmap {
        #[arg(required = true)]
        roots: Vec<PathBuf>,
        /// Also write the merged counts here.
        #[arg(long, short)]
        out: Option<PathBuf>,
    },
}

fn load(config: Option<&PathBuf>, overrides: &[String]) -> Result<RunConfig> {
    let mut cfg = match config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::from_kv("")?,
    };
    for o in overrides {
        let (k, v) = o
            .split_once('=')
            .ok_or_else(|| Error::InvalidConfig(format!("override {o:?} is not KEY=VALUE")))?;
        cfg.set(k.trim(), v.trim())?;
    }
    cfg.normalize();
    cfg.validate()?;
    Ok(cfg)
}

fn execute(command: Command) -> Result<()> {
    match command {
        Command::Run { config, overrides } => {
            let cfg = load(config.as_ref(), &overrides)?;
            println!("{}", harness::run(&cfg)?.display());
        }
        Command::Sweep { configs, seeds, overrides } => {
            let seeds = sweep::parse_seeds(&seeds)?;
            let variants = configs.iter().map(|c| load(Some(c), &overrides)).collect::<Result<Vec<_>>>()?;
            let all = sweep::expand(&variants, &seeds);
            let mut failed = 0;
            for (cfg, res) in all.iter().zip(sweep::sweep(&all)) {
                match res {
                    Ok(dir) => println!("{}", dir.display()),
                    Err(e) => {
                        failed += 1;
                        eprintln!("{} seed {}: {e}", cfg.variant_label(), cfg.seed);
                    }
                }
            }
            if failed > 0 {
                return Err(Error::InvalidState(format!("{failed} of {} runs failed", all.len())));
            }
        }
        Command::Aggregate { roots, out } => {
            for g in aggregate::aggregate(&roots, &out)? {
                let i = g.interval;
                println!(
                    "{:<40} seeds {:>2}  final {:.4} +/- {:.4}{}",
                    g.config.variant_label(),
                    i.n,
                    i.mean,
                    i.half_width,
                    if i.degenerate { "  (single seed)" } else { "" }
                );
            }
        }
        Command::Heatmap { roots, out } => {
            let mut logs = Vec::new();
            for root in &roots {
                for dir in aggregate::find_runs(root)? {
                    logs.push(heatmap::read_heatmap(&dir.join("heatmap.csv"))?);
                }
            }
            let merged = heatmap::merge_all(&logs)?;
            print!("{}", heatmap::render(&merged));
            if let Some(p) = out {
                harness::run::write_heatmap(&p, &merged)?;
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match execute(Cli::parse().command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
