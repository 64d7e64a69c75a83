use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use olla_cli::config::{set_key, RunConfig};
use olla_cli::report::{self, build_report, compare_samples, read_samples, write_report};
use olla_cli::run_experiment;
use serde_json::Value;

#[derive(Parser)]
#[command(name = "olla", version, about = "Constrained sampling experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Worker threads (default: hardware parallelism).
    #[arg(long)]
    threads: Option<usize>,
    /// Overrides the config's base_seed.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment.
    Run {
        config: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Run one experiment per value of a key, e.g. `--vary alpha=1,10,100`.
    Sweep {
        config: PathBuf,
        #[arg(long)]
        vary: String,
        #[command(flatten)]
        common: Common,
    },
    /// Write per-chain, per-step constraint violation series.
    Decay {
        config: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// W2² and energy distance between two samples.csv files.
    Compare {
        samples_a: PathBuf,
        samples_b: PathBuf,
        /// Also write compare.json into this directory.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn load_doc(path: &Path) -> Result<Value> {
    let text =
        std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("malformed JSON in {}", path.display()))
}

fn resolve(doc: &Value, path: &Path, seed: Option<u64>) -> Result<RunConfig> {
    let mut cfg = RunConfig::from_value(doc).with_context(|| format!("in {}", path.display()))?;
    cfg.anchor_reference(path);
    if let Some(s) = seed {
        cfg.base_seed = s;
    }
    Ok(cfg)
}

/// Runs and writes one experiment; returns whether every chain diverged.
fn run_one(cfg: &RunConfig, common: &Common, out: &Path) -> Result<bool> {
    let exp = run_experiment(cfg, common.threads)?;
    let rep = build_report(&exp)?;
    let paths = write_report(&rep, exp.problem.dim, out)?;
    for p in paths {
        println!("{}", p.display());
    }
    Ok(rep.all_diverged)
}

fn main_inner(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Run { config, common } => {
            let cfg = resolve(&load_doc(&config)?, &config, common.seed)?;
            run_one(&cfg, &common, &common.out)
        }
        Command::Sweep {
            config,
            vary,
            common,
        } => {
            let (key, values) = vary
                .split_once('=')
                .context("--vary expects key=v1,v2,...")?;
            let doc = load_doc(&config)?;
            let mut any_dead = false;
            for v in values.split(',') {
                let mut d = doc.clone();
                set_key(&mut d, key, v)?;
                let cfg =
                    resolve(&d, &config, common.seed).with_context(|| format!("{key}={v}"))?;
                let dir = common.out.join(format!("{key}={v}"));
                any_dead |= run_one(&cfg, &common, &dir)?;
            }
            Ok(any_dead)
        }
        Command::Decay { config, common } => {
            let cfg = resolve(&load_doc(&config)?, &config, common.seed)?;
            let exp = run_experiment(&cfg, common.threads)?;
            std::fs::create_dir_all(&common.out)
                .with_context(|| format!("creating {}", common.out.display()))?;
            let path = common.out.join("decay.csv");
            report::write_file(&path, &report::decay_csv(&exp))?;
            println!("{}", path.display());
            Ok(exp.chains.iter().all(|r| r.diverged.is_some()))
        }
        Command::Compare {
            samples_a,
            samples_b,
            out,
        } => {
            let a = read_samples(&samples_a)?;
            let b = read_samples(&samples_b)?;
            if a.first().map(Vec::len) != b.first().map(Vec::len) {
                bail!("sample files have different dimensions");
            }
            let mut text = serde_json::to_string_pretty(&compare_samples(&a, &b)?)?;
            text.push('\n');
            print!("{text}");
            if let Some(dir) = out {
                std::fs::create_dir_all(&dir)
                    .with_context(|| format!("creating {}", dir.display()))?;
                report::write_file(&dir.join("compare.json"), &text)?;
            }
            Ok(false)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match main_inner(Cli::parse()) {
        Ok(false) => ExitCode::SUCCESS,
        Ok(true) => {
            eprintln!("error: every chain diverged");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
