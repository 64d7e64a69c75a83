//! Parallel multi-chain execution.

use std::time::Instant;

use anyhow::{Context, Result};
use olla_core::sampler::{run_chain, ChainRun};
use olla_core::{Problem, RngStream};
use rayon::prelude::*;

use crate::config::RunConfig;

/// Raw per-chain outputs of one experiment, in chain-index order.
pub struct Experiment {
    pub config: RunConfig,
    pub problem: Problem,
    pub chains: Vec<ChainRun>,
    pub cpu_seconds: f64,
    pub wall_seconds: f64,
}

/// CPU time consumed by the whole process so far.
pub fn process_cpu_seconds() -> f64 {
    let mut ts = libc::timespec {
        tv_sec: 0,
        tv_nsec: 0,
    };
    // SAFETY: `ts` is a valid, writable timespec.
    let rc = unsafe { libc::clock_gettime(libc::CLOCK_PROCESS_CPUTIME_ID, &mut ts) };
    if rc != 0 {
        return 0.0;
    }
    ts.tv_sec as f64 + ts.tv_nsec as f64 * 1e-9
}

/// Runs every chain on a pool of `threads` workers (`None`: hardware
/// parallelism). Chain `c` uses the stream `(base_seed, c)`, so results do
/// not depend on the thread count.
pub fn run_experiment(config: &RunConfig, threads: Option<usize>) -> Result<Experiment> {
    let problem = config.problem.build().context("building problem")?;
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = threads {
        builder = builder.num_threads(n);
    }
    let pool = builder.build().context("creating thread pool")?;
    let cpu0 = process_cpu_seconds();
    let wall0 = Instant::now();
    let chains: Vec<ChainRun> = pool.install(|| {
        (0..config.chains)
            .into_par_iter()
            .map(|c| {
                run_chain(
                    &problem,
                    &config.sampler,
                    &config.schedule,
                    RngStream::new(config.base_seed, c as u64),
                )
            })
            .collect::<olla_core::Result<Vec<_>>>()
    })?;
    let wall_seconds = wall0.elapsed().as_secs_f64();
    let cpu_seconds = process_cpu_seconds() - cpu0;
    for (c, run) in chains.iter().enumerate() {
        if let Some(d) = &run.diverged {
            log::warn!("chain {c} diverged at step {}: {}", d.step, d.reason);
        }
    }
    Ok(Experiment {
        config: config.clone(),
        problem,
        chains,
        cpu_seconds,
        wall_seconds,
    })
}
