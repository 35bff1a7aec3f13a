//! Multi-threaded sweep. Each sample owns its RNG stream, so the result does
//! not depend on the number of workers.

use gausteer_core::sweep::{assemble, run_sample, run_sample_with_witness, SweepConfig, SweepResult};
use gausteer_core::witness::WitnessCandidate;
use rayon::prelude::*;

use crate::error::{CliError, Result};

fn pool(workers: Option<usize>) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers.unwrap_or(0))
        .build()
        .map_err(|e| CliError::Config(format!("worker pool: {e}")))
}

pub fn run_sweep_parallel(config: &SweepConfig, workers: Option<usize>) -> Result<SweepResult> {
    config.validate()?;
    let pool = pool(workers)?;
    let outcomes = pool.install(|| {
        (0..config.samples)
            .into_par_iter()
            .map(|i| run_sample(config, i))
            .collect::<gausteer_core::Result<Vec<_>>>()
    })?;
    for o in outcomes.iter().filter(|o| o.solver_failure) {
        log::warn!("sample {} (seed {}, stream {}) hit a solver failure", o.index, config.seed, o.index);
    }
    Ok(assemble(config, &outcomes))
}

/// The sweep plus the last witness of every sample, indexed by sample.
pub fn run_sweep_with_witnesses(
    config: &SweepConfig,
    workers: Option<usize>,
) -> Result<(SweepResult, Vec<Option<WitnessCandidate>>)> {
    config.validate()?;
    let pool = pool(workers)?;
    let pairs = pool.install(|| {
        (0..config.samples)
            .into_par_iter()
            .map(|i| run_sample_with_witness(config, i))
            .collect::<gausteer_core::Result<Vec<_>>>()
    })?;
    let (outcomes, witnesses): (Vec<_>, Vec<_>) = pairs.into_iter().unzip();
    Ok((assemble(config, &outcomes), witnesses))
}
