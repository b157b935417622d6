//! Multi-chain runs under a worker budget.

use rayon::prelude::*;

use super::chain::run_chain;
use super::config::SamplerConfig;
use super::problem::Problem;
use super::samples::PosteriorSamples;
use crate::error::{Error, Result};
use crate::scenarios::CullScenario;

/// Runs `f` on a dedicated pool of `workers` threads (0 means all cores).
pub fn with_workers<T: Send>(workers: usize, f: impl FnOnce() -> T + Send) -> Result<T> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    Ok(pool.install(f))
}

/// Runs `config.n_chains` chains for one scenario in parallel on the current
/// pool. Chains share nothing mutable and are assembled in chain order.
pub fn run_chains(problem: &Problem<'_>, scenario: &CullScenario, config: &SamplerConfig) -> Result<PosteriorSamples> {
    config.validate()?;
    let parts: Vec<PosteriorSamples> = (0..config.n_chains)
        .into_par_iter()
        .map(|c| run_chain(problem, scenario, config, c))
        .collect::<Result<_>>()?;
    let mut out = PosteriorSamples::pool(&parts)?;
    out.metadata.scenarios = vec![scenario.id];
    Ok(out)
}
