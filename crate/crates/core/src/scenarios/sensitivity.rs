//! Sensitivity of species totals to band assignments and scenario counts.

use super::bands::{sample_scenarios, BandAssignment, BandSet};
use super::fit::{fit_scenarios, pool_samples, species_totals, TotalRow};
use crate::error::{Error, Result};
use crate::mcmc::{PosteriorSamples, Problem, SamplerConfig};

/// One fitted configuration per assignment variant: `n_scenarios` sampled
/// scenarios, pooled. Rows are in variant order, then species order.
pub fn assignment_sweep(
    problem: &Problem<'_>,
    variants: &[(String, BandAssignment)],
    bands: &BandSet,
    n_scenarios: usize,
    seed: u64,
    truncate: bool,
    config: &SamplerConfig,
) -> Result<Vec<TotalRow>> {
    if variants.len() < 2 {
        return Err(Error::Config("a sensitivity sweep needs at least 2 configurations".into()));
    }
    let mut rows = Vec::new();
    for (label, assignment) in variants {
        let scenarios = sample_scenarios(assignment, bands, n_scenarios, seed, truncate)?;
        let pooled = fit_scenarios(problem, &scenarios, config, |_, _| Ok(()))?.pool(false)?;
        rows.extend(species_totals(label, &pooled));
    }
    Ok(rows)
}

/// Totals from pooling the first k fits for each k in `counts`. `fits` must
/// be ordered by scenario id; prefix pooling matches re-running with k scenarios
/// because scenario streams are keyed by id.
pub fn scenario_count_sweep(fits: &[PosteriorSamples], counts: &[usize]) -> Result<Vec<TotalRow>> {
    if counts.len() < 2 {
        return Err(Error::Config("a sensitivity sweep needs at least 2 configurations".into()));
    }
    let mut rows = Vec::new();
    for &k in counts {
        if k == 0 || k > fits.len() {
            return Err(Error::Config(format!("scenario count {k} outside 1..={}", fits.len())));
        }
        rows.extend(species_totals(&format!("{k} scenarios"), &pool_samples(&fits[..k])?));
    }
    Ok(rows)
}
