//! Multi-scenario fitting and posterior pooling.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::scenario::CullScenario;
use crate::error::{Error, Result};
use crate::mcmc::{run_chains, PosteriorSamples, Problem, SamplerConfig, SummaryRow};

/// Outcome of one scenario fit.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioFit {
    pub scenario: usize,
    pub outcome: std::result::Result<PosteriorSamples, String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioFits {
    /// Sorted by scenario id.
    pub fits: Vec<ScenarioFit>,
}

impl ScenarioFits {
    pub fn failed(&self) -> Vec<(usize, &str)> {
        self.fits
            .iter()
            .filter_map(|f| f.outcome.as_ref().err().map(|e| (f.scenario, e.as_str())))
            .collect()
    }

    pub fn succeeded(&self) -> Vec<&PosteriorSamples> {
        self.fits.iter().filter_map(|f| f.outcome.as_ref().ok()).collect()
    }

    /// Pools every successful fit. With failures present this is refused
    /// unless `allow_partial` is set.
    pub fn pool(&self, allow_partial: bool) -> Result<PosteriorSamples> {
        let failed = self.failed();
        if !failed.is_empty() {
            if !allow_partial {
                return Err(Error::IncompletePool { failed: failed.len() });
            }
            log::warn!("pooling without {} failed scenario(s)", failed.len());
        }
        let ok: Vec<PosteriorSamples> = self.succeeded().into_iter().cloned().collect();
        pool_samples(&ok)
    }
}

/// Fits every scenario with `config.n_chains` chains on the current rayon
/// pool. `on_complete` runs as each fit finishes (e.g. to persist it); its
/// error marks that scenario failed. Failures never stop other scenarios.
pub fn fit_scenarios(
    problem: &Problem<'_>,
    scenarios: &[CullScenario],
    config: &SamplerConfig,
    on_complete: impl Fn(&CullScenario, &PosteriorSamples) -> Result<()> + Sync,
) -> Result<ScenarioFits> {
    if scenarios.is_empty() {
        return Err(Error::Config("need at least one cull scenario".into()));
    }
    config.validate()?;
    let mut fits: Vec<ScenarioFit> = scenarios
        .par_iter()
        .map(|sc| {
            let outcome = run_chains(problem, sc, config)
                .and_then(|s| on_complete(sc, &s).map(|_| s))
                .map_err(|e| {
                    log::error!("scenario {} failed: {e}", sc.id);
                    e.to_string()
                });
            ScenarioFit {
                scenario: sc.id,
                outcome,
            }
        })
        .collect();
    fits.sort_by_key(|f| f.scenario);
    Ok(ScenarioFits { fits })
}


/// Equal-weight concatenation; chain records keep their scenario id.
pub fn pool_samples(parts: &[PosteriorSamples]) -> Result<PosteriorSamples> {
    PosteriorSamples::pool(parts)
}

/// Median and interval of each species total.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TotalRow {
    pub configuration: String,
    pub species: usize,
    pub median: f64,
    pub lo95: f64,
    pub hi95: f64,
}

impl TotalRow {
    pub fn width(&self) -> f64 {
        self.hi95 - self.lo95
    }
}

pub fn species_totals(configuration: &str, samples: &PosteriorSamples) -> Vec<TotalRow> {
    (0..samples.layout.dims.n_species)
        .map(|i| {
            let r = SummaryRow::from_values("", &samples.column(samples.layout.total(i)));
            TotalRow {
                configuration: configuration.to_string(),
                species: i,
                median: r.median,
                lo95: r.lo95,
                hi95: r.hi95,
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mcmc::{ChainDraws, ParamLayout, SampleMetadata};
    use crate::model::Dims;

    fn fake(scenario: usize, offset: f64, draws: usize) -> PosteriorSamples {
        let dims = Dims {
            n_species: 1,
            n_x: 1,
            n_g: 1,
            n_sites: 2,
            n_regions: 1,
        };
        let layout = ParamLayout::new(dims, false);
        let w = layout.len();
        let values = (0..draws * w).map(|v| offset + (v * 7919 % 101) as f64).collect();
        PosteriorSamples {
            layout,
            chains: vec![ChainDraws {
                chain: 0,
                scenario,
                iterations: (1..=draws).collect(),
                values,
                acceptance: Default::default(),
            }],
            metadata: SampleMetadata {
                config: SamplerConfig::default(),
                scenarios: vec![scenario],
                seed: 1,
            },
        }
    }

    #[test]
    fn pooled_count_is_sum_and_copies_keep_quantiles() {
        let a = fake(0, 0.0, 40);
        let b = fake(1, 3.0, 25);
        let pooled = pool_samples(&[a.clone(), b.clone()]).unwrap();
        assert_eq!(pooled.total_draws(), 65);
        assert_eq!(pooled.metadata.scenarios, vec![0, 1]);
        let c = pooled.layout.total(0);
        let concat = [a.column(c), b.column(c)].concat();
        assert_eq!(pooled.column(c), concat);

        let copies = pool_samples(&[a.clone(), a.clone(), a.clone()]).unwrap();
        let (pc, pa) = (&species_totals("x", &copies)[0], &species_totals("x", &a)[0]);
        for (u, v) in [(pc.median, pa.median), (pc.lo95, pa.lo95), (pc.hi95, pa.hi95)] {
            assert!((u - v).abs() < 1e-9, "{u} vs {v}");
        }
        assert_eq!(pool_samples(&[a.clone()]).unwrap(), a);
    }

    #[test]
    fn incomplete_pool_is_refused() {
        let fits = ScenarioFits {
            fits: vec![
                ScenarioFit {
                    scenario: 0,
                    outcome: Ok(fake(0, 0.0, 10)),
                },
                ScenarioFit {
                    scenario: 1,
                    outcome: Err("boom".into()),
                },
            ],
        };
        assert!(matches!(fits.pool(false), Err(Error::IncompletePool { failed: 1 })));
        assert_eq!(fits.pool(true).unwrap().total_draws(), 10);
    }
}
