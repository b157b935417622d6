use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::SimConfig;
use super::evaluate::{
    correlation_intervals, coverage_of, intervals, parameter_truths, posterior_mean_field, rmse_surface,
    total_intervals, Interval,
};
use super::generate::{simulate_dataset, SimData};
use super::retention::apply_retention;
use crate::error::{Error, Result};
use crate::mcmc::{named_rng, run_chains, Problem, SamplerConfig};
use crate::model::PriorConfig;
use crate::scenarios::CullScenario;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StudyConfig {
    pub sim: SimConfig,
    pub n_datasets: usize,
    pub seed: u64,
    pub sampler: SamplerConfig,
    pub priors: PriorConfig,
}

impl Default for StudyConfig {
    fn default() -> Self {
        Self {
            sim: SimConfig::default(),
            n_datasets: 5,
            seed: 1,
            sampler: SamplerConfig::default(),
            priors: PriorConfig::default(),
        }
    }
}

impl StudyConfig {
    pub fn validate(&self) -> Result<()> {
        self.sim.validate()?;
        self.sampler.validate()?;
        self.priors.validate()?;
        if self.n_datasets == 0 {
            return Err(Error::Config("n_datasets must be at least 1".into()));
        }
        if !self.sampler.store_fields {
            return Err(Error::Config("the study needs store_fields for surface RMSE".into()));
        }
        Ok(())
    }

    /// Generation seed of dataset `d`.
    pub fn dataset_seed(&self, d: usize) -> u64 {
        named_rng(self.seed, &format!("study/dataset/{d}")).random()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RmseRow {
    pub dataset: usize,
    pub retention: f64,
    pub species: usize,
    pub rmse: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageRow {
    pub dataset: usize,
    pub retention: f64,
    pub n_parameters: usize,
    pub n_covered: usize,
    pub fraction: f64,
    pub totals_covered: usize,
    pub n_totals: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntervalRow {
    pub dataset: usize,
    pub retention: f64,
    pub name: String,
    pub truth: f64,
    pub median: f64,
    pub lo95: f64,
    pub hi95: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FailureRow {
    pub dataset: usize,
    pub retention: f64,
    pub message: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct StudyReport {
    pub rmse: Vec<RmseRow>,
    pub coverage: Vec<CoverageRow>,
    pub totals: Vec<IntervalRow>,
    pub correlations: Vec<IntervalRow>,
    pub failures: Vec<FailureRow>,
}

fn rows(dataset: usize, retention: f64, iv: Vec<Interval>) -> Vec<IntervalRow> {
    iv.into_iter()
        .map(|i| IntervalRow {
            dataset,
            retention,
            name: i.name,
            truth: i.truth,
            median: i.median,
            lo95: i.lo95,
            hi95: i.hi95,
        })
        .collect()
}

struct JobResult {
    rmse: Vec<RmseRow>,
    coverage: CoverageRow,
    totals: Vec<IntervalRow>,
    correlations: Vec<IntervalRow>,
}

/// Fits one retention level of one simulated dataset with κ known.
fn fit_level(cfg: &StudyConfig, sim: &SimData, dataset: usize, level: usize, data_seed: u64) -> Result<JobResult> {
    let pct = cfg.sim.retention[level];
    let thinned = apply_retention(&sim.dataset, &sim.geometry, pct, data_seed)?;
    let problem = Problem::new(&sim.geometry, &sim.adjacency, &thinned, &cfg.priors)?;
    let job_id = dataset * cfg.sim.retention.len() + level;
    let scenario = CullScenario::constant(job_id, cfg.sim.n_species, cfg.sim.n_regions, sim.truth.kappa)?;
    let samples = run_chains(&problem, &scenario, &cfg.sampler)?;
    let est = posterior_mean_field(&samples)?;
    let rmse = rmse_surface(&est, &sim.truth.state.u)?
        .into_iter()
        .enumerate()
        .map(|(species, rmse)| RmseRow {
            dataset,
            retention: pct,
            species,
            rmse,
        })
        .collect();
    let params = intervals(&samples, &parameter_truths(&samples, &sim.truth));
    let totals = total_intervals(&samples, &sim.truth);
    let c = coverage_of(&params, &totals);
    Ok(JobResult {
        rmse,
        coverage: CoverageRow {
            dataset,
            retention: pct,
            n_parameters: c.n_parameters,
            n_covered: c.n_covered,
            fraction: c.fraction(),
            totals_covered: c.totals_covered,
            n_totals: c.n_totals,
        },
        totals: rows(dataset, pct, totals),
        correlations: rows(dataset, pct, correlation_intervals(&samples, &sim.truth)),
    })
}

/// Simulates `n_datasets` datasets and fits each retention level of each.
/// Jobs run on the current rayon pool; failed fits are recorded and the
/// study continues. Rows are ordered by dataset, then retention level.
pub fn run_study(cfg: &StudyConfig) -> Result<StudyReport> {
    cfg.validate()?;
    let sims: Vec<(u64, SimData)> = (0..cfg.n_datasets)
        .map(|d| {
            let seed = cfg.dataset_seed(d);
            simulate_dataset(&cfg.sim, seed).map(|s| (seed, s))
        })
        .collect::<Result<_>>()?;
    let jobs: Vec<(usize, usize)> = (0..cfg.n_datasets)
        .flat_map(|d| (0..cfg.sim.retention.len()).map(move |l| (d, l)))
        .collect();
    let results: Vec<(usize, usize, Result<JobResult>)> = jobs
        .par_iter()
        .map(|&(d, l)| (d, l, fit_level(cfg, &sims[d].1, d, l, sims[d].0)))
        .collect();
    let mut report = StudyReport::default();
    for (d, l, r) in results {
        match r {
            Ok(j) => {
                report.rmse.extend(j.rmse);
                report.coverage.push(j.coverage);
                report.totals.extend(j.totals);
                report.correlations.extend(j.correlations);
            }
            Err(e) => {
                log::error!("dataset {d} at {}% failed: {e}", cfg.sim.retention[l]);
                report.failures.push(FailureRow {
                    dataset: d,
                    retention: cfg.sim.retention[l],
                    message: e.to_string(),
                });
            }
        }
    }
    Ok(report)
}
