//! The operations behind the command-line tool. Each writes into one output
//! directory and finishes with its manifest, also when tasks fail.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::io::{
    county_estimates_csv, coverage_csv, covariates_csv, culls_csv, diagnostics_csv, edges_csv, failures_csv,
    grid_csv, intervals_csv, kappa_csv, list_fits, observations_csv, parameters_csv, read_fit, rmse_csv, sha256_hex,
    totals_csv, write_samples, CsvText, DataPaths, KappaSource, OutputDir, RunConfig, RunManifest,
};
use crate::mcmc::{diagnostics, run_chains, summarize as summarize_columns, with_workers, PosteriorSamples, Problem, SamplerConfig};
use crate::model::PriorConfig;
use crate::scenarios::{fit_scenarios as fit_each, pool_samples, sample_scenarios, species_totals, CullScenario};
use crate::simgen::{apply_retention, run_study, simulate_dataset, SimConfig, SimTruth, StudyConfig};

/// Result of a command that ran to completion: where it wrote, and how many
/// of its tasks failed. Exit status 0 requires zero failures.
#[derive(Debug, Clone)]
pub struct Outcome {
    pub out_dir: PathBuf,
    pub manifest: RunManifest,
    pub failures: usize,
}

impl Outcome {
    fn new(out_dir: &Path, manifest: RunManifest) -> Self {
        let failures = manifest.failed_tasks().len();
        Self {
            out_dir: out_dir.to_path_buf(),
            manifest,
            failures,
        }
    }

    pub fn exit_code(&self) -> i32 {
        i32::from(self.failures > 0)
    }
}

#[derive(Debug, Clone)]
pub struct SimulateArgs {
    /// `SimConfig` JSON; the built-in defaults when absent.
    pub config: Option<PathBuf>,
    pub seed: u64,
    pub out: PathBuf,
    /// Percentage of visit rows to keep.
    pub retention: Option<f64>,
}

#[derive(Debug, Serialize)]
struct TruthFile<'a> {
    seed: u64,
    retention: f64,
    config: &'a SimConfig,
    truth: &'a SimTruth,
}

/// Writes a synthetic dataset, its truth, and a `run.json` that `fit` accepts.
pub fn simulate(args: &SimulateArgs) -> Result<Outcome> {
    let config: SimConfig = match &args.config {
        Some(p) => read_json(p)?,
        None => SimConfig::default(),
    };
    config.validate()?;
    let retention = args.retention.unwrap_or(100.0);
    let mut sim = simulate_dataset(&config, args.seed)?;
    if retention < 100.0 {
        sim.dataset = apply_retention(&sim.dataset, &sim.geometry, retention, args.seed)?;
    }
    let out = OutputDir::create(&args.out, false)?;
    out.write_csv("grid.csv", grid_csv(&sim.geometry))?;
    out.write_csv("edges.csv", edges_csv(&sim.adjacency))?;
    out.write_csv("observations.csv", observations_csv(&sim.dataset))?;
    out.write_csv("culls.csv", culls_csv(&sim.dataset))?;
    out.write_csv("abundance_covariates.csv", covariates_csv(sim.dataset.x(), "X"))?;
    out.write_csv("detection_covariates.csv", covariates_csv(sim.dataset.g(), "G"))?;
    out.write_json(
        "truth.json",
        &TruthFile {
            seed: args.seed,
            retention,
            config: &config,
            truth: &sim.truth,
        },
    )?;
    let run = RunConfig {
        data: DataPaths::in_dir(Path::new("")),
        species: Vec::new(),
        priors: PriorConfig::default(),
        sampler: SamplerConfig {
            seed: args.seed,
            ..SamplerConfig::default()
        },
        kappa: Some(KappaSource::Constant(config.kappa)),
        bands: None,
        assignment: None,
        truncate: true,
        output: PathBuf::from("fit"),
        seed: args.seed,
        workers: 1,
        gzip: false,
    };
    out.write_json("run.json", &run)?;
    out.task("simulate", Ok(()));
    let hash = sha256_hex(serde_json::to_string(&(&config, args.seed, retention))?.as_bytes());
    Ok(Outcome::new(&args.out, out.finish("simulate", &hash)?))
}

/// Overrides applied on top of a run config.
#[derive(Debug, Clone, Default)]
pub struct RunOverrides {
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    pub workers: Option<usize>,
    pub gzip: bool,
}

fn load_run(config: &Path, o: &RunOverrides) -> Result<RunConfig> {
    let mut cfg = RunConfig::load(config)?;
    if let Some(out) = &o.out {
        cfg.output = out.clone();
    }
    if let Some(seed) = o.seed {
        cfg.seed = seed;
        cfg.sampler.seed = seed;
    }
    if let Some(w) = o.workers {
        if w == 0 {
            return Err(Error::Config("workers must be at least 1".into()));
        }
        cfg.workers = w;
    }
    cfg.gzip |= o.gzip;
    Ok(cfg)
}

/// Single-scenario fit: the configured fixed κ, or the band means.
pub fn fit(config: &Path, overrides: &RunOverrides) -> Result<Outcome> {
    let cfg = load_run(config, overrides)?;
    let data = cfg.load_data()?;
    let scenario = cfg.single_scenario(data.dataset.n_species(), data.dataset.n_regions())?;
    let problem = Problem::new(&data.geometry, &data.adjacency, &data.dataset, &cfg.priors)?;
    let hash = cfg.hash()?;
    let out = OutputDir::create(&cfg.output, cfg.gzip)?;
    out.write_json("config.json", &cfg)?;
    out.write_csv("kappa.csv", kappa_csv(&scenario))?;
    let result = with_workers(cfg.workers, || run_chains(&problem, &scenario, &cfg.sampler))?
        .and_then(|s| write_samples(&out, &s, &scenario, &hash).map(|_| ()));
    out.task(task_name(scenario.id), result.map_err(|e| e.to_string()));
    Ok(Outcome::new(&cfg.output, out.finish("fit", &hash)?))
}

fn task_name(scenario: usize) -> String {
    format!("scenario-{scenario:04}")
}

/// Samples `n_scenarios` κ tables from the bands and fits each, persisting
/// every fit as it finishes. Failed scenarios are recorded, not fatal.
pub fn fit_scenarios(config: &Path, n_scenarios: usize, overrides: &RunOverrides) -> Result<Outcome> {
    let cfg = load_run(config, overrides)?;
    let data = cfg.load_data()?;
    let (s, r) = (data.dataset.n_species(), data.dataset.n_regions());
    let (bands, assignment) = cfg.band_assignment(s, r)?;
    let scenarios = sample_scenarios(&assignment, &bands, n_scenarios, cfg.seed, cfg.truncate)?;
    let problem = Problem::new(&data.geometry, &data.adjacency, &data.dataset, &cfg.priors)?;
    let hash = cfg.hash()?;
    let out = OutputDir::create(&cfg.output, cfg.gzip)?;
    out.write_json("config.json", &cfg)?;
    out.write_csv("scenarios.csv", scenarios_csv(&scenarios))?;
    // Fits are dropped once written, so memory stays bounded by one batch.
    for batch in scenarios.chunks(cfg.workers.max(1) * 2) {
        let fits = with_workers(cfg.workers, || {
            fit_each(&problem, batch, &cfg.sampler, |sc, samples| {
                write_samples(&out, samples, sc, &hash).map(|_| ())
            })
        })??;
        for f in fits.fits {
            out.task(task_name(f.scenario), f.outcome.map(|_| ()));
        }
    }
    Ok(Outcome::new(&cfg.output, out.finish("fit-scenarios", &hash)?))
}

fn scenarios_csv(scenarios: &[CullScenario]) -> CsvText {
    let mut out = CsvText::new(&["scenario", "species", "region_id", "kappa"]);
    for sc in scenarios {
        for (i, row) in sc.kappa.iter().enumerate() {
            for (k, v) in row.iter().enumerate() {
                out.row().int(sc.id as u64).int(i as u64).int(k as u64).real(*v).end();
            }
        }
    }
    out
}

#[derive(Debug, Clone, Default)]
pub struct SummarizeArgs {
    pub run: PathBuf,
    /// Defaults to `<run>/summary`.
    pub out: Option<PathBuf>,
    /// Pool every stored scenario.
    pub pooled: bool,
    /// Which scenario to summarise when the run holds several.
    pub scenario: Option<usize>,
    /// Pool even though some scenario fits failed.
    pub allow_partial: bool,
}

/// Writes `county_estimates.csv`, `totals.csv`, and `parameters.csv`.
pub fn summarize(args: &SummarizeArgs) -> Result<Outcome> {
    let manifest = RunManifest::read(&args.run)?;
    let fits = list_fits(&manifest);
    if fits.is_empty() {
        return Err(Error::Config(format!("{} holds no stored fits", args.run.display())));
    }
    let (label, samples) = if args.pooled {
        let failed = manifest.failed_tasks().len();
        if failed > 0 && !args.allow_partial {
            return Err(Error::IncompletePool { failed });
        }
        let parts = fits
            .iter()
            .map(|f| read_fit(&args.run, &manifest, f, true).map(|s| s.samples))
            .collect::<Result<Vec<_>>>()?;
        ("pooled".to_string(), pool_samples(&parts)?)
    } else {
        let chosen = match args.scenario {
            Some(id) => fits
                .iter()
                .find(|f| f.starts_with(&format!("{}/", crate::io::scenario_dir(id))))
                .ok_or_else(|| Error::Config(format!("scenario {id} is not stored in this run")))?,
            None if fits.len() == 1 => &fits[0],
            None => {
                return Err(Error::Config(format!(
                    "the run holds {} scenarios; pass --pooled or --scenario",
                    fits.len()
                )))
            }
        };
        let fit = read_fit(&args.run, &manifest, chosen, true)?;
        (task_name(fit.sidecar.scenario), fit.samples)
    };
    let out_dir = args.out.clone().unwrap_or_else(|| args.run.join("summary"));
    let out = OutputDir::create(&out_dir, false)?;
    write_summary(&out, &label, &samples)?;
    out.task("summarize", Ok(()));
    Ok(Outcome::new(&out_dir, out.finish("summarize", &manifest.config_hash)?))
}

fn write_summary(out: &OutputDir, label: &str, samples: &PosteriorSamples) -> Result<()> {
    out.write_csv("county_estimates.csv", county_estimates_csv(samples))?;
    out.write_csv("totals.csv", totals_csv(&species_totals(label, samples)))?;
    out.write_csv("parameters.csv", parameters_csv(&summarize_columns(samples, |_| true)))?;
    Ok(())
}

#[derive(Debug, Clone, Default)]
pub struct DiagnoseArgs {
    pub run: PathBuf,
    /// Defaults to `<run>/diagnostics`.
    pub out: Option<PathBuf>,
    /// Count parameters above the R̂ threshold as failures.
    pub strict: bool,
}

/// Recomputes R̂ and ESS for every stored column into `diagnostics.csv`.
pub fn diagnose(args: &DiagnoseArgs) -> Result<Outcome> {
    let manifest = RunManifest::read(&args.run)?;
    let out_dir = args.out.clone().unwrap_or_else(|| args.run.join("diagnostics"));
    let out = OutputDir::create(&out_dir, false)?;
    let mut rows = Vec::new();
    for f in list_fits(&manifest) {
        let fit = read_fit(&args.run, &manifest, &f, false)?;
        let id = fit.sidecar.scenario;
        let report = diagnostics(&fit.samples)?;
        let flagged = report.rows.iter().filter(|r| r.flagged).count();
        let worst = report.rows.iter().map(|r| r.rhat).fold(f64::NEG_INFINITY, f64::max);
        log::info!("scenario {id}: {flagged} of {} columns above the R-hat threshold (max {worst:.3})", report.rows.len());
        let outcome = if args.strict && flagged > 0 {
            Err(format!("{flagged} columns above the R-hat threshold"))
        } else {
            Ok(())
        };
        out.task(task_name(id), outcome);
        rows.extend(report.rows.into_iter().map(|r| (id, r)));
    }
    out.write_csv("diagnostics.csv", diagnostics_csv(&rows))?;
    Ok(Outcome::new(&out_dir, out.finish("diagnose", &manifest.config_hash)?))
}

#[derive(Debug, Clone)]
pub struct EvaluateArgs {
    pub config: PathBuf,
    pub out: PathBuf,
    pub workers: usize,
}

/// Runs the simulation study and writes `rmse.csv`, `coverage.csv`,
/// `totals.csv`, `correlations.csv`, and `failures.csv`.
pub fn evaluate(args: &EvaluateArgs) -> Result<Outcome> {
    let bytes = fs::read(&args.config)?;
    let cfg: StudyConfig = serde_json::from_slice(&bytes)
        .map_err(|e| Error::data(&args.config, e.line(), format!("invalid study config: {e}")))?;
    cfg.validate()?;
    if args.workers == 0 {
        return Err(Error::Config("workers must be at least 1".into()));
    }
    let out = OutputDir::create(&args.out, false)?;
    let report = with_workers(args.workers, || run_study(&cfg))??;
    out.write_csv("rmse.csv", rmse_csv(&report.rmse))?;
    out.write_csv("coverage.csv", coverage_csv(&report.coverage))?;
    out.write_csv("totals.csv", intervals_csv(&report.totals))?;
    out.write_csv("correlations.csv", intervals_csv(&report.correlations))?;
    out.write_csv("failures.csv", failures_csv(&report.failures))?;
    for f in &report.failures {
        out.task(format!("dataset-{}-retention-{}", f.dataset, f.retention), Err(f.message.clone()));
    }
    out.task("study", Ok(()));
    Ok(Outcome::new(&args.out, out.finish("evaluate", &sha256_hex(&bytes))?))
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| Error::data(path, e.line(), e.to_string()))
}
