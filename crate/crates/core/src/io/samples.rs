//! Per-chain draw CSVs (`iteration,<params>`) with a JSON sidecar per scenario.

use std::collections::BTreeMap;
use std::io::Read;
use std::path::Path;

use flate2::read::GzDecoder;
use serde::{Deserialize, Serialize};

use super::write::{CsvText, OutputDir, RunManifest};
use crate::error::{Error, Result};
use crate::mcmc::{diagnostics, ChainDraws, ParamLayout, PosteriorSamples, SampleMetadata, SamplerConfig};
use crate::model::Dims;
use crate::scenarios::CullScenario;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainFile {
    pub chain: usize,
    pub file: String,
    pub n_draws: usize,
    pub acceptance: BTreeMap<String, f64>,
}

/// R̂ and ESS of one column; `None` where the statistic is not finite.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RhatEntry {
    pub name: String,
    pub rhat: Option<f64>,
    pub ess: Option<f64>,
    pub degenerate: bool,
    pub flagged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleSidecar {
    pub config_hash: String,
    pub seed: u64,
    pub scenario: usize,
    pub kappa: Vec<Vec<f64>>,
    pub dims: Dims,
    pub store_fields: bool,
    pub sampler: SamplerConfig,
    pub chains: Vec<ChainFile>,
    pub rhat: Vec<RhatEntry>,
}

pub fn scenario_dir(id: usize) -> String {
    format!("samples/scenario-{id:04}")
}

/// Writes each chain's draws and the scenario sidecar. Returns the sidecar path.
pub fn write_samples(
    out: &OutputDir,
    samples: &PosteriorSamples,
    scenario: &CullScenario,
    config_hash: &str,
) -> Result<String> {
    let dir = scenario_dir(scenario.id);
    let width = samples.width();
    let mut header = vec!["iteration"];
    header.extend(samples.layout.names().iter().map(String::as_str));
    let mut chains = Vec::with_capacity(samples.n_chains());
    for draws in &samples.chains {
        let mut csv = CsvText::new(&header);
        for (d, &it) in draws.iterations.iter().enumerate() {
            let mut row = csv.row().int(it as u64);
            for &v in draws.row(d, width) {
                row = row.real(v);
            }
            row.end();
        }
        let file = out.write_bulk_csv(&format!("{dir}/chain-{}.csv", draws.chain), csv)?;
        chains.push(ChainFile {
            chain: draws.chain,
            file,
            n_draws: draws.n_draws(),
            acceptance: draws.acceptance.clone(),
        });
    }
    let rhat = if samples.n_chains() >= 2 {
        diagnostics(samples)?
            .rows
            .into_iter()
            .map(|r| RhatEntry {
                name: r.name,
                rhat: r.rhat.is_finite().then_some(r.rhat),
                ess: r.ess.is_finite().then_some(r.ess),
                degenerate: r.degenerate,
                flagged: r.flagged,
            })
            .collect()
    } else {
        Vec::new()
    };
    let sidecar = SampleSidecar {
        config_hash: config_hash.to_string(),
        seed: samples.metadata.seed,
        scenario: scenario.id,
        kappa: scenario.kappa.clone(),
        dims: samples.layout.dims,
        store_fields: samples.layout.store_fields,
        sampler: samples.metadata.config.clone(),
        chains,
        rhat,
    };
    out.write_json(&format!("{dir}/meta.json"), &sidecar)
}

/// A scenario's stored fit.
#[derive(Debug, Clone)]
pub struct StoredFit {
    pub sidecar: SampleSidecar,
    pub samples: PosteriorSamples,
}

/// Sidecar paths listed in a run's manifest, in scenario order.
pub fn list_fits(manifest: &RunManifest) -> Vec<String> {
    manifest
        .files
        .iter()
        .filter(|f| f.path.starts_with("samples/") && f.path.ends_with("/meta.json"))
        .map(|f| f.path.clone())
        .collect()
}

/// Reads one scenario's draws, verifying every file against the manifest.
/// `drop_fields` keeps only the columns before the site-level u and N.
pub fn read_fit(dir: &Path, manifest: &RunManifest, sidecar_path: &str, drop_fields: bool) -> Result<StoredFit> {
    let sidecar: SampleSidecar = serde_json::from_slice(&manifest.read_verified(dir, sidecar_path)?)?;
    let full = ParamLayout::new(sidecar.dims, sidecar.store_fields);
    let layout = ParamLayout::new(sidecar.dims, sidecar.store_fields && !drop_fields);
    let keep = layout.len();
    let mut chains = Vec::with_capacity(sidecar.chains.len());
    for cf in &sidecar.chains {
        let bytes = manifest.read_verified(dir, &cf.file)?;
        let path = dir.join(&cf.file);
        let text = if cf.file.ends_with(".gz") {
            let mut s = String::new();
            GzDecoder::new(bytes.as_slice()).read_to_string(&mut s)?;
            s
        } else {
            String::from_utf8(bytes).map_err(|_| Error::data(&path, 0, "not UTF-8"))?
        };
        let mut reader = csv::ReaderBuilder::new().from_reader(text.as_bytes());
        let header = reader.headers()?.clone();
        if header.len() != full.len() + 1
            || header.get(0) != Some("iteration")
            || !header.iter().skip(1).eq(full.names().iter().map(String::as_str))
        {
            return Err(Error::data(&path, 1, "header does not match the sidecar's parameter layout"));
        }
        let mut iterations = Vec::with_capacity(cf.n_draws);
        let mut values = Vec::with_capacity(cf.n_draws * keep);
        for rec in reader.records() {
            let rec = rec?;
            let line = rec.position().map_or(0, |p| p.line() as usize);
            let bad = |what: &str| Error::data(&path, line, format!("unparsable {what}"));
            iterations.push(rec[0].parse().map_err(|_| bad("iteration"))?);
            for field in rec.iter().skip(1).take(keep) {
                values.push(field.parse::<f64>().map_err(|_| bad("value"))?);
            }
        }
        if iterations.len() != cf.n_draws {
            return Err(Error::data(
                &path,
                0,
                format!("{} draws, sidecar says {}", iterations.len(), cf.n_draws),
            ));
        }
        chains.push(ChainDraws {
            chain: cf.chain,
            scenario: sidecar.scenario,
            iterations,
            values,
            acceptance: cf.acceptance.clone(),
        });
    }
    let samples = PosteriorSamples {
        layout,
        chains,
        metadata: SampleMetadata {
            config: sidecar.sampler.clone(),
            scenarios: vec![sidecar.scenario],
            seed: sidecar.seed,
        },
    };
    Ok(StoredFit { sidecar, samples })
}
