//! Run configuration: data paths, priors, sampler, cull bands, output.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::dataset::{load_dataset, load_kappa, DataPaths, LoadedData};
use crate::error::{Error, Result};
use crate::mcmc::SamplerConfig;
use crate::model::PriorConfig;
use crate::scenarios::{mean_scenario, AssignmentEntry, BandAssignment, BandSet, CullScenario};

/// Fixed cull proportions for a single fit: one κ everywhere, or a
/// `species,region_id,kappa` table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum KappaSource {
    Constant(f64),
    File(PathBuf),
}

/// Everything one command needs. Relative paths are resolved against the
/// directory holding the config file. `seed` is the master seed for every
/// random stream and replaces `sampler.seed`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub data: DataPaths,
    /// Species names by index; empty means "infer the count from the data".
    #[serde(default)]
    pub species: Vec<String>,
    #[serde(default)]
    pub priors: PriorConfig,
    #[serde(default)]
    pub sampler: SamplerConfig,
    #[serde(default)]
    pub kappa: Option<KappaSource>,
    #[serde(default)]
    pub bands: Option<BandSet>,
    #[serde(default)]
    pub assignment: Option<Vec<AssignmentEntry>>,
    /// Truncate band draws to `[lo, hi]`.
    #[serde(default = "default_true")]
    pub truncate: bool,
    pub output: PathBuf,
    pub seed: u64,
    #[serde(default = "default_workers")]
    pub workers: usize,
    #[serde(default)]
    pub gzip: bool,
}

fn default_true() -> bool {
    true
}

fn default_workers() -> usize {
    1
}

impl RunConfig {
    /// Parses, resolves paths, and validates.
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read config {}: {e}", path.display())))?;
        let mut cfg: RunConfig = serde_json::from_str(&text)
            .map_err(|e| Error::data(path, e.line(), format!("invalid run config: {e}")))?;
        let base = path.parent().unwrap_or(Path::new("."));
        cfg.resolve(base);
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn resolve(&mut self, base: &Path) {
        self.data.resolve(base);
        if let Some(KappaSource::File(p)) = &mut self.kappa {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        if self.output.is_relative() {
            self.output = base.join(&self.output);
        }
        self.sampler.seed = self.seed;
    }

    pub fn validate(&self) -> Result<()> {
        for p in self.data.files() {
            if !p.is_file() {
                return Err(Error::data(p, 0, "referenced file does not exist"));
            }
        }
        if let Some(KappaSource::File(p)) = &self.kappa {
            if !p.is_file() {
                return Err(Error::data(p, 0, "referenced kappa file does not exist"));
            }
        }
        if let Some(KappaSource::Constant(v)) = self.kappa {
            if !(v > 0.0 && v < 1.0) {
                return Err(Error::param("kappa", v, "must lie in (0, 1)"));
            }
        }
        self.priors.validate()?;
        self.sampler.validate()?;
        if let Some(b) = &self.bands {
            b.validate()?;
        }
        if self.assignment.is_some() && self.bands.is_none() {
            return Err(Error::Config("an assignment needs band definitions".into()));
        }
        if self.workers == 0 {
            return Err(Error::Config("workers must be at least 1".into()));
        }
        Ok(())
    }

    pub fn n_species(&self) -> Option<usize> {
        (!self.species.is_empty()).then_some(self.species.len())
    }

    pub fn load_data(&self) -> Result<LoadedData> {
        load_dataset(&self.data, self.n_species())
    }

    /// Digest of the configuration and the bytes of every input file.
    pub fn hash(&self) -> Result<String> {
        let mut h = Sha256::new();
        h.update(serde_json::to_vec(self)?);
        let mut inputs: Vec<&Path> = self.data.files();
        if let Some(KappaSource::File(p)) = &self.kappa {
            inputs.push(p);
        }
        for p in inputs {
            h.update(Sha256::digest(fs::read(p)?));
        }
        Ok(hex::encode(h.finalize()))
    }

    /// Bands and the full assignment table. Without an explicit assignment,
    /// every cell gets the only band if exactly one is defined.
    pub fn band_assignment(&self, n_species: usize, n_regions: usize) -> Result<(BandSet, BandAssignment)> {
        let bands = self
            .bands
            .clone()
            .ok_or_else(|| Error::Config("cull scenarios need `bands` in the run config".into()))?;
        let assignment = match &self.assignment {
            Some(entries) => BandAssignment::from_entries(entries, n_species, n_regions)?,
            None if bands.0.len() == 1 => {
                let name = bands.0.keys().next().expect("one band");
                BandAssignment::uniform(n_species, n_regions, name)
            }
            None => {
                return Err(Error::Config(
                    "several bands are defined but no `assignment` maps them to cells".into(),
                ))
            }
        };
        for i in 0..n_species {
            for k in 0..n_regions {
                bands.get(assignment.band(i, k))?;
            }
        }
        Ok((bands, assignment))
    }

    /// Scenario for a single fit: the fixed κ if given, else the band means.
    pub fn single_scenario(&self, n_species: usize, n_regions: usize) -> Result<CullScenario> {
        match &self.kappa {
            Some(KappaSource::Constant(v)) => CullScenario::constant(0, n_species, n_regions, *v),
            Some(KappaSource::File(p)) => load_kappa(p, 0, n_species, n_regions),
            None => {
                let (bands, assignment) = self.band_assignment(n_species, n_regions)?;
                mean_scenario(&assignment, &bands, 0)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kappa_source_forms() {
        let c: KappaSource = serde_json::from_str("0.2").unwrap();
        assert_eq!(c, KappaSource::Constant(0.2));
        let f: KappaSource = serde_json::from_str("\"kappa.csv\"").unwrap();
        assert_eq!(f, KappaSource::File("kappa.csv".into()));
    }

    #[test]
    fn seed_is_required() {
        let text = r#"{"data": {"grid": "g.csv", "observations": "o.csv"}, "output": "out"}"#;
        let err = serde_json::from_str::<RunConfig>(text).unwrap_err();
        assert!(err.to_string().contains("seed"));
    }
}
