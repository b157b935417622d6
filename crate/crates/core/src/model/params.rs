use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spatial::{n_correlations, pairs, precision_matrix, sigma_to_correlation, is_valid_correlation};

use super::dataset::SpeciesDataset;

/// Model dimensions: species, abundance covariates, detection covariates, sites, regions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Dims {
    pub n_species: usize,
    pub n_x: usize,
    pub n_g: usize,
    pub n_sites: usize,
    pub n_regions: usize,
}

impl Dims {
    pub fn of(dataset: &SpeciesDataset) -> Self {
        Self {
            n_species: dataset.n_species(),
            n_x: dataset.n_abundance_covariates(),
            n_g: dataset.n_detection_covariates(),
            n_sites: dataset.n_sites(),
            n_regions: dataset.n_regions(),
        }
    }

    pub fn n_rho(&self) -> usize {
        n_correlations(self.n_species)
    }
}

/// One point in parameter space, including latent abundances.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParameterState {
    pub beta0: Vec<f64>,
    /// S rows of abundance coefficients.
    pub beta: Vec<Vec<f64>>,
    pub delta0: Vec<f64>,
    /// S rows of detection coefficients.
    pub delta: Vec<Vec<f64>>,
    pub tau: Vec<f64>,
    /// Packed upper-triangle correlations of the between-species precision.
    pub rho: Vec<f64>,
    pub theta: Vec<f64>,
    /// Spatial effects Φ, S rows of length m.
    pub u: Vec<Vec<f64>>,
    /// Latent abundances, S rows of length m.
    pub n: Vec<Vec<u64>>,
}

impl ParameterState {
    /// All coefficients and fields zero, unit precisions and dispersions, N = 0.
    pub fn zeros(dims: Dims) -> Self {
        let s = dims.n_species;
        Self {
            beta0: vec![0.0; s],
            beta: vec![vec![0.0; dims.n_x]; s],
            delta0: vec![0.0; s],
            delta: vec![vec![0.0; dims.n_g]; s],
            tau: vec![1.0; s],
            rho: vec![0.0; dims.n_rho()],
            theta: vec![1.0; s],
            u: vec![vec![0.0; dims.n_sites]; s],
            n: vec![vec![0; dims.n_sites]; s],
        }
    }

    pub fn dims(&self, n_regions: usize) -> Dims {
        Dims {
            n_species: self.beta0.len(),
            n_x: self.beta.first().map_or(0, Vec::len),
            n_g: self.delta.first().map_or(0, Vec::len),
            n_sites: self.u.first().map_or(0, Vec::len),
            n_regions,
        }
    }

    pub fn sigma(&self) -> Result<nalgebra::DMatrix<f64>> {
        precision_matrix(&self.tau, &self.rho)
    }

    /// Between-species correlations of Σ⁻¹, packed like `rho`.
    pub fn correlations(&self) -> Result<Vec<f64>> {
        let c = sigma_to_correlation(&self.sigma()?)?;
        Ok(pairs(self.tau.len()).map(|(a, b)| c[(a, b)]).collect())
    }

    pub fn check_dims(&self, dims: Dims) -> Result<()> {
        let s = dims.n_species;
        let ok = self.beta0.len() == s
            && self.delta0.len() == s
            && self.tau.len() == s
            && self.theta.len() == s
            && self.rho.len() == dims.n_rho()
            && self.beta.len() == s
            && self.beta.iter().all(|r| r.len() == dims.n_x)
            && self.delta.len() == s
            && self.delta.iter().all(|r| r.len() == dims.n_g)
            && self.u.len() == s
            && self.u.iter().all(|r| r.len() == dims.n_sites)
            && self.n.len() == s
            && self.n.iter().all(|r| r.len() == dims.n_sites);
        if ok {
            Ok(())
        } else {
            Err(Error::Dimension(format!("parameter state does not match {dims:?}")))
        }
    }

    /// Support constraints: positive τ and θ, valid correlations, N covering observed counts.
    pub fn check_support(&self, dataset: &SpeciesDataset) -> Result<()> {
        self.check_dims(Dims::of(dataset))?;
        for (i, &t) in self.tau.iter().enumerate() {
            if !(t > 0.0) {
                return Err(Error::param(format!("tau[{i}]"), t, "must be positive"));
            }
        }
        for (i, &t) in self.theta.iter().enumerate() {
            if !(t > 0.0) {
                return Err(Error::param(format!("theta[{i}]"), t, "must be positive"));
            }
        }
        if !is_valid_correlation(self.tau.len(), &self.rho) {
            return Err(Error::NotPositiveDefinite(format!("correlations {:?}", self.rho)));
        }
        for (i, row) in self.n.iter().enumerate() {
            for (j, &n) in row.iter().enumerate() {
                if n < dataset.max_count(i, j) {
                    return Err(Error::Config(format!(
                        "N[{i},{j}] = {n} is below the observed count {}",
                        dataset.max_count(i, j)
                    )));
                }
            }
        }
        Ok(())
    }
}
