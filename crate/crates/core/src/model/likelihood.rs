//! Likelihood, prior, and joint log posterior of the misaligned N-mixture model.

use std::sync::atomic::{AtomicU64, Ordering};

use crate::error::{Error, Result};
use crate::scenarios::CullScenario;
use crate::spatial::{is_valid_correlation, micar_logdensity, Adjacency, GridGeometry};

use super::dataset::SpeciesDataset;
use super::dist::{
    binomial_ln_pmf_logit, exponential_ln_pdf, gamma_ln_pdf, inv_logit, laplace_ln_pdf, negbin_ln_pmf,
    normal_ln_pdf, poisson_ln_pmf,
};
use super::params::ParameterState;
use super::priors::PriorConfig;

/// Linear predictors are clamped to ±this before exponentiation.
pub const LINEAR_PREDICTOR_BOUND: f64 = 50.0;

static CLAMP_EVENTS: AtomicU64 = AtomicU64::new(0);

/// Process-wide number of times a log-abundance predictor hit the clamp.
pub fn clamp_event_count() -> u64 {
    CLAMP_EVENTS.load(Ordering::Relaxed)
}

pub(crate) fn clamp_log_lambda(eta: f64) -> f64 {
    if eta.abs() <= LINEAR_PREDICTOR_BOUND {
        return eta;
    }
    if CLAMP_EVENTS.fetch_add(1, Ordering::Relaxed) == 0 {
        log::warn!("log mean abundance {eta} clamped to ±{LINEAR_PREDICTOR_BOUND}");
    }
    eta.clamp(-LINEAR_PREDICTOR_BOUND, LINEAR_PREDICTOR_BOUND)
}

fn dot_row(m: &nalgebra::DMatrix<f64>, row: usize, coef: &[f64]) -> f64 {
    coef.iter().enumerate().map(|(c, b)| m[(row, c)] * b).sum()
}

/// `δ₀ᵢ + G_jᵀ δᵢ`.
pub fn detection_logit(state: &ParameterState, dataset: &SpeciesDataset, species: usize, site: usize) -> f64 {
    state.delta0[species] + dot_row(dataset.g(), site, &state.delta[species])
}

pub fn detection_prob(state: &ParameterState, dataset: &SpeciesDataset, species: usize, site: usize) -> f64 {
    inv_logit(detection_logit(state, dataset, species, site))
}

/// `β₀ᵢ + X_jᵀ βᵢ + Φ_ij`, clamped.
pub fn log_mean_abundance(state: &ParameterState, dataset: &SpeciesDataset, species: usize, site: usize) -> f64 {
    clamp_log_lambda(
        state.beta0[species] + dot_row(dataset.x(), site, &state.beta[species]) + state.u[species][site],
    )
}

pub fn mean_abundance(state: &ParameterState, dataset: &SpeciesDataset, species: usize, site: usize) -> f64 {
    log_mean_abundance(state, dataset, species, site).exp()
}

/// Binomial visit likelihood `Σ_{i,j,t} log Bin(n_ijt; N_ij, p_ij)`; −∞ if any count exceeds N.
pub fn obs_loglik(state: &ParameterState, dataset: &SpeciesDataset) -> f64 {
    let mut total = 0.0;
    for i in 0..dataset.n_species() {
        for j in 0..dataset.n_sites() {
            let visits = dataset.visits(i, j);
            if visits.is_empty() {
                continue;
            }
            let eta = detection_logit(state, dataset, i, j);
            let n = state.n[i][j];
            for &count in visits {
                total += binomial_ln_pmf_logit(count, n, eta);
            }
        }
    }
    total
}

/// `Σ_{i,j} log NegBin(N_ij; λ_ij, θᵢ)`.
pub fn latent_loglik(state: &ParameterState, dataset: &SpeciesDataset) -> f64 {
    let mut total = 0.0;
    for i in 0..dataset.n_species() {
        for j in 0..dataset.n_sites() {
            total += negbin_ln_pmf(state.n[i][j], mean_abundance(state, dataset, i, j), state.theta[i]);
        }
    }
    total
}

/// Exact integer regional populations `R_ik = Σ_{j∈k} N_ij`.
pub fn regional_totals(state: &ParameterState, geometry: &GridGeometry) -> Vec<Vec<u64>> {
    state
        .n
        .iter()
        .map(|row| {
            let mut r = vec![0u64; geometry.n_regions()];
            for (j, &n) in row.iter().enumerate() {
                r[geometry.region_of(j)] += n;
            }
            r
        })
        .collect()
}

/// Poisson cull likelihood `Σ_{i,k} log Pois(z_ik; R_ik κ_ik)`; zero when the dataset has no culls.
pub fn cull_loglik(
    state: &ParameterState,
    dataset: &SpeciesDataset,
    scenario: &CullScenario,
    geometry: &GridGeometry,
) -> Result<f64> {
    if !dataset.has_culls() {
        return Ok(0.0);
    }
    scenario.check_shape(dataset.n_species(), geometry.n_regions())?;
    let totals = regional_totals(state, geometry);
    let mut total = 0.0;
    for (i, row) in totals.iter().enumerate() {
        for (k, &r) in row.iter().enumerate() {
            let z = dataset.cull(i, k).unwrap_or(0);
            total += poisson_ln_pmf(z, r as f64 * scenario.kappa[i][k]);
        }
    }
    Ok(total)
}

/// Sum of every prior term, including the MICAR density of Φ. −∞ outside the support.
pub fn log_prior(state: &ParameterState, priors: &PriorConfig, adj: &Adjacency) -> Result<f64> {
    if state.tau.iter().chain(&state.theta).any(|v| !(*v > 0.0)) {
        return Ok(f64::NEG_INFINITY);
    }
    let s = state.tau.len();
    if !is_valid_correlation(s, &state.rho) {
        return Ok(f64::NEG_INFINITY);
    }
    let normal = |x: f64| normal_ln_pdf(x, priors.normal_mean, priors.normal_sd);
    let mut total = 0.0;
    for i in 0..s {
        total += normal(state.beta0[i]) + normal(state.delta0[i]);
        total += state.delta[i].iter().map(|&d| normal(d)).sum::<f64>();
        total += state.beta[i]
            .iter()
            .map(|&b| laplace_ln_pdf(b, priors.laplace_location, priors.laplace_scale))
            .sum::<f64>();
        total += gamma_ln_pdf(state.tau[i], priors.gamma_shape, priors.gamma_scale);
        total += exponential_ln_pdf(state.theta[i], priors.exp_rate);
    }
    total -= state.rho.len() as f64 * std::f64::consts::LN_2;
    total += micar_logdensity(&state.u, &state.sigma()?, adj)?;
    Ok(total)
}

/// The four additive pieces of the joint log posterior.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PosteriorTerms {
    pub observation: f64,
    pub latent: f64,
    pub cull: f64,
    pub prior: f64,
}

impl PosteriorTerms {
    pub fn total(&self) -> f64 {
        self.observation + self.latent + self.cull + self.prior
    }
}

pub fn posterior_terms(
    state: &ParameterState,
    dataset: &SpeciesDataset,
    scenario: &CullScenario,
    priors: &PriorConfig,
    geometry: &GridGeometry,
    adj: &Adjacency,
) -> Result<PosteriorTerms> {
    let terms = PosteriorTerms {
        observation: obs_loglik(state, dataset),
        latent: latent_loglik(state, dataset),
        cull: cull_loglik(state, dataset, scenario, geometry)?,
        prior: log_prior(state, priors, adj)?,
    };
    for (name, v) in [
        ("observation likelihood", terms.observation),
        ("latent abundance likelihood", terms.latent),
        ("cull likelihood", terms.cull),
        ("log prior", terms.prior),
    ] {
        if v.is_nan() {
            return Err(Error::NotANumber(name.into()));
        }
    }
    Ok(terms)
}

/// Joint log posterior (unnormalised). −∞ propagates; NaN is an error.
pub fn joint_log_posterior(
    state: &ParameterState,
    dataset: &SpeciesDataset,
    scenario: &CullScenario,
    priors: &PriorConfig,
    geometry: &GridGeometry,
    adj: &Adjacency,
) -> Result<f64> {
    let total = posterior_terms(state, dataset, scenario, priors, geometry, adj)?.total();
    if total.is_nan() {
        return Err(Error::NotANumber("joint log posterior".into()));
    }
    Ok(total)
}
