//! Data model, likelihood terms, priors, and the joint log posterior.

mod dataset;
pub mod dist;
mod likelihood;
mod params;
mod priors;

pub use dataset::{CullRecord, Observation, SpeciesDataset, ROW_SUM_TOLERANCE};
pub use dist::negbin_logpmf;
pub use likelihood::{
    clamp_event_count, cull_loglik, detection_logit, detection_prob, joint_log_posterior, latent_loglik,
    log_mean_abundance, log_prior, mean_abundance, obs_loglik, posterior_terms, regional_totals,
    PosteriorTerms, LINEAR_PREDICTOR_BOUND,
};
pub(crate) use likelihood::clamp_log_lambda;
pub use params::{Dims, ParameterState};
pub use priors::PriorConfig;
