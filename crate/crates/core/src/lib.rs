//! Spatially misaligned joint-species N-mixture models.
//!
//! Fine-grid repeated visit counts and coarse-region cull totals are linked
//! through latent site abundances. Species share a multivariate intrinsic CAR
//! spatial field with precision `Σ ⊗ (D − A)`. Posterior sampling uses an
//! adaptive Metropolis-within-Gibbs engine; uncertainty in regional cull
//! proportions is propagated by fitting sampled cull scenarios and pooling
//! their draws.
//!
//! Modules:
//!
//! * [`spatial`]: lattice adjacency, region assignment, CAR densities and field draws
//! * [`model`]: dataset, parameters, priors, likelihood terms
//! * [`mcmc`]: the sampler, posterior storage, diagnostics, summaries
//! * [`scenarios`]: cull-band elicitation, scenario fits, pooling, sensitivity sweeps
//! * [`simgen`]: synthetic data, retention thinning, RMSE and coverage
//! * [`io`]: file formats, run configuration, manifests
//! * [`commands`]: the operations behind the command-line tool

pub mod commands;
pub mod error;
pub mod io;
pub mod mcmc;
pub mod model;
pub mod scenarios;
pub mod simgen;
pub mod spatial;

pub use error::{DataIssue, Error, Result};
