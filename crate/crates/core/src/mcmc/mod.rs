//! Adaptive Metropolis-within-Gibbs sampling, draw storage, and diagnostics.

mod chain;
mod config;
mod diagnostics;
mod layout;
mod problem;
mod rng;
mod run;
mod samples;
mod step;
mod summary;

pub use chain::{initial_state, run_chain, run_chain_from, INIT_ATTEMPTS};
pub use diagnostics::{
    diagnostics, effective_sample_size, split_rhat, DiagnosticRow, DiagnosticsReport, Rhat, RHAT_THRESHOLD,
};
pub use config::{Block, ProposalScales, SamplerConfig};
pub use layout::ParamLayout;
pub use problem::Problem;
pub use rng::{named_rng, stream_rng, stream_seed};
pub use run::{run_chains, with_workers};
pub use samples::{ChainDraws, PosteriorSamples, SampleMetadata};
pub use step::{
    accept, adapt_scale, propose, rw_metropolis_scalar, AdaptiveScale, StepOutcome, Transform, BLOCK_TARGET,
    SCALAR_TARGET,
};
pub use summary::{quantile, quantile_sorted, summarize, SummaryRow};
