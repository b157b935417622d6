//! Cull-percentage uncertainty: elicited bands, sampled scenarios, per-scenario
//! fits, and pooling of their posterior draws.

mod bands;
mod fit;
mod scenario;
mod sensitivity;

pub use bands::{mean_scenario, sample_scenarios, AssignmentEntry, BandAssignment, BandSet, CullBand};
pub use fit::{fit_scenarios, pool_samples, species_totals, ScenarioFit, ScenarioFits, TotalRow};
pub use scenario::CullScenario;
pub use sensitivity::{assignment_sweep, scenario_count_sweep};
