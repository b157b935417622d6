//! Fit the desk dataset at a known κ and compare totals with the truth.
//!
//! ```text
//! cargo run --release --example fit
//! ```

use spatial_nmix::mcmc::{run_chains, Problem, SamplerConfig};
use spatial_nmix::model::PriorConfig;
use spatial_nmix::scenarios::{species_totals, CullScenario};
use spatial_nmix::simgen::{coverage_report, simulate_dataset, SimConfig};

fn main() -> spatial_nmix::Result<()> {
    let sim = simulate_dataset(&SimConfig::desk(), 1)?;
    let priors = PriorConfig::default();
    let problem = Problem::new(&sim.geometry, &sim.adjacency, &sim.dataset, &priors)?;
    let sc = CullScenario::constant(0, sim.dataset.n_species(), sim.dataset.n_regions(), sim.truth.kappa)?;
    let config = SamplerConfig {
        n_iterations: 6_000,
        n_burnin: 3_000,
        thin: 10,
        n_chains: 2,
        seed: 1,
        ..SamplerConfig::default()
    };
    let samples = run_chains(&problem, &sc, &config)?;

    for (row, truth) in species_totals("fit", &samples).iter().zip(&sim.truth.totals) {
        println!(
            "species {}: total {:.0} [{:.0}, {:.0}], truth {truth}",
            row.species, row.median, row.lo95, row.hi95
        );
    }
    let cov = coverage_report(&samples, &sim.truth);
    println!("95% intervals cover {}/{} parameters", cov.n_covered, cov.n_parameters);
    Ok(())
}
