//! Propagate uncertainty in cull proportions: sample κ scenarios from an
//! elicited band, fit each, pool the draws, and compare with the mean-κ fit.
//!
//! ```text
//! cargo run --release --example cull_scenarios
//! ```

use spatial_nmix::mcmc::{run_chains, Problem, SamplerConfig};
use spatial_nmix::model::PriorConfig;
use spatial_nmix::scenarios::{
    fit_scenarios, mean_scenario, sample_scenarios, species_totals, BandAssignment, BandSet, CullBand,
};
use spatial_nmix::simgen::{simulate_dataset, SimConfig};

fn main() -> spatial_nmix::Result<()> {
    let sim = simulate_dataset(&SimConfig::desk(), 1)?;
    let priors = PriorConfig::default();
    let problem = Problem::new(&sim.geometry, &sim.adjacency, &sim.dataset, &priors)?;

    let mut bands = BandSet(Default::default());
    bands.0.insert("Around20".into(), CullBand::new(20.0, 2.55, 15.0, 25.0)?);
    let assignment = BandAssignment::uniform(sim.dataset.n_species(), sim.dataset.n_regions(), "Around20");
    let scenarios = sample_scenarios(&assignment, &bands, 5, 11, true)?;
    for sc in &scenarios {
        println!("scenario {}: kappa[0] = {:?}", sc.id, sc.kappa[0]);
    }

    let config = SamplerConfig {
        n_iterations: 4_000,
        n_burnin: 2_000,
        thin: 10,
        n_chains: 2,
        seed: 11,
        store_fields: false,
        ..SamplerConfig::default()
    };
    let fits = fit_scenarios(&problem, &scenarios, &config, |sc, _| {
        println!("scenario {} done", sc.id);
        Ok(())
    })?;
    let pooled = fits.pool(false)?;
    let at_mean = run_chains(&problem, &mean_scenario(&assignment, &bands, 99)?, &config)?;

    for ((p, m), truth) in species_totals("pooled", &pooled)
        .iter()
        .zip(species_totals("mean", &at_mean))
        .zip(&sim.truth.totals)
    {
        println!(
            "species {}: pooled [{:.0}, {:.0}] vs mean-kappa [{:.0}, {:.0}], truth {truth}",
            p.species, p.lo95, p.hi95, m.lo95, m.hi95
        );
    }
    Ok(())
}
