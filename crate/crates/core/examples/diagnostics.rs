//! Split R-hat and effective sample size for a short run, listing the
//! parameters that have not mixed.
//!
//! ```text
//! cargo run --release --example diagnostics
//! ```

use spatial_nmix::mcmc::{diagnostics, run_chains, Problem, SamplerConfig, RHAT_THRESHOLD};
use spatial_nmix::model::PriorConfig;
use spatial_nmix::scenarios::CullScenario;
use spatial_nmix::simgen::{simulate_dataset, SimConfig};

fn main() -> spatial_nmix::Result<()> {
    let sim = simulate_dataset(&SimConfig::desk(), 2)?;
    let priors = PriorConfig::default();
    let problem = Problem::new(&sim.geometry, &sim.adjacency, &sim.dataset, &priors)?;
    let sc = CullScenario::constant(0, sim.dataset.n_species(), sim.dataset.n_regions(), 0.2)?;
    let config = SamplerConfig {
        n_iterations: 2_000,
        n_burnin: 1_000,
        thin: 5,
        n_chains: 4,
        seed: 2,
        ..SamplerConfig::default()
    };
    let samples = run_chains(&problem, &sc, &config)?;
    for c in &samples.chains {
        println!("chain {} acceptance: {:?}", c.chain, c.acceptance);
    }
    let report = diagnostics(&samples)?;
    for row in report.rows.iter().filter(|r| !r.name.starts_with("N[") && !r.name.starts_with("u[")) {
        println!("{:<12} rhat {:.3}  ess {:>7.0}", row.name, row.rhat, row.ess);
    }
    let flagged = report.flagged();
    println!(
        "{} of {} parameters above R-hat {RHAT_THRESHOLD}, first few: {:?}",
        flagged.len(),
        report.rows.len(),
        &flagged[..flagged.len().min(8)]
    );
    Ok(())
}
