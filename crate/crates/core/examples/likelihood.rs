//! The joint log posterior split into its terms at the generating parameters
//! of a small simulated dataset, and how the cull term responds to κ.
//!
//! ```text
//! cargo run --release --example likelihood
//! ```

use spatial_nmix::model::{posterior_terms, regional_totals, PriorConfig};
use spatial_nmix::scenarios::CullScenario;
use spatial_nmix::simgen::{simulate_dataset, SimConfig};

fn main() -> spatial_nmix::Result<()> {
    let sim = simulate_dataset(&SimConfig::desk(), 3)?;
    let truth = &sim.truth;
    let priors = PriorConfig::default();
    println!("regional totals R[i][k]: {:?}", regional_totals(&truth.state, &sim.geometry));

    for kappa in [0.1, 0.2, 0.4] {
        let sc = CullScenario::constant(0, sim.dataset.n_species(), sim.dataset.n_regions(), kappa)?;
        let t = posterior_terms(&truth.state, &sim.dataset, &sc, &priors, &sim.geometry, &sim.adjacency)?;
        println!(
            "kappa {kappa:.1}: obs {:.1}  latent {:.1}  cull {:.1}  prior {:.1}  total {:.1}",
            t.observation,
            t.latent,
            t.cull,
            t.prior,
            t.total()
        );
    }
    Ok(())
}
