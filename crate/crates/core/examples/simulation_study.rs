//! A small simulation study: thin the visit rows to each retention level,
//! refit, and report field RMSE and interval coverage.
//!
//! ```text
//! cargo run --release --example simulation_study
//! ```

use spatial_nmix::mcmc::SamplerConfig;
use spatial_nmix::simgen::{run_study, SimConfig, StudyConfig};

fn main() -> spatial_nmix::Result<()> {
    let cfg = StudyConfig {
        sim: SimConfig::desk(),
        n_datasets: 1,
        seed: 5,
        sampler: SamplerConfig {
            n_iterations: 4_000,
            n_burnin: 2_000,
            thin: 10,
            n_chains: 2,
            ..SamplerConfig::default()
        },
        ..StudyConfig::default()
    };
    let report = run_study(&cfg)?;
    for r in &report.rmse {
        println!("retention {:>5}%  species {}  rmse {:.3}", r.retention, r.species, r.rmse);
    }
    for c in &report.coverage {
        println!(
            "retention {:>5}%  coverage {:.3}  totals {}/{}",
            c.retention, c.fraction, c.totals_covered, c.n_totals
        );
    }
    for f in &report.failures {
        println!("failed: {f:?}");
    }
    Ok(())
}
