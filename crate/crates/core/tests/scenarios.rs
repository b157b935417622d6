use spatial_nmix::mcmc::{Problem, SamplerConfig};
use spatial_nmix::model::PriorConfig;
use spatial_nmix::scenarios::{
    assignment_sweep, fit_scenarios, scenario_count_sweep, species_totals, BandAssignment, BandSet, CullScenario,
};
use spatial_nmix::simgen::{simulate_dataset, SimConfig, SimData};
use spatial_nmix::Error;

fn small() -> SimData {
    let cfg = SimConfig {
        lattice_side: 6,
        n_regions: 3,
        ..SimConfig::desk()
    };
    simulate_dataset(&cfg, 21).unwrap()
}

fn short(seed: u64) -> SamplerConfig {
    SamplerConfig {
        n_iterations: 1_500,
        n_burnin: 750,
        thin: 5,
        n_chains: 1,
        seed,
        store_fields: false,
        ..SamplerConfig::default()
    }
}

#[test]
fn larger_cull_proportion_implies_smaller_totals() {
    let sim = small();
    let priors = PriorConfig::default();
    let problem = Problem::new(&sim.geometry, &sim.adjacency, &sim.dataset, &priors).unwrap();
    let (s, r) = (sim.dataset.n_species(), sim.dataset.n_regions());
    let scenarios: Vec<CullScenario> = [0.1, 0.4]
        .iter()
        .enumerate()
        .map(|(id, &k)| CullScenario::constant(id, s, r, k).unwrap())
        .collect();
    let fits = fit_scenarios(&problem, &scenarios, &short(4), |_, _| Ok(())).unwrap();
    let ok = fits.succeeded();
    assert_eq!(ok.len(), 2);
    let low = species_totals("0.1", ok[0]);
    let high = species_totals("0.4", ok[1]);
    for (a, b) in low.iter().zip(&high) {
        assert!(b.median < a.median, "species {}: {} vs {}", a.species, a.median, b.median);
    }
}

#[test]
fn sweeps_report_one_row_per_configuration_and_species() {
    let sim = small();
    let priors = PriorConfig::default();
    let problem = Problem::new(&sim.geometry, &sim.adjacency, &sim.dataset, &priors).unwrap();
    let (s, r) = (sim.dataset.n_species(), sim.dataset.n_regions());
    let bands = BandSet::default();
    let mut mixed = BandAssignment::uniform(s, r, "Low");
    mixed.set(0, 0, "High");
    let variants = vec![("all low".to_string(), BandAssignment::uniform(s, r, "Low")), ("mixed".to_string(), mixed)];
    let rows = assignment_sweep(&problem, &variants, &bands, 2, 9, true, &short(9)).unwrap();
    assert_eq!(rows.len(), 2 * s);
    assert!(rows[..s].iter().all(|t| t.configuration == "all low"));

    let scenarios = spatial_nmix::scenarios::sample_scenarios(&variants[0].1, &bands, 3, 9, true).unwrap();
    let fits = fit_scenarios(&problem, &scenarios, &short(9), |_, _| Ok(())).unwrap();
    let parts: Vec<_> = fits.succeeded().into_iter().cloned().collect();
    let rows = scenario_count_sweep(&parts, &[1, 3]).unwrap();
    assert_eq!(rows.len(), 2 * s);
    assert!(matches!(scenario_count_sweep(&parts, &[3]), Err(Error::Config(_))));
    assert!(matches!(scenario_count_sweep(&parts, &[1, 4]), Err(Error::Config(_))));
}
