use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::{Binomial, Distribution, Poisson, StandardNormal};
use serde::{Deserialize, Serialize};

use super::config::{FieldKind, SimConfig};
use crate::error::{Error, Result};
use crate::mcmc::named_rng;
use crate::model::dist::sample_negbin;
use crate::model::{
    detection_prob, mean_abundance, regional_totals, CullRecord, Dims, Observation, ParameterState, SpeciesDataset,
};
use crate::spatial::{build_adjacency, precision_matrix, spd_cholesky, Adjacency, FieldSampler, GridGeometry, NeighborRule};

/// True values behind a simulated dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimTruth {
    pub state: ParameterState,
    pub totals: Vec<u64>,
    pub regional: Vec<Vec<u64>>,
    /// Between-species correlations implied by Σ, packed like `rho`.
    pub correlations: Vec<f64>,
    pub kappa: f64,
}

#[derive(Debug, Clone)]
pub struct SimData {
    pub geometry: GridGeometry,
    pub adjacency: Adjacency,
    pub dataset: SpeciesDataset,
    pub truth: SimTruth,
}

/// Rows of positive correlated log-normals, normalised to sum to one.
fn compositional<R: Rng + ?Sized>(m: usize, p: usize, sd: f64, corr: f64, rng: &mut R) -> Result<DMatrix<f64>> {
    let cov = DMatrix::from_fn(p, p, |a, b| sd * sd * if a == b { 1.0 } else { corr });
    let l = spd_cholesky(&cov)?.l();
    let mut x = DMatrix::zeros(m, p);
    for j in 0..m {
        let z: Vec<f64> = (0..p).map(|_| rng.sample(StandardNormal)).collect();
        let w: Vec<f64> = (0..p).map(|a| (0..=a).map(|b| l[(a, b)] * z[b]).sum::<f64>().exp()).collect();
        let total: f64 = w.iter().sum();
        for a in 0..p {
            x[(j, a)] = w[a] / total;
        }
    }
    Ok(x)
}

/// Generates one dataset. Covariates, field, abundances, visit counts, and
/// culls each come from their own stream derived from `seed`.
pub fn simulate_dataset(config: &SimConfig, seed: u64) -> Result<SimData> {
    config.validate()?;
    let side = config.lattice_side;
    let s = config.n_species;
    let geometry = GridGeometry::lattice_strips(side, side, config.n_regions)?;
    let adjacency = build_adjacency(&geometry, &NeighborRule::Rook)?;
    let m = geometry.n_sites();

    let mut rng = named_rng(seed, "sim/covariates");
    let x = compositional(m, config.n_covariates, config.covariate_sd, config.covariate_corr, &mut rng)?;
    let q = config.n_detection_covariates();
    let mut g = DMatrix::zeros(m, q);
    for j in 0..m {
        for (k, &grp) in config.detection_groups.iter().enumerate() {
            g[(j, grp)] += x[(j, k)];
        }
    }

    let dims = Dims {
        n_species: s,
        n_x: config.n_covariates,
        n_g: q,
        n_sites: m,
        n_regions: config.n_regions,
    };
    let mut state = ParameterState::zeros(dims);
    state.beta0 = config.beta0.clone();
    state.beta = config.beta.clone();
    state.delta0 = config.delta0.clone();
    state.delta = config.delta.clone();
    state.tau = config.tau.clone();
    state.rho = config.rho.clone();
    state.theta = config.theta.clone();

    let sigma = precision_matrix(&state.tau, &state.rho)?;
    let mut rng = named_rng(seed, "sim/field");
    let sampler = match config.field {
        FieldKind::Intrinsic => FieldSampler::intrinsic(&adjacency),
        FieldKind::Proper { alpha } => FieldSampler::proper(&adjacency, alpha)?,
    };
    state.u = sampler.sample(&sigma, &mut rng)?;
    if let FieldKind::Proper { .. } = config.field {
        // The fitted model identifies the field only up to a constant; move
        // the mean into the intercept so the truth is on the same footing.
        for i in 0..s {
            let mean = state.u[i].iter().sum::<f64>() / m as f64;
            state.u[i].iter_mut().for_each(|v| *v -= mean);
            state.beta0[i] += mean;
        }
    }

    // Covariates are needed to evaluate λ and p.
    let scaffold = SpeciesDataset::new(s, &geometry, Vec::new(), Vec::new(), x.clone(), g.clone())?;
    let mut rng = named_rng(seed, "sim/abundance");
    for i in 0..s {
        for j in 0..m {
            let lambda = mean_abundance(&state, &scaffold, i, j);
            state.n[i][j] = sample_negbin(lambda, state.theta[i], &mut rng);
        }
    }

    let mut rng = named_rng(seed, "sim/visits");
    let mut observations = Vec::with_capacity(s * m * config.visits);
    for i in 0..s {
        for j in 0..m {
            let p = detection_prob(&state, &scaffold, i, j);
            let n = state.n[i][j];
            let binom = Binomial::new(n, p).map_err(|e| Error::Config(e.to_string()))?;
            for visit in 0..config.visits {
                observations.push(Observation {
                    species: i,
                    site: j,
                    visit,
                    count: binom.sample(&mut rng),
                });
            }
        }
    }

    let regional = regional_totals(&state, &geometry);
    let mut rng = named_rng(seed, "sim/culls");
    let mut culls = Vec::with_capacity(s * config.n_regions);
    for (i, row) in regional.iter().enumerate() {
        for (k, &r) in row.iter().enumerate() {
            let mu = r as f64 * config.kappa;
            let count = if mu > 0.0 {
                Poisson::new(mu).map_err(|e| Error::Config(e.to_string()))?.sample(&mut rng) as u64
            } else {
                0
            };
            culls.push(CullRecord {
                species: i,
                region: k,
                count,
            });
        }
    }

    let dataset = SpeciesDataset::new(s, &geometry, observations, culls, x, g)?;
    let truth = SimTruth {
        totals: state.n.iter().map(|row| row.iter().sum()).collect(),
        correlations: state.correlations()?,
        regional,
        kappa: config.kappa,
        state,
    };
    Ok(SimData {
        geometry,
        adjacency,
        dataset,
        truth,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_design_shapes() {
        let sim = simulate_dataset(&SimConfig::default(), 1).unwrap();
        for i in 0..3 {
            assert_eq!(sim.dataset.n_observations(i), 1875);
        }
        assert_eq!(sim.geometry.n_sites(), 625);
        let members = sim.geometry.region_members();
        assert!(members.iter().all(|r| r.len() == 125));
        let x = sim.dataset.x();
        for j in 0..625 {
            assert!((x.row(j).sum() - 1.0).abs() < 1e-9);
            assert!((sim.dataset.g().row(j).sum() - 1.0).abs() < 1e-9);
        }
        for i in 0..3 {
            assert!(sim.truth.state.u[i].iter().sum::<f64>().abs() < 1e-8);
            assert_eq!(sim.truth.totals[i], sim.truth.regional[i].iter().sum::<u64>());
        }
    }

    #[test]
    fn deterministic_by_seed() {
        let cfg = SimConfig::desk();
        let a = simulate_dataset(&cfg, 4).unwrap();
        let b = simulate_dataset(&cfg, 4).unwrap();
        let c = simulate_dataset(&cfg, 5).unwrap();
        assert_eq!(a.truth, b.truth);
        assert_eq!(a.dataset.observations(), b.dataset.observations());
        assert_ne!(a.truth, c.truth);
    }

    #[test]
    fn cull_ratio_centres_on_kappa() {
        let cfg = SimConfig::desk();
        let mut ratios = Vec::new();
        for seed in 0..100 {
            let sim = simulate_dataset(&cfg, seed).unwrap();
            let z: u64 = sim.dataset.cull_records().iter().map(|c| c.count).sum();
            let r: u64 = sim.truth.totals.iter().sum();
            ratios.push(z as f64 / r as f64);
        }
        let mean = ratios.iter().sum::<f64>() / 100.0;
        let sd = (ratios.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / 99.0).sqrt();
        assert!((mean - 0.2).abs() < 3.0 * sd / 10.0, "mean {mean}, se {}", sd / 10.0);
    }

    #[test]
    fn counts_never_exceed_abundance() {
        let sim = simulate_dataset(&SimConfig::desk(), 2).unwrap();
        for o in sim.dataset.observations() {
            assert!(o.count <= sim.truth.state.n[o.species][o.site]);
        }
        sim.truth.state.check_support(&sim.dataset).unwrap();
    }
}
