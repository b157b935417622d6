use rand::seq::SliceRandom;

use crate::error::{Error, Result};
use crate::mcmc::named_rng;
use crate::model::{Observation, SpeciesDataset};
use crate::spatial::GridGeometry;

/// Fewest visit rows per species that still make a fittable dataset.
pub const MIN_RETAINED: usize = 4;

/// `round(percent / 100 × total)`, halves rounded up.
pub fn retained_count(percent: f64, total: usize) -> usize {
    (percent * total as f64 / 100.0 + 0.5).floor() as usize
}

/// Keeps `retained_count(percent, rows)` visit rows per species.
///
/// Sites are taken in one seeded random order shared by all species and all
/// levels, each with all of its visits, and the last site is cut to fit. A
/// lower level is therefore always a subset of a higher one with the same
/// seed, and the first retained site keeps every visit. Culls are untouched.
pub fn apply_retention(
    dataset: &SpeciesDataset,
    geometry: &GridGeometry,
    percent: f64,
    seed: u64,
) -> Result<SpeciesDataset> {
    if !(percent > 0.0 && percent <= 100.0) {
        return Err(Error::Config(format!("retention {percent}% outside (0, 100]")));
    }
    if percent == 100.0 {
        return Ok(dataset.clone());
    }
    let mut order: Vec<usize> = (0..dataset.n_sites()).collect();
    order.shuffle(&mut named_rng(seed, "retention/sites"));
    let mut rank = vec![0; order.len()];
    for (pos, &site) in order.iter().enumerate() {
        rank[site] = pos;
    }
    let mut kept: Vec<Observation> = Vec::new();
    for i in 0..dataset.n_species() {
        let mut rows: Vec<&Observation> = dataset.observations().iter().filter(|o| o.species == i).collect();
        let keep = retained_count(percent, rows.len());
        if keep < MIN_RETAINED {
            return Err(Error::Config(format!(
                "retaining {percent}% leaves {keep} rows for species {i}; need at least {MIN_RETAINED}"
            )));
        }
        rows.sort_by_key(|o| (rank[o.site], o.visit));
        kept.extend(rows.into_iter().take(keep).copied());
    }
    dataset.with_observations(kept, geometry)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simgen::{simulate_dataset, SimConfig};
    use std::collections::HashSet;

    #[test]
    fn rounding_rule() {
        assert_eq!(retained_count(2.5, 1875), 47);
        assert_eq!(retained_count(50.0, 3), 2);
        assert_eq!(retained_count(100.0, 1875), 1875);
    }

    #[test]
    fn nested_subsets_with_repeat_visits() {
        let sim = simulate_dataset(&SimConfig::default(), 3).unwrap();
        let full = &sim.dataset;
        assert_eq!(apply_retention(full, &sim.geometry, 100.0, 1).unwrap().observations(), full.observations());
        let all: HashSet<Observation> = full.observations().iter().copied().collect();
        let mut previous: Option<HashSet<Observation>> = None;
        for pct in [50.0, 40.0, 30.0, 20.0, 10.0, 5.0, 2.5] {
            let d = apply_retention(full, &sim.geometry, pct, 7).unwrap();
            let set: HashSet<Observation> = d.observations().iter().copied().collect();
            assert!(set.is_subset(&all));
            for i in 0..3 {
                assert_eq!(d.n_observations(i), retained_count(pct, 1875));
                assert!((0..625).any(|j| d.visits(i, j).len() >= 2));
            }
            if let Some(prev) = &previous {
                assert!(set.is_subset(prev));
            }
            assert_eq!(d.cull_records(), full.cull_records());
            previous = Some(set);
        }
    }

    #[test]
    fn too_few_rows_is_an_error() {
        let cfg = SimConfig {
            lattice_side: 2,
            n_regions: 1,
            ..SimConfig::desk()
        };
        let sim = simulate_dataset(&cfg, 1).unwrap();
        assert!(apply_retention(&sim.dataset, &sim.geometry, 10.0, 1).is_err());
    }
}
