use std::collections::HashSet;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spatial::GridGeometry;

/// Tolerance on compositional covariate row sums.
pub const ROW_SUM_TOLERANCE: f64 = 1e-6;

/// One survey visit: species `species` counted `count` individuals at `site` on visit `visit`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Observation {
    pub species: usize,
    pub site: usize,
    pub visit: usize,
    pub count: u64,
}

/// Reported regional cull total for one species.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CullRecord {
    pub species: usize,
    pub region: usize,
    pub count: u64,
}

/// Fine-grid visit counts, coarse-region culls, and compositional covariates.
///
/// Culls are either absent altogether or present for every (species, region)
/// cell. Visit counts are indexed per (species, site) on construction.
#[derive(Debug, Clone)]
pub struct SpeciesDataset {
    n_species: usize,
    n_sites: usize,
    n_regions: usize,
    observations: Vec<Observation>,
    culls: Vec<CullRecord>,
    x: DMatrix<f64>,
    g: DMatrix<f64>,
    visits: Vec<Vec<Vec<u64>>>,
    cull_table: Option<Vec<Vec<u64>>>,
}

impl SpeciesDataset {
    pub fn new(
        n_species: usize,
        geometry: &GridGeometry,
        observations: Vec<Observation>,
        culls: Vec<CullRecord>,
        x: DMatrix<f64>,
        g: DMatrix<f64>,
    ) -> Result<Self> {
        let m = geometry.n_sites();
        let r = geometry.n_regions();
        if n_species == 0 {
            return Err(Error::Config("need at least one species".into()));
        }
        check_compositional("X", &x, m)?;
        check_compositional("G", &g, m)?;

        let mut visits = vec![vec![Vec::new(); m]; n_species];
        let mut seen = HashSet::new();
        for (row, o) in observations.iter().enumerate() {
            if o.species >= n_species {
                return Err(Error::Config(format!(
                    "observation {row}: species {} outside 0..{n_species}",
                    o.species
                )));
            }
            if o.site >= m {
                return Err(Error::Config(format!(
                    "observation {row}: unknown site_id {}",
                    o.site
                )));
            }
            if !seen.insert((o.species, o.site, o.visit)) {
                return Err(Error::Config(format!(
                    "observation {row}: duplicate visit {} for species {} at site {}",
                    o.visit, o.species, o.site
                )));
            }
            visits[o.species][o.site].push(o.count);
        }

        let cull_table = if culls.is_empty() {
            None
        } else {
            let mut table = vec![vec![None; r]; n_species];
            for (row, c) in culls.iter().enumerate() {
                if c.species >= n_species || c.region >= r {
                    return Err(Error::Config(format!(
                        "cull {row}: (species {}, region {}) outside {n_species}x{r}",
                        c.species, c.region
                    )));
                }
                if table[c.species][c.region].replace(c.count).is_some() {
                    return Err(Error::Config(format!(
                        "cull {row}: second count for species {} in region {}",
                        c.species, c.region
                    )));
                }
            }
            let mut full = vec![vec![0; r]; n_species];
            for (i, row) in table.iter().enumerate() {
                for (k, v) in row.iter().enumerate() {
                    full[i][k] = v.ok_or_else(|| {
                        Error::Config(format!("missing cull count for species {i} in region {k}"))
                    })?;
                }
            }
            Some(full)
        };

        Ok(Self {
            n_species,
            n_sites: m,
            n_regions: r,
            observations,
            culls,
            x,
            g,
            visits,
            cull_table,
        })
    }

    /// Same covariates and culls, different visit records.
    pub fn with_observations(&self, observations: Vec<Observation>, geometry: &GridGeometry) -> Result<Self> {
        Self::new(
            self.n_species,
            geometry,
            observations,
            self.culls.clone(),
            self.x.clone(),
            self.g.clone(),
        )
    }

    pub fn n_species(&self) -> usize {
        self.n_species
    }

    pub fn n_sites(&self) -> usize {
        self.n_sites
    }

    pub fn n_regions(&self) -> usize {
        self.n_regions
    }

    pub fn n_abundance_covariates(&self) -> usize {
        self.x.ncols()
    }

    pub fn n_detection_covariates(&self) -> usize {
        self.g.ncols()
    }

    pub fn observations(&self) -> &[Observation] {
        &self.observations
    }

    pub fn cull_records(&self) -> &[CullRecord] {
        &self.culls
    }

    pub fn x(&self) -> &DMatrix<f64> {
        &self.x
    }

    pub fn g(&self) -> &DMatrix<f64> {
        &self.g
    }

    /// Counts recorded for species `i` at site `j`, in input order.
    pub fn visits(&self, species: usize, site: usize) -> &[u64] {
        &self.visits[species][site]
    }

    pub fn max_count(&self, species: usize, site: usize) -> u64 {
        self.visits[species][site].iter().copied().max().unwrap_or(0)
    }

    pub fn has_culls(&self) -> bool {
        self.cull_table.is_some()
    }

    pub fn cull(&self, species: usize, region: usize) -> Option<u64> {
        self.cull_table.as_ref().map(|t| t[species][region])
    }

    pub fn n_observations(&self, species: usize) -> usize {
        self.visits[species].iter().map(Vec::len).sum()
    }
}

fn check_compositional(name: &str, m: &DMatrix<f64>, n_sites: usize) -> Result<()> {
    if m.nrows() != n_sites {
        return Err(Error::Dimension(format!(
            "{name} has {} rows for {n_sites} sites",
            m.nrows()
        )));
    }
    if m.ncols() == 0 {
        return Ok(());
    }
    for (j, row) in m.row_iter().enumerate() {
        if row.iter().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::Config(format!("{name} row {j} has an entry outside [0, 1]")));
        }
        let s = row.sum();
        if (s - 1.0).abs() > ROW_SUM_TOLERANCE {
            return Err(Error::Config(format!(
                "{name} row {j} sums to {s}, not 1 within {ROW_SUM_TOLERANCE:e}"
            )));
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn geometry() -> GridGeometry {
        GridGeometry::lattice_strips(2, 2, 2).unwrap()
    }

    fn covariates() -> DMatrix<f64> {
        DMatrix::from_row_slice(4, 2, &[0.5, 0.5, 1.0, 0.0, 0.2, 0.8, 0.0, 1.0])
    }

    #[test]
    fn indexes_visits() {
        let obs = vec![
            Observation { species: 0, site: 1, visit: 0, count: 3 },
            Observation { species: 0, site: 1, visit: 1, count: 5 },
            Observation { species: 1, site: 2, visit: 0, count: 0 },
        ];
        let d = SpeciesDataset::new(2, &geometry(), obs, vec![], covariates(), covariates()).unwrap();
        assert_eq!(d.visits(0, 1), &[3, 5]);
        assert_eq!(d.max_count(0, 1), 5);
        assert_eq!(d.max_count(1, 3), 0);
        assert_eq!(d.n_observations(0), 2);
        assert!(!d.has_culls());
    }

    #[test]
    fn rejects_unknown_site_and_bad_rows() {
        let obs = vec![Observation { species: 0, site: 9, visit: 0, count: 1 }];
        assert!(SpeciesDataset::new(1, &geometry(), obs, vec![], covariates(), covariates()).is_err());
        let mut x = covariates();
        x[(0, 0)] = 0.3;
        let err = SpeciesDataset::new(1, &geometry(), vec![], vec![], x, covariates()).unwrap_err();
        assert!(err.to_string().contains("1e-6"), "{err}");
    }

    #[test]
    fn culls_must_be_complete_and_unique() {
        let c = |species, region, count| CullRecord { species, region, count };
        let partial = vec![c(0, 0, 4)];
        assert!(SpeciesDataset::new(1, &geometry(), vec![], partial, covariates(), covariates()).is_err());
        let dup = vec![c(0, 0, 4), c(0, 0, 5), c(0, 1, 1)];
        assert!(SpeciesDataset::new(1, &geometry(), vec![], dup, covariates(), covariates()).is_err());
        let ok = vec![c(0, 1, 7), c(0, 0, 4)];
        let d = SpeciesDataset::new(1, &geometry(), vec![], ok, covariates(), covariates()).unwrap();
        assert_eq!(d.cull(0, 1), Some(7));
    }
}
