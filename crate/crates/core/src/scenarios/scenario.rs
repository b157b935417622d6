use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Regional cull proportions κ for every (species, region) cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CullScenario {
    pub id: usize,
    /// S rows of length r, each entry in (0, 1).
    pub kappa: Vec<Vec<f64>>,
}

impl CullScenario {
    pub fn new(id: usize, kappa: Vec<Vec<f64>>) -> Result<Self> {
        for (i, row) in kappa.iter().enumerate() {
            for (k, &v) in row.iter().enumerate() {
                if !(v > 0.0 && v < 1.0) {
                    return Err(Error::param(format!("kappa[{i},{k}]"), v, "must lie in (0, 1)"));
                }
            }
        }
        Ok(Self { id, kappa })
    }

    pub fn constant(id: usize, n_species: usize, n_regions: usize, kappa: f64) -> Result<Self> {
        Self::new(id, vec![vec![kappa; n_regions]; n_species])
    }

    pub fn n_species(&self) -> usize {
        self.kappa.len()
    }

    pub fn n_regions(&self) -> usize {
        self.kappa.first().map_or(0, Vec::len)
    }

    pub fn check_shape(&self, n_species: usize, n_regions: usize) -> Result<()> {
        if self.n_species() != n_species || self.kappa.iter().any(|r| r.len() != n_regions) {
            return Err(Error::Dimension(format!(
                "scenario {} is not {n_species}x{n_regions}",
                self.id
            )));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kappa_must_be_a_proportion() {
        assert!(CullScenario::constant(0, 2, 3, 0.2).is_ok());
        assert!(CullScenario::constant(0, 2, 3, 0.0).is_err());
        assert!(CullScenario::constant(0, 2, 3, 1.0).is_err());
        let s = CullScenario::constant(4, 2, 3, 0.2).unwrap();
        assert!(s.check_shape(2, 3).is_ok());
        assert!(s.check_shape(3, 2).is_err());
    }
}
