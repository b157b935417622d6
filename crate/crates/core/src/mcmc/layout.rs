//! Column layout of stored draws.

use serde::{Deserialize, Serialize};

use crate::model::Dims;
use crate::spatial::pairs;

/// Named columns of a retained draw. Species, covariate, region, and site
/// indices in names are zero-based, e.g. `beta[1,0]` or `N[2,17]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamLayout {
    pub dims: Dims,
    pub store_fields: bool,
    names: Vec<String>,
}

impl ParamLayout {
    pub fn new(dims: Dims, store_fields: bool) -> Self {
        let s = dims.n_species;
        let mut names = Vec::new();
        names.extend((0..s).map(|i| format!("beta0[{i}]")));
        for i in 0..s {
            names.extend((0..dims.n_x).map(|k| format!("beta[{i},{k}]")));
        }
        names.extend((0..s).map(|i| format!("delta0[{i}]")));
        for i in 0..s {
            names.extend((0..dims.n_g).map(|l| format!("delta[{i},{l}]")));
        }
        names.extend((0..s).map(|i| format!("tau[{i}]")));
        names.extend((0..s).map(|i| format!("theta[{i}]")));
        names.extend(pairs(s).map(|(a, b)| format!("rho[{a},{b}]")));
        names.extend(pairs(s).map(|(a, b)| format!("corr[{a},{b}]")));
        names.extend((0..s).map(|i| format!("total[{i}]")));
        for i in 0..s {
            names.extend((0..dims.n_regions).map(|k| format!("R[{i},{k}]")));
        }
        if store_fields {
            for i in 0..s {
                names.extend((0..dims.n_sites).map(|j| format!("u[{i},{j}]")));
            }
            for i in 0..s {
                names.extend((0..dims.n_sites).map(|j| format!("N[{i},{j}]")));
            }
        }
        Self {
            dims,
            store_fields,
            names,
        }
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    fn s(&self) -> usize {
        self.dims.n_species
    }

    fn n_pairs(&self) -> usize {
        self.dims.n_rho()
    }

    pub fn beta0(&self, i: usize) -> usize {
        i
    }

    pub fn beta(&self, i: usize, k: usize) -> usize {
        self.s() + i * self.dims.n_x + k
    }

    pub fn delta0(&self, i: usize) -> usize {
        self.s() * (1 + self.dims.n_x) + i
    }

    pub fn delta(&self, i: usize, l: usize) -> usize {
        self.s() * (2 + self.dims.n_x) + i * self.dims.n_g + l
    }

    pub fn tau(&self, i: usize) -> usize {
        self.s() * (2 + self.dims.n_x + self.dims.n_g) + i
    }

    pub fn theta(&self, i: usize) -> usize {
        self.tau(0) + self.s() + i
    }

    pub fn rho(&self, pair: usize) -> usize {
        self.theta(0) + self.s() + pair
    }

    pub fn corr(&self, pair: usize) -> usize {
        self.rho(0) + self.n_pairs() + pair
    }

    pub fn total(&self, i: usize) -> usize {
        self.corr(0) + self.n_pairs() + i
    }

    pub fn region_total(&self, i: usize, k: usize) -> usize {
        self.total(0) + self.s() + i * self.dims.n_regions + k
    }

    /// Column of `u[i,j]`; `None` when fields are not stored.
    pub fn u(&self, i: usize, j: usize) -> Option<usize> {
        self.store_fields
            .then(|| self.region_total(0, 0) + self.s() * self.dims.n_regions + i * self.dims.n_sites + j)
    }

    pub fn n(&self, i: usize, j: usize) -> Option<usize> {
        self.u(0, 0)
            .map(|base| base + self.s() * self.dims.n_sites + i * self.dims.n_sites + j)
    }

    /// Columns holding model parameters proper (everything except derived
    /// correlations, totals, and regional sums).
    pub fn is_derived(&self, column: usize) -> bool {
        (self.corr(0)..self.region_total(0, 0) + self.s() * self.dims.n_regions).contains(&column)
    }
}
