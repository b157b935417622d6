use crate::error::{Error, Result};
use crate::model::{PriorConfig, SpeciesDataset};
use crate::spatial::{Adjacency, GridGeometry};

/// Everything a chain needs apart from the cull scenario and sampler settings.
#[derive(Debug, Clone, Copy)]
pub struct Problem<'a> {
    pub geometry: &'a GridGeometry,
    pub adjacency: &'a Adjacency,
    pub dataset: &'a SpeciesDataset,
    pub priors: &'a PriorConfig,
}

impl<'a> Problem<'a> {
    pub fn new(
        geometry: &'a GridGeometry,
        adjacency: &'a Adjacency,
        dataset: &'a SpeciesDataset,
        priors: &'a PriorConfig,
    ) -> Result<Self> {
        priors.validate()?;
        let m = geometry.n_sites();
        if adjacency.n_sites() != m || dataset.n_sites() != m {
            return Err(Error::Dimension(format!(
                "grid has {m} sites, adjacency {}, dataset {}",
                adjacency.n_sites(),
                dataset.n_sites()
            )));
        }
        if dataset.n_regions() != geometry.n_regions() {
            return Err(Error::Dimension(format!(
                "grid has {} regions, dataset {}",
                geometry.n_regions(),
                dataset.n_regions()
            )));
        }
        Ok(Self {
            geometry,
            adjacency,
            dataset,
            priors,
        })
    }
}
