//! Lattice geometry, neighbour graphs, and CAR-family Gaussian Markov random fields.

mod adjacency;
mod car;
mod field;
mod grid;
mod sigma;

pub use adjacency::{build_adjacency, Adjacency, NeighborRule};
pub use car::{
    banded_pcar_log_det, field_cross_products, icar_logdensity, laplacian_cross, laplacian_quadratic,
    micar_logdensity, pcar_logdensity,
};
pub use field::{center_per_component, sample_intrinsic_field, FieldSampler};
pub use grid::{assign_regions, lattice_sites, BoundaryTie, Containment, GridGeometry, Polygon, RegionAssignment, Site};
pub use sigma::{
    correlation_matrix, is_valid_correlation, n_correlations, pair_index, pairs, precision_matrix,
    sigma_to_correlation, spd_cholesky, spd_log_det,
};
