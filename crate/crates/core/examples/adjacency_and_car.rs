//! Lattice adjacency, strip regions, and the CAR log densities.
//!
//! ```text
//! cargo run --release --example adjacency_and_car
//! ```

use spatial_nmix::spatial::{
    build_adjacency, icar_logdensity, micar_logdensity, pcar_logdensity, precision_matrix, sample_intrinsic_field,
    GridGeometry, NeighborRule,
};

fn main() -> spatial_nmix::Result<()> {
    let grid = GridGeometry::lattice_strips(6, 6, 3)?;
    let adj = build_adjacency(&grid, &NeighborRule::Rook)?;
    println!(
        "{} sites in {} regions, {} rook edges, {} component(s), bandwidth {}",
        grid.n_sites(),
        grid.n_regions(),
        adj.n_edges(),
        adj.n_components(),
        adj.bandwidth()
    );

    // Σ from per-species precisions and correlations
    let sigma = precision_matrix(&[3.5, 5.0], &[0.4])?;
    let phi = sample_intrinsic_field(&sigma, &adj, 7)?;
    for (i, u) in phi.iter().enumerate() {
        let mean = u.iter().sum::<f64>() / u.len() as f64;
        println!("species {i}: field mean {mean:+.2e}, ICAR log density {:.3}", icar_logdensity(u, 3.5, &adj)?);
    }
    println!("MICAR log density {:.3}", micar_logdensity(&phi, &sigma, &adj)?);
    for alpha in [0.5, 0.9, 0.99] {
        println!("proper CAR, alpha {alpha}: {:.3}", pcar_logdensity(&phi[0], 3.5, alpha, &adj)?);
    }
    Ok(())
}
