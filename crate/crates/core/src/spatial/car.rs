//! CAR-family log densities. Quadratic forms are accumulated edge by edge;
//! the `S·m × S·m` Kronecker precision is never formed.

use std::f64::consts::PI;

use nalgebra::DMatrix;

use super::adjacency::Adjacency;
use super::sigma::spd_log_det;
use crate::error::{Error, Result};

/// `Σ_{j~k} (u_j − u_k)²`, i.e. `uᵀ (D − A) u`.
pub fn laplacian_quadratic(u: &[f64], adj: &Adjacency) -> f64 {
    adj.edges().map(|(j, k)| (u[j] - u[k]).powi(2)).sum()
}

/// `Σ_{j~k} (a_j − a_k)(b_j − b_k)`, i.e. `aᵀ (D − A) b`.
pub fn laplacian_cross(a: &[f64], b: &[f64], adj: &Adjacency) -> f64 {
    adj.edges().map(|(j, k)| (a[j] - a[k]) * (b[j] - b[k])).sum()
}

/// S×S matrix `W_ab = φ_aᵀ (D − A) φ_b`, so that `vec(Φ)ᵀ(Σ ⊗ L)vec(Φ) = tr(Σ W)`.
pub fn field_cross_products(phi: &[Vec<f64>], adj: &Adjacency) -> DMatrix<f64> {
    let s = phi.len();
    let mut w = DMatrix::zeros(s, s);
    for (j, k) in adj.edges() {
        for a in 0..s {
            let da = phi[a][j] - phi[a][k];
            for b in a..s {
                w[(a, b)] += da * (phi[b][j] - phi[b][k]);
            }
        }
    }
    for a in 0..s {
        for b in 0..a {
            w[(a, b)] = w[(b, a)];
        }
    }
    w
}

fn check_len(u: &[f64], adj: &Adjacency) -> Result<()> {
    if u.len() != adj.n_sites() {
        return Err(Error::Dimension(format!(
            "field has {} values for {} sites",
            u.len(),
            adj.n_sites()
        )));
    }
    Ok(())
}

/// Improper ICAR log density `(m − c)/2 · log τ − τ/2 · Σ_{j~k}(u_j − u_k)²`,
/// normalised on the rank `m − c` subspace (additive `2π` and pseudo-determinant
/// constants omitted).
pub fn icar_logdensity(u: &[f64], tau: f64, adj: &Adjacency) -> Result<f64> {
    if !(tau > 0.0) || !tau.is_finite() {
        return Err(Error::param("tau", tau, "ICAR precision must be positive"));
    }
    check_len(u, adj)?;
    let rank = (adj.n_sites() - adj.n_components()) as f64;
    Ok(0.5 * rank * tau.ln() - 0.5 * tau * laplacian_quadratic(u, adj))
}

/// Multivariate intrinsic CAR with precision `Σ ⊗ (D − A)`.
///
/// `phi` is S rows of length m. Returns
/// `(m − c)/2 · log det Σ − ½ vec(Φ)ᵀ (Σ ⊗ L) vec(Φ)`.
pub fn micar_logdensity(phi: &[Vec<f64>], sigma: &DMatrix<f64>, adj: &Adjacency) -> Result<f64> {
    if sigma.nrows() != phi.len() {
        return Err(Error::Dimension(format!(
            "Σ is {}x{} but Φ has {} species",
            sigma.nrows(),
            sigma.ncols(),
            phi.len()
        )));
    }
    for row in phi {
        check_len(row, adj)?;
    }
    let log_det = spd_log_det(sigma)?;
    let w = field_cross_products(phi, adj);
    Ok(micar_from_cross(&w, sigma, log_det, adj))
}

fn micar_from_cross(w: &DMatrix<f64>, sigma: &DMatrix<f64>, log_det_sigma: f64, adj: &Adjacency) -> f64 {
    let rank = (adj.n_sites() - adj.n_components()) as f64;
    let quad: f64 = sigma.component_mul(w).sum();
    0.5 * rank * log_det_sigma - 0.5 * quad
}

/// Proper CAR: Gaussian with precision `τ (D − αA)`, fully normalised.
pub fn pcar_logdensity(u: &[f64], tau: f64, alpha: f64, adj: &Adjacency) -> Result<f64> {
    if !(tau > 0.0) || !tau.is_finite() {
        return Err(Error::param("tau", tau, "PCAR precision must be positive"));
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::param("alpha", alpha, "PCAR requires 0 < α < 1"));
    }
    check_len(u, adj)?;
    if let Some(j) = adj.isolated().first() {
        return Err(Error::Geometry(format!(
            "site {j} has no neighbours; D − αA is singular"
        )));
    }
    let m = adj.n_sites() as f64;
    let log_det = m * tau.ln() + banded_pcar_log_det(adj, alpha)?;
    let diag: f64 = (0..adj.n_sites()).map(|j| adj.degree(j) as f64 * u[j] * u[j]).sum();
    let off: f64 = adj.edges().map(|(j, k)| u[j] * u[k]).sum();
    let quad = tau * (diag - 2.0 * alpha * off);
    Ok(0.5 * log_det - 0.5 * quad - 0.5 * m * (2.0 * PI).ln())
}

/// `log det(D − αA)` by banded Cholesky; O(m·b²) for half-bandwidth b.
pub fn banded_pcar_log_det(adj: &Adjacency, alpha: f64) -> Result<f64> {
    let m = adj.n_sites();
    let bw = adj.bandwidth();
    // band[j][d] holds entry (j, j − d), d in 0..=bw
    let mut band = vec![vec![0.0; bw + 1]; m];
    for j in 0..m {
        band[j][0] = adj.degree(j) as f64;
        for &k in adj.neighbors(j) {
            if k < j {
                band[j][j - k] = -alpha;
            }
        }
    }
    let mut log_det = 0.0;
    for j in 0..m {
        let lo = j.saturating_sub(bw);
        for i in lo..=j {
            let mut v = band[j][j - i];
            let kmin = lo.max(i.saturating_sub(bw));
            for k in kmin..i {
                v -= band[j][j - k] * band[i][i - k];
            }
            if i == j {
                if !(v > 0.0) {
                    return Err(Error::NotPositiveDefinite(format!(
                        "D − αA lost positive definiteness at row {j}"
                    )));
                }
                let d = v.sqrt();
                band[j][0] = d;
                log_det += 2.0 * d.ln();
            } else {
                band[j][j - i] = v / band[i][0];
            }
        }
    }
    Ok(log_det)
}
