//! Between-species precision Σ = diag(√τ) · R(ρ) · diag(√τ).
//!
//! `rho` holds the strict upper triangle of the correlation matrix R in
//! row-major order: (0,1), (0,2), …, (1,2), …

use nalgebra::{Cholesky, DMatrix};

use crate::error::{Error, Result};

pub fn n_correlations(n_species: usize) -> usize {
    n_species * n_species.saturating_sub(1) / 2
}

/// Position of pair `(a, b)`, `a < b`, in the packed upper triangle.
pub fn pair_index(n_species: usize, a: usize, b: usize) -> usize {
    debug_assert!(a < b && b < n_species);
    a * (2 * n_species - a - 1) / 2 + (b - a - 1)
}

pub fn pairs(n_species: usize) -> impl Iterator<Item = (usize, usize)> {
    (0..n_species).flat_map(move |a| (a + 1..n_species).map(move |b| (a, b)))
}

pub fn correlation_matrix(n_species: usize, rho: &[f64]) -> Result<DMatrix<f64>> {
    if rho.len() != n_correlations(n_species) {
        return Err(Error::Dimension(format!(
            "{n_species} species need {} correlations, got {}",
            n_correlations(n_species),
            rho.len()
        )));
    }
    let mut r = DMatrix::identity(n_species, n_species);
    for ((a, b), &v) in pairs(n_species).zip(rho) {
        r[(a, b)] = v;
        r[(b, a)] = v;
    }
    Ok(r)
}

pub fn precision_matrix(tau: &[f64], rho: &[f64]) -> Result<DMatrix<f64>> {
    let s = tau.len();
    if let Some(&t) = tau.iter().find(|t| !(**t > 0.0) || !t.is_finite()) {
        return Err(Error::param("tau", t, "spatial precision must be positive"));
    }
    let mut sigma = correlation_matrix(s, rho)?;
    for a in 0..s {
        for b in 0..s {
            sigma[(a, b)] *= (tau[a] * tau[b]).sqrt();
        }
    }
    Ok(sigma)
}

/// `log det` via Cholesky; fails unless the matrix is symmetric positive definite.
pub fn spd_log_det(m: &DMatrix<f64>) -> Result<f64> {
    let chol = spd_cholesky(m)?;
    Ok(2.0 * chol.l().diagonal().iter().map(|d| d.ln()).sum::<f64>())
}

pub fn spd_cholesky(m: &DMatrix<f64>) -> Result<Cholesky<f64, nalgebra::Dyn>> {
    if !m.is_square() {
        return Err(Error::NotPositiveDefinite(format!(
            "{}x{} is not square",
            m.nrows(),
            m.ncols()
        )));
    }
    let scale = m.amax().max(1.0);
    for a in 0..m.nrows() {
        for b in 0..a {
            if (m[(a, b)] - m[(b, a)]).abs() > 1e-12 * scale {
                return Err(Error::NotPositiveDefinite(format!("asymmetric at ({a}, {b})")));
            }
        }
    }
    if m.iter().any(|v| !v.is_finite()) {
        return Err(Error::NotPositiveDefinite("non-finite entry".into()));
    }
    Cholesky::new(m.clone()).ok_or_else(|| Error::NotPositiveDefinite("Cholesky factorisation failed".into()))
}

/// Whether the packed correlations give a positive definite R.
pub fn is_valid_correlation(n_species: usize, rho: &[f64]) -> bool {
    rho.iter().all(|r| r.abs() < 1.0)
        && correlation_matrix(n_species, rho)
            .ok()
            .and_then(|r| Cholesky::new(r))
            .is_some()
}

/// Between-species correlation implied by Σ: Σ⁻¹ rescaled to unit diagonal.
pub fn sigma_to_correlation(sigma: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let cov = spd_cholesky(sigma)?.inverse();
    let s = cov.nrows();
    let mut c = DMatrix::identity(s, s);
    for a in 0..s {
        for b in 0..s {
            if a != b {
                let v = cov[(a, b)] / (cov[(a, a)] * cov[(b, b)]).sqrt();
                c[(a, b)] = v.clamp(-1.0, 1.0);
            }
        }
    }
    Ok(c)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn packed_indexing() {
        let got: Vec<_> = pairs(3).map(|(a, b)| pair_index(3, a, b)).collect();
        assert_eq!(got, vec![0, 1, 2]);
        assert_eq!(pair_index(4, 2, 3), 5);
        assert_eq!(n_correlations(4), 6);
    }

    #[test]
    fn diagonal_sigma_has_zero_correlation() {
        let c = sigma_to_correlation(&DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![2.0, 3.0, 7.0]))).unwrap();
        assert_eq!(c, DMatrix::identity(3, 3));
    }

    #[test]
    fn two_by_two_hand_inverse() {
        // Σ⁻¹ = (1/3)[[2,1],[1,2]] so the off-diagonal correlation is 1/2.
        let sigma = DMatrix::from_row_slice(2, 2, &[2.0, -1.0, -1.0, 2.0]);
        let c = sigma_to_correlation(&sigma).unwrap();
        assert!((c[(0, 1)] - 0.5).abs() < 1e-15);
        assert_eq!(c[(0, 0)], 1.0);
    }

    #[test]
    fn non_spd_rejected() {
        let sigma = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        assert!(matches!(sigma_to_correlation(&sigma), Err(Error::NotPositiveDefinite(_))));
        assert!(precision_matrix(&[1.0, 0.0], &[0.1]).is_err());
    }

    #[test]
    fn precision_diagonal_is_tau() {
        let sigma = precision_matrix(&[2.0, 5.0, 0.5], &[0.3, -0.2, 0.1]).unwrap();
        assert_eq!(sigma[(0, 0)], 2.0);
        assert_eq!(sigma[(1, 1)], 5.0);
        assert_eq!(sigma[(2, 2)], 0.5);
        assert!((sigma[(0, 1)] - 0.3 * (10.0f64).sqrt()).abs() < 1e-14);
    }

    proptest! {
        #[test]
        fn correlations_are_bounded_and_symmetric(
            tau in proptest::collection::vec(0.1f64..10.0, 3),
            rho in proptest::collection::vec(-0.6f64..0.6, 3),
        ) {
            prop_assume!(is_valid_correlation(3, &rho));
            let sigma = precision_matrix(&tau, &rho).unwrap();
            let c = sigma_to_correlation(&sigma).unwrap();
            for a in 0..3 {
                prop_assert_eq!(c[(a, a)], 1.0);
                for b in 0..3 {
                    prop_assert!(c[(a, b)].abs() <= 1.0);
                    prop_assert!((c[(a, b)] - c[(b, a)]).abs() < 1e-12);
                }
            }
        }
    }
}
