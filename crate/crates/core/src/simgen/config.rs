use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spatial::{is_valid_correlation, n_correlations};

/// Generating distribution for the true spatial field.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FieldKind {
    /// Intrinsic MICAR constrained to sum to zero.
    Intrinsic,
    /// Proper MCAR with structure `D − αA`; the draw is centred afterwards.
    Proper { alpha: f64 },
}

/// Synthetic study design and true parameter values.
///
/// The defaults describe the full 25×25 lattice with five horizontal strip
/// regions; [`SimConfig::desk`] is the 10×10 profile used for quick checks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    pub lattice_side: usize,
    pub n_regions: usize,
    pub n_species: usize,
    pub kappa: f64,
    pub visits: usize,
    /// Number of compositional abundance covariates.
    pub n_covariates: usize,
    /// Detection covariate of each abundance covariate; G sums X within groups.
    pub detection_groups: Vec<usize>,
    /// Log-scale sd and pairwise correlation of the covariate generator.
    pub covariate_sd: f64,
    pub covariate_corr: f64,
    pub beta0: Vec<f64>,
    pub beta: Vec<Vec<f64>>,
    pub delta0: Vec<f64>,
    pub delta: Vec<Vec<f64>>,
    pub tau: Vec<f64>,
    /// Packed upper-triangle correlations of Σ.
    pub rho: Vec<f64>,
    pub theta: Vec<f64>,
    pub field: FieldKind,
    /// Retained percentages of visit rows.
    pub retention: Vec<f64>,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            lattice_side: 25,
            n_regions: 5,
            n_species: 3,
            kappa: 0.2,
            visits: 3,
            n_covariates: 4,
            detection_groups: vec![0, 0, 1, 1],
            covariate_sd: 0.5,
            covariate_corr: 0.3,
            beta0: vec![1.0, 0.5, 1.5],
            beta: vec![
                vec![1.2, 0.8, 1.5, 0.5],
                vec![0.6, 1.4, 0.9, 1.1],
                vec![1.0, 1.3, 0.7, 1.6],
            ],
            delta0: vec![0.0, -0.3, 0.3],
            delta: vec![vec![0.5, -0.5], vec![0.3, -0.2], vec![-0.4, 0.4]],
            tau: vec![3.5, 5.0, 6.5],
            rho: vec![0.4, -0.3, 0.2],
            theta: vec![3.0, 4.0, 2.5],
            field: FieldKind::Intrinsic,
            retention: vec![100.0, 50.0, 40.0, 30.0, 20.0, 10.0, 5.0, 2.5],
        }
    }
}

impl SimConfig {
    /// 10×10 lattice, five strips of 20 sites, retention {100, 30, 2.5}%.
    pub fn desk() -> Self {
        Self {
            lattice_side: 10,
            retention: vec![100.0, 30.0, 2.5],
            ..Self::default()
        }
    }

    pub fn n_detection_covariates(&self) -> usize {
        self.detection_groups.iter().max().map_or(0, |g| g + 1)
    }

    pub fn validate(&self) -> Result<()> {
        let s = self.n_species;
        let bad = |msg: String| Err(Error::Config(msg));
        if self.lattice_side < 2 {
            return bad(format!("lattice side {} must be at least 2", self.lattice_side));
        }
        if self.visits < 1 {
            return bad("visits must be at least 1".into());
        }
        if self.n_regions == 0 || self.n_regions > self.lattice_side {
            return bad(format!("{} regions do not fit {} lattice rows", self.n_regions, self.lattice_side));
        }
        if !(self.kappa > 0.0 && self.kappa < 1.0) {
            return bad(format!("kappa {} must lie in (0, 1)", self.kappa));
        }
        if self.n_covariates == 0 || self.detection_groups.len() != self.n_covariates {
            return bad("detection_groups needs one entry per covariate".into());
        }
        let q = self.n_detection_covariates();
        if (0..q).any(|g| !self.detection_groups.contains(&g)) {
            return bad("detection groups must be numbered 0..q without gaps".into());
        }
        if !(self.covariate_sd > 0.0) || !(self.covariate_corr > -1.0 / (self.n_covariates as f64 - 1.0).max(1.0) && self.covariate_corr < 1.0) {
            return bad("covariate generator needs sd > 0 and a valid exchangeable correlation".into());
        }
        let lens = [
            ("beta0", self.beta0.len(), s),
            ("delta0", self.delta0.len(), s),
            ("tau", self.tau.len(), s),
            ("theta", self.theta.len(), s),
            ("beta", self.beta.len(), s),
            ("delta", self.delta.len(), s),
            ("rho", self.rho.len(), n_correlations(s)),
        ];
        for (name, got, want) in lens {
            if got != want {
                return bad(format!("{name} has {got} entries, expected {want}"));
            }
        }
        if self.beta.iter().any(|r| r.len() != self.n_covariates) || self.delta.iter().any(|r| r.len() != q) {
            return bad("coefficient rows do not match covariate counts".into());
        }
        if self.tau.iter().chain(&self.theta).any(|v| !(*v > 0.0)) {
            return bad("tau and theta must be positive".into());
        }
        if !is_valid_correlation(s, &self.rho) {
            return bad("rho does not give a positive definite Σ".into());
        }
        if let FieldKind::Proper { alpha } = self.field {
            if !(alpha > 0.0 && alpha < 1.0) {
                return bad(format!("proper field needs 0 < alpha < 1, got {alpha}"));
            }
        }
        if self.retention.is_empty() || self.retention.iter().any(|r| !(*r > 0.0 && *r <= 100.0)) {
            return bad("retention levels must lie in (0, 100]".into());
        }
        Ok(())
    }
}
