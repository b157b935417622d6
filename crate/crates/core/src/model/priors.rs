use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Prior hyperparameters. Field names spell out the parameterisation:
///
/// * `β ~ Laplace(laplace_location, laplace_scale)`; the default location is 1, not 0.
/// * `τ ~ Gamma(gamma_shape, gamma_scale)` with *scale*, mean `shape · scale`.
/// * `θ ~ Exponential(exp_rate)`, mean `1 / rate`.
/// * `β₀, δ₀, δ ~ Normal(normal_mean, normal_sd)`.
/// * each packed correlation `ρ ~ Uniform(−1, 1)`, restricted to positive definite R.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PriorConfig {
    pub laplace_location: f64,
    pub laplace_scale: f64,
    pub gamma_shape: f64,
    pub gamma_scale: f64,
    pub exp_rate: f64,
    pub normal_mean: f64,
    pub normal_sd: f64,
}

impl Default for PriorConfig {
    fn default() -> Self {
        Self {
            laplace_location: 1.0,
            laplace_scale: 1.0,
            gamma_shape: 10.0,
            gamma_scale: 0.5,
            exp_rate: 0.5,
            normal_mean: 0.0,
            normal_sd: 5.0,
        }
    }
}

impl PriorConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("laplace_scale", self.laplace_scale),
            ("gamma_shape", self.gamma_shape),
            ("gamma_scale", self.gamma_scale),
            ("exp_rate", self.exp_rate),
            ("normal_sd", self.normal_sd),
        ] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::param(name, v, "must be positive and finite"));
            }
        }
        for (name, v) in [
            ("laplace_location", self.laplace_location),
            ("normal_mean", self.normal_mean),
        ] {
            if !v.is_finite() {
                return Err(Error::param(name, v, "must be finite"));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn json_field_names() {
        let p: PriorConfig = serde_json::from_str(r#"{"gamma_shape": 2.0, "exp_rate": 1.5}"#).unwrap();
        assert_eq!(p.gamma_shape, 2.0);
        assert_eq!(p.exp_rate, 1.5);
        assert_eq!(p.gamma_scale, 0.5);
        assert!(serde_json::from_str::<PriorConfig>(r#"{"gamma_rate": 2.0}"#).is_err());
    }

    #[test]
    fn rejects_non_positive() {
        let p = PriorConfig { gamma_scale: 0.0, ..Default::default() };
        assert!(p.validate().is_err());
        assert!(PriorConfig::default().validate().is_ok());
    }
}
