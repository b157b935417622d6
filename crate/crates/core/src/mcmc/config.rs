use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Parameter blocks updated by the sampler.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Block {
    Beta0,
    /// Abundance coefficients, plus the intercept/coefficient shift move.
    Beta,
    Delta0,
    /// Detection coefficients, plus the intercept/coefficient shift move.
    Delta,
    LogTau,
    LogTheta,
    AtanhRho,
    /// Single-site spatial effect updates.
    Field,
    /// Latent abundances N.
    Latent,
}

impl Block {
    pub const ALL: [Block; 9] = [
        Block::Beta0,
        Block::Beta,
        Block::Delta0,
        Block::Delta,
        Block::LogTau,
        Block::LogTheta,
        Block::AtanhRho,
        Block::Field,
        Block::Latent,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Block::Beta0 => "beta0",
            Block::Beta => "beta",
            Block::Delta0 => "delta0",
            Block::Delta => "delta",
            Block::LogTau => "log-tau",
            Block::LogTheta => "log-theta",
            Block::AtanhRho => "atanh-rho",
            Block::Field => "u-site",
            Block::Latent => "latent-n",
        }
    }
}

/// Initial random-walk scales on the unconstrained scale.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ProposalScales {
    pub beta0: f64,
    pub beta: f64,
    pub delta0: f64,
    pub delta: f64,
    pub log_tau: f64,
    pub log_theta: f64,
    pub atanh_rho: f64,
    pub u: f64,
}

impl Default for ProposalScales {
    fn default() -> Self {
        Self {
            beta0: 0.1,
            beta: 0.2,
            delta0: 0.2,
            delta: 0.3,
            log_tau: 0.3,
            log_theta: 0.2,
            atanh_rho: 0.3,
            u: 0.3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SamplerConfig {
    pub n_iterations: usize,
    pub n_burnin: usize,
    pub thin: usize,
    pub n_chains: usize,
    pub seed: u64,
    pub proposal_scales: ProposalScales,
    pub adapt: bool,
    /// Sweeps per adaptation batch during burn-in.
    pub adapt_window: usize,
    /// Initial maximum jump of the integer random walk on N.
    pub latent_step_width: u64,
    /// Keep per-site u and N columns in the stored draws.
    pub store_fields: bool,
    /// Blocks held at their initial values.
    pub frozen: Vec<Block>,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        Self {
            n_iterations: 40_000,
            n_burnin: 20_000,
            thin: 20,
            n_chains: 3,
            seed: 1,
            proposal_scales: ProposalScales::default(),
            adapt: true,
            adapt_window: 50,
            latent_step_width: 5,
            store_fields: true,
            frozen: Vec::new(),
        }
    }
}

impl SamplerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_burnin >= self.n_iterations {
            return Err(Error::Config(format!(
                "n_burnin ({}) must be below n_iterations ({})",
                self.n_burnin, self.n_iterations
            )));
        }
        if self.thin == 0 {
            return Err(Error::Config("thin must be at least 1".into()));
        }
        if self.n_chains == 0 {
            return Err(Error::Config("n_chains must be at least 1".into()));
        }
        if self.latent_step_width == 0 {
            return Err(Error::Config("latent_step_width must be at least 1".into()));
        }
        if self.adapt && self.adapt_window == 0 {
            return Err(Error::Config("adapt_window must be at least 1".into()));
        }
        let s = &self.proposal_scales;
        for (name, v) in [
            ("beta0", s.beta0),
            ("beta", s.beta),
            ("delta0", s.delta0),
            ("delta", s.delta),
            ("log_tau", s.log_tau),
            ("log_theta", s.log_theta),
            ("atanh_rho", s.atanh_rho),
            ("u", s.u),
        ] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::param(format!("proposal_scales.{name}"), v, "must be positive"));
            }
        }
        Ok(())
    }

    /// Draws kept per chain: `(n_iterations − n_burnin) / thin`.
    pub fn retained_per_chain(&self) -> usize {
        (self.n_iterations - self.n_burnin) / self.thin
    }

    pub fn is_frozen(&self, block: Block) -> bool {
        self.frozen.contains(&block)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn long_schedule_keeps_one_thousand() {
        let c = SamplerConfig::default();
        assert_eq!(c.retained_per_chain(), 1000);
        assert_eq!(c.n_chains * c.retained_per_chain(), 3000);
    }

    #[test]
    fn validation() {
        let ok = SamplerConfig::default();
        assert!(ok.validate().is_ok());
        assert!(SamplerConfig { latent_step_width: 0, ..ok.clone() }.validate().is_err());
        assert!(SamplerConfig { n_burnin: 40_000, ..ok.clone() }.validate().is_err());
        assert!(SamplerConfig { thin: 0, ..ok.clone() }.validate().is_err());
        assert!(SamplerConfig { n_chains: 0, ..ok }.validate().is_err());
    }

    #[test]
    fn block_names_round_trip_through_json() {
        let c: SamplerConfig = serde_json::from_str(r#"{"frozen": ["beta0", "log-theta", "latent"]}"#).unwrap();
        assert_eq!(c.frozen, vec![Block::Beta0, Block::LogTheta, Block::Latent]);
    }
}
