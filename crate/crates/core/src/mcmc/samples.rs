//! Retained posterior draws.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::config::SamplerConfig;
use super::layout::ParamLayout;
use crate::error::{Error, Result};

/// Retained draws of one chain, row-major (`n_draws × layout.len()`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainDraws {
    pub chain: usize,
    pub scenario: usize,
    /// Sweep index (1-based) of each retained draw.
    pub iterations: Vec<usize>,
    pub values: Vec<f64>,
    /// Post-burn-in acceptance rate per proposal family.
    pub acceptance: BTreeMap<String, f64>,
}

impl ChainDraws {
    pub fn n_draws(&self) -> usize {
        self.iterations.len()
    }

    pub fn row(&self, draw: usize, width: usize) -> &[f64] {
        &self.values[draw * width..(draw + 1) * width]
    }

    pub fn column(&self, column: usize, width: usize) -> Vec<f64> {
        self.values.iter().skip(column).step_by(width).copied().collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleMetadata {
    pub config: SamplerConfig,
    /// Scenario ids whose draws are included, in pooling order.
    pub scenarios: Vec<usize>,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PosteriorSamples {
    pub layout: ParamLayout,
    pub chains: Vec<ChainDraws>,
    pub metadata: SampleMetadata,
}

impl PosteriorSamples {
    pub fn width(&self) -> usize {
        self.layout.len()
    }

    pub fn n_chains(&self) -> usize {
        self.chains.len()
    }

    pub fn total_draws(&self) -> usize {
        self.chains.iter().map(ChainDraws::n_draws).sum()
    }

    /// One vector per chain for the given column.
    pub fn column_by_chain(&self, column: usize) -> Vec<Vec<f64>> {
        self.chains.iter().map(|c| c.column(column, self.width())).collect()
    }

    /// All chains concatenated in chain order.
    pub fn column(&self, column: usize) -> Vec<f64> {
        self.column_by_chain(column).concat()
    }

    pub fn column_named(&self, name: &str) -> Result<Vec<f64>> {
        let c = self
            .layout
            .index_of(name)
            .ok_or_else(|| Error::Config(format!("no parameter named {name}")))?;
        Ok(self.column(c))
    }

    /// Concatenates chains of several sample sets (posterior pooling).
    /// Layouts must agree; chain order follows the input order.
    pub fn pool(parts: &[PosteriorSamples]) -> Result<PosteriorSamples> {
        let first = parts
            .first()
            .ok_or_else(|| Error::Config("nothing to pool".into()))?;
        let mut chains = Vec::new();
        let mut scenarios = Vec::new();
        for p in parts {
            if p.layout != first.layout {
                return Err(Error::Dimension("pooled samples have different layouts".into()));
            }
            chains.extend(p.chains.iter().cloned());
            scenarios.extend(&p.metadata.scenarios);
        }
        Ok(PosteriorSamples {
            layout: first.layout.clone(),
            chains,
            metadata: SampleMetadata {
                config: first.metadata.config.clone(),
                scenarios,
                seed: first.metadata.seed,
            },
        })
    }

    /// Checks that stored totals and regional sums equal the per-draw sums of
    /// the stored N columns, exactly. Requires stored fields.
    pub fn verify_derived(&self, region_of: &[usize]) -> Result<()> {
        let l = &self.layout;
        if !l.store_fields {
            return Err(Error::Config("fields were not stored".into()));
        }
        let (s, m, r) = (l.dims.n_species, l.dims.n_sites, l.dims.n_regions);
        for chain in &self.chains {
            for d in 0..chain.n_draws() {
                let row = chain.row(d, l.len());
                for i in 0..s {
                    let mut regions = vec![0.0; r];
                    let mut total = 0.0;
                    for j in 0..m {
                        let n = row[l.n(i, j).expect("stored")];
                        total += n;
                        regions[region_of[j]] += n;
                    }
                    if total != row[l.total(i)] {
                        return Err(Error::Config(format!("total[{i}] mismatch in chain {}", chain.chain)));
                    }
                    for (k, v) in regions.iter().enumerate() {
                        if *v != row[l.region_total(i, k)] {
                            return Err(Error::Config(format!("R[{i},{k}] mismatch in chain {}", chain.chain)));
                        }
                    }
                }
            }
        }
        Ok(())
    }
}
