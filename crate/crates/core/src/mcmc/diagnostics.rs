//! Split-R̂ and multi-chain effective sample size.

use serde::{Deserialize, Serialize};

use super::samples::PosteriorSamples;
use crate::error::{Error, Result};

/// Parameters with R̂ above this are flagged.
pub const RHAT_THRESHOLD: f64 = 1.05;

fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

fn variance(x: &[f64]) -> f64 {
    let m = mean(x);
    x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (x.len() as f64 - 1.0)
}

/// Each chain cut into two halves; an odd middle draw is dropped.
fn split(chains: &[Vec<f64>]) -> Vec<&[f64]> {
    let mut out = Vec::with_capacity(chains.len() * 2);
    for c in chains {
        let half = c.len() / 2;
        out.push(&c[..half]);
        out.push(&c[c.len() - half..]);
    }
    out
}

fn check(chains: &[Vec<f64>]) -> Result<usize> {
    let n = chains.first().map_or(0, Vec::len);
    if n < 4 {
        return Err(Error::Config("need at least 4 draws per chain".into()));
    }
    if chains.iter().any(|c| c.len() != n) {
        return Err(Error::Dimension("chains have different lengths".into()));
    }
    Ok(n)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rhat {
    pub value: f64,
    /// Every draw identical; reported as 1.
    pub degenerate: bool,
}

/// Split-R̂ (potential scale reduction on half-chains).
pub fn split_rhat(chains: &[Vec<f64>]) -> Result<Rhat> {
    if chains.len() < 2 {
        return Err(Error::Config("split-R̂ needs at least 2 chains".into()));
    }
    check(chains)?;
    let halves = split(chains);
    let n = halves[0].len() as f64;
    let means: Vec<f64> = halves.iter().map(|h| mean(h)).collect();
    let w = halves.iter().map(|h| variance(h)).sum::<f64>() / halves.len() as f64;
    let b = n * variance(&means);
    if w == 0.0 {
        return Ok(if b == 0.0 {
            Rhat {
                value: 1.0,
                degenerate: true,
            }
        } else {
            Rhat {
                value: f64::INFINITY,
                degenerate: false,
            }
        });
    }
    let var_plus = (n - 1.0) / n * w + b / n;
    Ok(Rhat {
        value: (var_plus / w).sqrt(),
        degenerate: false,
    })
}

fn autocovariance(x: &[f64], lag: usize) -> f64 {
    let m = mean(x);
    let n = x.len();
    (0..n - lag).map(|t| (x[t] - m) * (x[t + lag] - m)).sum::<f64>() / n as f64
}

/// Multi-chain ESS on split chains with Geyer's initial monotone sequence.
/// Works with a single chain. Zero-variance input returns the draw count.
pub fn effective_sample_size(chains: &[Vec<f64>]) -> Result<f64> {
    if chains.is_empty() {
        return Err(Error::Config("no chains".into()));
    }
    check(chains)?;
    let halves = split(chains);
    let m = halves.len() as f64;
    let n = halves[0].len();
    let nf = n as f64;
    let total = m * nf;
    let means: Vec<f64> = halves.iter().map(|h| mean(h)).collect();
    let w = halves.iter().map(|h| variance(h)).sum::<f64>() / m;
    let b = nf * variance(&means);
    let var_plus = (nf - 1.0) / nf * w + b / nf;
    if !(var_plus > 0.0) {
        return Ok(total);
    }
    let rho = |lag: usize| -> f64 {
        let acov = halves.iter().map(|h| autocovariance(h, lag)).sum::<f64>() / m;
        1.0 - (w - acov) / var_plus
    };
    let mut sum_pairs = 0.0;
    let mut prev_pair = f64::INFINITY;
    let mut lag = 0;
    while lag + 1 < n {
        let mut pair = rho(lag) + rho(lag + 1);
        if pair <= 0.0 {
            break;
        }
        pair = pair.min(prev_pair);
        sum_pairs += pair;
        prev_pair = pair;
        lag += 2;
    }
    let tau = (-1.0 + 2.0 * sum_pairs).max(1.0 / total.log10());
    Ok((total / tau).min(total * total.log10()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticRow {
    pub name: String,
    pub rhat: f64,
    pub ess: f64,
    pub degenerate: bool,
    pub flagged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsReport {
    pub rows: Vec<DiagnosticRow>,
}

impl DiagnosticsReport {
    pub fn flagged(&self) -> Vec<&str> {
        self.rows.iter().filter(|r| r.flagged).map(|r| r.name.as_str()).collect()
    }

    pub fn degenerate(&self) -> Vec<&str> {
        self.rows.iter().filter(|r| r.degenerate).map(|r| r.name.as_str()).collect()
    }
}

/// Split-R̂ and ESS for every stored column.
pub fn diagnostics(samples: &PosteriorSamples) -> Result<DiagnosticsReport> {
    let mut rows = Vec::with_capacity(samples.width());
    for (c, name) in samples.layout.names().iter().enumerate() {
        let chains = samples.column_by_chain(c);
        let r = split_rhat(&chains)?;
        let ess = effective_sample_size(&chains)?;
        rows.push(DiagnosticRow {
            name: name.clone(),
            rhat: r.value,
            ess,
            degenerate: r.degenerate,
            flagged: !(r.value <= RHAT_THRESHOLD),
        });
    }
    Ok(DiagnosticsReport { rows })
}
