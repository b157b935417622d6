use serde::{Deserialize, Serialize};

use super::generate::SimTruth;
use crate::error::{Error, Result};
use crate::mcmc::{PosteriorSamples, SummaryRow};

fn centred(row: &[f64]) -> Vec<f64> {
    let mean = row.iter().sum::<f64>() / row.len() as f64;
    row.iter().map(|v| v - mean).collect()
}

/// Per-species RMSE between two fields after centring each.
pub fn rmse_surface(estimate: &[Vec<f64>], truth: &[Vec<f64>]) -> Result<Vec<f64>> {
    if estimate.len() != truth.len() || estimate.iter().zip(truth).any(|(a, b)| a.len() != b.len() || a.is_empty()) {
        return Err(Error::Dimension("estimate and truth fields differ in shape".into()));
    }
    Ok(estimate
        .iter()
        .zip(truth)
        .map(|(e, t)| {
            let (e, t) = (centred(e), centred(t));
            (e.iter().zip(&t).map(|(a, b)| (a - b).powi(2)).sum::<f64>() / e.len() as f64).sqrt()
        })
        .collect())
}

/// Posterior mean of the stored field, S rows of length m.
pub fn posterior_mean_field(samples: &PosteriorSamples) -> Result<Vec<Vec<f64>>> {
    let l = &samples.layout;
    if !l.store_fields {
        return Err(Error::Config("posterior field not stored; enable store_fields".into()));
    }
    Ok((0..l.dims.n_species)
        .map(|i| {
            (0..l.dims.n_sites)
                .map(|j| {
                    let v = samples.column(l.u(i, j).expect("stored"));
                    v.iter().sum::<f64>() / v.len() as f64
                })
                .collect()
        })
        .collect())
}

/// A quantity with a known true value and its posterior interval.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub name: String,
    pub truth: f64,
    pub median: f64,
    pub lo95: f64,
    pub hi95: f64,
}

impl Interval {
    pub fn covers(&self) -> bool {
        self.lo95 <= self.truth && self.truth <= self.hi95
    }

    pub fn width(&self) -> f64 {
        self.hi95 - self.lo95
    }
}

/// Truth for every inferred column: coefficients, precisions, dispersions,
/// Σ correlations, and, when stored, every site's field value and abundance.
/// Derived totals, regional sums, and Σ⁻¹ correlations are excluded.
pub fn parameter_truths(samples: &PosteriorSamples, truth: &SimTruth) -> Vec<(usize, f64)> {
    let l = &samples.layout;
    let st = &truth.state;
    let d = l.dims;
    let mut out = Vec::new();
    for i in 0..d.n_species {
        out.push((l.beta0(i), st.beta0[i]));
        out.extend((0..d.n_x).map(|k| (l.beta(i, k), st.beta[i][k])));
        out.push((l.delta0(i), st.delta0[i]));
        out.extend((0..d.n_g).map(|g| (l.delta(i, g), st.delta[i][g])));
        out.push((l.tau(i), st.tau[i]));
        out.push((l.theta(i), st.theta[i]));
    }
    out.extend(st.rho.iter().enumerate().map(|(p, &r)| (l.rho(p), r)));
    if l.store_fields {
        for i in 0..d.n_species {
            for j in 0..d.n_sites {
                out.push((l.u(i, j).expect("stored"), st.u[i][j]));
                out.push((l.n(i, j).expect("stored"), st.n[i][j] as f64));
            }
        }
    }
    out
}

pub fn intervals(samples: &PosteriorSamples, truths: &[(usize, f64)]) -> Vec<Interval> {
    truths
        .iter()
        .map(|&(c, t)| {
            let r = SummaryRow::from_values(samples.layout.names()[c].clone(), &samples.column(c));
            Interval {
                name: r.name,
                truth: t,
                median: r.median,
                lo95: r.lo95,
                hi95: r.hi95,
            }
        })
        .collect()
}

pub fn total_intervals(samples: &PosteriorSamples, truth: &SimTruth) -> Vec<Interval> {
    let l = &samples.layout;
    let truths: Vec<(usize, f64)> = truth.totals.iter().enumerate().map(|(i, &t)| (l.total(i), t as f64)).collect();
    intervals(samples, &truths)
}

pub fn correlation_intervals(samples: &PosteriorSamples, truth: &SimTruth) -> Vec<Interval> {
    let l = &samples.layout;
    let truths: Vec<(usize, f64)> =
        truth.correlations.iter().enumerate().map(|(p, &t)| (l.corr(p), t)).collect();
    intervals(samples, &truths)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Coverage {
    pub n_parameters: usize,
    pub n_covered: usize,
    pub totals_covered: usize,
    pub n_totals: usize,
}

impl Coverage {
    pub fn fraction(&self) -> f64 {
        self.n_covered as f64 / self.n_parameters as f64
    }
}

pub fn coverage_of(parameters: &[Interval], totals: &[Interval]) -> Coverage {
    Coverage {
        n_parameters: parameters.len(),
        n_covered: parameters.iter().filter(|i| i.covers()).count(),
        totals_covered: totals.iter().filter(|i| i.covers()).count(),
        n_totals: totals.len(),
    }
}

pub fn coverage_report(samples: &PosteriorSamples, truth: &SimTruth) -> Coverage {
    let params = intervals(samples, &parameter_truths(samples, truth));
    coverage_of(&params, &total_intervals(samples, truth))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    #[test]
    fn rmse_identities() {
        let truth = vec![vec![0.5, -0.2, 0.1, 0.3], vec![1.0, 2.0, 0.0, -3.0]];
        assert_eq!(rmse_surface(&truth, &truth).unwrap(), vec![0.0, 0.0]);
        let shifted: Vec<Vec<f64>> = truth.iter().enumerate().map(|(i, r)| r.iter().map(|v| v + i as f64 + 2.0).collect()).collect();
        assert!(rmse_surface(&shifted, &truth).unwrap().iter().all(|v| v.abs() < 1e-12));
        assert!(rmse_surface(&truth[..1], &truth).is_err());
    }

    #[test]
    fn unit_noise_gives_unit_rmse() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let truth: Vec<Vec<f64>> = (0..3).map(|_| (0..625).map(|j| (j as f64 / 50.0).sin()).collect()).collect();
        let noisy: Vec<Vec<f64>> = truth
            .iter()
            .map(|r| r.iter().map(|v| v + rng.sample::<f64, _>(StandardNormal)).collect())
            .collect();
        for r in rmse_surface(&noisy, &truth).unwrap() {
            assert!((r - 1.0).abs() < 0.05, "{r}");
        }
    }

    #[test]
    fn coverage_extremes() {
        let good: Vec<Interval> = (0..10)
            .map(|k| Interval { name: k.to_string(), truth: k as f64, median: k as f64, lo95: k as f64 - 1.0, hi95: k as f64 + 1.0 })
            .collect();
        assert_eq!(coverage_of(&good, &good).fraction(), 1.0);
        let bad: Vec<Interval> = (0..10)
            .map(|k| Interval { name: k.to_string(), truth: k as f64, median: 0.5, lo95: -100.5, hi95: -100.5 })
            .collect();
        assert_eq!(coverage_of(&bad, &bad).fraction(), 0.0);
    }
}
