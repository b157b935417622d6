//! Posterior medians and equal-tailed intervals.

use serde::{Deserialize, Serialize};

use super::samples::PosteriorSamples;

/// Type-7 (linear interpolation) quantile of sorted data.
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    assert!(!sorted.is_empty(), "quantile of empty data");
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

pub fn quantile(values: &[f64], p: f64) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    quantile_sorted(&v, p)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub name: String,
    pub mean: f64,
    pub median: f64,
    pub lo95: f64,
    pub hi95: f64,
}

impl SummaryRow {
    pub fn from_values(name: impl Into<String>, values: &[f64]) -> Self {
        let mut v = values.to_vec();
        v.sort_by(f64::total_cmp);
        Self {
            name: name.into(),
            mean: v.iter().sum::<f64>() / v.len() as f64,
            median: quantile_sorted(&v, 0.5),
            lo95: quantile_sorted(&v, 0.025),
            hi95: quantile_sorted(&v, 0.975),
        }
    }

    pub fn width(&self) -> f64 {
        self.hi95 - self.lo95
    }

    pub fn covers(&self, truth: f64) -> bool {
        self.lo95 <= truth && truth <= self.hi95
    }
}

/// Summaries of the selected columns over all pooled draws. Derived columns
/// (totals, regional sums, correlations) are stored per draw, so their
/// quantiles are taken over per-draw values.
pub fn summarize(samples: &PosteriorSamples, filter: impl Fn(&str) -> bool) -> Vec<SummaryRow> {
    samples
        .layout
        .names()
        .iter()
        .enumerate()
        .filter(|(_, n)| filter(n))
        .map(|(c, n)| SummaryRow::from_values(n.clone(), &samples.column(c)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn type7_on_one_to_hundred() {
        let v: Vec<f64> = (1..=100).map(f64::from).collect();
        let r = SummaryRow::from_values("x", &v);
        assert_eq!(r.median, 50.5);
        assert!((r.lo95 - 3.475).abs() < 1e-12);
        assert!((r.hi95 - 97.525).abs() < 1e-12);
    }

    #[test]
    fn constant_samples_have_zero_width() {
        let r = SummaryRow::from_values("x", &[2.5; 40]);
        assert_eq!((r.median, r.width()), (2.5, 0.0));
    }

    #[test]
    fn total_quantiles_are_not_sums_of_site_quantiles() {
        // Two anti-correlated sites: the total is constant even though each
        // site's interval is wide.
        let a: Vec<f64> = (0..1000).map(|d| (d % 10) as f64).collect();
        let b: Vec<f64> = a.iter().map(|x| 9.0 - x).collect();
        let totals: Vec<f64> = a.iter().zip(&b).map(|(x, y)| x + y).collect();
        let r = SummaryRow::from_values("total", &totals);
        assert_eq!(r.width(), 0.0);
        let sa = SummaryRow::from_values("a", &a);
        let sb = SummaryRow::from_values("b", &b);
        assert!(sa.hi95 + sb.hi95 > r.hi95);
    }
}
