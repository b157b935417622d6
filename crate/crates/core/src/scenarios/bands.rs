//! Elicited cull-percentage bands and scenario sampling.

use std::collections::BTreeMap;

use rand::Rng;
use serde::{Deserialize, Serialize};
use statrs::distribution::{Continuous, ContinuousCDF, Normal};

use super::scenario::CullScenario;
use crate::error::{Error, Result};
use crate::mcmc::named_rng;

/// A cull percentage band: Normal(mean, sd) truncated to `[lo, hi]`, all in percent.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CullBand {
    pub mean: f64,
    pub sd: f64,
    pub lo: f64,
    pub hi: f64,
}

impl CullBand {
    pub fn new(mean: f64, sd: f64, lo: f64, hi: f64) -> Result<Self> {
        let b = Self { mean, sd, lo, hi };
        b.validate()?;
        Ok(b)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.hi > self.lo) {
            return Err(Error::Config(format!("band upper bound {} must exceed lower bound {}", self.hi, self.lo)));
        }
        if !(self.lo > 0.0 && self.hi < 100.0) {
            return Err(Error::Config(format!("band [{}, {}] must lie inside (0, 100)", self.lo, self.hi)));
        }
        if !(self.lo < self.mean && self.mean < self.hi) {
            return Err(Error::Config(format!("band mean {} outside ({}, {})", self.mean, self.lo, self.hi)));
        }
        if !(self.sd > 0.0) || !self.sd.is_finite() {
            return Err(Error::Config(format!("band sd {} must be positive", self.sd)));
        }
        Ok(())
    }

    fn normal(&self) -> Normal {
        Normal::new(self.mean, self.sd).expect("validated band")
    }

    /// Mean and standard deviation of the truncated distribution, in percent.
    pub fn truncated_moments(&self) -> (f64, f64) {
        let std = Normal::standard();
        let a = (self.lo - self.mean) / self.sd;
        let b = (self.hi - self.mean) / self.sd;
        let z = std.cdf(b) - std.cdf(a);
        let (pa, pb) = (std.pdf(a), std.pdf(b));
        let shift = (pa - pb) / z;
        let var = 1.0 + (a * pa - b * pb) / z - shift * shift;
        (self.mean + self.sd * shift, self.sd * var.sqrt())
    }

    /// One draw as a proportion (percent / 100), by inverse CDF.
    pub fn sample<R: Rng + ?Sized>(&self, truncate: bool, rng: &mut R) -> f64 {
        let n = self.normal();
        if truncate {
            let (fa, fb) = (n.cdf(self.lo), n.cdf(self.hi));
            let u = fa + rng.random::<f64>() * (fb - fa);
            return n.inverse_cdf(u).clamp(self.lo, self.hi) / 100.0;
        }
        loop {
            let v = n.inverse_cdf(rng.random::<f64>());
            if v > 0.0 && v < 100.0 {
                return v / 100.0;
            }
        }
    }
}

/// Named bands; defaults to Low, Mid, and High.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct BandSet(pub BTreeMap<String, CullBand>);

impl Default for BandSet {
    fn default() -> Self {
        let mut m = BTreeMap::new();
        m.insert("Low".into(), CullBand { mean: 10.0, sd: 2.55, lo: 5.0, hi: 15.0 });
        m.insert("Mid".into(), CullBand { mean: 15.0, sd: 2.55, lo: 10.0, hi: 20.0 });
        m.insert("High".into(), CullBand { mean: 25.0, sd: 2.55, lo: 20.0, hi: 30.0 });
        BandSet(m)
    }
}

impl BandSet {
    pub fn get(&self, name: &str) -> Result<&CullBand> {
        self.0
            .get(name)
            .ok_or_else(|| Error::Config(format!("unknown cull band {name:?}")))
    }

    pub fn validate(&self) -> Result<()> {
        self.0.values().try_for_each(CullBand::validate)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AssignmentEntry {
    pub species: usize,
    pub region_id: usize,
    pub band: String,
}

/// Band name for every (species, region) cell.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BandAssignment {
    cells: Vec<Vec<String>>,
}

impl BandAssignment {
    /// The same band everywhere.
    pub fn uniform(n_species: usize, n_regions: usize, band: &str) -> Self {
        Self {
            cells: vec![vec![band.to_string(); n_regions]; n_species],
        }
    }

    pub fn from_cells(cells: Vec<Vec<String>>) -> Result<Self> {
        let r = cells.first().map_or(0, Vec::len);
        if cells.is_empty() || r == 0 || cells.iter().any(|row| row.len() != r) {
            return Err(Error::Config("band assignment must be a non-empty rectangular table".into()));
        }
        Ok(Self { cells })
    }

    /// Builds the table from entries, requiring each cell exactly once.
    pub fn from_entries(entries: &[AssignmentEntry], n_species: usize, n_regions: usize) -> Result<Self> {
        let mut cells: Vec<Vec<Option<String>>> = vec![vec![None; n_regions]; n_species];
        for e in entries {
            if e.species >= n_species || e.region_id >= n_regions {
                return Err(Error::Config(format!(
                    "assignment cell (species {}, region {}) outside {n_species}x{n_regions}",
                    e.species, e.region_id
                )));
            }
            if cells[e.species][e.region_id].replace(e.band.clone()).is_some() {
                return Err(Error::Config(format!(
                    "assignment cell (species {}, region {}) listed twice",
                    e.species, e.region_id
                )));
            }
        }
        let cells = cells
            .into_iter()
            .enumerate()
            .map(|(i, row)| {
                row.into_iter()
                    .enumerate()
                    .map(|(k, c)| c.ok_or_else(|| Error::Config(format!("no band for species {i} in region {k}"))))
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { cells })
    }

    pub fn entries(&self) -> Vec<AssignmentEntry> {
        self.cells
            .iter()
            .enumerate()
            .flat_map(|(i, row)| {
                row.iter().enumerate().map(move |(k, b)| AssignmentEntry {
                    species: i,
                    region_id: k,
                    band: b.clone(),
                })
            })
            .collect()
    }

    pub fn n_species(&self) -> usize {
        self.cells.len()
    }

    pub fn n_regions(&self) -> usize {
        self.cells[0].len()
    }

    pub fn band(&self, species: usize, region: usize) -> &str {
        &self.cells[species][region]
    }

    pub fn set(&mut self, species: usize, region: usize, band: &str) {
        self.cells[species][region] = band.to_string();
    }

    fn check(&self, bands: &BandSet) -> Result<()> {
        bands.validate()?;
        for row in &self.cells {
            for b in row {
                bands.get(b)?;
            }
        }
        Ok(())
    }
}

/// Draws `n_scenarios` κ matrices with ids `0..n`. Scenario `s` uses its own
/// stream keyed by `(seed, s)`, so the first k scenarios do not depend on n.
pub fn sample_scenarios(
    assignment: &BandAssignment,
    bands: &BandSet,
    n_scenarios: usize,
    seed: u64,
    truncate: bool,
) -> Result<Vec<CullScenario>> {
    if n_scenarios == 0 {
        return Err(Error::Config("need at least one cull scenario".into()));
    }
    assignment.check(bands)?;
    (0..n_scenarios)
        .map(|id| {
            let mut rng = named_rng(seed, &format!("cull-scenario/{id}"));
            let kappa = assignment
                .cells
                .iter()
                .map(|row| row.iter().map(|b| Ok(bands.get(b)?.sample(truncate, &mut rng))).collect())
                .collect::<Result<Vec<Vec<f64>>>>()?;
            CullScenario::new(id, kappa)
        })
        .collect()
}

/// κ at each band's nominal mean.
pub fn mean_scenario(assignment: &BandAssignment, bands: &BandSet, id: usize) -> Result<CullScenario> {
    assignment.check(bands)?;
    let kappa = assignment
        .cells
        .iter()
        .map(|row| row.iter().map(|b| Ok(bands.get(b)?.mean / 100.0)).collect())
        .collect::<Result<Vec<Vec<f64>>>>()?;
    CullScenario::new(id, kappa)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
        let h = (b - a) / n as f64;
        let mut s = f(a) + f(b);
        for k in 1..n {
            s += f(a + k as f64 * h) * if k % 2 == 1 { 4.0 } else { 2.0 };
        }
        s * h / 3.0
    }

    fn moments_by_quadrature(b: &CullBand) -> (f64, f64) {
        let dens = |x: f64| (-0.5 * ((x - b.mean) / b.sd).powi(2)).exp();
        let z = simpson(dens, b.lo, b.hi, 20_000);
        let m = simpson(|x| x * dens(x), b.lo, b.hi, 20_000) / z;
        let v = simpson(|x| (x - m).powi(2) * dens(x), b.lo, b.hi, 20_000) / z;
        (m, v.sqrt())
    }

    #[test]
    fn analytic_moments_match_quadrature() {
        for b in BandSet::default().0.values() {
            let (m, s) = b.truncated_moments();
            let (qm, qs) = moments_by_quadrature(b);
            assert!((m - qm).abs() < 1e-9 && (s - qs).abs() < 1e-9);
        }
    }

    #[test]
    fn low_band_sample_moments() {
        let bands = BandSet::default();
        let low = bands.get("Low").unwrap();
        let mut rng = named_rng(1, "low");
        let draws: Vec<f64> = (0..100_000).map(|_| low.sample(true, &mut rng)).collect();
        assert!(draws.iter().all(|&k| k > 0.05 && k < 0.15));
        let mean = draws.iter().sum::<f64>() / draws.len() as f64;
        let sd = (draws.iter().map(|k| (k - mean).powi(2)).sum::<f64>() / (draws.len() - 1) as f64).sqrt();
        let (tm, ts) = moments_by_quadrature(low);
        assert!((mean - 0.10).abs() < 0.002 && (mean - tm / 100.0).abs() < 0.002);
        assert!((sd - ts / 100.0).abs() < 0.002, "sd {sd} vs truncated {}", ts / 100.0);
    }

    #[test]
    fn mean_scenario_values() {
        let mut a = BandAssignment::uniform(2, 3, "Low");
        a.set(0, 1, "Mid");
        a.set(1, 2, "High");
        let s = mean_scenario(&a, &BandSet::default(), 0).unwrap();
        assert_eq!(s.kappa, vec![vec![0.10, 0.15, 0.10], vec![0.10, 0.10, 0.25]]);
    }

    #[test]
    fn sampled_scenarios_stay_in_bands_and_are_prefix_stable() {
        let mut a = BandAssignment::uniform(3, 4, "Mid");
        a.set(2, 0, "High");
        let bands = BandSet::default();
        let ten = sample_scenarios(&a, &bands, 10, 5, true).unwrap();
        let three = sample_scenarios(&a, &bands, 3, 5, true).unwrap();
        assert_eq!(&ten[..3], &three[..]);
        assert_eq!(sample_scenarios(&a, &bands, 1, 9, true).unwrap(), sample_scenarios(&a, &bands, 1, 9, true).unwrap());
        for s in &ten {
            for i in 0..3 {
                for k in 0..4 {
                    let b = bands.get(a.band(i, k)).unwrap();
                    assert!(s.kappa[i][k] >= b.lo / 100.0 && s.kappa[i][k] <= b.hi / 100.0);
                }
            }
        }
    }

    #[test]
    fn cell_average_converges_to_mean_scenario() {
        let a = BandAssignment::uniform(1, 2, "High");
        let bands = BandSet::default();
        let draws = sample_scenarios(&a, &bands, 20_000, 2, true).unwrap();
        let avg = draws.iter().map(|s| s.kappa[0][0]).sum::<f64>() / draws.len() as f64;
        // Symmetric truncation: the truncated mean equals the band mean.
        assert!((avg - 0.25).abs() < 0.001);
    }

    #[test]
    fn band_validation() {
        assert!(CullBand::new(10.0, 2.55, 15.0, 5.0).is_err());
        assert!(CullBand::new(10.0, 0.0, 5.0, 15.0).is_err());
        assert!(CullBand::new(20.0, 2.55, 5.0, 15.0).is_err());
        let mut bands = BandSet::default();
        bands.0.insert("Bad".into(), CullBand { mean: 10.0, sd: 1.0, lo: 12.0, hi: 12.0 });
        let a = BandAssignment::uniform(1, 1, "Bad");
        assert!(sample_scenarios(&a, &bands, 1, 0, true).is_err());
    }

    #[test]
    fn assignment_entries_must_be_complete() {
        let entries = vec![
            AssignmentEntry { species: 0, region_id: 0, band: "Low".into() },
            AssignmentEntry { species: 0, region_id: 1, band: "Mid".into() },
        ];
        assert!(BandAssignment::from_entries(&entries, 1, 2).is_ok());
        assert!(BandAssignment::from_entries(&entries, 2, 2).is_err());
        let mut dup = entries.clone();
        dup.push(entries[0].clone());
        assert!(BandAssignment::from_entries(&dup, 1, 2).is_err());
        let a = BandAssignment::from_entries(&entries, 1, 2).unwrap();
        assert_eq!(BandAssignment::from_entries(&a.entries(), 1, 2).unwrap(), a);
    }
}
