//! Dataset CSVs: grid, edges, observations, culls, covariates, and κ tables.

use std::collections::{BTreeMap, HashSet};
use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::table::{Issues, Table};
use super::write::CsvText;
use crate::error::Result;
use crate::model::{CullRecord, Observation, SpeciesDataset, ROW_SUM_TOLERANCE};
use crate::scenarios::CullScenario;
use crate::spatial::{build_adjacency, Adjacency, GridGeometry, NeighborRule, Site};

pub const GRID_HEADER: [&str; 4] = ["site_id", "x", "y", "region_id"];
pub const EDGES_HEADER: [&str; 2] = ["site_a", "site_b"];
pub const OBSERVATIONS_HEADER: [&str; 4] = ["species", "site_id", "visit", "count"];
pub const CULLS_HEADER: [&str; 3] = ["species", "region_id", "cull_count"];
pub const KAPPA_HEADER: [&str; 3] = ["species", "region_id", "kappa"];

/// Input files of one dataset. Without `edges`, rook adjacency is inferred
/// from the lattice centroids. Missing covariate files mean no covariates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataPaths {
    pub grid: PathBuf,
    #[serde(default)]
    pub edges: Option<PathBuf>,
    pub observations: PathBuf,
    #[serde(default)]
    pub culls: Option<PathBuf>,
    #[serde(default)]
    pub abundance_covariates: Option<PathBuf>,
    #[serde(default)]
    pub detection_covariates: Option<PathBuf>,
}

impl DataPaths {
    /// Conventional file names inside one directory, as written by `write_dataset`.
    pub fn in_dir(dir: &Path) -> Self {
        Self {
            grid: dir.join("grid.csv"),
            edges: Some(dir.join("edges.csv")),
            observations: dir.join("observations.csv"),
            culls: Some(dir.join("culls.csv")),
            abundance_covariates: Some(dir.join("abundance_covariates.csv")),
            detection_covariates: Some(dir.join("detection_covariates.csv")),
        }
    }

    pub fn resolve(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut self.grid);
        fix(&mut self.observations);
        for p in [
            &mut self.edges,
            &mut self.culls,
            &mut self.abundance_covariates,
            &mut self.detection_covariates,
        ]
        .into_iter()
        .flatten()
        {
            fix(p);
        }
    }

    pub fn files(&self) -> Vec<&Path> {
        let mut out = vec![self.grid.as_path(), self.observations.as_path()];
        for p in [&self.edges, &self.culls, &self.abundance_covariates, &self.detection_covariates]
            .into_iter()
            .flatten()
        {
            out.push(p.as_path());
        }
        out
    }
}

#[derive(Debug, Clone)]
pub struct LoadedData {
    pub geometry: GridGeometry,
    pub adjacency: Adjacency,
    pub dataset: SpeciesDataset,
}

/// Reads and cross-validates every file. Any violation fails the whole load
/// and every violation found is reported with its file and line.
///
/// `n_species` fixes the species count (e.g. from a names table); otherwise
/// it is one more than the largest species index seen.
pub fn load_dataset(paths: &DataPaths, n_species: Option<usize>) -> Result<LoadedData> {
    let mut issues = Issues::default();

    let grid = Table::read(&paths.grid)?;
    let (sites, site_region, n_regions) = parse_grid(&grid, &mut issues);
    let m = sites.len();

    let edges = match &paths.edges {
        Some(p) => Some(parse_edges(&Table::read(p)?, m, &mut issues)),
        None => None,
    };
    let obs_table = Table::read(&paths.observations)?;
    let cull_table = paths.culls.as_deref().map(Table::read).transpose()?;

    let max_species = |t: &Table| -> usize {
        t.rows
            .iter()
            .filter_map(|(_, r)| r.get(0).and_then(|v| v.parse::<usize>().ok()))
            .map(|s| s + 1)
            .max()
            .unwrap_or(0)
    };
    let s = n_species.unwrap_or_else(|| max_species(&obs_table).max(cull_table.as_ref().map_or(0, max_species)));
    if s == 0 {
        issues.push(&paths.observations, 0, "no species: the file has no records and no names were given");
    }

    let observations = parse_observations(&obs_table, s, m, &mut issues);
    let culls = match &cull_table {
        Some(t) => parse_culls(t, s, n_regions, &mut issues),
        None => Vec::new(),
    };
    let x = match &paths.abundance_covariates {
        Some(p) => parse_covariates(&Table::read(p)?, "X", m, &mut issues),
        None => DMatrix::zeros(m, 0),
    };
    let g = match &paths.detection_covariates {
        Some(p) => parse_covariates(&Table::read(p)?, "G", m, &mut issues),
        None => DMatrix::zeros(m, 0),
    };
    issues.into_result()?;

    let geometry = GridGeometry::new(sites, site_region, n_regions)?;
    let rule = match edges {
        Some(e) => NeighborRule::Explicit(e),
        None => NeighborRule::Rook,
    };
    let adjacency = build_adjacency(&geometry, &rule)?;
    let dataset = SpeciesDataset::new(s, &geometry, observations, culls, x, g)?;
    Ok(LoadedData {
        geometry,
        adjacency,
        dataset,
    })
}

fn parse_grid(t: &Table, issues: &mut Issues) -> (Vec<Site>, Vec<usize>, usize) {
    if !t.expect_header(&GRID_HEADER, issues) {
        return (Vec::new(), Vec::new(), 0);
    }
    let mut by_id: BTreeMap<usize, (Site, usize)> = BTreeMap::new();
    for (line, rec) in &t.rows {
        let id = t.field::<usize>(*line, rec, 0, issues);
        let x = t.real(*line, rec, 1, issues);
        let y = t.real(*line, rec, 2, issues);
        let region = t.field::<usize>(*line, rec, 3, issues);
        if let (Some(id), Some(x), Some(y), Some(region)) = (id, x, y, region) {
            if by_id.insert(id, (Site { id, x, y }, region)).is_some() {
                issues.push(&t.path, *line, format!("duplicate site_id {id}"));
            }
        }
    }
    let m = by_id.keys().next_back().map_or(0, |&k| k + 1);
    if m > 0 && by_id.len() != m {
        let missing: Vec<String> = (0..m).filter(|j| !by_id.contains_key(j)).take(5).map(|j| j.to_string()).collect();
        issues.push(&t.path, 0, format!("site ids must cover 0..{m}; missing {}", missing.join(", ")));
    }
    if m < 2 {
        issues.push(&t.path, 0, "need at least 2 sites");
    }
    let n_regions = by_id.values().map(|(_, r)| r + 1).max().unwrap_or(0);
    let mut used = vec![false; n_regions];
    for (_, r) in by_id.values() {
        used[*r] = true;
    }
    if let Some(k) = used.iter().position(|u| !u) {
        issues.push(&t.path, 0, format!("region_id {k} has no sites; region ids must cover 0..{n_regions}"));
    }
    let (sites, regions) = by_id.into_values().unzip();
    (sites, regions, n_regions)
}

fn parse_edges(t: &Table, m: usize, issues: &mut Issues) -> Vec<(usize, usize)> {
    if !t.expect_header(&EDGES_HEADER, issues) {
        return Vec::new();
    }
    let mut seen = HashSet::new();
    let mut edges = Vec::new();
    for (line, rec) in &t.rows {
        let a = t.field::<usize>(*line, rec, 0, issues);
        let b = t.field::<usize>(*line, rec, 1, issues);
        let (Some(a), Some(b)) = (a, b) else { continue };
        if a >= m || b >= m {
            issues.push(&t.path, *line, format!("edge ({a}, {b}) references an unknown site_id"));
        } else if a == b {
            issues.push(&t.path, *line, format!("self-loop on site {a}"));
        } else if !seen.insert((a.min(b), a.max(b))) {
            issues.push(&t.path, *line, format!("duplicate edge ({a}, {b})"));
        } else {
            edges.push((a, b));
        }
    }
    edges
}

fn parse_observations(t: &Table, s: usize, m: usize, issues: &mut Issues) -> Vec<Observation> {
    if !t.expect_header(&OBSERVATIONS_HEADER, issues) {
        return Vec::new();
    }
    let mut seen = HashSet::new();
    let mut out = Vec::with_capacity(t.rows.len());
    for (line, rec) in &t.rows {
        let species = t.field::<usize>(*line, rec, 0, issues);
        let site = t.field::<usize>(*line, rec, 1, issues);
        let visit = t.field::<usize>(*line, rec, 2, issues);
        let count = t.count(*line, rec, 3, issues);
        let (Some(species), Some(site), Some(visit), Some(count)) = (species, site, visit, count) else {
            continue;
        };
        if species >= s {
            issues.push(&t.path, *line, format!("species {species} outside 0..{s}"));
        } else if site >= m {
            issues.push(&t.path, *line, format!("unknown site_id {site}"));
        } else if !seen.insert((species, site, visit)) {
            issues.push(&t.path, *line, format!("duplicate visit {visit} for species {species} at site {site}"));
        } else {
            out.push(Observation {
                species,
                site,
                visit,
                count,
            });
        }
    }
    out
}

fn parse_culls(t: &Table, s: usize, r: usize, issues: &mut Issues) -> Vec<CullRecord> {
    if !t.expect_header(&CULLS_HEADER, issues) {
        return Vec::new();
    }
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for (line, rec) in &t.rows {
        let species = t.field::<usize>(*line, rec, 0, issues);
        let region = t.field::<usize>(*line, rec, 1, issues);
        let count = t.count(*line, rec, 2, issues);
        let (Some(species), Some(region), Some(count)) = (species, region, count) else {
            continue;
        };
        if species >= s {
            issues.push(&t.path, *line, format!("species {species} outside 0..{s}"));
        } else if region >= r {
            issues.push(&t.path, *line, format!("unknown region_id {region}"));
        } else if !seen.insert((species, region)) {
            issues.push(&t.path, *line, format!("second cull count for species {species} in region {region}"));
        } else {
            out.push(CullRecord { species, region, count });
        }
    }
    if !out.is_empty() || !t.rows.is_empty() {
        for i in 0..s {
            for k in 0..r {
                if !seen.contains(&(i, k)) {
                    issues.push(&t.path, 0, format!("missing cull count for species {i} in region {k}"));
                }
            }
        }
    }
    out
}

fn parse_covariates(t: &Table, prefix: &str, m: usize, issues: &mut Issues) -> DMatrix<f64> {
    let p = t.header.len().saturating_sub(1);
    let expected: Vec<String> = std::iter::once("site_id".to_string())
        .chain((1..=p).map(|k| format!("{prefix}{k}")))
        .collect();
    let expected: Vec<&str> = expected.iter().map(String::as_str).collect();
    if !t.expect_header(&expected, issues) {
        return DMatrix::zeros(m, 0);
    }
    let mut out = DMatrix::zeros(m, p);
    let mut seen = vec![false; m];
    for (line, rec) in &t.rows {
        let Some(site) = t.field::<usize>(*line, rec, 0, issues) else { continue };
        if site >= m {
            issues.push(&t.path, *line, format!("unknown site_id {site}"));
            continue;
        }
        if std::mem::replace(&mut seen[site], true) {
            issues.push(&t.path, *line, format!("duplicate site_id {site}"));
            continue;
        }
        let mut sum = 0.0;
        let mut ok = true;
        for c in 0..p {
            match t.real(*line, rec, c + 1, issues) {
                Some(v) if (0.0..=1.0).contains(&v) => {
                    out[(site, c)] = v;
                    sum += v;
                }
                Some(v) => {
                    issues.push(&t.path, *line, format!("{prefix}{} = {v} outside [0, 1]", c + 1));
                    ok = false;
                }
                None => ok = false,
            }
        }
        if ok && p > 0 && (sum - 1.0).abs() > ROW_SUM_TOLERANCE {
            issues.push(
                &t.path,
                *line,
                format!("row sums to {sum}; compositional rows must sum to 1 within tolerance {ROW_SUM_TOLERANCE:e}"),
            );
        }
    }
    if let Some(j) = seen.iter().position(|s| !s) {
        if m > 0 {
            issues.push(&t.path, 0, format!("no covariate row for site_id {j}"));
        }
    }
    out
}

/// Reads a full κ table `species,region_id,kappa` as scenario `id`.
pub fn load_kappa(path: &Path, id: usize, n_species: usize, n_regions: usize) -> Result<CullScenario> {
    let t = Table::read(path)?;
    let mut issues = Issues::default();
    let mut kappa = vec![vec![f64::NAN; n_regions]; n_species];
    if t.expect_header(&KAPPA_HEADER, &mut issues) {
        for (line, rec) in &t.rows {
            let species = t.field::<usize>(*line, rec, 0, &mut issues);
            let region = t.field::<usize>(*line, rec, 1, &mut issues);
            let v = t.real(*line, rec, 2, &mut issues);
            let (Some(i), Some(k), Some(v)) = (species, region, v) else { continue };
            if i >= n_species || k >= n_regions {
                issues.push(&t.path, *line, format!("cell ({i}, {k}) outside {n_species}x{n_regions}"));
            } else if !(v > 0.0 && v < 1.0) {
                issues.push(&t.path, *line, format!("kappa = {v} must lie in (0, 1)"));
            } else if !kappa[i][k].is_nan() {
                issues.push(&t.path, *line, format!("second kappa for species {i} in region {k}"));
            } else {
                kappa[i][k] = v;
            }
        }
        for (i, row) in kappa.iter().enumerate() {
            for (k, v) in row.iter().enumerate() {
                if v.is_nan() && issues.is_empty() {
                    issues.push(&t.path, 0, format!("missing kappa for species {i} in region {k}"));
                }
            }
        }
    }
    issues.into_result()?;
    CullScenario::new(id, kappa)
}

pub fn grid_csv(geometry: &GridGeometry) -> CsvText {
    let mut out = CsvText::new(&GRID_HEADER);
    for (site, region) in geometry.sites().iter().zip(geometry.site_region()) {
        out.row()
            .int(site.id as u64)
            .real(site.x)
            .real(site.y)
            .int(*region as u64)
            .end();
    }
    out
}

pub fn edges_csv(adjacency: &Adjacency) -> CsvText {
    let mut out = CsvText::new(&EDGES_HEADER);
    for (a, b) in adjacency.edges() {
        out.row().int(a as u64).int(b as u64).end();
    }
    out
}

pub fn observations_csv(dataset: &SpeciesDataset) -> CsvText {
    let mut out = CsvText::new(&OBSERVATIONS_HEADER);
    for o in dataset.observations() {
        out.row()
            .int(o.species as u64)
            .int(o.site as u64)
            .int(o.visit as u64)
            .int(o.count)
            .end();
    }
    out
}

pub fn culls_csv(dataset: &SpeciesDataset) -> CsvText {
    let mut out = CsvText::new(&CULLS_HEADER);
    for c in dataset.cull_records() {
        out.row().int(c.species as u64).int(c.region as u64).int(c.count).end();
    }
    out
}

/// `site_id,{prefix}1..{prefix}p`.
pub fn covariates_csv(matrix: &DMatrix<f64>, prefix: &str) -> CsvText {
    let names: Vec<String> = std::iter::once("site_id".to_string())
        .chain((1..=matrix.ncols()).map(|k| format!("{prefix}{k}")))
        .collect();
    let names: Vec<&str> = names.iter().map(String::as_str).collect();
    let mut out = CsvText::new(&names);
    for j in 0..matrix.nrows() {
        let mut row = out.row().int(j as u64);
        for c in 0..matrix.ncols() {
            row = row.real(matrix[(j, c)]);
        }
        row.end();
    }
    out
}

pub fn kappa_csv(scenario: &CullScenario) -> CsvText {
    let mut out = CsvText::new(&KAPPA_HEADER);
    for (i, row) in scenario.kappa.iter().enumerate() {
        for (k, v) in row.iter().enumerate() {
            out.row().int(i as u64).int(k as u64).real(*v).end();
        }
    }
    out
}
