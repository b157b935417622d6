use std::collections::{BTreeSet, HashMap, VecDeque};

use serde::{Deserialize, Serialize};

use super::grid::GridGeometry;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum NeighborRule {
    /// 4-neighbour adjacency on a regular lattice, inferred from centroid spacing.
    Rook,
    /// Undirected edges given as `(site_a, site_b)` pairs; each pair may appear once.
    Explicit(Vec<(usize, usize)>),
}

/// Symmetric 0/1 neighbour structure of the fine grid (A and diag D of `D − A`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Adjacency {
    neighbors: Vec<Vec<usize>>,
    component: Vec<usize>,
    n_components: usize,
    n_edges: usize,
}

impl Adjacency {
    pub fn from_edges(n_sites: usize, edges: &[(usize, usize)]) -> Result<Self> {
        let mut seen = BTreeSet::new();
        let mut neighbors = vec![Vec::new(); n_sites];
        for &(a, b) in edges {
            if a >= n_sites || b >= n_sites {
                return Err(Error::Geometry(format!(
                    "edge ({a}, {b}) references a site outside 0..{n_sites}"
                )));
            }
            if a == b {
                return Err(Error::Geometry(format!("self-loop on site {a}")));
            }
            if !seen.insert((a.min(b), a.max(b))) {
                return Err(Error::DuplicateEdge(a, b));
            }
            neighbors[a].push(b);
            neighbors[b].push(a);
        }
        for list in &mut neighbors {
            list.sort_unstable();
        }
        let (component, n_components) = label_components(&neighbors);
        let adj = Self {
            neighbors,
            component,
            n_components,
            n_edges: seen.len(),
        };
        let isolated = adj.isolated();
        if !isolated.is_empty() {
            log::warn!(
                "{} isolated site(s) with no neighbours: {:?}",
                isolated.len(),
                isolated
            );
        }
        Ok(adj)
    }

    pub fn n_sites(&self) -> usize {
        self.neighbors.len()
    }

    pub fn n_edges(&self) -> usize {
        self.n_edges
    }

    pub fn neighbors(&self, site: usize) -> &[usize] {
        &self.neighbors[site]
    }

    pub fn degree(&self, site: usize) -> usize {
        self.neighbors[site].len()
    }

    pub fn degrees(&self) -> Vec<usize> {
        self.neighbors.iter().map(Vec::len).collect()
    }

    pub fn n_components(&self) -> usize {
        self.n_components
    }

    pub fn component_of(&self, site: usize) -> usize {
        self.component[site]
    }

    /// Site lists per connected component, in order of first appearance.
    pub fn components(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.n_components];
        for (j, &c) in self.component.iter().enumerate() {
            out[c].push(j);
        }
        out
    }

    /// Sites of degree zero. They are valid but carry no ICAR conditional.
    pub fn isolated(&self) -> Vec<usize> {
        (0..self.n_sites()).filter(|&j| self.degree(j) == 0).collect()
    }

    /// Each undirected edge once, as `(j, k)` with `j < k`.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.neighbors
            .iter()
            .enumerate()
            .flat_map(|(j, list)| list.iter().filter(move |&&k| k > j).map(move |&k| (j, k)))
    }

    pub fn is_symmetric(&self) -> bool {
        self.neighbors.iter().enumerate().all(|(j, list)| {
            list.iter()
                .all(|&k| k != j && self.neighbors[k].binary_search(&j).is_ok())
        })
    }

    /// Largest `|j − k|` over all edges; the half-bandwidth of `D − A`.
    pub fn bandwidth(&self) -> usize {
        self.edges().map(|(j, k)| k - j).max().unwrap_or(0)
    }
}

fn label_components(neighbors: &[Vec<usize>]) -> (Vec<usize>, usize) {
    let mut label = vec![usize::MAX; neighbors.len()];
    let mut next = 0;
    let mut queue = VecDeque::new();
    for start in 0..neighbors.len() {
        if label[start] != usize::MAX {
            continue;
        }
        label[start] = next;
        queue.push_back(start);
        while let Some(j) = queue.pop_front() {
            for &k in &neighbors[j] {
                if label[k] == usize::MAX {
                    label[k] = next;
                    queue.push_back(k);
                }
            }
        }
        next += 1;
    }
    (label, next)
}

pub fn build_adjacency(grid: &GridGeometry, rule: &NeighborRule) -> Result<Adjacency> {
    let m = grid.n_sites();
    if m < 2 {
        return Err(Error::Geometry("adjacency needs at least 2 sites".into()));
    }
    match rule {
        NeighborRule::Explicit(edges) => Adjacency::from_edges(m, edges),
        NeighborRule::Rook => Adjacency::from_edges(m, &rook_edges(grid)?),
    }
}

fn lattice_step(values: &mut Vec<f64>) -> f64 {
    values.sort_by(f64::total_cmp);
    values.dedup_by(|a, b| (*a - *b).abs() <= 1e-9 * (1.0 + b.abs()));
    values
        .windows(2)
        .map(|w| w[1] - w[0])
        .fold(f64::INFINITY, f64::min)
}

fn rook_edges(grid: &GridGeometry) -> Result<Vec<(usize, usize)>> {
    let sites = grid.sites();
    let mut xs: Vec<f64> = sites.iter().map(|s| s.x).collect();
    let mut ys: Vec<f64> = sites.iter().map(|s| s.y).collect();
    let (x0, y0) = (
        xs.iter().copied().fold(f64::INFINITY, f64::min),
        ys.iter().copied().fold(f64::INFINITY, f64::min),
    );
    let sx = match lattice_step(&mut xs) {
        s if s.is_finite() => s,
        _ => 1.0,
    };
    let sy = match lattice_step(&mut ys) {
        s if s.is_finite() => s,
        _ => 1.0,
    };
    let mut cell = HashMap::with_capacity(sites.len());
    for s in sites {
        let (fx, fy) = ((s.x - x0) / sx, (s.y - y0) / sy);
        let (cx, cy) = (fx.round(), fy.round());
        if (fx - cx).abs() > 1e-6 || (fy - cy).abs() > 1e-6 {
            return Err(Error::Geometry(format!(
                "site {} at ({}, {}) is not on a regular lattice",
                s.id, s.x, s.y
            )));
        }
        if let Some(other) = cell.insert((cx as i64, cy as i64), s.id) {
            return Err(Error::Geometry(format!(
                "sites {other} and {} share a lattice cell",
                s.id
            )));
        }
    }
    let mut edges = Vec::new();
    for s in sites {
        let (cx, cy) = (((s.x - x0) / sx).round() as i64, ((s.y - y0) / sy).round() as i64);
        for key in [(cx + 1, cy), (cx, cy + 1)] {
            if let Some(&k) = cell.get(&key) {
                edges.push((s.id, k));
            }
        }
    }
    Ok(edges)
}
