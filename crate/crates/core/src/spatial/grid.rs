//! Fine-grid sites, coarse regions, and the site → region partition.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Site {
    pub id: usize,
    pub x: f64,
    pub y: f64,
}

/// A closed polygon given by its vertices in order (either winding).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Polygon {
    pub vertices: Vec<(f64, f64)>,
}

impl Polygon {
    pub fn new(vertices: Vec<(f64, f64)>) -> Self {
        Self { vertices }
    }

    pub fn rectangle(x0: f64, y0: f64, x1: f64, y1: f64) -> Self {
        Self::new(vec![(x0, y0), (x1, y0), (x1, y1), (x0, y1)])
    }

    pub fn locate(&self, x: f64, y: f64) -> Containment {
        let n = self.vertices.len();
        if n < 3 {
            return Containment::Outside;
        }
        let mut inside = false;
        for e in 0..n {
            let (ax, ay) = self.vertices[e];
            let (bx, by) = self.vertices[(e + 1) % n];
            if on_segment(x, y, ax, ay, bx, by) {
                return Containment::Boundary;
            }
            if (ay > y) != (by > y) {
                let cross_x = ax + (y - ay) * (bx - ax) / (by - ay);
                if x < cross_x {
                    inside = !inside;
                }
            }
        }
        if inside {
            Containment::Inside
        } else {
            Containment::Outside
        }
    }
}

fn on_segment(px: f64, py: f64, ax: f64, ay: f64, bx: f64, by: f64) -> bool {
    let scale = 1.0 + ax.abs().max(ay.abs()).max(bx.abs()).max(by.abs());
    let eps = 1e-9 * scale;
    let cross = (bx - ax) * (py - ay) - (by - ay) * (px - ax);
    let len = ((bx - ax).powi(2) + (by - ay).powi(2)).sqrt();
    if cross.abs() > eps * len.max(1.0) {
        return false;
    }
    px >= ax.min(bx) - eps && px <= ax.max(bx) + eps && py >= ay.min(by) - eps && py <= ay.max(by) + eps
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Containment {
    Inside,
    Boundary,
    Outside,
}

/// A centroid that touched more than one region and was resolved to the lowest id.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BoundaryTie {
    pub site: usize,
    pub candidates: Vec<usize>,
    pub assigned: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegionAssignment {
    pub site_region: Vec<usize>,
    pub ties: Vec<BoundaryTie>,
}

/// Assigns every site to the region whose polygon contains its centroid.
///
/// Regions are `(region_id, polygon)` pairs. A centroid strictly inside some
/// region goes to the lowest such id; otherwise a centroid on one or more
/// region boundaries goes to the lowest touching id. Any site whose centroid
/// touched several regions is reported in `ties`.
pub fn assign_regions(sites: &[Site], regions: &[(usize, Polygon)]) -> Result<RegionAssignment> {
    let mut site_region = Vec::with_capacity(sites.len());
    let mut ties = Vec::new();
    for site in sites {
        let mut inside = Vec::new();
        let mut boundary = Vec::new();
        for (id, poly) in regions {
            match poly.locate(site.x, site.y) {
                Containment::Inside => inside.push(*id),
                Containment::Boundary => boundary.push(*id),
                Containment::Outside => {}
            }
        }
        let mut candidates = if inside.is_empty() { boundary } else { inside };
        candidates.sort_unstable();
        candidates.dedup();
        let Some(&assigned) = candidates.first() else {
            return Err(Error::UnassignedSite(site.id));
        };
        if candidates.len() > 1 {
            log::info!(
                "site {} touches regions {:?}; assigned to {}",
                site.id,
                candidates,
                assigned
            );
            ties.push(BoundaryTie {
                site: site.id,
                candidates,
                assigned,
            });
        }
        site_region.push(assigned);
    }
    Ok(RegionAssignment { site_region, ties })
}

/// The fine lattice S₁ together with its partition into coarse regions S₂.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridGeometry {
    sites: Vec<Site>,
    site_region: Vec<usize>,
    n_regions: usize,
}

impl GridGeometry {
    /// Sites must carry ids `0..m` in order; region ids must lie in `0..n_regions`.
    pub fn new(sites: Vec<Site>, site_region: Vec<usize>, n_regions: usize) -> Result<Self> {
        if sites.len() < 2 {
            return Err(Error::Geometry(format!(
                "need at least 2 sites, got {}",
                sites.len()
            )));
        }
        if site_region.len() != sites.len() {
            return Err(Error::Dimension(format!(
                "{} sites but {} region labels",
                sites.len(),
                site_region.len()
            )));
        }
        for (expected, site) in sites.iter().enumerate() {
            if site.id != expected {
                return Err(Error::Geometry(format!(
                    "site ids must be contiguous from 0; found {} at position {expected}",
                    site.id
                )));
            }
            if !site.x.is_finite() || !site.y.is_finite() {
                return Err(Error::Geometry(format!("site {} has a non-finite centroid", site.id)));
            }
        }
        if n_regions == 0 {
            return Err(Error::Geometry("need at least one region".into()));
        }
        if let Some((j, &k)) = site_region.iter().enumerate().find(|(_, &k)| k >= n_regions) {
            return Err(Error::Geometry(format!(
                "site {j} references region {k} but only {n_regions} regions exist"
            )));
        }
        Ok(Self {
            sites,
            site_region,
            n_regions,
        })
    }

    /// Builds the geometry by locating each centroid in the supplied region polygons.
    pub fn from_polygons(sites: Vec<Site>, regions: &[(usize, Polygon)]) -> Result<(Self, Vec<BoundaryTie>)> {
        let assignment = assign_regions(&sites, regions)?;
        let n_regions = regions.iter().map(|(id, _)| id + 1).max().unwrap_or(0);
        let grid = Self::new(sites, assignment.site_region, n_regions)?;
        Ok((grid, assignment.ties))
    }

    /// Unit-cell lattice of `nx × ny` sites in row-major order, centroids at
    /// `(col + 0.5, row + 0.5)`, split into `n_strips` horizontal strips.
    pub fn lattice_strips(nx: usize, ny: usize, n_strips: usize) -> Result<Self> {
        if n_strips == 0 || n_strips > ny {
            return Err(Error::Geometry(format!(
                "cannot split {ny} rows into {n_strips} strips"
            )));
        }
        let sites = lattice_sites(nx, ny);
        let regions: Vec<(usize, Polygon)> = (0..n_strips)
            .map(|k| {
                let y0 = (k * ny / n_strips) as f64;
                let y1 = ((k + 1) * ny / n_strips) as f64;
                (k, Polygon::rectangle(0.0, y0, nx as f64, y1))
            })
            .collect();
        Ok(Self::from_polygons(sites, &regions)?.0)
    }

    pub fn n_sites(&self) -> usize {
        self.sites.len()
    }

    pub fn n_regions(&self) -> usize {
        self.n_regions
    }

    pub fn sites(&self) -> &[Site] {
        &self.sites
    }

    pub fn site_region(&self) -> &[usize] {
        &self.site_region
    }

    pub fn region_of(&self, site: usize) -> usize {
        self.site_region[site]
    }

    /// Site ids belonging to each region.
    pub fn region_members(&self) -> Vec<Vec<usize>> {
        let mut members = vec![Vec::new(); self.n_regions];
        for (j, &k) in self.site_region.iter().enumerate() {
            members[k].push(j);
        }
        members
    }
}

pub fn lattice_sites(nx: usize, ny: usize) -> Vec<Site> {
    (0..ny)
        .flat_map(|row| {
            (0..nx).map(move |col| Site {
                id: row * nx + col,
                x: col as f64 + 0.5,
                y: row as f64 + 0.5,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn strictly_inside_is_assigned() {
        let sites = vec![Site { id: 0, x: 2.5, y: 2.5 }];
        let regions = vec![
            (1, Polygon::rectangle(0.0, 0.0, 1.0, 1.0)),
            (3, Polygon::rectangle(2.0, 2.0, 3.0, 3.0)),
        ];
        let a = assign_regions(&sites, &regions).unwrap();
        assert_eq!(a.site_region, vec![3]);
        assert!(a.ties.is_empty());
    }

    #[test]
    fn strips_partition_equally() {
        let grid = GridGeometry::lattice_strips(25, 25, 5).unwrap();
        assert_eq!(grid.n_sites(), 625);
        for members in grid.region_members() {
            assert_eq!(members.len(), 125);
        }
    }

    #[test]
    fn shared_edge_goes_to_lowest_id() {
        let sites = vec![Site { id: 0, x: 1.0, y: 0.5 }];
        let regions = vec![
            (2, Polygon::rectangle(1.0, 0.0, 2.0, 1.0)),
            (1, Polygon::rectangle(0.0, 0.0, 1.0, 1.0)),
        ];
        let a = assign_regions(&sites, &regions).unwrap();
        assert_eq!(a.site_region, vec![1]);
        assert_eq!(
            a.ties,
            vec![BoundaryTie {
                site: 0,
                candidates: vec![1, 2],
                assigned: 1
            }]
        );
    }

    #[test]
    fn centroid_outside_everything_is_an_error() {
        let sites = vec![Site { id: 7, x: 5.0, y: 5.0 }];
        let regions = vec![(0, Polygon::rectangle(0.0, 0.0, 1.0, 1.0))];
        assert!(matches!(
            assign_regions(&sites, &regions),
            Err(Error::UnassignedSite(7))
        ));
    }

    #[test]
    fn rejects_single_site_and_gaps() {
        assert!(GridGeometry::new(vec![Site { id: 0, x: 0.0, y: 0.0 }], vec![0], 1).is_err());
        let sites = vec![Site { id: 0, x: 0.0, y: 0.0 }, Site { id: 2, x: 1.0, y: 0.0 }];
        assert!(GridGeometry::new(sites, vec![0, 0], 1).is_err());
        let sites = lattice_sites(2, 1);
        assert!(GridGeometry::new(sites, vec![0, 4], 2).is_err());
    }

    #[test]
    fn concave_polygon() {
        // L-shape: the notch at (1.5, 1.5) is outside.
        let poly = Polygon::new(vec![(0.0, 0.0), (2.0, 0.0), (2.0, 1.0), (1.0, 1.0), (1.0, 2.0), (0.0, 2.0)]);
        assert_eq!(poly.locate(0.5, 1.5), Containment::Inside);
        assert_eq!(poly.locate(1.5, 1.5), Containment::Outside);
        assert_eq!(poly.locate(1.5, 1.0), Containment::Boundary);
    }
}
