use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use super::{Membership, PlanarRegion};
use crate::complex::C;

/// Default grid resolution for discrete topology checks.
pub const GRID_RESOLUTION: usize = 512;

/// Component counts of a region sampled on a square grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridTopology {
    pub resolution: usize,
    pub cell: f64,
    pub inside_cells: usize,
    /// Components of inside cells under 4-connectivity.
    pub components: usize,
    /// Bounded components of outside cells under 8-connectivity.
    pub holes: usize,
}

impl GridTopology {
    pub fn euler_characteristic(&self) -> i64 {
        self.components as i64 - self.holes as i64
    }

    pub fn simply_connected(&self) -> bool {
        self.components == 1 && self.holes == 0
    }
}

/// How a simple-connectivity verdict was reached.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TopologyCertificate {
    /// The region is the interior of one simple polygon.
    SimplePolygon,
    Grid(GridTopology),
}

/// Sample the region at cell centres over its bounding box (with a one-cell
/// outside margin) and count components and holes.
pub fn grid_topology(region: &PlanarRegion, resolution: usize) -> GridTopology {
    let n = resolution.max(4);
    let (lo, hi) = region.bbox().unwrap_or((C::new(-1.0, -1.0), C::new(1.0, 1.0)));
    let span = (hi.re - lo.re).max(hi.im - lo.im).max(f64::MIN_POSITIVE);
    let cell = span / (n - 2) as f64;
    let origin = lo - C::new(cell, cell);
    let mut inside = vec![false; n * n];
    for j in 0..n {
        for i in 0..n {
            let z = origin + C::new((i as f64 + 0.5) * cell, (j as f64 + 0.5) * cell);
            inside[j * n + i] = region.contains(z) == Membership::Inside;
        }
    }
    let inside_cells = inside.iter().filter(|&&b| b).count();
    let components = count_components(&inside, n, true, false);
    // Outside components including the unbounded one; subtract it.
    let outside = count_components(&inside, n, false, true);
    GridTopology {
        resolution: n,
        cell,
        inside_cells,
        components,
        holes: outside.saturating_sub(1),
    }
}

fn count_components(inside: &[bool], n: usize, want: bool, diagonal: bool) -> usize {
    let mut seen = vec![false; n * n];
    let mut count = 0;
    let mut queue = VecDeque::new();
    let steps: &[(i64, i64)] = if diagonal {
        &[(1, 0), (-1, 0), (0, 1), (0, -1), (1, 1), (1, -1), (-1, 1), (-1, -1)]
    } else {
        &[(1, 0), (-1, 0), (0, 1), (0, -1)]
    };
    for start in 0..n * n {
        if seen[start] || inside[start] != want {
            continue;
        }
        count += 1;
        seen[start] = true;
        queue.push_back(start);
        while let Some(c) = queue.pop_front() {
            let (ci, cj) = ((c % n) as i64, (c / n) as i64);
            for &(di, dj) in steps {
                let (ni, nj) = (ci + di, cj + dj);
                if ni < 0 || nj < 0 || ni >= n as i64 || nj >= n as i64 {
                    continue;
                }
                let k = nj as usize * n + ni as usize;
                if !seen[k] && inside[k] == want {
                    seen[k] = true;
                    queue.push_back(k);
                }
            }
        }
    }
    count
}

/// Simple connectivity of the region's interior. A bare polygon is certified
/// structurally; anything else falls back to the grid count.
pub fn is_simply_connected(region: &PlanarRegion, resolution: usize) -> (bool, TopologyCertificate) {
    if let PlanarRegion::Polygon(_) = region {
        return (true, TopologyCertificate::SimplePolygon);
    }
    let g = grid_topology(region, resolution);
    (g.simply_connected(), TopologyCertificate::Grid(g))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::complex::Polyline;
    use crate::planar::{tube, Disk, SimplePolygon};

    fn square() -> PlanarRegion {
        PlanarRegion::Polygon(
            SimplePolygon::new(vec![C::new(-1.0, -1.0), C::new(1.0, -1.0), C::new(1.0, 1.0), C::new(-1.0, 1.0)])
                .unwrap(),
        )
    }

    #[test]
    fn square_is_simply_connected_on_grid() {
        let g = grid_topology(&square(), 64);
        assert!(g.simply_connected());
        assert_eq!(g.euler_characteristic(), 1);
    }

    #[test]
    fn annulus_has_one_hole() {
        let r = PlanarRegion::difference(square(), PlanarRegion::Disk(Disk::new(C::new(0.0, 0.0), 0.4).unwrap()));
        let g = grid_topology(&r, 128);
        assert_eq!(g.components, 1);
        assert_eq!(g.holes, 1);
        assert_eq!(g.euler_characteristic(), 0);
        assert!(!is_simply_connected(&r, 128).0);
    }

    #[test]
    fn slit_disconnects_components() {
        let cut = tube(Polyline::segment(C::new(0.0, -2.0), C::new(0.0, 2.0)).unwrap(), 0.1).unwrap();
        let r = PlanarRegion::difference(square(), PlanarRegion::Tube(cut));
        let g = grid_topology(&r, 128);
        assert_eq!(g.components, 2);
        assert_eq!(g.holes, 0);
    }

    #[test]
    fn bare_polygon_uses_structural_certificate() {
        let (ok, cert) = is_simply_connected(&square(), 16);
        assert!(ok);
        assert_eq!(cert, TopologyCertificate::SimplePolygon);
    }
}
