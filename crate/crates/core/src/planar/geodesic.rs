use std::cmp::Ordering;
use std::collections::BinaryHeap;

use super::{PlanarError, PlanarRegion};
use crate::complex::{Polyline, C};

#[derive(PartialEq)]
struct Entry(f64, usize);

impl Eq for Entry {}

impl PartialOrd for Entry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Entry {
    // Min-heap on distance, then on node index (nodes are sorted
    // lexicographically, which fixes ties deterministically).
    fn cmp(&self, other: &Self) -> Ordering {
        other.0.total_cmp(&self.0).then_with(|| other.1.cmp(&self.1))
    }
}

/// Shortest paths from the origin inside a region, on the visibility graph
/// of the region's corner points.
#[derive(Debug, Clone)]
pub struct PathOracle {
    region: PlanarRegion,
    nodes: Vec<C>,
    dist: Vec<f64>,
    prev: Vec<Option<usize>>,
}

impl PathOracle {
    pub fn new(region: &PlanarRegion) -> Result<Self, PlanarError> {
        let origin = C::new(0.0, 0.0);
        if !region.in_closure(origin) {
            return Err(PlanarError::Unreachable { z: origin });
        }
        let mut nodes = region.waypoints();
        nodes.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
        nodes.dedup();
        nodes.retain(|&p| p != origin);
        nodes.insert(0, origin);
        let m = nodes.len();
        let mut adj: Vec<Vec<(usize, f64)>> = vec![Vec::new(); m];
        for i in 0..m {
            for j in i + 1..m {
                if region.contains_segment(nodes[i], nodes[j]) {
                    let w = (nodes[j] - nodes[i]).norm();
                    adj[i].push((j, w));
                    adj[j].push((i, w));
                }
            }
        }
        let mut dist = vec![f64::INFINITY; m];
        let mut prev = vec![None; m];
        dist[0] = 0.0;
        let mut heap = BinaryHeap::new();
        heap.push(Entry(0.0, 0));
        while let Some(Entry(d, u)) = heap.pop() {
            if d > dist[u] {
                continue;
            }
            for &(v, w) in &adj[u] {
                let nd = d + w;
                if nd < dist[v] {
                    dist[v] = nd;
                    prev[v] = Some(u);
                    heap.push(Entry(nd, v));
                }
            }
        }
        Ok(PathOracle {
            region: region.clone(),
            nodes,
            dist,
            prev,
        })
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    /// Shortest polyline from 0 to `z` and its length.
    pub fn path_to(&self, z: C) -> Result<(Option<Polyline>, f64), PlanarError> {
        if z == self.nodes[0] {
            return Ok((None, 0.0));
        }
        if !self.region.in_closure(z) {
            return Err(PlanarError::Unreachable { z });
        }
        let mut best: Option<(f64, usize)> = None;
        for (i, &p) in self.nodes.iter().enumerate() {
            if !self.dist[i].is_finite() {
                continue;
            }
            let total = self.dist[i] + (z - p).norm();
            if best.is_none_or(|(b, _)| total < b) && self.region.contains_segment(p, z) {
                best = Some((total, i));
            }
        }
        let (len, last) = best.ok_or(PlanarError::Unreachable { z })?;
        let mut chain = vec![z];
        let mut cur = Some(last);
        while let Some(i) = cur {
            chain.push(self.nodes[i]);
            cur = self.prev[i];
        }
        chain.reverse();
        let path = Polyline::from_points_dedup(chain);
        Ok((path, len))
    }
}

/// Shortest path from 0 to `z` inside `region` and its length; a degenerate
/// request `z = 0` returns `None` with length 0.
pub fn geodesic_length(region: &PlanarRegion, z: C) -> Result<(Option<Polyline>, f64), PlanarError> {
    PathOracle::new(region)?.path_to(z)
}

/// Largest geodesic distance from 0 over `samples`.
pub fn max_geodesic_length(region: &PlanarRegion, samples: &[C]) -> Result<f64, PlanarError> {
    let oracle = PathOracle::new(region)?;
    let mut best = 0.0f64;
    for &z in samples {
        best = best.max(oracle.path_to(z)?.1);
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::planar::{Disk, SimplePolygon};
    use proptest::prelude::*;

    fn square(h: f64) -> PlanarRegion {
        PlanarRegion::Polygon(
            SimplePolygon::new(vec![C::new(-h, -h), C::new(h, -h), C::new(h, h), C::new(-h, h)]).unwrap(),
        )
    }

    fn holed() -> PlanarRegion {
        PlanarRegion::difference(square(2.0), PlanarRegion::Disk(Disk::new(C::new(1.0, 0.0), 0.5).unwrap()))
    }

    #[test]
    fn convex_region_gives_straight_segment() {
        let (path, len) = geodesic_length(&square(2.0), C::new(1.0, 0.0)).unwrap();
        assert_eq!(len, 1.0);
        assert_eq!(path.unwrap().vertices().len(), 2);
    }

    #[test]
    fn origin_is_degenerate() {
        let (path, len) = geodesic_length(&square(2.0), C::new(0.0, 0.0)).unwrap();
        assert!(path.is_none());
        assert_eq!(len, 0.0);
    }

    #[test]
    fn detour_around_hole_is_longer() {
        let z = C::new(1.8, 0.0);
        let (path, len) = geodesic_length(&holed(), z).unwrap();
        assert!(len > z.norm() + 0.1);
        let path = path.unwrap();
        for (a, b) in path.segments() {
            assert!(holed().contains_segment(a, b));
        }
        // Tangent, arc, tangent around the disk of radius 0.5 centred at 1.
        let d = 1.0f64;
        let tangent = (d * d - 0.25f64).sqrt();
        let d2 = 0.8f64;
        let t2 = (d2 * d2 - 0.25f64).sqrt();
        let arc = 0.5 * (std::f64::consts::PI - (0.5f64 / d).acos() - (0.5f64 / d2).acos());
        let oracle = tangent + arc + t2;
        assert!((len - oracle).abs() < 0.01 * oracle, "len {len} oracle {oracle}");
    }

    #[test]
    fn unreachable_point_reports_error() {
        let err = geodesic_length(&square(1.0), C::new(5.0, 0.0)).unwrap_err();
        assert!(matches!(err, PlanarError::Unreachable { .. }));
    }

    #[test]
    fn l_shape_visible_points_are_straight() {
        let l = PlanarRegion::Polygon(
            SimplePolygon::new(vec![
                C::new(-1.0, -1.0),
                C::new(3.0, -1.0),
                C::new(3.0, 1.0),
                C::new(1.0, 1.0),
                C::new(1.0, 3.0),
                C::new(-1.0, 3.0),
            ])
            .unwrap(),
        );
        let z = C::new(2.5, 2.5);
        assert!(!l.in_closure(z));
        let z = C::new(2.5, 0.9);
        let (_, len) = geodesic_length(&l, z).unwrap();
        assert!((len - z.norm()).abs() < 1e-12);
        let z = C::new(0.5, 2.9);
        let (_, len) = geodesic_length(&l, z).unwrap();
        assert!((len - z.norm()).abs() < 1e-12);
    }

    #[test]
    fn unit_disk_sup_is_radius() {
        let disk = PlanarRegion::Disk(Disk::new(C::new(0.0, 0.0), 1.0).unwrap());
        let samples: Vec<C> = (0..64)
            .map(|k| C::from_polar(1.0, 2.0 * std::f64::consts::PI * k as f64 / 64.0))
            .collect();
        let m = max_geodesic_length(&disk, &samples).unwrap();
        assert!((m - 1.0).abs() < 1e-12);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]
        #[test]
        fn geodesic_never_shorter_than_chord(x in -1.9f64..1.9, y in -1.9f64..1.9) {
            let r = holed();
            let z = C::new(x, y);
            prop_assume!(r.contains(z) == crate::planar::Membership::Inside);
            let (_, len) = geodesic_length(&r, z).unwrap();
            prop_assert!(len >= z.norm() - 1e-12);
        }
    }
}
