use std::f64::consts::PI;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::intervals::IntervalSet;
use super::polygon::{cross, dot, SimplePolygon};
use super::{Membership, PlanarError, BOUNDARY_BAND};
use crate::complex::{point_segment_distance, Polyline, C};

/// Open disk `D(center, radius)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Disk {
    pub center: C,
    pub radius: f64,
}

impl Disk {
    pub fn new(center: C, radius: f64) -> Result<Self, PlanarError> {
        if !(radius > 0.0) || !radius.is_finite() {
            return Err(PlanarError::InvalidRegion(format!("disk radius {radius}")));
        }
        Ok(Disk { center, radius })
    }

    pub fn classify(&self, z: C) -> Membership {
        let d = (z - self.center).norm() - self.radius;
        band_classify(d)
    }

    pub fn segment_intervals(&self, a: C, b: C) -> IntervalSet {
        line_disk_interval(a, b, self.center, self.radius)
    }

    /// Boundary sampled as a regular polygon, optionally scaled outward so
    /// that the chords avoid the open disk.
    pub fn ring(&self, n: usize, circumscribed: bool, nudge: f64) -> Vec<C> {
        let r = if circumscribed {
            self.radius / (PI / n as f64).cos() * (1.0 + nudge)
        } else {
            self.radius * (1.0 - nudge)
        };
        (0..n)
            .map(|k| self.center + C::from_polar(r, 2.0 * PI * k as f64 / n as f64))
            .collect()
    }
}

/// Closed neighbourhood `{z : dist(z, carrier) ≤ radius}` of a polyline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TubeNeighborhood {
    pub carrier: Polyline,
    pub radius: f64,
}

impl TubeNeighborhood {
    pub fn distance(&self, z: C) -> f64 {
        self.carrier.distance(z)
    }

    pub fn classify(&self, z: C) -> Membership {
        band_classify(self.distance(z) - self.radius)
    }

    pub fn segment_intervals(&self, a: C, b: C) -> IntervalSet {
        let mut parts = Vec::new();
        for (s0, s1) in self.carrier.segments() {
            if let Some(iv) = capsule_interval(a, b, s0, s1, self.radius) {
                parts.push(iv);
            }
        }
        IntervalSet::from_unsorted(parts)
    }

    /// Points around the tube, just outside it, for shortest-path graphs.
    pub fn waypoints(&self, per_vertex: usize) -> Vec<C> {
        let r = self.radius / (PI / per_vertex as f64).cos() * (1.0 + 1e-9);
        let mut out = Vec::new();
        for v in self.carrier.vertices() {
            for k in 0..per_vertex {
                out.push(v + C::from_polar(r, 2.0 * PI * (k as f64 + 0.5) / per_vertex as f64));
            }
        }
        out
    }

    /// Whether two tubes share a point.
    pub fn intersects(&self, other: &TubeNeighborhood) -> bool {
        use super::polygon::segment_segment_distance;
        let reach = self.radius + other.radius;
        for (a, b) in self.carrier.segments() {
            for (c, d) in other.carrier.segments() {
                if segment_segment_distance(a, b, c, d) <= reach {
                    return true;
                }
            }
        }
        false
    }
}

/// Build a tube around `carrier` of radius `xi`.
pub fn tube(carrier: Polyline, xi: f64) -> Result<TubeNeighborhood, PlanarError> {
    if !(xi > 0.0) || !xi.is_finite() {
        return Err(PlanarError::InvalidRegion(format!("tube radius {xi}")));
    }
    Ok(TubeNeighborhood { carrier, radius: xi })
}

/// Closed polar rectangle `{center + ρe^{iψ} : ρ ∈ [rho_min, rho_max],
/// ψ ∈ [angle_start, angle_start + angle_span]}` with span at most π.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnnularSector {
    pub center: C,
    pub rho_min: f64,
    pub rho_max: f64,
    pub angle_start: f64,
    pub angle_span: f64,
}

impl AnnularSector {
    pub fn new(center: C, rho_min: f64, rho_max: f64, angle_start: f64, angle_span: f64) -> Result<Self, PlanarError> {
        if !(rho_min >= 0.0 && rho_max > rho_min && angle_span > 0.0 && angle_span <= PI) {
            return Err(PlanarError::InvalidRegion(format!(
                "sector rho [{rho_min}, {rho_max}] span {angle_span}"
            )));
        }
        Ok(AnnularSector {
            center,
            rho_min,
            rho_max,
            angle_start,
            angle_span,
        })
    }

    /// Sector symmetric about direction `mid`.
    pub fn symmetric(center: C, rho_min: f64, rho_max: f64, mid: f64, half: f64) -> Result<Self, PlanarError> {
        AnnularSector::new(center, rho_min, rho_max, mid - half, 2.0 * half)
    }

    fn relative_angle(&self, z: C) -> f64 {
        let a = (z - self.center).arg() - self.angle_start;
        a.rem_euclid(2.0 * PI)
    }

    fn corners(&self) -> [C; 4] {
        let e0 = C::from_polar(1.0, self.angle_start);
        let e1 = C::from_polar(1.0, self.angle_start + self.angle_span);
        [
            self.center + e0 * self.rho_min,
            self.center + e0 * self.rho_max,
            self.center + e1 * self.rho_min,
            self.center + e1 * self.rho_max,
        ]
    }

    pub fn distance_to_boundary(&self, z: C) -> f64 {
        let rho = (z - self.center).norm();
        let ang = self.relative_angle(z);
        let mut d = f64::INFINITY;
        let c = self.corners();
        d = d.min(point_segment_distance(z, c[0], c[1]));
        d = d.min(point_segment_distance(z, c[2], c[3]));
        if ang <= self.angle_span {
            d = d.min((rho - self.rho_min).abs()).min((rho - self.rho_max).abs());
        }
        d
    }

    pub fn classify(&self, z: C) -> Membership {
        if self.distance_to_boundary(z) <= BOUNDARY_BAND {
            return Membership::Boundary;
        }
        let rho = (z - self.center).norm();
        if rho > self.rho_min && rho < self.rho_max && self.relative_angle(z) < self.angle_span {
            Membership::Inside
        } else {
            Membership::Outside
        }
    }

    pub fn segment_intervals(&self, a: C, b: C) -> IntervalSet {
        let outer = line_disk_interval(a, b, self.center, self.rho_max);
        let ring = if self.rho_min > 0.0 {
            let inner = line_disk_interval(a, b, self.center, self.rho_min);
            let open_inner = match inner.intervals().first() {
                Some(&(lo, hi)) if hi > lo => IntervalSet::single(lo, hi),
                _ => IntervalSet::empty(),
            };
            outer.difference(&open_inner, 0.0, 1.0)
        } else {
            outer
        };
        // Wedge = intersection of two closed half-planes through the center.
        let n0 = C::from_polar(1.0, self.angle_start) * C::new(0.0, 1.0);
        let n1 = C::from_polar(1.0, self.angle_start + self.angle_span) * C::new(0.0, -1.0);
        let wedge = half_plane_interval(a, b, self.center, n0).intersect(&half_plane_interval(a, b, self.center, n1));
        ring.intersect(&wedge)
    }

    /// Polygonal outline with vertices on both arcs, at most `step` radians apart.
    pub fn outline(&self, step: f64) -> Vec<C> {
        let m = (self.angle_span / step).ceil().max(1.0) as usize;
        let mut out = Vec::with_capacity(2 * m + 2);
        for k in 0..=m {
            let ang = self.angle_start + self.angle_span * k as f64 / m as f64;
            out.push(self.center + C::from_polar(self.rho_max, ang));
        }
        for k in (0..=m).rev() {
            let ang = self.angle_start + self.angle_span * k as f64 / m as f64;
            if self.rho_min > 0.0 {
                out.push(self.center + C::from_polar(self.rho_min, ang));
            }
        }
        if self.rho_min == 0.0 {
            out.push(self.center);
        }
        out
    }
}

fn band_classify(signed: f64) -> Membership {
    if signed.abs() <= BOUNDARY_BAND {
        Membership::Boundary
    } else if signed < 0.0 {
        Membership::Inside
    } else {
        Membership::Outside
    }
}

/// `t ∈ [0, 1]` with `|a + t(b − a) − c| ≤ r`.
fn line_disk_interval(a: C, b: C, c: C, r: f64) -> IntervalSet {
    let d = b - a;
    let f = a - c;
    let qa = dot(d, d);
    let qb = 2.0 * dot(f, d);
    let qc = dot(f, f) - r * r;
    if qa == 0.0 {
        return if qc <= 0.0 {
            IntervalSet::single(0.0, 1.0)
        } else {
            IntervalSet::empty()
        };
    }
    let disc = qb * qb - 4.0 * qa * qc;
    if disc < 0.0 {
        return IntervalSet::empty();
    }
    let s = disc.sqrt();
    let q = -0.5 * (qb + qb.signum() * s);
    let (mut t0, mut t1) = if q != 0.0 { (q / qa, qc / q) } else { (-s / (2.0 * qa), s / (2.0 * qa)) };
    if t0 > t1 {
        std::mem::swap(&mut t0, &mut t1);
    }
    IntervalSet::single(t0.max(0.0), t1.min(1.0))
}

/// `t ∈ [0, 1]` with `dot(a + t(b − a) − p, n) ≥ 0`.
fn half_plane_interval(a: C, b: C, p: C, n: C) -> IntervalSet {
    let v0 = dot(a - p, n);
    let v1 = dot(b - p, n);
    if v0 >= 0.0 && v1 >= 0.0 {
        IntervalSet::single(0.0, 1.0)
    } else if v0 < 0.0 && v1 < 0.0 {
        IntervalSet::empty()
    } else {
        let t = v0 / (v0 - v1);
        if v0 >= 0.0 {
            IntervalSet::single(0.0, t)
        } else {
            IntervalSet::single(t, 1.0)
        }
    }
}

/// Interval of the segment inside the capsule around `[s0, s1]`.
fn capsule_interval(a: C, b: C, s0: C, s1: C, r: f64) -> Option<(f64, f64)> {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    let mut absorb = |iv: IntervalSet| {
        for &(x, y) in iv.intervals() {
            lo = lo.min(x);
            hi = hi.max(y);
        }
    };
    absorb(line_disk_interval(a, b, s0, r));
    absorb(line_disk_interval(a, b, s1, r));
    let e = s1 - s0;
    let len = e.norm();
    let u = e / len;
    let nrm = u * C::new(0.0, 1.0);
    let rect = half_plane_interval(a, b, s0, u)
        .intersect(&half_plane_interval(a, b, s1, -u))
        .intersect(&half_plane_interval(a, b, s0 - nrm * r, nrm))
        .intersect(&half_plane_interval(a, b, s0 + nrm * r, -nrm));
    absorb(rect);
    (lo <= hi).then_some((lo, hi))
}

/// Boolean combination of primitive planar sets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum PlanarRegion {
    Polygon(SimplePolygon),
    Disk(Disk),
    Tube(TubeNeighborhood),
    Sector(AnnularSector),
    Union { parts: Vec<PlanarRegion> },
    Intersection { parts: Vec<PlanarRegion> },
    Difference { base: Box<PlanarRegion>, minus: Box<PlanarRegion> },
}

impl PlanarRegion {
    pub fn union(parts: Vec<PlanarRegion>) -> Self {
        PlanarRegion::Union { parts }
    }

    pub fn difference(base: PlanarRegion, minus: PlanarRegion) -> Self {
        PlanarRegion::Difference {
            base: Box::new(base),
            minus: Box::new(minus),
        }
    }

    /// Classification with a boundary band of width 1e−12.
    pub fn contains(&self, z: C) -> Membership {
        use Membership::*;
        match self {
            PlanarRegion::Polygon(p) => p.classify(z),
            PlanarRegion::Disk(d) => d.classify(z),
            PlanarRegion::Tube(t) => t.classify(z),
            PlanarRegion::Sector(s) => s.classify(z),
            PlanarRegion::Union { parts } => {
                let mut any_boundary = false;
                for p in parts {
                    match p.contains(z) {
                        Inside => return Inside,
                        Boundary => any_boundary = true,
                        Outside => {}
                    }
                }
                if any_boundary {
                    Boundary
                } else {
                    Outside
                }
            }
            PlanarRegion::Intersection { parts } => {
                let mut any_boundary = false;
                for p in parts {
                    match p.contains(z) {
                        Outside => return Outside,
                        Boundary => any_boundary = true,
                        Inside => {}
                    }
                }
                if any_boundary || parts.is_empty() {
                    if parts.is_empty() {
                        Outside
                    } else {
                        Boundary
                    }
                } else {
                    Inside
                }
            }
            PlanarRegion::Difference { base, minus } => match (base.contains(z), minus.contains(z)) {
                (Outside, _) | (_, Inside) => Outside,
                (Inside, Outside) => Inside,
                _ => Boundary,
            },
        }
    }

    /// Inside or on the boundary.
    pub fn in_closure(&self, z: C) -> bool {
        self.contains(z) != Membership::Outside
    }

    /// Parameters of the segment `[a, b]` lying in the closure of the region.
    pub fn segment_intervals(&self, a: C, b: C) -> IntervalSet {
        match self {
            PlanarRegion::Polygon(p) => p.segment_intervals(a, b),
            PlanarRegion::Disk(d) => d.segment_intervals(a, b),
            PlanarRegion::Tube(t) => t.segment_intervals(a, b),
            PlanarRegion::Sector(s) => s.segment_intervals(a, b),
            PlanarRegion::Union { parts } => parts
                .iter()
                .fold(IntervalSet::empty(), |acc, p| acc.union(&p.segment_intervals(a, b))),
            PlanarRegion::Intersection { parts } => parts
                .iter()
                .fold(IntervalSet::single(0.0, 1.0), |acc, p| acc.intersect(&p.segment_intervals(a, b))),
            PlanarRegion::Difference { base, minus } => {
                // Closure of A∖B is contained in cl(A) ∖ int(B); removing the
                // closed set of B and re-closing keeps boundary contact points.
                let keep = base.segment_intervals(a, b);
                let cut = minus.segment_intervals(a, b);
                keep.difference(&open_part(&cut), 0.0, 1.0)
            }
        }
    }

    /// Closed segment lies in the closure of the region.
    pub fn contains_segment(&self, a: C, b: C) -> bool {
        let len = (b - a).norm();
        if len == 0.0 {
            return self.in_closure(a);
        }
        self.segment_intervals(a, b).covers(0.0, 1.0, BOUNDARY_BAND / len)
    }

    /// Axis-aligned bounding box of the closure (conservative).
    pub fn bbox(&self) -> Option<(C, C)> {
        match self {
            PlanarRegion::Polygon(p) => Some(p.bbox()),
            PlanarRegion::Disk(d) => {
                let r = C::new(d.radius, d.radius);
                Some((d.center - r, d.center + r))
            }
            PlanarRegion::Tube(t) => {
                let v = t.carrier.vertices();
                let mut lo = v[0];
                let mut hi = v[0];
                for p in v {
                    lo = C::new(lo.re.min(p.re), lo.im.min(p.im));
                    hi = C::new(hi.re.max(p.re), hi.im.max(p.im));
                }
                let r = C::new(t.radius, t.radius);
                Some((lo - r, hi + r))
            }
            PlanarRegion::Sector(s) => {
                let r = C::new(s.rho_max, s.rho_max);
                Some((s.center - r, s.center + r))
            }
            PlanarRegion::Union { parts } => parts.iter().filter_map(|p| p.bbox()).reduce(|(a0, a1), (b0, b1)| {
                (
                    C::new(a0.re.min(b0.re), a0.im.min(b0.im)),
                    C::new(a1.re.max(b1.re), a1.im.max(b1.im)),
                )
            }),
            PlanarRegion::Intersection { parts } => parts.iter().filter_map(|p| p.bbox()).reduce(|(a0, a1), (b0, b1)| {
                (
                    C::new(a0.re.max(b0.re), a0.im.max(b0.im)),
                    C::new(a1.re.min(b1.re), a1.im.min(b1.im)),
                )
            }),
            PlanarRegion::Difference { base, .. } => base.bbox(),
        }
    }

    /// `n` interior points drawn uniformly by rejection from the bounding
    /// box. Gives up (returning fewer points) after `50·n` rejections.
    pub fn sample_points<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Vec<C> {
        let Some((lo, hi)) = self.bbox() else {
            return Vec::new();
        };
        let mut out = Vec::with_capacity(n);
        let mut tries = 0usize;
        while out.len() < n && tries < 50 * n.max(1) {
            tries += 1;
            let z = C::new(rng.gen_range(lo.re..=hi.re), rng.gen_range(lo.im..=hi.im));
            if self.contains(z) == Membership::Inside {
                out.push(z);
            }
        }
        out
    }

    /// Candidate corner points for visibility-graph shortest paths: polygon
    /// vertices, points just outside disks and tubes, and sector corners.
    pub fn waypoints(&self) -> Vec<C> {
        let mut out = Vec::new();
        self.collect_waypoints(&mut out);
        out.retain(|p| self.in_closure(*p));
        out
    }

    fn collect_waypoints(&self, out: &mut Vec<C>) {
        match self {
            PlanarRegion::Polygon(p) => out.extend(p.reflex_vertices()),
            PlanarRegion::Disk(d) => {
                out.extend(d.ring(64, true, 1e-9));
                out.extend(d.ring(64, false, 1e-9));
            }
            PlanarRegion::Tube(t) => out.extend(t.waypoints(8)),
            PlanarRegion::Sector(s) => out.extend(s.outline(2.0 * PI / 64.0)),
            PlanarRegion::Union { parts } | PlanarRegion::Intersection { parts } => {
                for p in parts {
                    p.collect_waypoints(out);
                }
            }
            PlanarRegion::Difference { base, minus } => {
                base.collect_waypoints(out);
                minus.collect_waypoints(out);
            }
        }
    }
}

/// Interiors of the intervals (each shrunk to an open interval).
fn open_part(s: &IntervalSet) -> IntervalSet {
    let eps = 1e-12;
    IntervalSet::from_unsorted(
        s.intervals()
            .iter()
            .filter(|(a, b)| b - a > 2.0 * eps)
            .map(|&(a, b)| (a + eps, b - eps))
            .collect(),
    )
}

/// Distance from `z` to segment `[a, b]` measured along the normal; helper
/// for callers building offset paths.
pub fn signed_side(a: C, b: C, z: C) -> f64 {
    cross(b - a, z - a) / (b - a).norm()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn square_region() -> PlanarRegion {
        PlanarRegion::Polygon(
            SimplePolygon::new(vec![
                C::new(-1.0, -1.0),
                C::new(1.0, -1.0),
                C::new(1.0, 1.0),
                C::new(-1.0, 1.0),
            ])
            .unwrap(),
        )
    }

    #[test]
    fn annulus_membership() {
        let delta = 0.2;
        let ann = PlanarRegion::difference(
            PlanarRegion::Disk(Disk::new(C::new(0.0, 0.0), delta).unwrap()),
            PlanarRegion::Disk(Disk::new(C::new(0.0, 0.0), delta / 2.0).unwrap()),
        );
        assert_eq!(ann.contains(C::new(0.75 * delta, 0.0)), Membership::Inside);
        assert_eq!(ann.contains(C::new(0.25 * delta, 0.0)), Membership::Outside);
        assert_eq!(ann.contains(C::new(2.0 * delta, 0.0)), Membership::Outside);
    }

    #[test]
    fn tube_membership() {
        let t = tube(Polyline::segment(C::new(0.0, 0.0), C::new(1.0, 0.0)).unwrap(), 0.1).unwrap();
        assert_eq!(t.classify(C::new(0.5, 0.05)), Membership::Inside);
        assert_eq!(t.classify(C::new(0.5, 0.2)), Membership::Outside);
    }

    #[test]
    fn parallel_tubes_overlap() {
        let a = tube(Polyline::segment(C::new(0.0, 0.0), C::new(1.0, 0.0)).unwrap(), 0.3).unwrap();
        let b = tube(Polyline::segment(C::new(0.0, 0.5), C::new(1.0, 0.5)).unwrap(), 0.3).unwrap();
        assert!(a.intersects(&b));
        let c = tube(Polyline::segment(C::new(0.0, 0.5), C::new(1.0, 0.5)).unwrap(), 0.15).unwrap();
        assert!(!a.intersects(&c));
    }

    #[test]
    fn segment_through_hole_is_rejected() {
        let r = PlanarRegion::difference(
            square_region(),
            PlanarRegion::Disk(Disk::new(C::new(0.0, 0.0), 0.3).unwrap()),
        );
        assert!(!r.contains_segment(C::new(-0.9, 0.0), C::new(0.9, 0.0)));
        assert!(r.contains_segment(C::new(-0.9, 0.5), C::new(0.9, 0.5)));
        // Tangent to the hole: stays in the closure.
        assert!(r.contains_segment(C::new(-0.9, 0.3), C::new(0.9, 0.3)));
    }

    #[test]
    fn sector_intervals_match_membership() {
        let s = AnnularSector::symmetric(C::new(0.0, 0.0), 0.5, 1.0, 0.0, 0.4).unwrap();
        let iv = s.segment_intervals(C::new(0.0, 0.0), C::new(2.0, 0.0));
        assert_eq!(iv.intervals().len(), 1);
        let (lo, hi) = iv.intervals()[0];
        assert!((lo - 0.25).abs() < 1e-14 && (hi - 0.5).abs() < 1e-14);
        assert!(s.segment_intervals(C::new(0.0, 0.9), C::new(1.0, 0.9)).is_empty());
    }

    #[test]
    fn json_round_trip() {
        let r = PlanarRegion::union(vec![
            square_region(),
            PlanarRegion::Sector(AnnularSector::symmetric(C::new(1.0, 0.0), 0.0, 0.5, 0.0, 0.3).unwrap()),
            PlanarRegion::Tube(tube(Polyline::segment(C::new(0.0, 1.0), C::new(0.0, 2.0)).unwrap(), 0.1).unwrap()),
        ]);
        let s = serde_json::to_string(&r).unwrap();
        let back: PlanarRegion = serde_json::from_str(&s).unwrap();
        assert_eq!(back, r);
    }

    fn sample_region() -> PlanarRegion {
        PlanarRegion::difference(
            square_region(),
            PlanarRegion::union(vec![
                PlanarRegion::Disk(Disk::new(C::new(0.3, 0.2), 0.35).unwrap()),
                PlanarRegion::Tube(tube(Polyline::segment(C::new(-0.8, -0.6), C::new(0.2, -0.7)).unwrap(), 0.1).unwrap()),
            ]),
        )
    }

    proptest! {
        #[test]
        fn difference_matches_boolean_algebra(x in -1.5f64..1.5, y in -1.5f64..1.5) {
            let z = C::new(x, y);
            let a = square_region();
            let b = PlanarRegion::Disk(Disk::new(C::new(0.3, 0.2), 0.35).unwrap());
            let d = PlanarRegion::difference(a.clone(), b.clone());
            let (ma, mb, md) = (a.contains(z), b.contains(z), d.contains(z));
            if ma != Membership::Boundary && mb != Membership::Boundary {
                let expect = ma == Membership::Inside && mb == Membership::Outside;
                prop_assert_eq!(md == Membership::Inside, expect);
            }
        }

        #[test]
        fn segment_intervals_agree_with_point_tests(
            ax in -1.2f64..1.2, ay in -1.2f64..1.2, bx in -1.2f64..1.2, by in -1.2f64..1.2, t in 0.0f64..1.0,
        ) {
            let r = sample_region();
            let (a, b) = (C::new(ax, ay), C::new(bx, by));
            let iv = r.segment_intervals(a, b);
            let z = a + (b - a) * t;
            let m = r.contains(z);
            let in_iv = iv.intervals().iter().any(|&(lo, hi)| t >= lo - 1e-9 && t <= hi + 1e-9);
            if m == Membership::Inside {
                prop_assert!(in_iv);
            }
            if m == Membership::Outside {
                let strictly = iv.intervals().iter().any(|&(lo, hi)| t > lo + 1e-9 && t < hi - 1e-9);
                prop_assert!(!strictly);
            }
        }
    }
}
