use std::ops::Deref;

use serde::{Deserialize, Serialize};

use super::intervals::IntervalSet;
use super::{Membership, PlanarError, BOUNDARY_BAND};
use crate::complex::{Polyline, C};

/// Closed simple polygon with counterclockwise vertex order.
///
/// Consecutive collinear vertices are allowed; repeated vertices are not.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "PolygonRepr", into = "PolygonRepr")]
pub struct SimplePolygon {
    vertices: Vec<C>,
    bbox: (C, C),
}

#[derive(Serialize, Deserialize)]
struct PolygonRepr {
    vertices: Vec<C>,
}

impl TryFrom<PolygonRepr> for SimplePolygon {
    type Error = PlanarError;
    fn try_from(r: PolygonRepr) -> Result<Self, PlanarError> {
        SimplePolygon::new(r.vertices)
    }
}

impl From<SimplePolygon> for PolygonRepr {
    fn from(p: SimplePolygon) -> PolygonRepr {
        PolygonRepr { vertices: p.vertices }
    }
}

pub(crate) fn cross(a: C, b: C) -> f64 {
    a.re * b.im - a.im * b.re
}

pub(crate) fn dot(a: C, b: C) -> f64 {
    a.re * b.re + a.im * b.im
}

fn orient(a: C, b: C, c: C) -> f64 {
    cross(b - a, c - a)
}

fn on_segment(a: C, b: C, p: C) -> bool {
    p.re >= a.re.min(b.re) && p.re <= a.re.max(b.re) && p.im >= a.im.min(b.im) && p.im <= a.im.max(b.im)
}

/// Closed segments `[a, b]` and `[c, d]` share at least one point.
pub fn segments_intersect(a: C, b: C, c: C, d: C) -> bool {
    let d1 = orient(c, d, a);
    let d2 = orient(c, d, b);
    let d3 = orient(a, b, c);
    let d4 = orient(a, b, d);
    if ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0)) && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0)) {
        return true;
    }
    (d1 == 0.0 && on_segment(c, d, a))
        || (d2 == 0.0 && on_segment(c, d, b))
        || (d3 == 0.0 && on_segment(a, b, c))
        || (d4 == 0.0 && on_segment(a, b, d))
}

/// Distance between closed segments.
pub fn segment_segment_distance(a: C, b: C, c: C, d: C) -> f64 {
    use crate::complex::point_segment_distance as psd;
    if segments_intersect(a, b, c, d) {
        return 0.0;
    }
    psd(a, c, d).min(psd(b, c, d)).min(psd(c, a, b)).min(psd(d, a, b))
}

fn bbox_of(v: &[C]) -> (C, C) {
    let mut lo = C::new(f64::INFINITY, f64::INFINITY);
    let mut hi = C::new(f64::NEG_INFINITY, f64::NEG_INFINITY);
    for p in v {
        lo.re = lo.re.min(p.re);
        lo.im = lo.im.min(p.im);
        hi.re = hi.re.max(p.re);
        hi.im = hi.im.max(p.im);
    }
    (lo, hi)
}

impl SimplePolygon {
    /// Validates simplicity and reorders vertices counterclockwise.
    pub fn new(mut vertices: Vec<C>) -> Result<Self, PlanarError> {
        if vertices.len() > 1 && vertices.first() == vertices.last() {
            vertices.pop();
        }
        if vertices.len() < 3 {
            return Err(PlanarError::InvalidPolygon(format!(
                "need at least 3 vertices, got {}",
                vertices.len()
            )));
        }
        if vertices.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
            return Err(PlanarError::InvalidPolygon("non-finite vertex".into()));
        }
        let n = vertices.len();
        for i in 0..n {
            if vertices[i] == vertices[(i + 1) % n] {
                return Err(PlanarError::InvalidPolygon(format!("repeated vertex at index {i}")));
            }
        }
        if signed_area(&vertices) < 0.0 {
            vertices.reverse();
        }
        if signed_area(&vertices) <= 0.0 {
            return Err(PlanarError::InvalidPolygon("zero area".into()));
        }
        if let Some((i, j)) = first_self_intersection(&vertices) {
            return Err(PlanarError::InvalidPolygon(format!(
                "edges {i} and {j} intersect"
            )));
        }
        let bbox = bbox_of(&vertices);
        Ok(SimplePolygon { vertices, bbox })
    }

    /// Regular polygon with `n` vertices on the circle of radius `radius`.
    pub fn regular(center: C, radius: f64, n: usize, phase: f64) -> Result<Self, PlanarError> {
        let v = (0..n)
            .map(|k| center + C::from_polar(radius, phase + 2.0 * std::f64::consts::PI * k as f64 / n as f64))
            .collect();
        SimplePolygon::new(v)
    }

    pub fn vertices(&self) -> &[C] {
        &self.vertices
    }

    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    pub fn bbox(&self) -> (C, C) {
        self.bbox
    }

    pub fn edges(&self) -> impl Iterator<Item = (C, C)> + '_ {
        let n = self.vertices.len();
        (0..n).map(move |i| (self.vertices[i], self.vertices[(i + 1) % n]))
    }

    pub fn area(&self) -> f64 {
        signed_area(&self.vertices)
    }

    pub fn perimeter(&self) -> f64 {
        self.edges().map(|(a, b)| (b - a).norm()).sum()
    }

    pub fn distance_to_boundary(&self, z: C) -> f64 {
        use crate::complex::point_segment_distance as psd;
        self.edges().map(|(a, b)| psd(z, a, b)).fold(f64::INFINITY, f64::min)
    }

    /// Crossing-number test for points off the boundary.
    pub fn crossing_inside(&self, z: C) -> bool {
        let mut inside = false;
        for (a, b) in self.edges() {
            if (a.im > z.im) != (b.im > z.im) {
                let x = a.re + (z.im - a.im) / (b.im - a.im) * (b.re - a.re);
                if z.re < x {
                    inside = !inside;
                }
            }
        }
        inside
    }

    pub fn classify_with_band(&self, z: C, band: f64) -> Membership {
        let (lo, hi) = self.bbox;
        if z.re < lo.re - band || z.re > hi.re + band || z.im < lo.im - band || z.im > hi.im + band {
            return Membership::Outside;
        }
        if self.distance_to_boundary(z) <= band {
            return Membership::Boundary;
        }
        if self.crossing_inside(z) {
            Membership::Inside
        } else {
            Membership::Outside
        }
    }

    pub fn classify(&self, z: C) -> Membership {
        self.classify_with_band(z, BOUNDARY_BAND)
    }

    /// Parameters `t ∈ [0, 1]` with `a + t(b − a)` in the closed polygon.
    pub fn segment_intervals(&self, a: C, b: C) -> IntervalSet {
        let d = b - a;
        let mut ts = vec![0.0, 1.0];
        for (c, e) in self.edges() {
            let f = e - c;
            let den = cross(d, f);
            if den != 0.0 {
                let t = cross(c - a, f) / den;
                let u = cross(c - a, d) / den;
                if (-1e-12..=1.0 + 1e-12).contains(&u) && (0.0..=1.0).contains(&t) {
                    ts.push(t);
                }
            } else if cross(c - a, d) == 0.0 {
                let dd = dot(d, d);
                for p in [c, e] {
                    let t = dot(p - a, d) / dd;
                    if (0.0..=1.0).contains(&t) {
                        ts.push(t);
                    }
                }
            }
        }
        ts.sort_by(f64::total_cmp);
        ts.dedup();
        let mut out = Vec::new();
        for w in ts.windows(2) {
            let m = a + d * (0.5 * (w[0] + w[1]));
            if self.classify(m) != Membership::Outside {
                out.push((w[0], w[1]));
            }
        }
        if out.is_empty() && self.classify(a) != Membership::Outside && ts.len() == 2 {
            out.push((0.0, 0.0));
        }
        IntervalSet::from_unsorted(out)
    }

    /// Closed segment lies in the closed polygon.
    pub fn contains_segment(&self, a: C, b: C) -> bool {
        let len = (b - a).norm();
        if len == 0.0 {
            return self.classify(a) != Membership::Outside;
        }
        self.segment_intervals(a, b).covers(0.0, 1.0, BOUNDARY_BAND / len)
    }

    /// Every vertex and edge of `other` lies strictly inside this polygon.
    pub fn strictly_contains_polygon(&self, other: &SimplePolygon) -> bool {
        if other.vertices.iter().any(|v| self.classify(*v) != Membership::Inside) {
            return false;
        }
        for (a, b) in other.edges() {
            for (c, d) in self.edges() {
                if segments_intersect(a, b, c, d) {
                    return false;
                }
            }
        }
        true
    }

    /// Scaled copy about the origin.
    pub fn scaled(&self, factor: f64) -> SimplePolygon {
        SimplePolygon {
            vertices: self.vertices.iter().map(|v| v * factor).collect(),
            bbox: (self.bbox.0 * factor, self.bbox.1 * factor),
        }
    }

    /// Boundary as a closed polyline (first vertex repeated at the end).
    pub fn boundary(&self) -> Polyline {
        let mut v = self.vertices.clone();
        v.push(v[0]);
        Polyline::new(v).expect("polygon vertices are distinct")
    }

    /// Boundary points spaced at most `h` apart, including every vertex.
    pub fn boundary_samples(&self, h: f64) -> Vec<C> {
        let mut out = Vec::new();
        for (a, b) in self.edges() {
            let n = ((b - a).norm() / h).ceil().max(1.0) as usize;
            for k in 0..n {
                out.push(a + (b - a) * (k as f64 / n as f64));
            }
        }
        out
    }

    /// Vertices where the interior angle exceeds π.
    pub fn reflex_vertices(&self) -> Vec<C> {
        let n = self.vertices.len();
        (0..n)
            .filter(|&i| {
                let a = self.vertices[(i + n - 1) % n];
                let b = self.vertices[i];
                let c = self.vertices[(i + 1) % n];
                orient(a, b, c) < 0.0
            })
            .map(|i| self.vertices[i])
            .collect()
    }
}

fn signed_area(v: &[C]) -> f64 {
    let n = v.len();
    0.5 * (0..n).map(|i| cross(v[i], v[(i + 1) % n])).sum::<f64>()
}

fn first_self_intersection(v: &[C]) -> Option<(usize, usize)> {
    let n = v.len();
    let mut order: Vec<usize> = (0..n).collect();
    let xmin = |i: usize| v[i].re.min(v[(i + 1) % n].re);
    let xmax = |i: usize| v[i].re.max(v[(i + 1) % n].re);
    order.sort_by(|&i, &j| xmin(i).total_cmp(&xmin(j)));
    for (oi, &i) in order.iter().enumerate() {
        let (a, b) = (v[i], v[(i + 1) % n]);
        for &j in &order[oi + 1..] {
            if xmin(j) > xmax(i) {
                break;
            }
            let (c, d) = (v[j], v[(j + 1) % n]);
            let adjacent_next = (i + 1) % n == j;
            let adjacent_prev = (j + 1) % n == i;
            if adjacent_next || adjacent_prev {
                // Shared vertex only; reject folding back onto the neighbour.
                let (shared, p, q) = if adjacent_next { (b, a, d) } else { (a, b, c) };
                if cross(p - shared, q - shared) == 0.0 && dot(p - shared, q - shared) > 0.0 {
                    return Some((i.min(j), i.max(j)));
                }
                continue;
            }
            if segments_intersect(a, b, c, d) {
                return Some((i.min(j), i.max(j)));
            }
        }
    }
    None
}

/// Polygon in the sense of a closed simple curve with the origin in its
/// interior domain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "PolygonRepr", into = "PolygonRepr")]
pub struct PolygonCurve(SimplePolygon);

impl TryFrom<PolygonRepr> for PolygonCurve {
    type Error = PlanarError;
    fn try_from(r: PolygonRepr) -> Result<Self, PlanarError> {
        PolygonCurve::new(r.vertices)
    }
}

impl From<PolygonCurve> for PolygonRepr {
    fn from(p: PolygonCurve) -> PolygonRepr {
        p.0.into()
    }
}

impl Deref for PolygonCurve {
    type Target = SimplePolygon;
    fn deref(&self) -> &SimplePolygon {
        &self.0
    }
}

impl PolygonCurve {
    pub fn new(vertices: Vec<C>) -> Result<Self, PlanarError> {
        PolygonCurve::from_simple(SimplePolygon::new(vertices)?)
    }

    pub fn from_simple(p: SimplePolygon) -> Result<Self, PlanarError> {
        if p.classify(C::new(0.0, 0.0)) != Membership::Inside {
            return Err(PlanarError::OriginNotInterior);
        }
        Ok(PolygonCurve(p))
    }

    pub fn regular(radius: f64, n: usize, phase: f64) -> Result<Self, PlanarError> {
        PolygonCurve::from_simple(SimplePolygon::regular(C::new(0.0, 0.0), radius, n, phase)?)
    }

    pub fn as_simple(&self) -> &SimplePolygon {
        &self.0
    }

    pub fn scaled(&self, factor: f64) -> PolygonCurve {
        PolygonCurve(self.0.scaled(factor))
    }

    /// Whether every ray from the origin meets the boundary once, so the
    /// polygon is star-shaped with respect to 0.
    pub fn is_star_shaped_from_origin(&self) -> bool {
        self.edges().all(|(a, b)| cross(a, b) > 0.0)
    }

    /// Boundary point on the ray from 0 in direction `angle`; requires a
    /// star-shaped polygon.
    pub fn radial_boundary_point(&self, angle: f64) -> Option<C> {
        let d = C::from_polar(1.0, angle);
        let mut best: Option<f64> = None;
        for (a, b) in self.edges() {
            let f = b - a;
            let den = cross(d, f);
            if den == 0.0 {
                continue;
            }
            let t = cross(a, f) / den;
            let u = cross(a, d) / den;
            if t > 0.0 && (-1e-12..=1.0 + 1e-12).contains(&u) {
                best = Some(best.map_or(t, |x: f64| x.min(t)));
            }
        }
        best.map(|t| d * t)
    }
}
