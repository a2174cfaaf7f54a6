//! Numerical evaluation helpers shared by the two processes: frame
//! components at a point, cumulative path integrals, and an evaluator that
//! reaches points of a planar domain through straight segments from known
//! anchor values.

use nalgebra::Vector3;

use super::LemmaError;
use crate::complex::{integrate_path_vec, Polyline, QuadratureOptions, Tape, C, I};
use crate::planar::PlanarRegion;
use crate::weierstrass::Frame;

/// `(f, −f·g²)` of a world triple `φ(z)` in `frame`.
pub fn frame_ab(phi: &[C], frame: &Frame) -> (C, C) {
    let comp = |e: &Vector3<f64>| phi[0] * e[0] + phi[1] * e[1] + phi[2] * e[2];
    let (p1, p2) = (comp(&frame.e1), comp(&frame.e2));
    (p1 - I * p2, p1 + I * p2)
}

pub fn norm3(phi: &[C]) -> f64 {
    phi.iter().take(3).map(|c| c.norm_sqr()).sum::<f64>().sqrt()
}

/// Frame with `e3 = x/‖x‖` and `e1` the normalized projection of `axis`.
pub fn radial_frame(x: &Vector3<f64>, axis: &Vector3<f64>) -> Option<Frame> {
    let norm = x.norm();
    if !(norm > 1e-9) {
        return None;
    }
    let e3 = x / norm;
    let proj = axis - e3 * e3.dot(axis);
    if proj.norm() < 1e-6 {
        return None;
    }
    let e1 = proj.normalize();
    let e2 = e3.cross(&e1);
    Some(Frame { e1, e2, e3 })
}

/// Points `center + radius·e^{iθ}` at `n` equally spaced angles.
pub fn ring(center: C, radius: f64, n: usize) -> Vec<C> {
    (0..n)
        .map(|k| center + C::from_polar(radius, 2.0 * std::f64::consts::PI * k as f64 / n as f64))
        .collect()
}

/// Real parts of `∫φ` over a segment.
pub fn segment_integral(tape: &Tape, a: C, b: C, opts: &QuadratureOptions) -> Result<Vector3<f64>, LemmaError> {
    if a == b {
        return Ok(Vector3::zeros());
    }
    let r = integrate_path_vec(tape, &Polyline::segment(a, b)?, opts)?;
    Ok(Vector3::new(r.values[0].re, r.values[1].re, r.values[2].re))
}

/// Cumulative real integrals along consecutive points, starting at `start`.
pub fn cumulative(tape: &Tape, points: &[C], start: Vector3<f64>, opts: &QuadratureOptions) -> Result<Vec<Vector3<f64>>, LemmaError> {
    let mut out = Vec::with_capacity(points.len());
    let mut acc = start;
    for (k, &z) in points.iter().enumerate() {
        if k > 0 {
            acc += segment_integral(tape, points[k - 1], z, opts)?;
        }
        out.push(acc);
    }
    Ok(out)
}

/// Values of `Re ∫_0^z φ` reached from anchors with known values through
/// segments inside `domain`.
pub struct FieldEvaluator {
    pub tape: Tape,
    pub opts: QuadratureOptions,
    pub domain: PlanarRegion,
    anchors: Vec<(C, Vector3<f64>)>,
}

impl FieldEvaluator {
    /// Evaluator with the origin as its only anchor (value 0).
    pub fn new(tape: Tape, opts: QuadratureOptions, domain: PlanarRegion) -> Self {
        FieldEvaluator {
            tape,
            opts,
            domain,
            anchors: vec![(C::new(0.0, 0.0), Vector3::zeros())],
        }
    }

    pub fn add_anchors(&mut self, pts: &[C], vals: &[Vector3<f64>]) {
        self.anchors.extend(pts.iter().copied().zip(vals.iter().copied()));
    }

    pub fn anchor_count(&self) -> usize {
        self.anchors.len()
    }

    pub fn segment(&self, a: C, b: C) -> Result<Vector3<f64>, LemmaError> {
        segment_integral(&self.tape, a, b, &self.opts)
    }

    /// Value at `z` from the origin when the segment is admissible, else
    /// from the nearest anchor with an admissible segment (up to 32 tried).
    pub fn at(&self, z: C) -> Result<Vector3<f64>, LemmaError> {
        let o = C::new(0.0, 0.0);
        if self.domain.contains_segment(o, z) {
            return self.segment(o, z);
        }
        let mut order: Vec<usize> = (1..self.anchors.len()).collect();
        order.sort_by(|&i, &j| (self.anchors[i].0 - z).norm().total_cmp(&(self.anchors[j].0 - z).norm()));
        for &i in order.iter().take(32) {
            let (a, v) = self.anchors[i];
            if self.domain.contains_segment(a, z) {
                return Ok(v + self.segment(a, z)?);
            }
        }
        Err(LemmaError::Unreachable { z })
    }
}

/// Values of `Re ∫_0^v φ` at every vertex of a closed boundary, marching
/// edge by edge from the vertex closest to the origin that is visible from
/// it, plus the closure defect of the full loop.
pub fn march_boundary(
    tape: &Tape,
    vertices: &[C],
    domain: &PlanarRegion,
    opts: &QuadratureOptions,
) -> Result<(Vec<Vector3<f64>>, f64), LemmaError> {
    let n = vertices.len();
    let o = C::new(0.0, 0.0);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| vertices[i].norm().total_cmp(&vertices[j].norm()));
    let start = order
        .iter()
        .copied()
        .take(64)
        .find(|&i| domain.contains_segment(o, vertices[i]))
        .ok_or(LemmaError::Unreachable { z: vertices[order[0]] })?;
    let mut vals = vec![Vector3::zeros(); n];
    let mut acc = segment_integral(tape, o, vertices[start], opts)?;
    vals[start] = acc;
    let mut scale = acc.norm();
    for step in 1..=n {
        let prev = (start + step - 1) % n;
        let cur = (start + step) % n;
        acc += segment_integral(tape, vertices[prev], vertices[cur], opts)?;
        scale = scale.max(acc.norm());
        if step < n {
            vals[cur] = acc;
        }
    }
    let defect = (acc - vals[start]).norm() / scale.max(1.0);
    Ok((vals, defect))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::complex::HolomorphicExpr;
    use crate::planar::{Disk, SimplePolygon};

    fn z_squared_tape() -> Tape {
        let z = HolomorphicExpr::var();
        Tape::compile(&[z.powi(2), HolomorphicExpr::real(1.0), HolomorphicExpr::real(0.0)])
    }

    #[test]
    fn march_matches_closed_form() {
        // Re ∫_0^v z² = Re v³/3.
        let poly = SimplePolygon::regular(C::new(0.0, 0.0), 1.0, 12, 0.1).unwrap();
        let domain = PlanarRegion::Polygon(poly.clone());
        let (vals, defect) = march_boundary(&z_squared_tape(), poly.vertices(), &domain, &QuadratureOptions::default()).unwrap();
        assert!(defect < 1e-12);
        for (v, x) in poly.vertices().iter().zip(&vals) {
            assert!((x[0] - (v.powi(3) / 3.0).re).abs() < 1e-12);
            assert!((x[1] - v.re).abs() < 1e-12);
        }
    }

    #[test]
    fn evaluator_uses_anchors_around_obstacles() {
        // Annulus-like domain: disk minus a small disk on the positive axis.
        let big = PlanarRegion::Disk(Disk::new(C::new(0.0, 0.0), 2.0).unwrap());
        let hole = PlanarRegion::Disk(Disk::new(C::new(1.0, 0.0), 0.2).unwrap());
        let domain = PlanarRegion::difference(big, hole);
        let mut ev = FieldEvaluator::new(z_squared_tape(), QuadratureOptions::default(), domain);
        let z = C::new(1.5, 0.0);
        assert!(matches!(ev.at(z), Err(LemmaError::Unreachable { .. })));
        let a = C::new(1.0, 0.5);
        ev.add_anchors(&[a], &[Vector3::new((a.powi(3) / 3.0).re, a.re, 0.0)]);
        let x = ev.at(z).unwrap();
        assert!((x[0] - 1.5f64.powi(3) / 3.0).abs() < 1e-12);
    }

    #[test]
    fn radial_frame_is_orthonormal() {
        let f = radial_frame(&Vector3::new(1.0, 2.0, 0.5), &Vector3::z()).unwrap();
        assert!(f.orthonormality_defect() < 1e-14);
        assert!(radial_frame(&Vector3::new(0.0, 0.0, 1.0), &Vector3::z()).is_none());
        assert!(radial_frame(&Vector3::zeros(), &Vector3::z()).is_none());
    }

    #[test]
    fn frame_ab_of_plane() {
        // φ = (c, −ic, 0) in the world frame: f = φ1 − iφ2 = 0 and
        // −f·g² = φ1 + iφ2 = 2c (g has a pole everywhere).
        let phi = [C::new(3.0, 0.0), C::new(0.0, -3.0), C::new(0.0, 0.0)];
        let (a, b) = frame_ab(&phi, &Frame::world());
        assert!(a.norm() < 1e-15);
        assert!((b - C::new(6.0, 0.0)).norm() < 1e-15);
    }
}
