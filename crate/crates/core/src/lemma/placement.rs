use std::collections::HashMap;
use std::f64::consts::PI;

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use super::constants::Constants;
use super::eval::{frame_ab, norm3, radial_frame, ring};
use super::ledger::{Diagnostic, Worst};
use super::{LemmaError, LemmaProblem};
use crate::complex::{point_segment_distance, C, I};
use crate::planar::{inward_bisectors, Disk, Membership, PlanarRegion, PolygonCurve};
use crate::weierstrass::{Frame, Immersion};

/// Points `p_i` with their balls, frames, unit targets and radius δ.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Placement {
    pub eps0: f64,
    /// Inset curve carrying the points.
    pub pprime: PolygonCurve,
    /// Larger copy of P on whose closure the seed data are controlled.
    pub w: PolygonCurve,
    pub phat: PolygonCurve,
    pub points: Vec<C>,
    /// Inward unit bisector of P̂ at each point: the radial segments point
    /// this way.
    pub dirs: Vec<C>,
    pub thetas: Vec<C>,
    pub frames: Vec<Frame>,
    pub x_at: Vec<Vector3<f64>>,
    /// `f_{(X,S(p_i))}(p_i)`.
    pub f0: Vec<C>,
    pub balls: Vec<Disk>,
    pub delta: f64,
    pub l: f64,
    /// Upper bound for the geodesic distance from 0 within the closure of Ω.
    pub geodesic_bound: f64,
    pub lipschitz: f64,
    pub reference_axis: Vector3<f64>,
    pub diagnostics: Vec<Diagnostic>,
}

impl Placement {
    pub fn n(&self) -> usize {
        self.points.len()
    }

    pub fn q(&self, i: usize) -> C {
        self.points[i] + self.dirs[i] * self.delta
    }
}

/// Largest σ ∈ [1, 4] with σP inside the closure of O, by bisection.
pub fn max_inset_scale(p: &PolygonCurve, o: &PlanarRegion) -> f64 {
    let fits = |sigma: f64| {
        let v: Vec<C> = p.vertices().iter().map(|z| z * sigma).collect();
        (0..v.len()).all(|k| o.contains_segment(v[k], v[(k + 1) % v.len()]))
    };
    if !fits(1.0) {
        return 1.0;
    }
    let (mut lo, mut hi) = (1.0f64, 4.0f64);
    if fits(hi) {
        return hi;
    }
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if fits(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    lo
}

/// `n` points equally spaced in arc length along the closed curve, starting
/// `offset` (a fraction of one spacing) after vertex 0.
fn equispaced(curve: &PolygonCurve, n: usize, offset: f64) -> Vec<C> {
    let v = curve.vertices();
    let per = curve.perimeter();
    let h = per / n as f64;
    let mut out = Vec::with_capacity(n);
    let mut edge = 0usize;
    let mut edge_start = 0.0f64;
    for k in 0..n {
        let s = (k as f64 + offset) * h;
        loop {
            let len = (v[(edge + 1) % v.len()] - v[edge]).norm();
            if s <= edge_start + len || edge + 1 == v.len() {
                let t = ((s - edge_start) / len).clamp(0.0, 1.0);
                out.push(v[edge] + (v[(edge + 1) % v.len()] - v[edge]) * t);
                break;
            }
            edge_start += len;
            edge += 1;
        }
    }
    out
}

/// Uniform grid of buckets for near-neighbour queries among segments.
struct SegmentGrid {
    cell: f64,
    buckets: HashMap<(i64, i64), Vec<usize>>,
}

impl SegmentGrid {
    fn new(verts: &[C], cell: f64) -> Self {
        let mut buckets: HashMap<(i64, i64), Vec<usize>> = HashMap::new();
        let n = verts.len();
        for e in 0..n {
            let (a, b) = (verts[e], verts[(e + 1) % n]);
            let (x0, x1) = (a.re.min(b.re), a.re.max(b.re));
            let (y0, y1) = (a.im.min(b.im), a.im.max(b.im));
            for gx in (x0 / cell).floor() as i64..=(x1 / cell).floor() as i64 {
                for gy in (y0 / cell).floor() as i64..=(y1 / cell).floor() as i64 {
                    buckets.entry((gx, gy)).or_default().push(e);
                }
            }
        }
        SegmentGrid { cell, buckets }
    }

    /// Edges with a bucket within `radius` of `z` (a superset of the edges
    /// at distance ≤ radius when radius ≤ cell).
    fn near(&self, z: C, radius: f64) -> Vec<usize> {
        let mut out = Vec::new();
        let (gx0, gx1) = (((z.re - radius) / self.cell).floor() as i64, ((z.re + radius) / self.cell).floor() as i64);
        let (gy0, gy1) = (((z.im - radius) / self.cell).floor() as i64, ((z.im + radius) / self.cell).floor() as i64);
        for gx in gx0..=gx1 {
            for gy in gy0..=gy1 {
                if let Some(v) = self.buckets.get(&(gx, gy)) {
                    out.extend(v);
                }
            }
        }
        out.sort_unstable();
        out.dedup();
        out
    }
}

/// Geometric part of 3.a–3.c for disks of radius δ at the vertices of P̂:
/// each closed disk meets ∂P̂ only on its two incident edges, stays inside
/// O and away from P with room for the carve of radius 1.5δ, the disks are
/// pairwise disjoint, and δ ≤ |Δ_i|/8 keeps both endpoints' disks inside
/// B^i. Returns one (label, slack) per condition.
fn geometry_slacks(pl: &PolygonCurve, p: &PolygonCurve, o: &PlanarRegion, balls: &[Disk], delta: f64) -> Vec<(&'static str, f64)> {
    let v = pl.vertices();
    let n = v.len();
    let min_edge = (0..n).map(|i| (v[(i + 1) % n] - v[i]).norm()).fold(f64::INFINITY, f64::min);
    let grid = SegmentGrid::new(v, (4.0 * delta).max(min_edge));
    let mut a = f64::INFINITY;
    let mut c = f64::INFINITY;
    for i in 0..n {
        for e in grid.near(v[i], 2.0 * delta) {
            if e == i || e == (i + n - 1) % n {
                continue;
            }
            let d = point_segment_distance(v[i], v[e], v[(e + 1) % n]);
            a = a.min(d - delta);
        }
        // Disjointness: other vertices closer than 2δ are endpoints of
        // edges in the same buckets.
        for e in grid.near(v[i], 2.0 * delta) {
            for j in [e, (e + 1) % n] {
                if j != i {
                    c = c.min((v[j] - v[i]).norm() - 2.0 * delta);
                }
            }
        }
        c = c.min((v[(i + 1) % n] - v[i]).norm() - 2.0 * delta);
    }
    let mut inside = f64::INFINITY;
    let mut clearance = f64::INFINITY;
    for &z in v {
        let d = Disk { center: z, radius: 1.5 * delta };
        let out_o = d.ring(32, true, 0.0).iter().all(|&w| o.contains(w) != Membership::Outside);
        inside = inside.min(if out_o { 1.0 } else { -1.0 });
        clearance = clearance.min(p.distance_to_boundary(z) - 1.5 * delta);
    }
    let b = balls
        .iter()
        .enumerate()
        .map(|(i, ball)| {
            let e = (v[(i + 1) % n] - v[i]).norm();
            (e / 8.0 - delta).min(ball.radius - 0.5 * e - delta)
        })
        .fold(f64::INFINITY, f64::min);
    vec![("3.a", a.min(inside).min(clearance)), ("3.b", b), ("3.c", c)]
}

/// Analytic slack of 3.d–3.f at p_i: `1 − √δ·max` of |f|, |f·g²|/|Im(θū)|
/// and ‖φ‖ over a ring of radius δ (maximum modulus).
fn analytic_slacks(
    tape: &crate::complex::Tape,
    frame: &Frame,
    p: C,
    im_theta_u: f64,
    delta: f64,
    ring_n: usize,
) -> Result<[f64; 3], LemmaError> {
    let mut regs = tape.registers();
    let mut out = [C::new(0.0, 0.0); 3];
    let mut m = [0.0f64; 3];
    for z in ring(p, delta, ring_n) {
        tape.eval_into(z, &mut regs, &mut out)?;
        let (a, b) = frame_ab(&out, frame);
        m[0] = m[0].max(a.norm());
        m[1] = m[1].max(b.norm());
        m[2] = m[2].max(norm3(&out));
    }
    let sd = delta.sqrt();
    Ok([1.0 - sd * m[0], 1.0 - sd * m[1] / im_theta_u.abs(), 1.0 - sd * m[2]])
}

/// World axis least aligned with every `e3`, used for all frames S(p).
fn reference_axis(xs: &[Vector3<f64>]) -> Vector3<f64> {
    let mut best = (f64::INFINITY, 0usize);
    for k in 0..3 {
        let worst = xs.iter().map(|x| (x[k] / x.norm()).abs()).fold(0.0, f64::max);
        if worst < best.0 {
            best = (worst, k);
        }
    }
    Vector3::ith(best.1, 1.0)
}

/// Choose the points p_i, frames, unit targets θ_i and δ.
pub fn place_points(problem: &LemmaProblem, constants: &Constants) -> Result<Placement, LemmaError> {
    let eps0 = constants.eps0;
    let opts = &problem.options;
    let sigma_max = max_inset_scale(&problem.p, &problem.o);
    if !(sigma_max > 1.0) {
        return Err(LemmaError::InvalidConfig("P is not strictly inside O".into()));
    }
    let pprime = problem.p.scaled(1.0 + (sigma_max - 1.0) / 3.0);
    let w = problem.p.scaled(1.0 + 2.0 * (sigma_max - 1.0) / 3.0);
    let imm = Immersion::new(&problem.x, problem.quadrature());
    let tape = imm.tape().clone();

    // Lipschitz bound of X on W̄ from the maximum of ‖φ‖ on ∂W.
    let mut regs = tape.registers();
    let mut out = [C::new(0.0, 0.0); 3];
    let mut lip = 0.0f64;
    for z in w.boundary_samples(w.perimeter() / opts.sampling.boundary as f64) {
        tape.eval_into(z, &mut regs, &mut out)?;
        lip = lip.max(norm3(&out));
    }
    let lip = 1.05 * lip;

    let mut diagnostics = Vec::new();
    let per = pprime.perimeter();
    let mut n = ((per * 1.65 * lip / eps0).ceil() as usize).max(4);
    let (points, frames, x_at, f0, dirs, thetas, phat, axis, balls) = loop {
        if n > opts.budgets.max_points {
            return Err(LemmaError::PlacementFailed {
                condition: "point budget".into(),
                detail: format!("oscillation bound needs n = {n} points, budget is {}", opts.budgets.max_points),
            });
        }
        let mut points = equispaced(&pprime, n, 0.0);
        let mut x_at = Vec::with_capacity(n);
        for &p in &points {
            x_at.push(imm.at(p)?);
        }
        let axis = reference_axis(&x_at);
        let mut frames = Vec::with_capacity(n);
        let mut f0 = Vec::with_capacity(n);
        for i in 0..n {
            // Nudge along P′ while f vanishes at p_i.
            let mut tries = 0;
            loop {
                let frame = radial_frame(&x_at[i], &axis).ok_or_else(|| LemmaError::PlacementFailed {
                    condition: "frame field".into(),
                    detail: format!("‖X(p_{})‖ vanishes or is aligned with the reference axis", i + 1),
                })?;
                tape.eval_into(points[i], &mut regs, &mut out)?;
                let (a, _) = frame_ab(&out, &frame);
                if a.norm() > 1e-12 * norm3(&out).max(f64::MIN_POSITIVE) {
                    frames.push(frame);
                    f0.push(a);
                    break;
                }
                tries += 1;
                if tries > 4 {
                    return Err(LemmaError::PlacementFailed {
                        condition: "f0 nonzero".into(),
                        detail: format!("f vanishes at p_{} after nudging", i + 1),
                    });
                }
                let shifted = equispaced(&pprime, n, 0.1 * tries as f64);
                points[i] = shifted[i];
                x_at[i] = imm.at(points[i])?;
            }
        }
        let phat = match PolygonCurve::new(points.clone()) {
            Ok(p) => p,
            Err(_) => {
                n *= 2;
                continue;
            }
        };
        if !phat.strictly_contains_polygon(problem.p.as_simple()) {
            n *= 2;
            continue;
        }
        // Re-read the points in the orientation P̂ uses.
        let verts = phat.vertices().to_vec();
        if verts != points {
            points.reverse();
            x_at.reverse();
            frames.reverse();
            f0.reverse();
        }
        let dirs = inward_bisectors(&points);
        let thetas: Vec<C> = dirs.iter().map(|u| I * u).collect();

        let mut osc = Worst::default();
        let mut frame_close = Worst::default();
        let mut adjacency = Worst::default();
        let mut balls = Vec::with_capacity(n);
        let mut in_o = true;
        for i in 0..n {
            let j = (i + 1) % n;
            let mid = 0.5 * (points[i] + points[j]);
            let ball = Disk {
                center: mid,
                radius: 0.75 * (points[j] - points[i]).norm(),
            };
            let samples = ring(mid, ball.radius, 32);
            let mut m = 0.0f64;
            for &z in &samples {
                if problem.o.contains(z) == Membership::Outside {
                    in_o = false;
                }
                m = m.max(super::eval::segment_integral(&tape, mid, z, &problem.quadrature())?.norm());
            }
            let bound = 2.0 * (m + lip * PI * ball.radius / 32.0);
            osc.push(eps0 - bound, mid);
            frame_close.push(eps0 - frames[i].distance(&frames[j]), points[i]);
            let ti = (f0[i] * thetas[i]).conj() / f0[i].norm();
            let tj = (f0[j] * thetas[j]).conj() / f0[j].norm();
            adjacency.push(eps0 - (ti - tj).norm(), points[i]);
            balls.push(ball);
        }
        if osc.passed() && frame_close.passed() && adjacency.passed() && in_o {
            diagnostics.push(Diagnostic::new("oscillation", None, &osc));
            diagnostics.push(Diagnostic::new("frame closeness", None, &frame_close));
            diagnostics.push(Diagnostic::new("unit target adjacency", None, &adjacency));
            break (points, frames, x_at, f0, dirs, thetas, phat, axis, balls);
        }
        n *= 2;
    };
    diagnostics.push(Diagnostic::flag("f0 nonzero", None, true, f0.iter().map(|c| c.norm()).fold(f64::INFINITY, f64::min), n));
    let im_min = thetas.iter().zip(&dirs).map(|(t, u)| (t * u.conj()).im.abs()).fold(f64::INFINITY, f64::min);
    diagnostics.push(Diagnostic::flag("Im(θū) bound", None, im_min >= 0.1, im_min - 0.1, n));

    // δ by halving from ε0²/2.
    let mut delta = 0.5 * eps0 * eps0;
    let mut passed = false;
    let mut last = String::new();
    for _ in 0..=opts.budgets.delta_halvings {
        let mut slacks: Vec<(&str, f64)> = geometry_slacks(&phat, &problem.p, &problem.o, &balls, delta);
        if slacks.iter().all(|(_, m)| *m > 0.0) {
            let mut an = [f64::INFINITY; 3];
            for i in 0..n {
                let im = (thetas[i] * dirs[i].conj()).im;
                let s = analytic_slacks(&tape, &frames[i], points[i], im, delta, opts.sampling.ring)?;
                for k in 0..3 {
                    an[k] = an[k].min(s[k]);
                }
            }
            slacks.extend([("3.d", an[0]), ("3.e", an[1]), ("3.f", an[2])]);
        }
        match slacks.iter().find(|(_, m)| !(*m > 0.0)) {
            None => {
                for (label, m) in &slacks {
                    diagnostics.push(Diagnostic::flag(label, None, true, *m, n));
                }
                passed = true;
                break;
            }
            Some((label, _)) => last = label.to_string(),
        }
        delta *= 0.5;
    }
    if !passed {
        return Err(LemmaError::PlacementFailed {
            condition: last,
            detail: format!("δ halving budget of {} exhausted", opts.budgets.delta_halvings),
        });
    }

    // Length budget: every point of the closure of Ω is joined to 0 by a
    // segment plus a detour around at most three carve disks and one neck.
    let reach = points.iter().map(|p| p.norm()).fold(0.0, f64::max);
    let geodesic_bound = reach + 6.0 * PI * delta + 2.0 * delta;
    let l = geodesic_bound + 2.0 * PI * delta + delta + 1.0;

    Ok(Placement {
        eps0,
        pprime,
        w,
        phat,
        points,
        dirs,
        thetas,
        frames,
        x_at,
        f0,
        balls,
        delta,
        l,
        geodesic_bound,
        lipschitz: lip,
        reference_axis: axis,
        diagnostics,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn equispaced_points_lie_on_curve() {
        let sq = PolygonCurve::new(vec![C::new(-1.0, -1.0), C::new(1.0, -1.0), C::new(1.0, 1.0), C::new(-1.0, 1.0)]).unwrap();
        let pts = equispaced(&sq, 16, 0.0);
        assert_eq!(pts.len(), 16);
        for z in &pts {
            assert!(sq.distance_to_boundary(*z) < 1e-12);
        }
        for k in 0..16 {
            let d = (pts[(k + 1) % 16] - pts[k]).norm();
            assert!((d - 0.5).abs() < 1e-12);
        }
    }

    #[test]
    fn inset_scale_of_regular_polygon_in_disk() {
        let p = PolygonCurve::regular(1.0, 8, 0.0).unwrap();
        let o = PlanarRegion::Disk(Disk::new(C::new(0.0, 0.0), 2.0).unwrap());
        assert!((max_inset_scale(&p, &o) - 2.0).abs() < 1e-12);
    }

    #[test]
    fn grid_finds_close_edges() {
        let p = PolygonCurve::regular(1.0, 64, 0.0).unwrap();
        let g = SegmentGrid::new(p.vertices(), 0.1);
        let v = p.vertices()[5];
        let near = g.near(v, 0.05);
        assert!(near.contains(&4) && near.contains(&5));
        assert!(!near.contains(&40));
    }
}
