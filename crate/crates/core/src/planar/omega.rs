use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::geodesic::PathOracle;
use super::polygon::{PolygonCurve, SimplePolygon};
use super::region::{AnnularSector, Disk, PlanarRegion};
use super::{Membership, PlanarError};
use crate::complex::{Polyline, C};

/// Default angular step for polygonalized arcs.
pub const ARC_STEP: f64 = 2.0 * PI / 64.0;

/// Corridor from a carve circle down to the tip point `a` next to a vertex.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NeckSpec {
    /// Tip point; the tip arc passes through it.
    pub a: C,
    /// Half-opening angle of the corridor around the direction of `a − p`.
    pub beta: f64,
}

/// Removal of a disk of radius `radius` around polygon vertex `p`, with an
/// optional corridor reaching back towards `p`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VertexCarve {
    pub p: C,
    pub radius: f64,
    pub neck: Option<NeckSpec>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CarveSpec {
    pub arc_step: f64,
}

impl Default for CarveSpec {
    fn default() -> Self {
        CarveSpec { arc_step: ARC_STEP }
    }
}

/// Output of [`carved_polygon`]: the polygon and, per carved vertex with a
/// neck, the inclusive vertex-index range of its tip arc.
#[derive(Debug, Clone, PartialEq)]
pub struct CarvedPolygon {
    pub polygon: SimplePolygon,
    pub tips: Vec<Option<(usize, usize)>>,
}

fn unit(z: C) -> C {
    z / z.norm()
}

fn arc_points(center: C, radius: f64, from: f64, to: f64, step: f64, out: &mut Vec<C>, include_end: bool) {
    let m = ((from - to).abs() / step).ceil().max(1.0) as usize;
    let last = if include_end { m } else { m - 1 };
    for k in 0..=last {
        let ang = from + (to - from) * k as f64 / m as f64;
        out.push(center + C::from_polar(radius, ang));
    }
}

/// Interior angle bisector and opening at vertex `i` of a counterclockwise
/// vertex list: returns (angle of the edge towards the previous vertex,
/// clockwise opening to the next edge).
fn vertex_angles(v: &[C], i: usize) -> (f64, f64) {
    let n = v.len();
    let u_prev = unit(v[(i + n - 1) % n] - v[i]);
    let u_next = unit(v[(i + 1) % n] - v[i]);
    let a_prev = u_prev.arg();
    let opening = (a_prev - u_next.arg()).rem_euclid(2.0 * PI);
    (a_prev, opening)
}

/// Unit inward bisector at each vertex of a counterclockwise polygon.
pub fn inward_bisectors(v: &[C]) -> Vec<C> {
    (0..v.len())
        .map(|i| {
            let (a_prev, opening) = vertex_angles(v, i);
            C::from_polar(1.0, a_prev - 0.5 * opening)
        })
        .collect()
}

/// Replace every vertex of `vertices` by a clockwise arc of its carve circle,
/// inserting neck corridors where requested. The result is one simple
/// polygon; `carves` must be empty or match `vertices` one to one.
pub fn carved_polygon(vertices: &[C], carves: &[VertexCarve], spec: CarveSpec) -> Result<CarvedPolygon, PlanarError> {
    if carves.is_empty() {
        return Ok(CarvedPolygon {
            polygon: SimplePolygon::new(vertices.to_vec())?,
            tips: Vec::new(),
        });
    }
    if carves.len() != vertices.len() {
        return Err(PlanarError::InvalidRegion(format!(
            "{} carves for {} vertices",
            carves.len(),
            vertices.len()
        )));
    }
    let n = vertices.len();
    let mut out = Vec::new();
    let mut tips = Vec::with_capacity(n);
    for i in 0..n {
        let c = &carves[i];
        let p = vertices[i];
        let (a_prev, opening) = vertex_angles(vertices, i);
        let a_next = a_prev - opening;
        let (e_prev, e_next) = (
            (vertices[(i + n - 1) % n] - p).norm(),
            (vertices[(i + 1) % n] - p).norm(),
        );
        if 2.0 * c.radius >= e_prev.min(e_next) {
            return Err(PlanarError::InvalidRegion(format!(
                "carve radius {} too large at vertex {i}",
                c.radius
            )));
        }
        match c.neck {
            None => {
                arc_points(p, c.radius, a_prev, a_next, spec.arc_step, &mut out, true);
                tips.push(None);
            }
            Some(neck) => {
                let rel = neck.a - p;
                let t = rel.norm();
                // Corridor direction on the branch between a_next and a_prev.
                let psi = a_next + (rel.arg() - a_next).rem_euclid(2.0 * PI);
                let hi = psi + neck.beta;
                let lo = psi - neck.beta;
                if !(neck.beta > 0.0 && lo > a_next && hi < a_prev && t > 0.0 && t < c.radius) {
                    return Err(PlanarError::InvalidRegion(format!(
                        "neck at vertex {i} does not fit its corner"
                    )));
                }
                arc_points(p, c.radius, a_prev, hi, spec.arc_step, &mut out, true);
                let start = out.len();
                let m = ((neck.beta / spec.arc_step).ceil() as usize).max(1);
                for k in 0..=2 * m {
                    if k == m {
                        out.push(neck.a);
                    } else {
                        let ang = hi - (hi - lo) * k as f64 / (2 * m) as f64;
                        out.push(p + C::from_polar(t, ang));
                    }
                }
                tips.push(Some((start, out.len() - 1)));
                arc_points(p, c.radius, lo, a_next, spec.arc_step, &mut out, true);
            }
        }
    }
    Ok(CarvedPolygon {
        polygon: SimplePolygon::new(out)?,
        tips,
    })
}

/// Inputs for the composite domain.
#[derive(Debug, Clone)]
pub struct OmegaInput {
    /// Polygon whose vertices are the points p_i.
    pub phat: PolygonCurve,
    /// Polygon whose closed interior must stay inside the domain.
    pub inner: PolygonCurve,
    pub delta: f64,
    /// Radius of the removed disk around each p_i (larger than `delta`).
    pub carve_radius: f64,
    /// One neck per vertex of `phat`; empty for no modification.
    pub necks: Vec<NeckSpec>,
    /// Zeros w_i of the pole factors, which must stay outside the closure.
    pub zeros: Vec<C>,
    /// Length budget for the geodesic check; `None` skips it.
    pub length_bound: Option<f64>,
    /// Boundary sample spacing used for the geodesic check.
    pub geodesic_spacing: f64,
    pub spec: CarveSpec,
}

/// Outcome of one domain check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OmegaCheck {
    pub label: String,
    pub passed: bool,
    pub margin: f64,
    pub samples: usize,
}

/// The composite domain with its named pieces.
#[derive(Debug, Clone)]
pub struct OmegaBuild {
    pub region: PlanarRegion,
    pub polygon: SimplePolygon,
    /// Tip arcs C_i, each passing through a_i.
    pub tip_arcs: Vec<Polyline>,
    /// Closed annular sectors G_i.
    pub sectors: Vec<AnnularSector>,
    /// Boundary chains Q_i from the end of C_i to the start of C_{i+1}.
    pub chains: Vec<Polyline>,
    pub checks: Vec<OmegaCheck>,
    pub sup_geodesic: Option<f64>,
}

/// Smallest neighbourhood of `p` and `w` used as the excluded set D_i: a disk
/// around their midpoint with the sector (slightly enlarged) removed.
pub fn excluded_set(p: C, w: C, sector: &AnnularSector) -> Result<PlanarRegion, PlanarError> {
    let k = (w - p).norm();
    let disk = Disk::new(0.5 * (p + w), 0.6 * k)?;
    let mid = sector.angle_start + 0.5 * sector.angle_span;
    let half = 0.5 * sector.angle_span;
    let grown = AnnularSector::symmetric(
        sector.center,
        0.5 * sector.rho_min,
        sector.rho_max * 1.5,
        mid,
        half + 0.05 * (0.5 * PI - half),
    )?;
    Ok(PlanarRegion::difference(PlanarRegion::Disk(disk), PlanarRegion::Sector(grown)))
}

/// Closed sector with tolerances for rounding of constructed vertices.
fn tolerant(sector: &AnnularSector) -> AnnularSector {
    let abs = 8.0 * f64::EPSILON * sector.center.norm().max(sector.rho_max);
    let ang = (abs / sector.rho_min.max(f64::MIN_POSITIVE)).max(1e-12);
    AnnularSector {
        center: sector.center,
        rho_min: (sector.rho_min - abs).max(0.0),
        rho_max: sector.rho_max + abs,
        angle_start: sector.angle_start - ang,
        angle_span: sector.angle_span + 2.0 * ang,
    }
}

fn check(label: &str, passed: bool, margin: f64, samples: usize) -> OmegaCheck {
    OmegaCheck {
        label: label.to_string(),
        passed,
        margin,
        samples,
    }
}

/// Build the composite domain: the interior of `phat` with a disk of radius
/// `carve_radius` removed around each vertex, joined back to a thin corridor
/// that reaches the tip arc through a_i. Checks 5.a through 5.e are run and
/// the first failure is returned as `OmegaInvalid`.
pub fn build_omega(input: &OmegaInput) -> Result<OmegaBuild, PlanarError> {
    let verts = input.phat.vertices();
    let n = if input.necks.is_empty() { 0 } else { verts.len() };
    if n > 0 && (input.necks.len() != verts.len() || input.zeros.len() != verts.len()) {
        return Err(PlanarError::InvalidRegion("one neck and one zero per vertex required".into()));
    }
    if n > 0 && !(input.carve_radius > input.delta) {
        return Err(PlanarError::InvalidRegion("carve radius must exceed delta".into()));
    }
    let carves: Vec<VertexCarve> = (0..n)
        .map(|i| VertexCarve {
            p: verts[i],
            radius: input.carve_radius,
            neck: Some(input.necks[i]),
        })
        .collect();
    let carved = carved_polygon(verts, &carves, input.spec).map_err(|e| PlanarError::omega("5.a", e.to_string()))?;
    let poly = carved.polygon;
    let pv = poly.vertices();
    let region = PlanarRegion::Polygon(poly.clone());

    let mut tip_arcs = Vec::with_capacity(n);
    let mut sectors = Vec::with_capacity(n);
    let mut chains = Vec::with_capacity(n);
    for i in 0..n {
        let (s, e) = carved.tips[i].expect("every vertex has a neck");
        tip_arcs.push(Polyline::new(pv[s..=e].to_vec()).map_err(|e| PlanarError::omega("5.a", e.to_string()))?);
        let p = verts[i];
        let neck = input.necks[i];
        let t = (neck.a - p).norm();
        let m = ((neck.beta / input.spec.arc_step).ceil()).max(1.0);
        let sag = (neck.beta / (2.0 * m)).cos();
        sectors.push(AnnularSector::symmetric(p, t * sag, input.delta, (neck.a - p).arg(), neck.beta)?);
    }
    for i in 0..n {
        let (_, end) = carved.tips[i].unwrap();
        let (start_next, _) = carved.tips[(i + 1) % n].unwrap();
        let mut chain = Vec::new();
        let mut k = end;
        loop {
            chain.push(pv[k]);
            if k == start_next {
                break;
            }
            k = (k + 1) % pv.len();
        }
        chains.push(Polyline::new(chain).map_err(|e| PlanarError::omega("6.a", e.to_string()))?);
    }

    let mut checks = Vec::new();
    // 5.a: one simple polygon bounds the domain.
    checks.push(check("5.a", true, 0.0, pv.len()));

    // 5.b: radial segments q_i a_i in the closure, closed Int P inside.
    let mut ok_b = input.phat.strictly_contains_polygon(input.inner.as_simple())
        && poly.strictly_contains_polygon(input.inner.as_simple());
    let mut margin_b = input
        .inner
        .vertices()
        .iter()
        .map(|&z| poly.distance_to_boundary(z))
        .fold(f64::INFINITY, f64::min);
    for i in 0..n {
        let p = verts[i];
        let a = input.necks[i].a;
        let q = p + (a - p) / (a - p).norm() * input.delta;
        if !region.contains_segment(q, a) {
            ok_b = false;
            margin_b = margin_b.min(-1.0);
        }
    }
    checks.push(check("5.b", ok_b, margin_b, input.inner.len() + n));
    if !ok_b {
        return Err(PlanarError::omega("5.b", "segment q_i a_i or closed inner polygon not contained"));
    }

    // 5.c: no pole and no zero of a pole factor in the closure.
    let mut margin_c = f64::INFINITY;
    for i in 0..n {
        for (what, z) in [("p", verts[i]), ("w", input.zeros[i])] {
            let m = region.contains(z);
            let d = poly.distance_to_boundary(z);
            if m != Membership::Outside {
                return Err(PlanarError::omega("5.c", format!("{what}_{} = {z} lies in the closed domain", i + 1)));
            }
            margin_c = margin_c.min(d);
        }
    }
    checks.push(check("5.c", true, margin_c, 2 * n));

    // 5.e: closure ∩ closed D(p_i, δ) ⊂ G_i, on boundary edges and a polar grid.
    let mut samples_e = 0;
    for i in 0..n {
        let p = verts[i];
        let disk = Disk {
            center: p,
            radius: input.delta,
        };
        let g = tolerant(&sectors[i]);
        for (a, b) in poly.edges() {
            let len = (b - a).norm();
            let inside = disk.segment_intervals(a, b);
            if inside.is_empty() {
                continue;
            }
            samples_e += 1;
            let outside_g = inside.difference(&g.segment_intervals(a, b), 0.0, 1.0);
            if outside_g.total_length() * len > 16.0 * f64::EPSILON * p.norm().max(1.0) {
                return Err(PlanarError::omega(
                    "5.e",
                    format!("boundary edge near p_{} leaves the sector G_{}", i + 1, i + 1),
                ));
            }
        }
        for rk in 1..=16 {
            for ak in 0..64 {
                let z = p + C::from_polar(input.delta * rk as f64 / 16.0, 2.0 * PI * ak as f64 / 64.0);
                samples_e += 1;
                if region.contains(z) == Membership::Inside && g.classify(z) == Membership::Outside {
                    return Err(PlanarError::omega("5.e", format!("{z} in the domain but not in G_{}", i + 1)));
                }
            }
        }
    }
    checks.push(check("5.e", true, 0.0, samples_e));

    // 5.d: sampled sup of geodesic distance from 0 below the length budget.
    let mut sup_geodesic = None;
    if let Some(l) = input.length_bound {
        let oracle = PathOracle::new(&region)?;
        let samples = poly.boundary_samples(input.geodesic_spacing);
        let mut sup = 0.0f64;
        for &z in &samples {
            sup = sup.max(oracle.path_to(z)?.1);
        }
        sup_geodesic = Some(sup);
        let passed = sup < l;
        checks.push(check("5.d", passed, l - sup, samples.len()));
        if !passed {
            return Err(PlanarError::omega("5.d", format!("sup geodesic {sup} ≥ l = {l}")));
        }
    }

    Ok(OmegaBuild {
        region,
        polygon: poly,
        tip_arcs,
        sectors,
        chains,
        checks,
        sup_geodesic,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::planar::is_simply_connected;

    fn octagon() -> PolygonCurve {
        PolygonCurve::regular(1.0, 8, 0.0).unwrap()
    }

    fn fixture(tip_scale: f64, beta: f64) -> OmegaInput {
        let phat = octagon();
        let verts = phat.vertices().to_vec();
        let bis = inward_bisectors(&verts);
        let delta = 0.05;
        let necks = verts
            .iter()
            .zip(&bis)
            .map(|(&p, &u)| NeckSpec {
                a: p + u * (delta * tip_scale),
                beta,
            })
            .collect();
        // Zero of h placed perpendicular to the corridor at distance k.
        let zeros = verts
            .iter()
            .zip(&bis)
            .map(|(&p, &u)| p + u * C::new(0.0, 1.0) * 0.01)
            .collect();
        OmegaInput {
            phat,
            inner: PolygonCurve::regular(0.5, 8, 0.0).unwrap(),
            delta,
            carve_radius: 1.5 * delta,
            necks,
            zeros,
            length_bound: None,
            geodesic_spacing: 0.05,
            spec: CarveSpec::default(),
        }
    }

    #[test]
    fn no_modification_gives_phat() {
        let mut input = fixture(0.3, 0.2);
        input.necks.clear();
        input.zeros.clear();
        let out = build_omega(&input).unwrap();
        assert_eq!(out.polygon.vertices(), input.phat.vertices());
        assert!(out.chains.is_empty());
    }

    #[test]
    fn carved_domain_excludes_poles_and_passes_checks() {
        let mut input = fixture(0.3, 0.2);
        input.length_bound = Some(3.0);
        let out = build_omega(&input).unwrap();
        for &p in input.phat.vertices() {
            assert_eq!(out.region.contains(p), Membership::Outside);
        }
        for (i, arc) in out.tip_arcs.iter().enumerate() {
            assert!(arc.vertices().contains(&input.necks[i].a));
        }
        assert_eq!(out.chains.len(), 8);
        assert!(is_simply_connected(&out.region, 64).0);
        let sup = out.sup_geodesic.unwrap();
        assert!((0.9..1.2).contains(&sup), "sup {sup}");
        assert!(out.checks.iter().all(|c| c.passed));
    }

    #[test]
    fn neck_through_zero_is_rejected() {
        let mut input = fixture(0.3, 0.2);
        let p = input.phat.vertices()[0];
        // Put w_1 on the radial segment inside the corridor.
        input.zeros[0] = p + (input.necks[0].a - p) * 2.0;
        match build_omega(&input) {
            Err(PlanarError::OmegaInvalid { condition, .. }) => assert_eq!(condition, "5.c"),
            other => panic!("expected 5.c failure, got {other:?}"),
        }
    }

    #[test]
    fn excluded_set_contains_pole_and_zero_and_avoids_sector() {
        let input = fixture(0.3, 0.2);
        let out = build_omega(&input).unwrap();
        let p = input.phat.vertices()[0];
        let w = input.zeros[0];
        let d = excluded_set(p, w, &out.sectors[0]).unwrap();
        assert_eq!(d.contains(p), Membership::Inside);
        assert_eq!(d.contains(w), Membership::Inside);
        for z in out.tip_arcs[0].sample(1e-3) {
            assert_eq!(d.contains(z), Membership::Outside);
        }
    }

    #[test]
    fn chains_join_consecutive_tips() {
        let out = build_omega(&fixture(0.3, 0.2)).unwrap();
        for i in 0..8 {
            assert_eq!(out.chains[i].start(), out.tip_arcs[i].end());
            assert_eq!(out.chains[i].end(), out.tip_arcs[(i + 1) % 8].start());
        }
    }

    #[test]
    fn collinear_vertices_are_carved() {
        let square = PolygonCurve::new(vec![
            C::new(-1.0, -1.0),
            C::new(0.0, -1.0),
            C::new(1.0, -1.0),
            C::new(1.0, 1.0),
            C::new(-1.0, 1.0),
        ])
        .unwrap();
        let bis = inward_bisectors(square.vertices());
        assert!((bis[1] - C::new(0.0, 1.0)).norm() < 1e-15);
        let carves: Vec<VertexCarve> = square
            .vertices()
            .iter()
            .zip(&bis)
            .map(|(&p, &u)| VertexCarve {
                p,
                radius: 0.1,
                neck: Some(NeckSpec { a: p + u * 0.01, beta: 0.3 }),
            })
            .collect();
        let c = carved_polygon(square.vertices(), &carves, CarveSpec::default()).unwrap();
        assert_eq!(c.tips.len(), 5);
    }
}
