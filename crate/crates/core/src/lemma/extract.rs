use std::f64::consts::PI;

use nalgebra::Vector3;

use super::eval::segment_integral;
use super::{LemmaError, LemmaProblem};
use crate::complex::{Tape, C};
use crate::planar::{PlanarRegion, PolygonCurve};
use crate::weierstrass::WeierstrassField;

/// A polygon Q with the values of Y at its vertices.
#[derive(Debug, Clone)]
pub struct ExtractedQ {
    pub polygon: PolygonCurve,
    pub values: Vec<Vector3<f64>>,
    /// `true` when Q was traced in the level band.
    pub traced: bool,
}

/// Largest ρ with the segment [0, ρe^{iθ}] inside the domain, by bisection.
pub fn ray_reach(domain: &PlanarRegion, angle: f64) -> f64 {
    let dir = C::from_polar(1.0, angle);
    let far = domain
        .bbox()
        .map(|(lo, hi)| lo.norm().max(hi.norm()).max((hi - lo).norm()) * 2.0)
        .unwrap_or(1.0);
    let (mut lo, mut hi) = (0.0f64, far);
    for _ in 0..80 {
        let mid = 0.5 * (lo + hi);
        if domain.contains_segment(C::new(0.0, 0.0), dir * mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    lo
}

/// Steps along a ray before bisecting for the target crossing.
const RAY_STEPS: usize = 256;

fn crossing_on_ray(
    tape: &Tape,
    opts: &crate::complex::QuadratureOptions,
    angle: f64,
    reach: f64,
    target: f64,
) -> Result<Option<(C, Vector3<f64>)>, LemmaError> {
    let dir = C::from_polar(1.0, angle);
    let mut prev = (C::new(0.0, 0.0), Vector3::zeros());
    for k in 1..=RAY_STEPS {
        let z = dir * (reach * k as f64 / RAY_STEPS as f64);
        let v = prev.1 + segment_integral(tape, prev.0, z, opts)?;
        if v.norm() >= target {
            let (mut a, mut b) = (prev.0, z);
            let mut best = (z, v);
            for _ in 0..60 {
                let mid = 0.5 * (a + b);
                let vm = prev.1 + segment_integral(tape, prev.0, mid, opts)?;
                if vm.norm() >= target {
                    b = mid;
                    best = (mid, vm);
                } else {
                    a = mid;
                }
            }
            return Ok(Some(best));
        }
        prev = (z, v);
    }
    Ok(None)
}

/// Trace the level set ‖Y‖ = target along rays from 0 and join the hits.
///
/// On each of the configured rays the first sampled crossing of the target
/// is refined by bisection, so every vertex lies in the band
/// `(target − b2/2, target + b2/2)` up to the bisection width.
pub fn extract_polygon_q(
    problem: &LemmaProblem,
    y: &WeierstrassField,
    domain: &PlanarRegion,
    target: f64,
    b2: f64,
) -> Result<ExtractedQ, LemmaError> {
    let rays = problem.options.sampling.rays.max(3);
    let opts = problem.quadrature();
    let tape = y.tape();
    let mut pts = Vec::with_capacity(rays);
    let mut values = Vec::with_capacity(rays);
    for j in 0..rays {
        let angle = 2.0 * PI * j as f64 / rays as f64;
        let reach = ray_reach(domain, angle);
        match crossing_on_ray(&tape, &opts, angle, reach, target)? {
            Some((z, v)) => {
                if (v.norm() - target).abs() >= 0.5 * b2 {
                    return Err(LemmaError::NoLevelBand {
                        angle,
                        detail: format!("bisection ended at ‖Y‖ = {} outside the band", v.norm()),
                    });
                }
                pts.push(z);
                values.push(v);
            }
            None => {
                return Err(LemmaError::NoLevelBand {
                    angle,
                    detail: format!("ray leaves the domain at ρ = {reach} below the target {target}"),
                })
            }
        }
    }
    let polygon = PolygonCurve::new(pts)?;
    Ok(ExtractedQ {
        polygon,
        values,
        traced: true,
    })
}

/// Q just inside the reach of every ray, used when no level band exists so
/// that (c) can still be measured.
pub fn fallback_polygon(problem: &LemmaProblem, y: &WeierstrassField, domain: &PlanarRegion) -> Result<ExtractedQ, LemmaError> {
    let rays = problem.options.sampling.rays.max(3);
    let opts = problem.quadrature();
    let tape = y.tape();
    let mut pts = Vec::with_capacity(rays);
    let mut values = Vec::with_capacity(rays);
    for j in 0..rays {
        let angle = 2.0 * PI * j as f64 / rays as f64;
        let z = C::from_polar(0.999 * ray_reach(domain, angle), angle);
        values.push(segment_integral(&tape, C::new(0.0, 0.0), z, &opts)?);
        pts.push(z);
    }
    Ok(ExtractedQ {
        polygon: PolygonCurve::new(pts)?,
        values,
        traced: false,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lemma::{LemmaOptions, PolygonSpec};
    use crate::planar::Disk;

    fn problem(domain: PlanarRegion, scale: f64) -> LemmaProblem {
        let mut options = LemmaOptions::default();
        options.sampling.rays = 64;
        LemmaProblem {
            x: WeierstrassField::plane(scale, domain.clone()),
            p: PolygonSpec::Regular {
                sides: 8,
                circumradius: 0.5,
                phase: 0.0,
            }
            .build()
            .unwrap(),
            o: domain,
            r: 1.0,
            s: 0.005,
            b1: 0.05,
            b2: 0.05,
            options,
        }
    }

    #[test]
    fn radially_monotone_field_gives_the_level_circle() {
        // ‖X‖ = 2|z| for the plane seed with scale 2; the level 1.5 is |z| = 0.75.
        let domain = PlanarRegion::Disk(Disk::new(C::new(0.0, 0.0), 1.0).unwrap());
        let pr = problem(domain.clone(), 2.0);
        let q = extract_polygon_q(&pr, &pr.x, &domain, 1.5, 0.05).unwrap();
        assert!(q.traced);
        for (z, v) in q.polygon.vertices().iter().zip(&q.values) {
            assert!((z.norm() - 0.75).abs() < 1e-9);
            assert!((v.norm() - 1.5).abs() < 1e-9);
        }
    }

    #[test]
    fn unreachable_level_has_no_band() {
        let domain = PlanarRegion::Disk(Disk::new(C::new(0.0, 0.0), 1.0).unwrap());
        let pr = problem(domain.clone(), 1.0);
        assert!(matches!(
            extract_polygon_q(&pr, &pr.x, &domain, 5.0, 0.05),
            Err(LemmaError::NoLevelBand { .. })
        ));
        let f = fallback_polygon(&pr, &pr.x, &domain).unwrap();
        assert!(!f.traced);
        assert_eq!(f.polygon.len(), 64);
    }

    #[test]
    fn reach_of_a_disk() {
        let domain = PlanarRegion::Disk(Disk::new(C::new(0.0, 0.0), 1.0).unwrap());
        assert!((ray_reach(&domain, 0.3) - 1.0).abs() < 1e-9);
    }
}
