use nalgebra::Vector3;

use super::constants::{d_floor, Constants};
use super::eval::{march_boundary, FieldEvaluator};
use super::extract::ExtractedQ;
use super::first::difference_tape;
use super::ledger::{CaseMargin, Diagnostic, LedgerEntry, Worst};
use super::{LemmaError, LemmaProblem};
use crate::complex::C;
use crate::planar::{Disk, PlanarRegion, TubeNeighborhood};
use crate::weierstrass::WeierstrassField;

/// The special sets that stratify Int Q ∖ Int P for (d).
#[derive(Debug, Clone, Default)]
pub struct Strata {
    /// `(p_i, δ)`.
    pub disks: Vec<(C, f64)>,
    /// `Q_i^ξ`.
    pub tubes: Vec<TubeNeighborhood>,
}

/// The five cases of (d), in order.
pub const D_CASES: [&str; 5] = [
    "outside disks and tubes",
    "D(p_i,δ) off tubes",
    "D(p_i,δ) ∩ Q_i^ξ",
    "D(p_{i+1},δ) ∩ Q_i^ξ",
    "Q_i^ξ off disks",
];

impl Strata {
    /// Case index (0-based into [`D_CASES`]) of a point, or `None` when it
    /// falls in a combination the construction excludes.
    pub fn case(&self, z: C) -> Option<usize> {
        let n = self.disks.len();
        let disk = self.disks.iter().position(|(p, d)| (z - p).norm() < *d);
        let tube = self.tubes.iter().position(|t| t.distance(z) <= t.radius);
        match (disk, tube) {
            (None, None) => Some(0),
            (Some(_), None) => Some(1),
            (None, Some(_)) => Some(4),
            (Some(k), Some(i)) if k == i => Some(2),
            (Some(k), Some(i)) if n > 0 && k == (i + 1) % n => Some(3),
            _ => None,
        }
    }

    fn targets(&self) -> Vec<PlanarRegion> {
        let mut out: Vec<PlanarRegion> = Vec::new();
        for (p, d) in &self.disks {
            if let Ok(disk) = Disk::new(*p, *d) {
                out.push(PlanarRegion::Disk(disk));
            }
        }
        out.extend(self.tubes.iter().cloned().map(PlanarRegion::Tube));
        out
    }
}

pub struct Conclusions {
    pub entries: Vec<LedgerEntry>,
    pub diagnostics: Vec<Diagnostic>,
}

/// Check the conclusions (a)–(d) for Y against the seed X.
pub fn verify_lemma(
    problem: &LemmaProblem,
    _constants: &Constants,
    y: &WeierstrassField,
    q: &ExtractedQ,
    strata: &Strata,
    anchors: Option<&(Vec<C>, Vec<Vector3<f64>>)>,
) -> Result<Conclusions, LemmaError> {
    let opts = problem.quadrature();
    let sampling = &problem.options.sampling;
    let mut rng = problem.rng();
    let mut entries = Vec::new();
    let mut diagnostics = Vec::new();
    let domain = y.domain.clone();
    let qpoly = q.polygon.as_simple();
    let ppoly = problem.p.as_simple();

    let mut ev = FieldEvaluator::new(y.tape(), opts, domain.clone());
    ev.add_anchors(qpoly.vertices(), &q.values);
    if let Some((pts, vals)) = anchors {
        ev.add_anchors(pts, vals);
    }

    // (a): P ⊂ Int Q and Q ⊂ Ω.
    let inside = qpoly.strictly_contains_polygon(ppoly);
    let edges_in = qpoly.edges().all(|(a, b)| domain.contains_segment(a, b));
    let mut a = Worst::default();
    for &v in ppoly.vertices() {
        let d = qpoly.distance_to_boundary(v);
        a.push(if inside { d } else { -d }, v);
    }
    if !edges_in {
        a.push(-1.0, qpoly.vertices()[0]);
    }
    entries.push(
        LedgerEntry::from_worst("(a)", None, &a, format!("vertices of P against Q; {} edges of Q in Ω", qpoly.len()))
            .with_note(if inside && edges_in { "P ⊂ Int Q ⊂ Ω" } else { "containment fails" }),
    );

    // (c) at the vertices and edge midpoints of Q.
    let target = problem.r + problem.s;
    let mut c = Worst::default();
    let verts = qpoly.vertices();
    for (k, (&v, val)) in verts.iter().zip(&q.values).enumerate() {
        c.push(problem.b2 - (val.norm() - target).abs(), v);
        let w = verts[(k + 1) % verts.len()];
        let mid = 0.5 * (v + w);
        let ym = *val + ev.segment(v, mid)?;
        c.push(problem.b2 - (ym.norm() - target).abs(), mid);
    }
    entries.push(LedgerEntry::from_worst("(c)", None, &c, format!("vertices and edge midpoints of Q: {} points", c.samples)));

    // (b) on Int P: ‖Y − X‖ is subharmonic, so the boundary carries the
    // maximum; interior samples are checked as well.
    let pregion = PlanarRegion::Polygon(ppoly.clone());
    let diff = difference_tape(y, &problem.x);
    let pb = ppoly.boundary_samples(ppoly.perimeter() / sampling.boundary as f64);
    let (bvals, _) = march_boundary(&diff, &pb, &pregion, &opts)?;
    let mut dev = FieldEvaluator::new(diff, opts, pregion.clone());
    dev.add_anchors(&pb, &bvals);
    let mut b = Worst::default();
    for (z, v) in pb.iter().zip(&bvals) {
        b.push(problem.b1 - v.norm(), *z);
    }
    for z in pregion.sample_points(sampling.per_stratum, &mut rng) {
        b.push(problem.b1 - dev.at(z)?.norm(), z);
    }
    entries.push(LedgerEntry::from_worst("(b)", None, &b, format!("∂P and random points of Int P: {} points", b.samples)));

    // (d) on Int Q ∖ Int P, stratified by the five cases.
    let band = PlanarRegion::difference(PlanarRegion::Polygon(qpoly.clone()), pregion);
    let mut pts = band.sample_points(sampling.per_stratum, &mut rng);
    let targets = strata.targets();
    if !targets.is_empty() {
        let per = (sampling.per_stratum / targets.len()).max(16);
        for t in targets {
            let local = PlanarRegion::Intersection { parts: vec![t, band.clone()] };
            pts.extend(local.sample_points(per, &mut rng));
        }
    }
    let floor = d_floor(problem.r, problem.s);
    let mut cases = vec![Worst::default(); D_CASES.len()];
    let mut all = Worst::default();
    let mut other = 0usize;
    for z in pts {
        let m = ev.at(z)?.norm() - floor;
        all.push(m, z);
        match strata.case(z) {
            Some(k) => cases[k].push(m, z),
            None => other += 1,
        }
    }
    let mut d = LedgerEntry::from_worst("(d)", None, &all, format!("random points of Int Q ∖ Int P: {} points", all.samples));
    d.cases = D_CASES
        .iter()
        .zip(&cases)
        .map(|(name, w)| CaseMargin {
            case: name.to_string(),
            samples: w.samples,
            margin: w.margin.is_finite().then_some(w.margin),
            witness: w.witness,
        })
        .collect();
    entries.push(d);
    diagnostics.push(Diagnostic::flag("(d) unclassified", None, other == 0, -(other as f64), other));
    Ok(Conclusions { entries, diagnostics })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::complex::Polyline;
    use crate::planar::tube;

    #[test]
    fn case_classification() {
        let strata = Strata {
            disks: vec![(C::new(1.0, 0.0), 0.1), (C::new(0.0, 1.0), 0.1)],
            tubes: vec![tube(Polyline::segment(C::new(1.0, 0.0), C::new(0.0, 1.0)).unwrap(), 0.02).unwrap()],
        };
        assert_eq!(strata.case(C::new(0.0, 0.0)), Some(0));
        assert_eq!(strata.case(C::new(1.0, 0.05)), Some(1));
        assert_eq!(strata.case(C::new(0.97, 0.03)), Some(2));
        assert_eq!(strata.case(C::new(0.03, 0.97)), Some(3));
        assert_eq!(strata.case(C::new(0.5, 0.5)), Some(4));
    }
}
