use std::f64::consts::PI;

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use super::constants::Constants;
use super::eval::{cumulative, frame_ab, march_boundary, norm3, ring};
use super::ledger::{Diagnostic, LedgerEntry, Worst};
use super::placement::Placement;
use super::{LemmaError, LemmaProblem};
use crate::complex::{integrate_path_vec, HolomorphicExpr, Polyline, QuadratureOptions, Tape, C, I};
use crate::deformations::{
    calibrate_k, locate_a, lopez_ros, radial_floor, radial_parameter, Calibration, CalibrationBudget, Constraint,
    DeformError, LopezRos, PoleFactor,
};
use crate::planar::{
    build_omega, excluded_set, AnnularSector, CarveSpec, Membership, NeckSpec, OmegaBuild, OmegaInput, PlanarError,
    PlanarRegion,
};
use crate::weierstrass::{Frame, FrameView, WeierstrassField};

/// Data of one step: the pole factor, the point a_i, the arc and the sets
/// G_i and D_i.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PsiRecord {
    /// 1-based step index.
    pub index: usize,
    pub p: C,
    pub q: C,
    pub a: C,
    pub w: C,
    pub u: C,
    pub theta: C,
    pub k: f64,
    pub t: f64,
    pub beta: f64,
    pub sector: AnnularSector,
    pub excluded: PlanarRegion,
    pub calibration: Calibration,
    /// `Re ∫_{[q_i, a_i]} φ^i` in world coordinates.
    pub radial_integral: Vector3<f64>,
    /// Lateral part of the radial integral in S(p_i), as `x + iy`.
    pub lateral: C,
}

#[derive(Debug, Clone)]
pub struct FirstProcess {
    /// φ^0, …, φ^n on O.
    pub fields: Vec<WeierstrassField>,
    pub records: Vec<PsiRecord>,
    pub omega: OmegaBuild,
    /// Boundary samples of Ω (all polygon vertices in order, densified).
    pub boundary: Vec<C>,
    /// X_n at `boundary`.
    pub xn_boundary: Vec<Vector3<f64>>,
    pub xn_at_a: Vec<Vector3<f64>>,
    pub xn_at_q: Vec<Vector3<f64>>,
    pub ledger: Vec<LedgerEntry>,
    pub diagnostics: Vec<Diagnostic>,
}

fn failed(label: &str, index: usize, detail: impl Into<String>) -> LemmaError {
    LemmaError::ProcessFailed {
        label: label.to_string(),
        index,
        detail: detail.into(),
    }
}

/// Half-sag factor of the polygonal tip arc, as used when carving Ω.
fn tip_sag(beta: f64, spec: &CarveSpec) -> f64 {
    let m = (beta / spec.arc_step).ceil().max(1.0);
    (beta / (2.0 * m)).cos()
}

/// Boundary samples of an excluded set `disk ∖ sector` as built by
/// [`excluded_set`].
fn excluded_boundary(region: &PlanarRegion, m: usize) -> Vec<C> {
    let mut out = Vec::new();
    if let PlanarRegion::Difference { base, minus } = region {
        if let (PlanarRegion::Disk(d), PlanarRegion::Sector(s)) = (&**base, &**minus) {
            out.extend(ring(d.center, d.radius, m).into_iter().filter(|z| s.classify(*z) == Membership::Outside));
            for j in 0..=m {
                let rho = s.rho_min + (s.rho_max - s.rho_min) * j as f64 / m as f64;
                for ang in [s.angle_start, s.angle_start + s.angle_span] {
                    out.push(s.center + C::from_polar(rho, ang));
                }
            }
            out.extend(s.outline(PI / 64.0));
            out.retain(|z| d.classify(*z) != Membership::Outside);
        }
    }
    out
}

/// Frame components `(∫φ1', ∫φ2', ∫φ3)` of the deformed field along a
/// segment not through the pole, with the pole term of `A·h` integrated in
/// closed form: `∫A·h = ∫A + kθ(A(p)·log + ∫(A − A(p))/(z − p))`.
pub fn radial_components(before: &FrameView, pf: &PoleFactor, from: C, to: C, opts: &QuadratureOptions) -> Result<[C; 3], LemmaError> {
    let a = before.f();
    let b = before.fg2_neg();
    let ap = a.eval(pf.p)?;
    let quotient = (&a - &HolomorphicExpr::constant(ap)).try_div(&(HolomorphicExpr::var() - HolomorphicExpr::constant(pf.p)))?;
    let tape = Tape::compile(&[a, quotient, b.try_div(&pf.expr())?, before.phi[2].clone()]);
    let r = integrate_path_vec(&tape, &Polyline::segment(from, to)?, opts)?;
    let log = ((to - pf.p) / (from - pf.p)).ln();
    let ia = r.values[0] + pf.theta * pf.k * (ap * log + r.values[1]);
    let ib = r.values[2];
    Ok([(ia + ib) * 0.5, I * (ia - ib) * 0.5, r.values[3]])
}

fn world(frame: &Frame, comps: &[C; 3]) -> Vector3<f64> {
    frame.e1 * comps[0].re + frame.e2 * comps[1].re + frame.e3 * comps[2].re
}

/// One later index k > i with its ring and seed value.
struct Later {
    frame: Frame,
    p: C,
    im_theta_u: f64,
    f0: C,
    ring: Vec<C>,
}

struct StepCtx<'a> {
    prev: &'a WeierstrassField,
    frame: Frame,
    p: C,
    u: C,
    theta: C,
    delta: f64,
    eps0: f64,
    n: usize,
    l: f64,
    lambda: f64,
    sp: f64,
    a6_samples: Vec<C>,
    later: Vec<Later>,
}

struct StepEval {
    lr: LopezRos,
    pf: PoleFactor,
    worst: Vec<(&'static str, Worst)>,
}

impl StepCtx<'_> {
    /// Constraints at `k`, cheapest first; stops after the first failure
    /// unless `full`.
    fn evaluate(&self, k: f64, full: bool) -> Result<StepEval, DeformError> {
        let pf = PoleFactor::along(self.p, k, self.theta, self.u)?;
        let lr = lopez_ros(self.prev, &self.frame, &pf.expr())?;
        let mut worst = Vec::new();
        let mut fit = Worst::default();
        fit.push(self.delta - 1.1 * k, self.p);
        let ok = fit.passed();
        worst.push(("D_i fit", fit));
        if !ok && !full {
            return Ok(StepEval { lr, pf, worst });
        }

        let new_tape = lr.field.tape();
        let old_tape = self.prev.tape();
        let (mut r1, mut r2) = (new_tape.registers(), old_tape.registers());
        let (mut o1, mut o2) = ([C::new(0.0, 0.0); 3], [C::new(0.0, 0.0); 3]);
        let tol = self.eps0 / (self.n as f64 * self.l);
        let mut a6 = Worst::default();
        for &z in &self.a6_samples {
            new_tape.eval_into(z, &mut r1, &mut o1)?;
            old_tape.eval_into(z, &mut r2, &mut o2)?;
            let d: Vec<C> = (0..3).map(|j| o1[j] - o2[j]).collect();
            a6.push(tol - norm3(&d), z);
        }
        let ok = a6.passed();
        worst.push(("(A6)", a6));
        if !ok && !full {
            return Ok(StepEval { lr, pf, worst });
        }

        let sd = self.delta.sqrt();
        let scale = 2.0 * self.lambda * self.lambda * self.sp;
        let (mut a1, mut a2, mut a3) = (Worst::default(), Worst::default(), Worst::default());
        for later in &self.later {
            for &z in &later.ring {
                new_tape.eval_into(z, &mut r1, &mut o1)?;
                let (fa, fb) = frame_ab(&o1, &later.frame);
                a1.push(1.0 - sd * fa.norm(), z);
                a2.push(1.0 - sd * fb.norm() / later.im_theta_u.abs(), z);
            }
            new_tape.eval_into(later.p, &mut r1, &mut o1)?;
            let (fa, _) = frame_ab(&o1, &later.frame);
            a3.push(self.eps0 - scale * (fa - later.f0).norm() / later.f0.norm(), later.p);
        }
        worst.push(("(A1)", a1));
        worst.push(("(A2)", a2));
        worst.push(("(A3)", a3));
        Ok(StepEval { lr, pf, worst })
    }
}

fn as_constraints(w: &[(&'static str, Worst)]) -> Vec<Constraint> {
    w.iter()
        .map(|(label, w)| Constraint {
            label: label.to_string(),
            margin: w.margin,
        })
        .collect()
}

/// Lateral part `Re∫φ1' + i·Re∫φ2'` of frame components.
fn lateral(c: &[C; 3]) -> C {
    C::new(c[0].re, c[1].re)
}

/// (A4) on the tip arc and (A8) on a polar grid of G_i for a given β.
#[allow(clippy::too_many_arguments)]
fn arc_checks(
    lr: &LopezRos,
    pf: &PoleFactor,
    q: C,
    t_in: f64,
    t: f64,
    psi: f64,
    beta: f64,
    delta: f64,
    eps0: f64,
    bound8: f64,
    opts: &QuadratureOptions,
) -> Result<(Worst, Worst), LemmaError> {
    let p = pf.p;
    let after = Tape::compile(&lr.after.phi);
    let m = 8usize;
    // (A4): ‖Re∫φ^i‖ from a along the tip arc of radius t.
    let mut a4 = Worst::default();
    for sign in [1.0, -1.0] {
        let pts: Vec<C> = (0..=m).map(|j| p + C::from_polar(t, psi + sign * beta * j as f64 / m as f64)).collect();
        let vals = cumulative(&after, &pts, Vector3::zeros(), opts)?;
        for (z, v) in pts.iter().zip(&vals) {
            a4.push(eps0 - v.norm(), *z);
        }
    }
    // (A8): lateral part from q, radially to ρ then along the arc of radius ρ.
    let mut a8 = Worst::default();
    let radii: Vec<f64> = (0..=12).map(|j| delta * (t_in / delta).powf(j as f64 / 12.0)).collect();
    let mut acc = [C::new(0.0, 0.0); 3];
    let mut prev = q;
    for &rho in &radii {
        let z0 = p + C::from_polar(rho, psi);
        if z0 != prev {
            let c = radial_components(&lr.before, pf, prev, z0, opts)?;
            for j in 0..3 {
                acc[j] += c[j];
            }
            prev = z0;
        }
        let base = lateral(&acc);
        a8.push(bound8 - base.norm(), z0);
        for sign in [1.0, -1.0] {
            let pts: Vec<C> = (0..=m).map(|j| p + C::from_polar(rho, psi + sign * beta * j as f64 / m as f64)).collect();
            let vals = cumulative(&after, &pts, Vector3::zeros(), opts)?;
            for (z, v) in pts.iter().zip(&vals).skip(1) {
                let l = base + C::new(v[0], v[1]);
                a8.push(bound8 - l.norm(), *z);
            }
        }
    }
    Ok((a4, a8))
}

/// Run the first process on a placement.
pub fn first_process(problem: &LemmaProblem, constants: &Constants, pl: &Placement) -> Result<FirstProcess, LemmaError> {
    let opts = problem.quadrature();
    let budgets = &problem.options.budgets;
    let sampling = &problem.options.sampling;
    let n = pl.n();
    let (lambda, sp, eps0) = (constants.lambda, constants.s_prime, constants.eps0);
    let delta = pl.delta;
    let spec = CarveSpec::default();
    let mut fields = vec![problem.x.clone()];
    let mut records: Vec<PsiRecord> = Vec::with_capacity(n);
    let mut ledger = Vec::new();
    let mut diagnostics = Vec::new();
    let w_samples = pl.w.boundary_samples(pl.w.perimeter() / sampling.boundary as f64);

    for i in 0..n {
        let idx = i + 1;
        let p = pl.points[i];
        let u = pl.dirs[i];
        let theta = pl.thetas[i];
        let frame = pl.frames[i];
        let q = pl.q(i);
        let f0 = pl.f0[i];
        let prev = fields[i].clone();

        let mut a6_samples = w_samples.clone();
        a6_samples.extend(ring(p, delta, sampling.ring));
        for r in &records {
            a6_samples.extend(excluded_boundary(&r.excluded, sampling.ring));
        }
        let later = (i + 1..n)
            .map(|j| Later {
                frame: pl.frames[j],
                p: pl.points[j],
                im_theta_u: (pl.thetas[j] * pl.dirs[j].conj()).im,
                f0: pl.f0[j],
                ring: ring(pl.points[j], delta, sampling.ring),
            })
            .collect();
        let ctx = StepCtx {
            prev: &prev,
            frame,
            p,
            u,
            theta,
            delta,
            eps0,
            n,
            l: pl.l,
            lambda,
            sp,
            a6_samples,
            later,
        };

        // The radial parameter only shrinks with k; if even the largest
        // admissible k puts a_i below the floor, no calibration can help.
        let k_max = 0.9 * delta / 1.1;
        let target = lambda * lambda * sp;
        let t_best = radial_parameter(delta, k_max, f0.norm(), target);
        let floor = radial_floor(p);
        if !(t_best >= floor) {
            return Err(LemmaError::Underflow { index: idx, t: t_best, floor });
        }

        let budget = CalibrationBudget {
            k_initial: k_max,
            halvings: budgets.k_halvings,
        };
        let disk = ring(p, delta, sampling.ring);
        let calibration = calibrate_k(&prev, p, &frame, &disk, budget, |k| {
            Ok(as_constraints(&ctx.evaluate(k, false)?.worst))
        })
        .map_err(|e| match e {
            DeformError::CalibrationFailed { binding } => failed(&binding, idx, "calibration of k exhausted its budget"),
            other => other.into(),
        })?;
        let k = calibration.k;
        let eval = ctx.evaluate(k, true)?;
        for (label, w) in &eval.worst {
            let set = match *label {
                "(A6)" => format!("∂W, ∂D(p_i,δ) and ∂D_k for k < i: {} points", w.samples),
                "(A1)" | "(A2)" => format!("rings of radius δ around p_k, k > i: {} points", w.samples),
                "(A3)" => format!("points p_k, k > i: {}", w.samples),
                _ => format!("{} points", w.samples),
            };
            if matches!(*label, "(A1)" | "(A2)" | "(A3)") {
                if idx < n {
                    ledger.push(LedgerEntry::from_worst(label, Some(idx), w, set));
                }
            } else if *label == "(A6)" {
                ledger.push(LedgerEntry::from_worst(label, Some(idx), w, set));
            } else {
                diagnostics.push(Diagnostic::new(label, Some(idx), w));
            }
        }
        let StepEval { lr, pf, .. } = eval;

        let a = match locate_a(p, q, delta, k, f0, lambda, sp) {
            Ok(a) => a,
            Err(DeformError::Underflow { t, floor }) => return Err(LemmaError::Underflow { index: idx, t, floor }),
            Err(e) => return Err(e.into()),
        };
        let t = (a - p).norm();
        // Closed form of a_i against the kernel integral.
        let kernel = (k * ((a - p) / (q - p)).ln()).re.abs();
        let resid = (0.5 * f0.norm() * kernel - target).abs() / target;
        diagnostics.push(Diagnostic::flag("kernel relation", Some(idx), resid < 1e-8, 1e-8 - resid, 1));

        let comps = radial_components(&lr.before, &pf, q, a, &opts)?;
        let lat = lateral(&comps);
        let predicted = (f0 * theta).conj() * (-0.5 * kernel);
        let lat_resid = (lat - predicted).norm();
        diagnostics.push(Diagnostic::flag("lateral leading term", Some(idx), true, -lat_resid, 1));
        let mut a7 = Worst::default();
        a7.push(lat.norm() - lambda * sp, a);
        ledger.push(LedgerEntry::from_worst("(A7)", Some(idx), &a7, "segment [q_i, a_i] by split quadrature"));
        let mut growth = Worst::default();
        growth.push(lambda.powi(3) * sp - lat.norm(), a);
        diagnostics.push(Diagnostic::new("lateral below λ³s′", Some(idx), &growth));

        // β by halving until (A4) and (A8) pass.
        let psi = u.arg();
        let mut beta = PI / 4.0;
        let mut found = None;
        let mut last = (Worst::default(), Worst::default());
        for _ in 0..=budgets.beta_halvings {
            let t_in = t * tip_sag(beta, &spec);
            let (a4, a8) = arc_checks(&lr, &pf, q, t_in, t, psi, beta, delta, eps0, lambda.powi(3) * sp, &opts)?;
            if a4.passed() && a8.passed() {
                found = Some((beta, a4, a8));
                break;
            }
            last = (a4, a8);
            beta *= 0.5;
        }
        let (beta, a4, a8) = match found {
            Some(x) => x,
            None => {
                let label = if last.0.passed() { "(A8)" } else { "(A4)" };
                return Err(failed(label, idx, "arc shrinking exhausted its budget"));
            }
        };
        ledger.push(LedgerEntry::from_worst("(A4)", Some(idx), &a4, format!("tip arc C_i, {} points", a4.samples)));
        ledger.push(LedgerEntry::from_worst("(A8)", Some(idx), &a8, format!("polar grid on G_i, {} points", a8.samples)));

        let sector = AnnularSector::symmetric(p, t * tip_sag(beta, &spec), delta, psi, beta)?;
        let w = pf.zero();
        let excluded = excluded_set(p, w, &sector)?;
        let holds_4f = excluded.contains(p) == Membership::Inside
            && excluded.contains(w) == Membership::Inside
            && excluded.contains(a) == Membership::Outside
            && excluded.contains(q) == Membership::Outside;
        diagnostics.push(Diagnostic::flag("4.f", Some(idx), holds_4f, if holds_4f { 0.0 } else { -1.0 }, 4));
        if !holds_4f {
            return Err(failed("4.f", idx, "excluded set does not separate p_i, w_i from the radial segment"));
        }
        let same = lr.after.phi[2].ptr_eq(&lr.before.phi[2]);
        ledger.push(LedgerEntry::structural("(A5)", Some(idx), same, "expression identity of the third frame component"));

        records.push(PsiRecord {
            index: idx,
            p,
            q,
            a,
            w,
            u,
            theta,
            k,
            t,
            beta,
            sector,
            excluded,
            calibration,
            radial_integral: world(&frame, &comps),
            lateral: lat,
        });
        fields.push(lr.field);
    }

    // (A9), cyclically with Ψ_{n+1} = Ψ_1.
    let a9_bound = eps0 * (4.0 * lambda * lambda * sp + 12.0);
    for idx in 2..=n + 1 {
        let cur = &records[(idx - 1) % n];
        let prev = &records[idx - 2];
        let mut w = Worst::default();
        w.push(a9_bound - (cur.radial_integral - prev.radial_integral).norm(), cur.a);
        ledger.push(LedgerEntry::from_worst("(A9)", Some(idx), &w, "radial integrals of consecutive steps"));
    }

    let omega = build_omega(&OmegaInput {
        phat: pl.phat.clone(),
        inner: problem.p.clone(),
        delta,
        carve_radius: 1.5 * delta,
        necks: records.iter().map(|r| NeckSpec { a: r.a, beta: r.beta }).collect(),
        zeros: records.iter().map(|r| r.w).collect(),
        length_bound: None,
        geodesic_spacing: delta,
        spec,
    })
    .map_err(|e| match e {
        PlanarError::OmegaInvalid { condition, detail } => failed(&condition, 0, detail),
        other => other.into(),
    })?;
    for c in &omega.checks {
        diagnostics.push(Diagnostic::flag(&c.label, None, c.passed, c.margin, c.samples));
    }
    // 5.d from the length bound of the placement (convex P̂) or a sampled
    // shortest-path computation.
    if pl.phat.reflex_vertices().is_empty() {
        let m = pl.l - pl.geodesic_bound;
        diagnostics.push(Diagnostic::flag("5.d", None, m > 0.0, m, 0));
    } else {
        let samples = omega.polygon.boundary_samples(omega.polygon.perimeter() / sampling.boundary as f64);
        let sup = crate::planar::max_geodesic_length(&omega.region, &samples)?;
        let m = pl.l - sup;
        diagnostics.push(Diagnostic::flag("5.d", None, m > 0.0, m, samples.len()));
        if !(m > 0.0) {
            return Err(failed("5.d", 0, format!("sampled geodesic sup {sup} ≥ l = {}", pl.l)));
        }
    }

    // Boundary values of X_n and of every X_i − X_{i−1}.
    let poly = &omega.polygon;
    let h = (poly.perimeter() / (4.0 * sampling.boundary as f64)).max(f64::MIN_POSITIVE);
    let boundary = poly.boundary_samples(h);
    let xn_tape = fields[n].tape();
    let (xn_boundary, defect) = march_boundary(&xn_tape, &boundary, &omega.region, &opts)?;
    diagnostics.push(Diagnostic::flag("closure of X_n", None, defect < 1e-8, 1e-8 - defect, boundary.len()));
    let find = |z: C| boundary.iter().position(|b| *b == z);
    let mut xn_at_a = Vec::with_capacity(n);
    for r in &records {
        let ia = find(r.a).ok_or_else(|| failed("5.b", r.index, "a_i is not a boundary vertex"))?;
        xn_at_a.push(xn_boundary[ia]);
    }

    let mut xn_at_q = Vec::with_capacity(n);
    for (i, r) in records.iter().enumerate() {
        let idx = i + 1;
        let frame = pl.frames[i];
        let psi = r.u.arg();
        let big = 1.5 * delta;
        let hi = psi + r.beta;
        let lo = psi - r.beta;
        let outer_hi = p_at(r.p, big, hi);
        let start = nearest(&boundary, outer_hi);
        let outer_lo = nearest(&boundary, p_at(r.p, big, lo));

        // Difference field X_i − X_{i−1}.
        let diff = difference_tape(&fields[i + 1], &fields[i]);
        let (dvals, _) = march_boundary(&diff, &boundary, &omega.region, &opts)?;
        let mut p1 = Worst::default();
        let tol1 = eps0 / n as f64;
        for (z, v) in boundary.iter().zip(&dvals) {
            if (z - r.p).norm() >= delta {
                p1.push(tol1 - v.norm(), *z);
            }
        }
        let crossing = crossing_path(r.p, big, delta, hi, lo, 16);
        let cvals = cumulative(&diff, &crossing, dvals[start], &opts)?;
        for (z, v) in crossing.iter().zip(&cvals).skip(1) {
            if (z - r.p).norm() >= delta * (1.0 - 1e-12) {
                p1.push(tol1 - v.norm(), *z);
            }
        }
        ledger.push(LedgerEntry::from_worst(
            "(P1)",
            Some(idx),
            &p1,
            format!("∂Ω outside D(p_i,δ) and the crossing arc: {} points", p1.samples),
        ));
        // (P2): third coordinate in S(p_i) unchanged.
        let structural = records[i].calibration.k > 0.0 && {
            let view_new = fields[i + 1].in_frame(&frame);
            let view_old = fields[i].in_frame(&frame);
            let t3 = Tape::compile(&[view_new.phi[2].clone(), view_old.phi[2].clone()]);
            let mut worst = 0.0f64;
            for &z in boundary.iter().step_by((boundary.len() / 64).max(1)) {
                let v = t3.eval(z)?;
                worst = worst.max((v[0] - v[1]).norm() / v[1].norm().max(1.0));
            }
            worst < 1e-12
        };
        ledger.push(
            LedgerEntry::structural("(P2)", Some(idx), structural, "third frame component identity, checked on ∂Ω")
                .with_note("follows from (A5)"),
        );

        // (P3) and (P4) from X_n at the tip points.
        let j = (i + 1) % n;
        let mut p3 = Worst::default();
        p3.push(eps0 * (4.0 * lambda * lambda * sp + 17.0) - (xn_at_a[i] - xn_at_a[j]).norm(), r.a);
        ledger.push(LedgerEntry::from_worst("(P3)", Some(idx), &p3, "X_n at a_i and a_{i+1}"));
        let mut p4 = Worst::default();
        p4.push(xn_at_a[i].norm() - lambda * (problem.r + problem.s), r.a);
        ledger.push(LedgerEntry::from_worst("(P4)", Some(idx), &p4, "X_n at a_i"));

        // (P5) on the boundary of G_i ∩ Ω: crossing arc, both walls, tip arc.
        let xvals = cumulative(&xn_tape, &crossing, xn_boundary[start], &opts)?;
        let mid = crossing.len() / 2 + 1;
        let xq = xvals[mid.min(xvals.len() - 1)];
        xn_at_q.push(xq);
        let mut samples: Vec<(C, Vector3<f64>)> = crossing.iter().copied().zip(xvals.iter().copied()).skip(1).collect();
        for (outer, ang) in [(start, hi), (outer_lo, lo)] {
            let wall = wall_path(r.p, big, r.t, delta, ang, 8);
            let vals = cumulative(&xn_tape, &wall, xn_boundary[outer], &opts)?;
            samples.extend(wall.iter().copied().zip(vals).filter(|(z, _)| (z - r.p).norm() <= delta * (1.0 + 1e-12)));
        }
        for (z, v) in boundary.iter().zip(&xn_boundary) {
            if (z - r.p).norm() <= delta && r.sector.classify(*z) != Membership::Outside {
                samples.push((*z, *v));
            }
        }
        let mut p5 = Worst::default();
        let bound5 = lambda.powi(3) * sp + 5.0 * eps0;
        for (z, v) in &samples {
            p5.push(bound5 - (xq - v).norm(), *z);
        }
        ledger.push(LedgerEntry::from_worst(
            "(P5)",
            Some(idx),
            &p5,
            format!("boundary of G_i ∩ Ω: {} points", p5.samples),
        ));
    }

    Ok(FirstProcess {
        fields,
        records,
        omega,
        boundary,
        xn_boundary,
        xn_at_a,
        xn_at_q,
        ledger,
        diagnostics,
    })
}

fn p_at(p: C, rho: f64, ang: f64) -> C {
    p + C::from_polar(rho, ang)
}

pub(crate) fn nearest(pts: &[C], z: C) -> usize {
    let mut best = (f64::INFINITY, 0usize);
    for (k, w) in pts.iter().enumerate() {
        let d = (w - z).norm();
        if d < best.0 {
            best = (d, k);
        }
    }
    best.1
}

/// From the outer wall vertex at angle `hi` inwards to radius δ, then along
/// the circle of radius δ to angle `lo`; the midpoint of the arc is q_i.
fn crossing_path(p: C, big: f64, delta: f64, hi: f64, lo: f64, m: usize) -> Vec<C> {
    let mut out = vec![p_at(p, big, hi)];
    for j in 0..=2 * m {
        out.push(p_at(p, delta, hi + (lo - hi) * j as f64 / (2 * m) as f64));
    }
    out
}

/// Wall at angle `ang` from radius `big` inwards to the tip radius `t`,
/// through δ and geometric radii below it.
fn wall_path(p: C, big: f64, t: f64, delta: f64, ang: f64, m: usize) -> Vec<C> {
    let mut out = vec![p_at(p, big, ang)];
    for j in 0..=m {
        out.push(p_at(p, delta * (t / delta).powf(j as f64 / m as f64), ang));
    }
    out
}

/// Tape of `φ − ψ` for two world triples.
pub fn difference_tape(a: &WeierstrassField, b: &WeierstrassField) -> Tape {
    Tape::compile(&[&a.phi[0] - &b.phi[0], &a.phi[1] - &b.phi[1], &a.phi[2] - &b.phi[2]])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::complex::integrate_path;
    use crate::planar::Disk;
    use crate::weierstrass::WeierstrassField;

    fn enneper_disk() -> WeierstrassField {
        WeierstrassField::enneper(PlanarRegion::Disk(Disk::new(C::new(0.0, 0.0), 2.0).unwrap()))
    }

    #[test]
    fn split_radial_integral_matches_direct_quadrature() {
        let x = enneper_disk();
        let frame = Frame::from_e3(Vector3::new(0.3, -0.2, 1.0)).unwrap();
        let p = C::new(0.8, 0.3);
        let u = C::new(-0.6, -0.8);
        let pf = PoleFactor::along(p, 0.01, I * u, u).unwrap();
        let lr = lopez_ros(&x, &frame, &pf.expr()).unwrap();
        let (from, to) = (p + u * 0.2, p + u * 1e-3);
        let split = radial_components(&lr.before, &pf, from, to, &QuadratureOptions::default()).unwrap();
        let path = Polyline::segment(from, to).unwrap();
        for j in 0..3 {
            let direct = integrate_path(&lr.after.phi[j], &path, 1e-12).unwrap().value;
            assert!((direct - split[j]).norm() < 1e-9 * direct.norm().max(1.0), "component {j}");
        }
    }

    #[test]
    fn crossing_path_passes_through_q() {
        let p = C::new(1.0, 0.0);
        let psi = PI;
        let path = crossing_path(p, 0.15, 0.1, psi + 0.3, psi - 0.3, 16);
        let q = p + C::from_polar(0.1, psi);
        assert!((path[17] - q).norm() < 1e-15);
    }

    #[test]
    fn excluded_boundary_is_outside_sector_interior() {
        let p = C::new(1.0, 0.0);
        let sector = AnnularSector::symmetric(p, 1e-3, 0.05, PI, 0.3).unwrap();
        let w = p - I * C::new(-1.0, 0.0) * 0.01;
        let d = excluded_set(p, w, &sector).unwrap();
        let pts = excluded_boundary(&d, 32);
        assert!(!pts.is_empty());
        for z in pts {
            assert_ne!(d.contains(z), Membership::Inside);
        }
    }
}
