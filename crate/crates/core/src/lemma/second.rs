use nalgebra::Vector3;

use super::constants::Constants;
use super::eval::{frame_ab, march_boundary, radial_frame, ring, FieldEvaluator};
use super::first::{difference_tape, FirstProcess};
use super::ledger::{Diagnostic, LedgerEntry, Worst};
use super::placement::Placement;
use super::{LemmaError, LemmaProblem};
use crate::complex::{Polyline, Tape, C};
use crate::deformations::{fit_runge_multiplier, lopez_ros, DeformError, RungeMultiplier, RungeSamples};
use crate::planar::{max_geodesic_length, segment_segment_distance, tube, Membership, PlanarRegion, SimplePolygon, TubeNeighborhood};
use crate::weierstrass::{Frame, WeierstrassField};

#[derive(Debug, Clone)]
pub struct SecondProcess {
    /// Y_0 = X_n, …, Y_n.
    pub fields: Vec<WeierstrassField>,
    pub y: WeierstrassField,
    pub frames: Vec<Frame>,
    pub multipliers: Vec<RungeMultiplier>,
    pub xi: f64,
    pub eps1: f64,
    /// Q_i^ξ.
    pub tubes: Vec<TubeNeighborhood>,
    /// Y at the boundary samples of the first process.
    pub y_boundary: Vec<Vector3<f64>>,
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

/// Points at distance exactly `radius` from a polyline: offsets of every
/// segment on both sides plus arcs around the vertices.
pub fn tube_boundary(carrier: &Polyline, radius: f64, h: f64, arc_points: usize) -> Vec<C> {
    let mut out = Vec::new();
    for (a, b) in carrier.segments() {
        let d = b - a;
        let len = d.norm();
        if len == 0.0 {
            continue;
        }
        let nrm = C::new(-d.im, d.re) / len;
        let m = ((len / h).ceil() as usize).clamp(1, 10_000);
        for j in 0..=m {
            let z = a + d * (j as f64 / m as f64);
            out.push(z + nrm * radius);
            out.push(z - nrm * radius);
        }
    }
    for &v in carrier.vertices() {
        out.extend(ring(v, radius, arc_points));
    }
    out.retain(|z| carrier.distance(*z) >= radius * (1.0 - 1e-9));
    out
}

/// Samples of a polyline at spacing at most `h`, vertices included.
pub fn polyline_samples(line: &Polyline, h: f64) -> Vec<C> {
    let mut out = vec![line.start()];
    for (a, b) in line.segments() {
        let m = (((b - a).norm() / h).ceil() as usize).clamp(1, 10_000);
        for j in 1..=m {
            out.push(a + (b - a) * (j as f64 / m as f64));
        }
    }
    out
}

fn polyline_distance(a: &Polyline, b: &Polyline) -> f64 {
    let mut best = f64::INFINITY;
    for (p0, p1) in a.segments() {
        for (q0, q1) in b.segments() {
            best = best.min(segment_segment_distance(p0, p1, q0, q1));
        }
    }
    best
}

/// Smallest distance between segments of one polyline that are more than
/// `gap` apart in arclength: a local feature size of the curve.
fn self_clearance(line: &Polyline, gap: f64) -> f64 {
    let segs: Vec<(C, C)> = line.segments().collect();
    let mut arc = vec![0.0];
    for (a, b) in &segs {
        arc.push(arc.last().unwrap() + (b - a).norm());
    }
    let mut best = f64::INFINITY;
    for i in 0..segs.len() {
        for j in i + 2..segs.len() {
            if arc[j] - arc[i + 1] <= gap {
                continue;
            }
            best = best.min(segment_segment_distance(segs[i].0, segs[i].1, segs[j].0, segs[j].1));
        }
    }
    best
}

/// Distance from a point to the closure of a polygonal region.
fn distance_to_closure(poly: &SimplePolygon, z: C) -> f64 {
    match poly.classify(z) {
        Membership::Outside => poly.distance_to_boundary(z),
        _ => 0.0,
    }
}

struct TubeChecks {
    slacks: Vec<(String, usize, f64, usize)>,
}

impl TubeChecks {
    fn worst(&self) -> Option<&(String, usize, f64, usize)> {
        self.slacks.iter().filter(|s| !(s.2 > 0.0)).min_by(|a, b| a.2.total_cmp(&b.2))
    }
}

/// 7.a–7.f for a given ξ (7.g is checked once ξ is otherwise admissible).
#[allow(clippy::too_many_arguments)]
fn tube_checks(
    chains: &[Polyline],
    chain_samples: &[Vec<C>],
    poly: &SimplePolygon,
    poles: &[C],
    pl: &Placement,
    f_tapes: &[(Tape, Frame)],
    eps1: f64,
    xi: f64,
    ring_n: usize,
) -> Result<TubeChecks, LemmaError> {
    let n = chains.len();
    let mut slacks = Vec::new();
    let pole_gap = poles.iter().map(|w| distance_to_closure(poly, *w)).fold(f64::INFINITY, f64::min);
    slacks.push(("7.a".to_string(), 0, pole_gap - 9.0 * xi / 8.0, poles.len()));
    for i in 0..n {
        let mut b = f64::INFINITY;
        for j in 0..n {
            if j != i {
                b = b.min(polyline_distance(&chains[i], &chains[j]) - 2.0 * xi);
            }
        }
        slacks.push(("7.b".to_string(), i + 1, b, n - 1));
        let mut c = f64::INFINITY;
        for k in 0..n {
            if k != i && k != (i + 1) % n {
                c = c.min(chains[i].distance(pl.points[k]) - pl.delta - xi);
            }
        }
        slacks.push(("7.c".to_string(), i + 1, c, n.saturating_sub(2)));
        let ball = &pl.balls[i];
        let d = chains[i]
            .vertices()
            .iter()
            .map(|v| ball.radius - (v - ball.center).norm() - xi)
            .fold(f64::INFINITY, f64::min);
        slacks.push(("7.d".to_string(), i + 1, d, chains[i].vertices().len()));
        let e = self_clearance(&chains[i], 4.0 * xi) - 2.0 * xi;
        slacks.push(("7.e".to_string(), i + 1, e, chains[i].vertices().len()));
        let (tape, frame) = &f_tapes[i];
        let mut f = f64::INFINITY;
        let mut count = 0;
        for &z in &chain_samples[i] {
            let (fz, _) = frame_ab(&tape.eval(z)?, frame);
            for x in ring(z, 0.5 * xi, ring_n) {
                let (fx, _) = frame_ab(&tape.eval(x)?, frame);
                f = f.min(eps1 - (fx - fz).norm());
                count += 1;
            }
        }
        slacks.push(("7.f".to_string(), i + 1, f, count));
    }
    Ok(TubeChecks { slacks })
}

/// Boundary samples of `Ω̄ ∖ Q^ξ`: ∂Ω outside the tube and the tube
/// boundary inside Ω.
fn complement_boundary(boundary: &[C], tube: &TubeNeighborhood, region: &PlanarRegion, h: f64, arc: usize) -> Vec<C> {
    let mut out: Vec<C> = boundary.iter().copied().filter(|z| tube.distance(*z) >= tube.radius).collect();
    out.extend(
        tube_boundary(&tube.carrier, tube.radius, h, arc)
            .into_iter()
            .filter(|z| region.contains(*z) == Membership::Inside),
    );
    out
}

/// Run the second process on the output of the first.
pub fn second_process(
    problem: &LemmaProblem,
    constants: &Constants,
    pl: &Placement,
    first: &FirstProcess,
) -> Result<SecondProcess, LemmaError> {
    let n = pl.n();
    let opts = problem.quadrature();
    let sampling = &problem.options.sampling;
    let budgets = &problem.options.budgets;
    let eps0 = constants.eps0;
    let rs = problem.r + problem.s;
    let y0 = first.fields[n].clone();
    let region = &first.omega.region;
    let poly = &first.omega.polygon;
    let chains = &first.omega.chains;
    let mut ledger = Vec::new();
    let mut diagnostics = Vec::new();

    let mut frames = Vec::with_capacity(n);
    for (i, xa) in first.xn_at_a.iter().enumerate() {
        frames.push(radial_frame(xa, &pl.reference_axis).ok_or_else(|| failed("T_i", i + 1, "X_n(a_i) is parallel to the reference axis"))?);
    }

    // 6.d–6.f on the boundary curves.
    let h = poly.perimeter() / sampling.boundary as f64;
    let chain_samples: Vec<Vec<C>> = chains.iter().map(|c| polyline_samples(c, h.min(c.length() / 16.0))).collect();
    let y0_tape = y0.tape();
    let mut min_f = Vec::with_capacity(n);
    for i in 0..n {
        let ball = &pl.balls[i];
        let d = chains[i].vertices().iter().map(|v| ball.radius - (v - ball.center).norm()).fold(f64::INFINITY, f64::min);
        diagnostics.push(Diagnostic::flag("6.d", Some(i + 1), d > 0.0, d, chains[i].vertices().len()));
        let mut e = f64::INFINITY;
        for k in 0..n {
            if k != i && k != (i + 1) % n {
                e = e.min(chains[i].distance(pl.points[k]) - pl.delta);
            }
        }
        diagnostics.push(Diagnostic::flag("6.e", Some(i + 1), e > 0.0, e, n.saturating_sub(2)));
        let mut m = f64::INFINITY;
        for &z in &chain_samples[i] {
            let (f, _) = frame_ab(&y0_tape.eval(z)?, &frames[i]);
            m = m.min(f.norm());
        }
        diagnostics.push(Diagnostic::flag("6.f", Some(i + 1), m > 0.0, m, chain_samples[i].len()));
        if !(m > 0.0) {
            return Err(failed("6.f", i + 1, "f of X_n in T_i vanishes on Q_i"));
        }
        min_f.push(m);
    }
    let eps1 = 0.9 * min_f.iter().copied().fold(f64::INFINITY, f64::min) / 4.0;
    diagnostics.push(Diagnostic::flag("ε1 bound", None, true, min_f.iter().copied().fold(f64::INFINITY, f64::min) / 4.0 - eps1, n));

    // Ĉ_i: boundary samples near the tip arc stay within 3ε0 of X_n(a_i).
    for (i, arc) in first.omega.tip_arcs.iter().enumerate().take(n) {
        let reach = 0.5 * (first.records[i].t * 0.25).max(f64::MIN_POSITIVE);
        let mut w = Worst::default();
        for (z, v) in first.boundary.iter().zip(&first.xn_boundary) {
            if arc.distance(*z) <= reach {
                w.push(3.0 * eps0 - (v - first.xn_at_a[i]).norm(), *z);
            }
        }
        diagnostics.push(Diagnostic::new("Ĉ_i", Some(i + 1), &w));
    }

    // ξ by halving until 7.a–7.g hold.
    let f_tapes: Vec<(Tape, Frame)> = frames.iter().map(|f| (y0_tape.clone(), *f)).collect();
    let mut poles = y0.poles();
    poles.extend(first.records.iter().map(|r| r.w));
    let mut xi = 0.25 * pl.delta;
    let mut chosen = None;
    let mut last_binding = String::from("7.a");
    for _ in 0..=budgets.xi_halvings {
        let checks = tube_checks(chains, &chain_samples, poly, &poles, pl, &f_tapes, eps1, xi, sampling.ring)?;
        if let Some(w) = checks.worst() {
            last_binding = w.0.clone();
            xi *= 0.5;
            continue;
        }
        let mut slacks = checks.slacks;
        let mut ok = true;
        for (i, c) in chains.iter().enumerate() {
            let t = tube(c.clone(), xi)?;
            let rest = PlanarRegion::difference(region.clone(), PlanarRegion::Tube(t.clone()));
            let samples = complement_boundary(&first.boundary, &t, region, h, 8);
            let sup = max_geodesic_length(&rest, &samples)?;
            slacks.push(("7.g".to_string(), i + 1, pl.l - sup, samples.len()));
            if !(pl.l - sup > 0.0) {
                ok = false;
                last_binding = "7.g".into();
                break;
            }
        }
        if ok {
            chosen = Some(slacks);
            break;
        }
        xi *= 0.5;
    }
    let slacks = chosen.ok_or_else(|| failed(&last_binding, 0, "ξ halving budget exhausted"))?;
    for (label, i, m, samples) in &slacks {
        diagnostics.push(Diagnostic::flag(label, (*i > 0).then_some(*i), *m > 0.0, *m, *samples));
    }
    let tubes: Vec<TubeNeighborhood> = chains.iter().map(|c| tube(c.clone(), xi)).collect::<Result<_, _>>()?;

    let mut fields = vec![y0.clone()];
    let mut multipliers = Vec::with_capacity(n);
    let tol2 = eps0 / n as f64;
    let tol3 = eps1 / n as f64;
    let b5_target = 2.0 * rs + 1.0;
    let h_tube = (xi / 2.0).max(h / 64.0);
    for i in 0..n {
        let idx = i + 1;
        let frame = frames[i];
        let prev = fields[i].clone();
        let t = &tubes[i];
        let half = tube(t.carrier.clone(), 0.5 * xi)?;

        let tau = (1.05 * (2.0 * b5_target + 1.0) / (0.25 * xi * min_f[i])).max(2.0);
        let mut b5 = Worst::default();
        for &z in &chain_samples[i] {
            // min over Q_i is attained at one of the samples; the slack is
            // the same expression at every sample with that minimum.
            let (f, _) = frame_ab(&y0_tape.eval(z)?, &frame);
            b5.push(0.5 * (tau * xi / 4.0 * f.norm() - 1.0) - b5_target, z);
        }

        let fit_a = tube_boundary(&half.carrier, half.radius, h_tube, 8);
        let fit_b = complement_boundary(&first.boundary, t, region, h_tube, 8);
        let thin = |v: &[C], m: usize| -> Vec<C> {
            let step = (v.len() / m.max(1)).max(1);
            v.iter().copied().step_by(step).collect()
        };
        let check_a = tube_boundary(&half.carrier, half.radius, h_tube / 4.0, 32);
        let check_b = complement_boundary(&first.boundary, t, region, h_tube / 4.0, 32);
        let samples = RungeSamples {
            fit_a: thin(&fit_a, sampling.fit),
            fit_b: thin(&fit_b, sampling.fit),
            check_a: thin(&check_a, sampling.check),
            check_b: thin(&check_b, sampling.check),
        };

        // (B4) maxima over Q^ξ of Y_{i−1} in T_i by the maximum principle.
        let prev_tape = prev.tape();
        let (mut max_fg2, mut max_f) = (0.0f64, 0.0f64);
        let tube_edge = tube_boundary(&t.carrier, t.radius, h_tube, sampling.ring);
        for &z in &tube_edge {
            let (a, b) = frame_ab(&prev_tape.eval(z)?, &frame);
            max_f = max_f.max(a.norm());
            max_fg2 = max_fg2.max(b.norm());
        }

        let later: Vec<Frame> = frames[i + 1..].to_vec();
        let mut nu = 0.5;
        let mut done = None;
        let mut binding = String::from("(B4)");
        for _ in 0..=budgets.nu_halvings {
            let mut b4 = Worst::default();
            let lhs = 0.5 * xi * ((1.0 / tau + nu / (tau * (tau - nu))) * max_fg2 + nu * max_f);
            b4.push(1.0 - lhs, t.carrier.start());
            b4.samples = tube_edge.len();
            if !b4.passed() {
                binding = "(B4)".into();
                nu *= 0.5;
                continue;
            }
            let mult = match fit_runge_multiplier(&samples, tau, nu, budgets.max_degree) {
                Ok(m) => m,
                Err(DeformError::DegreeBudgetExceeded { max_degree, best, nu }) => {
                    return Err(failed(
                        "Runge fit",
                        idx,
                        format!("degree {max_degree} reaches sup error {best:e}, needs {nu:e}"),
                    ))
                }
                Err(e) => return Err(e.into()),
            };
            let lr = lopez_ros(&prev, &frame, &mult.expr)?;
            let next = lr.field.with_domain(region.clone());

            // (B2) on the boundary of Ω̄ ∖ Q^ξ.
            let diff = difference_tape(&next, &prev);
            let (dvals, _) = march_boundary(&diff, &first.boundary, region, &opts)?;
            let mut ev = FieldEvaluator::new(diff, opts, region.clone());
            ev.add_anchors(&first.boundary, &dvals);
            let mut b2 = Worst::default();
            for (z, v) in first.boundary.iter().zip(&dvals) {
                if t.distance(*z) >= xi {
                    b2.push(tol2 - v.norm(), *z);
                }
            }
            for z in tube_boundary(&t.carrier, xi, h_tube, sampling.ring) {
                if region.contains(z) == Membership::Inside {
                    b2.push(tol2 - ev.at(z)?.norm(), z);
                }
            }
            // (B3) for the later frames on the same set.
            let mut b3 = Worst::default();
            if !later.is_empty() {
                let pair = Tape::compile(&[
                    next.phi[0].clone(),
                    next.phi[1].clone(),
                    next.phi[2].clone(),
                    prev.phi[0].clone(),
                    prev.phi[1].clone(),
                    prev.phi[2].clone(),
                ]);
                for &z in fit_b.iter().chain(check_b.iter()) {
                    let v = pair.eval(z)?;
                    for fk in &later {
                        let (a1, _) = frame_ab(&v[0..3], fk);
                        let (a0, _) = frame_ab(&v[3..6], fk);
                        b3.push(tol3 - (a1 - a0).norm(), z);
                    }
                }
            }
            if !b2.passed() {
                binding = "(B2)".into();
                nu *= 0.5;
                continue;
            }
            if !later.is_empty() && !b3.passed() {
                binding = "(B3)".into();
                nu *= 0.5;
                continue;
            }
            let b1 = lr.after.phi[2].ptr_eq(&lr.before.phi[2]);
            done = Some((mult, next, b1, b2, b3, b4));
            break;
        }
        let (mult, next, b1, b2, b3, b4) = done.ok_or_else(|| failed(&binding, idx, "ν halving budget exhausted"))?;
        ledger.push(LedgerEntry::structural("(B1)", Some(idx), b1, "expression identity of the third frame component"));
        ledger.push(LedgerEntry::from_worst(
            "(B2)",
            Some(idx),
            &b2,
            format!("∂Ω outside Q_i^ξ and the tube boundary inside Ω: {} points", b2.samples),
        ));
        if later.is_empty() {
            ledger.push(
                LedgerEntry::structural("(B3)", Some(idx), true, "no later frames").with_note("vacuous for the last tube"),
            );
        } else {
            ledger.push(LedgerEntry::from_worst(
                "(B3)",
                Some(idx),
                &b3,
                format!("boundary of Ω̄ ∖ Q_i^ξ in frames T_k, k > i: {} evaluations", b3.samples),
            ));
        }
        ledger.push(LedgerEntry::from_worst(
            "(B4)",
            Some(idx),
            &b4,
            format!("maxima over the boundary of Q_i^ξ: {} points", tube_edge.len()),
        ));
        ledger.push(LedgerEntry::from_worst("(B5)", Some(idx), &b5, format!("minimum over Q_i: {} points", b5.samples)));
        diagnostics.push(Diagnostic::flag("Runge sup on tube", Some(idx), mult.sup_error_a < mult.nu, mult.nu - mult.sup_error_a, samples.check_a.len()));
        diagnostics.push(Diagnostic::flag("Runge sup off tube", Some(idx), mult.sup_error_b < mult.nu, mult.nu - mult.sup_error_b, samples.check_b.len()));
        multipliers.push(mult);
        fields.push(next);
    }

    let y = fields[n].clone();
    let (y_boundary, defect) = march_boundary(&y.tape(), &first.boundary, region, &opts)?;
    diagnostics.push(Diagnostic::flag("closure of Y", None, defect < 1e-8, 1e-8 - defect, first.boundary.len()));
    Ok(SecondProcess {
        fields,
        y,
        frames,
        multipliers,
        xi,
        eps1,
        tubes,
        y_boundary,
        ledger,
        diagnostics,
    })
}
