use std::cmp::Ordering;
use std::collections::BinaryHeap;

use super::expr::HolomorphicExpr;
use super::polyline::{point_segment_distance, Polyline};
use super::tape::{PoleExclusion, Tape};
use super::{ComplexError, Result, C};

// 15-point Kronrod nodes on [0, 1] (symmetric), Kronrod weights, and the
// weights of the embedded 7-point Gauss rule (odd Kronrod indices).
const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_18,
    0.140_653_259_715_525_92,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_83,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadratureOptions {
    /// Absolute tolerance on the total error estimate.
    pub tol: f64,
    /// Maximum number of subintervals across the whole path.
    pub max_intervals: usize,
    pub exclusion: PoleExclusion,
}

impl Default for QuadratureOptions {
    fn default() -> Self {
        QuadratureOptions {
            tol: 1e-10,
            max_intervals: 20_000,
            exclusion: PoleExclusion::default(),
        }
    }
}

impl QuadratureOptions {
    pub fn with_tol(tol: f64) -> Self {
        QuadratureOptions {
            tol,
            ..Default::default()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadratureResult {
    pub value: C,
    pub error: f64,
    pub subdivisions: usize,
}

/// Integrals of several expressions along one path, sharing evaluations.
#[derive(Debug, Clone, PartialEq)]
pub struct VecQuadratureResult {
    pub values: Vec<C>,
    /// Largest component error estimate.
    pub error: f64,
    pub subdivisions: usize,
}

/// `∫_path expr dw` by globally adaptive Gauss–Kronrod (7/15) quadrature.
pub fn integrate_path(expr: &HolomorphicExpr, path: &Polyline, tol: f64) -> Result<QuadratureResult> {
    let tape = Tape::compile(std::slice::from_ref(expr));
    let r = integrate_path_vec(&tape, path, &QuadratureOptions::with_tol(tol))?;
    Ok(QuadratureResult {
        value: r.values[0],
        error: r.error,
        subdivisions: r.subdivisions,
    })
}

struct Piece {
    a: C,
    b: C,
    values: Vec<C>,
    err: f64,
}

impl PartialEq for Piece {
    fn eq(&self, other: &Self) -> bool {
        self.err == other.err
    }
}
impl Eq for Piece {}
impl PartialOrd for Piece {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Piece {
    fn cmp(&self, other: &Self) -> Ordering {
        self.err.total_cmp(&other.err)
    }
}

struct Rule<'a> {
    tape: &'a Tape,
    regs: Vec<C>,
    out: Vec<C>,
}

impl Rule<'_> {
    fn apply(&mut self, a: C, b: C) -> Result<Piece> {
        let m = (a + b) * 0.5;
        let h = (b - a) * 0.5;
        let n = self.tape.outputs();
        let mut k = vec![C::new(0.0, 0.0); n];
        let mut g = vec![C::new(0.0, 0.0); n];
        for (j, &x) in XGK.iter().enumerate() {
            let pts: &[C] = if x == 0.0 { &[m] } else { &[m - h * x, m + h * x] };
            for &p in pts {
                self.tape.eval_into(p, &mut self.regs, &mut self.out)?;
                for c in 0..n {
                    k[c] += self.out[c] * WGK[j];
                    if j % 2 == 1 {
                        g[c] += self.out[c] * WG[j / 2];
                    }
                }
            }
        }
        let mut err = 0.0f64;
        for c in 0..n {
            k[c] *= h;
            g[c] *= h;
            err = err.max((k[c] - g[c]).norm());
        }
        Ok(Piece { a, b, values: k, err })
    }
}

/// Integrate every output of `tape` along `path`.
///
/// The interval with the largest error estimate is bisected until the summed
/// estimate is within `opts.tol` or the interval budget is exhausted.
pub fn integrate_path_vec(tape: &Tape, path: &Polyline, opts: &QuadratureOptions) -> Result<VecQuadratureResult> {
    if !(opts.tol > 0.0) {
        return Err(ComplexError::InvalidTolerance(opts.tol));
    }
    let tape = tape.clone().with_exclusion(opts.exclusion);
    for &pole in tape.poles() {
        for (a, b) in path.segments() {
            if point_segment_distance(pole, a, b) <= opts.exclusion.radius(pole) {
                return Err(ComplexError::PoleOnPath { pole });
            }
        }
    }
    let mut rule = Rule {
        tape: &tape,
        regs: tape.registers(),
        out: vec![C::new(0.0, 0.0); tape.outputs()],
    };
    let mut heap = BinaryHeap::new();
    let mut total = 0.0;
    for (a, b) in path.segments() {
        let p = rule.apply(a, b)?;
        total += p.err;
        heap.push(p);
    }
    let mut subdivisions = 0usize;
    while total > opts.tol && heap.len() < opts.max_intervals {
        let worst = heap.pop().expect("nonempty heap");
        let mid = (worst.a + worst.b) * 0.5;
        if mid == worst.a || mid == worst.b {
            heap.push(worst);
            break;
        }
        let left = rule.apply(worst.a, mid)?;
        let right = rule.apply(mid, worst.b)?;
        total += left.err + right.err - worst.err;
        heap.push(left);
        heap.push(right);
        subdivisions += 1;
        if subdivisions.is_multiple_of(64) {
            total = heap.iter().map(|p| p.err).sum();
        }
    }
    let n = tape.outputs();
    let mut values = vec![C::new(0.0, 0.0); n];
    let mut error = 0.0;
    for p in heap.iter() {
        for c in 0..n {
            values[c] += p.values[c];
        }
        error += p.err;
    }
    if error > opts.tol {
        return Err(ComplexError::ToleranceNotMet {
            requested: opts.tol,
            achieved: error,
            subdivisions,
        });
    }
    Ok(VecQuadratureResult {
        values,
        error,
        subdivisions,
    })
}

/// `∫_from^to k/(w − p) dw` along the straight segment, in closed form.
///
/// Valid when the segment does not pass through `p`; the principal logarithm
/// of the endpoint ratio is then the exact value.
pub fn log_kernel_integral(k: C, p: C, from: C, to: C) -> Result<C> {
    if point_segment_distance(p, from, to) == 0.0 {
        return Err(ComplexError::PoleOnPath { pole: p });
    }
    Ok(k * ((to - p) / (from - p)).ln())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::complex::I;
    use proptest::prelude::*;

    fn z() -> HolomorphicExpr {
        HolomorphicExpr::var()
    }

    #[test]
    fn reciprocal_on_unit_interval_gives_ln2() {
        let e = &HolomorphicExpr::real(1.0) / &z();
        let path = Polyline::segment(C::new(1.0, 0.0), C::new(2.0, 0.0)).unwrap();
        let r = integrate_path(&e, &path, 1e-10).unwrap();
        assert!((r.value - C::new(2f64.ln(), 0.0)).norm() <= 1e-10);
        assert!(r.error <= 1e-10);
    }

    #[test]
    fn closed_loop_of_polynomial_vanishes() {
        let e = z().powi(3) * C::new(2.0, -1.0) + z() * C::new(0.5, 0.0) + HolomorphicExpr::real(3.0);
        let path = Polyline::new(vec![
            C::new(0.0, 0.0),
            C::new(2.0, 0.5),
            C::new(1.0, 3.0),
            C::new(-1.5, 1.0),
            C::new(0.0, 0.0),
        ])
        .unwrap();
        let r = integrate_path(&e, &path, 1e-10).unwrap();
        assert!(r.value.norm() <= 1e-10);
    }

    #[test]
    fn pole_on_path_is_rejected() {
        let e = &HolomorphicExpr::real(1.0) / &(z() - HolomorphicExpr::real(0.5));
        let path = Polyline::segment(C::new(0.0, 0.0), C::new(1.0, 0.0)).unwrap();
        assert!(matches!(
            integrate_path(&e, &path, 1e-10),
            Err(ComplexError::PoleOnPath { .. })
        ));
    }

    #[test]
    fn tight_budget_reports_tolerance_failure() {
        let p = C::new(0.0, 1e-6);
        let e = &HolomorphicExpr::real(1.0) / &(z() - HolomorphicExpr::constant(p));
        let path = Polyline::segment(C::new(-1.0, 0.0), C::new(1.0, 0.0)).unwrap();
        let opts = QuadratureOptions {
            max_intervals: 4,
            ..QuadratureOptions::with_tol(1e-12)
        };
        let tape = Tape::compile(&[e]);
        assert!(matches!(
            integrate_path_vec(&tape, &path, &opts),
            Err(ComplexError::ToleranceNotMet { .. })
        ));
    }

    #[test]
    fn radial_kernel_matches_logarithm() {
        // k/(w − p) on the segment between q = p + δ·u and a point z between q and p.
        let (k, delta) = (0.01, 0.05);
        let p = C::new(0.3, -0.2);
        let u = C::new(0.6, 0.8);
        let q = p + u * delta;
        let zpt = p + u * (delta * 1e-3);
        let e = &HolomorphicExpr::real(k) / &(z() - HolomorphicExpr::constant(p));
        let oracle = k * (delta / (zpt - p).norm()).ln();
        // Inward from q the integral is −k·ln(δ/|z−p|); from z out to q it is +k·ln(δ/|z−p|).
        let outward = integrate_path(&e, &Polyline::segment(zpt, q).unwrap(), 1e-12).unwrap();
        assert!((outward.value - C::new(oracle, 0.0)).norm() < 1e-11);
        assert!(oracle > 0.0);
        let closed_in = log_kernel_integral(C::new(k, 0.0), p, q, zpt).unwrap();
        assert!((closed_in - C::new(-oracle, 0.0)).norm() < 1e-13 * oracle);
        assert!(closed_in.im.abs() < 1e-11 * k);
    }

    #[test]
    fn vector_integration_shares_path() {
        let f1 = z().exp();
        let f2 = z() * I;
        let tape = Tape::compile(&[f1, f2]);
        let path = Polyline::segment(C::new(0.0, 0.0), C::new(1.0, 1.0)).unwrap();
        let r = integrate_path_vec(&tape, &path, &QuadratureOptions::default()).unwrap();
        let end = C::new(1.0, 1.0);
        assert!((r.values[0] - (end.exp() - 1.0)).norm() < 1e-10);
        assert!((r.values[1] - I * end * end * 0.5).norm() < 1e-10);
    }

    fn test_expr() -> HolomorphicExpr {
        let h = &(&HolomorphicExpr::constant(0.1 * I) / &(z() - HolomorphicExpr::constant(C::new(3.0, 3.0))))
            + &HolomorphicExpr::real(1.0);
        &(z() * C::new(0.7, 0.2)).exp() * &h
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn path_splitting_is_additive(
            pts in proptest::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 2..6),
            frac in 0.05f64..0.95,
        ) {
            let verts: Vec<C> = pts.iter().map(|(x, y)| C::new(*x, *y)).collect();
            let Some(path) = Polyline::from_points_dedup(verts) else { return Ok(()) };
            let tol = 1e-10;
            let e = test_expr();
            let whole = integrate_path(&e, &path, tol).unwrap().value;
            if let Some((a, b)) = path.split_at(frac * path.length()) {
                let parts = integrate_path(&e, &a, tol).unwrap().value
                    + integrate_path(&e, &b, tol).unwrap().value;
                prop_assert!((whole - parts).norm() <= 2.0 * tol);
            }
        }

        #[test]
        fn path_independent_without_enclosed_poles(
            ex in -1.0f64..1.0, ey in -1.0f64..1.0,
            mx in -1.0f64..1.0, my in -1.0f64..1.0,
        ) {
            let tol = 1e-10;
            let e = test_expr();
            let end = C::new(ex, ey);
            let Ok(direct) = Polyline::segment(C::new(0.0, 0.0), end) else { return Ok(()) };
            let Some(detour) = Polyline::from_points_dedup([C::new(0.0, 0.0), C::new(mx, my), end]) else { return Ok(()) };
            let a = integrate_path(&e, &direct, tol).unwrap().value;
            let b = integrate_path(&e, &detour, tol).unwrap().value;
            prop_assert!((a - b).norm() <= 2.0 * tol);
        }
    }
}
