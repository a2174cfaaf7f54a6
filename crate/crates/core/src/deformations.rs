//! López-Ros deformations: the pole factor `h = kθ/(z − p) + 1`, the
//! exponential Runge multiplier `l = exp(P)`, and the helpers that place
//! the point `a` and calibrate `k`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::complex::{ComplexError, HolomorphicExpr, C, I};
use crate::weierstrass::{Frame, FrameView, WeierstrassError, WeierstrassField};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DeformError {
    #[error("invalid pole factor: {0}")]
    InvalidPoleFactor(String),
    #[error("frame is degenerate for this field (f ≡ 0)")]
    DegenerateFrame,
    #[error("radial parameter t = {t:e} is below the representable floor {floor:e}; k is too small")]
    Underflow { t: f64, floor: f64 },
    #[error("no k in the search grid satisfies every constraint; binding: {binding}")]
    CalibrationFailed { binding: String },
    #[error("degree budget {max_degree} exhausted; best sup error {best:e} against tolerance {nu:e}")]
    DegreeBudgetExceeded { max_degree: usize, best: f64, nu: f64 },
    #[error("invalid multiplier request: {0}")]
    InvalidMultiplier(String),
    #[error(transparent)]
    Weierstrass(#[from] WeierstrassError),
    #[error(transparent)]
    Complex(#[from] ComplexError),
}

pub type Result<T> = std::result::Result<T, DeformError>;

/// `h(z) = kθ/(z − p) + 1` with `k > 0`, `|θ| = 1`, `Im θ ≠ 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PoleFactor {
    pub p: C,
    pub k: f64,
    pub theta: C,
}

impl PoleFactor {
    pub fn new(p: C, k: f64, theta: C) -> Result<Self> {
        Self::along(p, k, theta, C::new(1.0, 0.0))
    }

    /// Pole factor whose radial segment leaves `p` in the unit direction `u`;
    /// the zero `w = p − kθ` stays off that ray iff `Im(θ·ū) ≠ 0`.
    pub fn along(p: C, k: f64, theta: C, u: C) -> Result<Self> {
        if !(k > 0.0) || !k.is_finite() {
            return Err(DeformError::InvalidPoleFactor(format!("k = {k}")));
        }
        if (theta.norm() - 1.0).abs() > 1e-12 {
            return Err(DeformError::InvalidPoleFactor(format!("|θ| = {}", theta.norm())));
        }
        if (u.norm() - 1.0).abs() > 1e-12 {
            return Err(DeformError::InvalidPoleFactor(format!("|u| = {}", u.norm())));
        }
        if (theta * u.conj()).im == 0.0 {
            return Err(DeformError::InvalidPoleFactor("Im(θū) = 0".into()));
        }
        Ok(PoleFactor { p, k, theta })
    }

    pub fn expr(&self) -> HolomorphicExpr {
        let num = HolomorphicExpr::constant(self.theta * self.k);
        let den = HolomorphicExpr::var() - HolomorphicExpr::constant(self.p);
        num / den + HolomorphicExpr::real(1.0)
    }

    /// The unique zero `w = p − kθ`.
    pub fn zero(&self) -> C {
        self.p - self.theta * self.k
    }

    pub fn eval(&self, z: C) -> C {
        self.theta * self.k / (z - self.p) + 1.0
    }
}

/// Result of a López-Ros deformation with the frame views before and after.
#[derive(Debug, Clone)]
pub struct LopezRos {
    pub field: WeierstrassField,
    pub before: FrameView,
    pub after: FrameView,
}

/// Replace `(f, g)` in `frame` by `(f·h, g/h)`.
///
/// Written through `A = φ1 − iφ2 = f` and `B = φ1 + iφ2 = −f·g²`, which
/// become `A·h` and `B/h`; no division by f is needed. The third frame
/// component of the result is the same expression node as before.
pub fn lopez_ros(field: &WeierstrassField, frame: &Frame, h: &HolomorphicExpr) -> Result<LopezRos> {
    let before = field.in_frame(frame);
    let a = before.f();
    if a.as_constant() == Some(C::new(0.0, 0.0)) {
        return Err(DeformError::DegenerateFrame);
    }
    let b = before.fg2_neg();
    let a2 = &a * h;
    let b2 = b.try_div(h)?;
    let half = C::new(0.5, 0.0);
    let phi_s = [
        (&a2 + &b2) * half,
        (&a2 - &b2) * (I * 0.5),
        before.phi[2].clone(),
    ];
    let out = WeierstrassField::from_frame_components(&phi_s, frame, field.domain.clone());
    Ok(LopezRos {
        field: out,
        after: FrameView {
            frame: *frame,
            phi: phi_s,
        },
        before,
    })
}

/// Smallest radial parameter accepted by [`locate_a`] at pole `p`.
pub fn radial_floor(p: C) -> f64 {
    (1e-8 * p.norm()).max(1e-280)
}

/// Radial parameter `t = δ·exp(−2λ²s′/(k|f0|))` solving
/// `½|f0|·|∫_{[q,a]} k dw/(w − p)| = λ²s′` on the radial segment.
pub fn radial_parameter(delta: f64, k: f64, f0_abs: f64, target: f64) -> f64 {
    delta * (-2.0 * target / (k * f0_abs)).exp()
}

/// Point `a = p + t·(q − p)/|q − p|` on the segment from q towards p where
/// the kernel integral reaches `λ²s′` (`target` below).
pub fn locate_a(p: C, q: C, delta: f64, k: f64, f0_at_p: C, lambda: f64, s_prime: f64) -> Result<C> {
    let f0 = f0_at_p.norm();
    if !(f0 > 0.0) {
        return Err(DeformError::InvalidPoleFactor("f0 vanishes at the pole".into()));
    }
    if !(k > 0.0) {
        return Err(DeformError::InvalidPoleFactor(format!("k = {k}")));
    }
    let target = lambda * lambda * s_prime;
    let t = radial_parameter(delta, k, f0, target);
    let floor = radial_floor(p);
    if !(t >= floor) {
        return Err(DeformError::Underflow { t, floor });
    }
    let u = (q - p) / (q - p).norm();
    Ok(p + u * t)
}

/// Largest value of `|(f(w) − f(p))/(w − p)|` over `samples` (points of the
/// closed disk other than `p`).
pub fn difference_quotient_max(f: &HolomorphicExpr, p: C, samples: &[C]) -> Result<f64> {
    let fp = f.eval(p)?;
    let mut best = 0.0f64;
    for &w in samples {
        if w == p {
            continue;
        }
        best = best.max(((f.eval(w)? - fp) / (w - p)).norm());
    }
    Ok(best)
}

/// Search grid for [`calibrate_k`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CalibrationBudget {
    pub k_initial: f64,
    pub halvings: usize,
}

impl Default for CalibrationBudget {
    fn default() -> Self {
        CalibrationBudget {
            k_initial: 1.0,
            halvings: 80,
        }
    }
}

/// One named constraint evaluated at a candidate k; positive margin passes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Constraint {
    pub label: String,
    pub margin: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Calibration {
    pub k: f64,
    pub halvings: usize,
    pub constraints: Vec<Constraint>,
}

/// Largest `k = k_initial·2^{−j}` for which the difference-quotient bound
/// `k·max|(f(w) − f(p))/(w − p)| < 1` and every constraint returned by
/// `extra(k)` hold. `disk_samples` cover the closed disk around `p`.
pub fn calibrate_k<F>(
    field_prev: &WeierstrassField,
    p: C,
    frame: &Frame,
    disk_samples: &[C],
    budget: CalibrationBudget,
    mut extra: F,
) -> Result<Calibration>
where
    F: FnMut(f64) -> Result<Vec<Constraint>>,
{
    let view = field_prev.in_frame(frame);
    let f = view.f();
    if f.as_constant() == Some(C::new(0.0, 0.0)) {
        return Err(DeformError::DegenerateFrame);
    }
    let quotient = difference_quotient_max(&f, p, disk_samples)?;
    let mut k = budget.k_initial;
    let mut last_binding = String::from("none evaluated");
    for j in 0..=budget.halvings {
        let mut constraints = vec![Constraint {
            label: "quotient bound".into(),
            margin: 1.0 - k * quotient,
        }];
        if constraints[0].margin > 0.0 {
            constraints.extend(extra(k)?);
        }
        match constraints.iter().find(|c| !(c.margin > 0.0)) {
            None => {
                return Ok(Calibration {
                    k,
                    halvings: j,
                    constraints,
                })
            }
            Some(c) => last_binding = c.label.clone(),
        }
        k *= 0.5;
    }
    Err(DeformError::CalibrationFailed { binding: last_binding })
}

/// Fit and validation samples of the two compacts.
#[derive(Debug, Clone, Default)]
pub struct RungeSamples {
    pub fit_a: Vec<C>,
    pub fit_b: Vec<C>,
    pub check_a: Vec<C>,
    pub check_b: Vec<C>,
}

/// `l = exp(P)` with P a polynomial stored in its Arnoldi basis.
#[derive(Debug, Clone)]
pub struct RungeMultiplier {
    pub tau: f64,
    pub nu: f64,
    pub degree: usize,
    pub center: C,
    pub scale: f64,
    /// Upper Hessenberg recurrence coefficients, column k holds `H[0..=k+1, k]`.
    pub hessenberg: Vec<Vec<C>>,
    pub coefficients: Vec<C>,
    pub sup_error_a: f64,
    pub sup_error_b: f64,
    pub expr: HolomorphicExpr,
}

impl RungeMultiplier {
    /// `P(z)` through the Arnoldi recurrence.
    pub fn exponent_at(&self, z: C) -> C {
        let s = (z - self.center) / self.scale;
        let mut w: Vec<C> = Vec::with_capacity(self.degree + 1);
        w.push(C::new(1.0, 0.0));
        for k in 1..=self.degree {
            let col = &self.hessenberg[k - 1];
            let mut v = s * w[k - 1];
            for j in 0..k {
                v -= col[j] * w[j];
            }
            w.push(v / col[k]);
        }
        w.iter().zip(&self.coefficients).map(|(a, b)| a * b).sum()
    }

    pub fn eval(&self, z: C) -> C {
        self.exponent_at(z).exp()
    }
}

struct ArnoldiFit {
    hessenberg: Vec<Vec<C>>,
    coefficients: Vec<C>,
}

fn arnoldi_fit(s: &[C], target: &[C], degree: usize) -> Option<ArnoldiFit> {
    let m = s.len();
    let mut q = DMatrix::<C>::zeros(m, degree + 1);
    for i in 0..m {
        q[(i, 0)] = C::new(1.0, 0.0);
    }
    let sqrt_m = (m as f64).sqrt();
    let mut hess = Vec::with_capacity(degree);
    for k in 1..=degree {
        let mut v: DVector<C> = DVector::from_iterator(m, (0..m).map(|i| s[i] * q[(i, k - 1)]));
        let mut col = vec![C::new(0.0, 0.0); k + 1];
        for j in 0..k {
            let qj = q.column(j);
            let hjk = qj.dotc(&v) / m as f64;
            col[j] = hjk;
            v -= qj * hjk;
        }
        let nrm = v.norm() / sqrt_m;
        if !(nrm > 0.0) {
            return None;
        }
        col[k] = C::new(nrm, 0.0);
        for i in 0..m {
            q[(i, k)] = v[i] / nrm;
        }
        hess.push(col);
    }
    let b = DVector::from_column_slice(target);
    let svd = q.svd(true, true);
    let c = svd.solve(&b, 1e-12).ok()?;
    Some(ArnoldiFit {
        hessenberg: hess,
        coefficients: c.iter().copied().collect(),
    })
}

fn exponent_expr(center: C, scale: f64, hess: &[Vec<C>], coeffs: &[C]) -> HolomorphicExpr {
    let s = (HolomorphicExpr::var() - HolomorphicExpr::constant(center)) * C::new(1.0 / scale, 0.0);
    let mut basis: Vec<HolomorphicExpr> = vec![HolomorphicExpr::real(1.0)];
    for k in 1..hess.len() + 1 {
        let col = &hess[k - 1];
        let mut v = &s * &basis[k - 1];
        for j in 0..k {
            if col[j] != C::new(0.0, 0.0) {
                v = v - &basis[j] * col[j];
            }
        }
        basis.push(v * (C::new(1.0, 0.0) / col[k]));
    }
    let mut p: Option<HolomorphicExpr> = None;
    for (e, &c) in basis.iter().zip(coeffs) {
        let term = e * c;
        p = Some(match p {
            None => term,
            Some(acc) => acc + term,
        });
    }
    p.unwrap_or_else(|| HolomorphicExpr::real(0.0))
}

/// Degrees tried in order: 4, 8, 16, … up to `max_degree`.
pub fn degree_schedule(max_degree: usize) -> Vec<usize> {
    let mut out = Vec::new();
    let mut d = 4;
    while d <= max_degree {
        out.push(d);
        d *= 2;
    }
    if out.last() != Some(&max_degree) && max_degree > 0 {
        out.push(max_degree);
    }
    out
}

/// Fit `l = exp(P)` with `|l − τ| < ν` on compact A and `|l − 1| < ν` on
/// compact B, certified on the validation samples. P is the least-squares
/// polynomial for the target `ln τ` on A and `0` on B, built with
/// Vandermonde with Arnoldi orthogonalization.
pub fn fit_runge_multiplier(samples: &RungeSamples, tau: f64, nu: f64, max_degree: usize) -> Result<RungeMultiplier> {
    if !(tau > 0.0) || !(nu > 0.0) {
        return Err(DeformError::InvalidMultiplier(format!("τ = {tau}, ν = {nu}")));
    }
    if samples.fit_a.is_empty() || samples.fit_b.is_empty() || samples.check_a.is_empty() || samples.check_b.is_empty() {
        return Err(DeformError::InvalidMultiplier("empty sample set".into()));
    }
    let all: Vec<C> = samples.fit_a.iter().chain(&samples.fit_b).copied().collect();
    let n = all.len() as f64;
    let center = all.iter().sum::<C>() / n;
    let scale = all.iter().map(|z| (z - center).norm()).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
    if tau == 1.0 {
        return Ok(RungeMultiplier {
            tau,
            nu,
            degree: 0,
            center,
            scale,
            hessenberg: Vec::new(),
            coefficients: vec![C::new(0.0, 0.0)],
            sup_error_a: 0.0,
            sup_error_b: 0.0,
            expr: HolomorphicExpr::real(0.0).exp(),
        });
    }
    let s: Vec<C> = all.iter().map(|z| (z - center) / scale).collect();
    let log_tau = C::new(tau.ln(), 0.0);
    let target: Vec<C> = samples
        .fit_a
        .iter()
        .map(|_| log_tau)
        .chain(samples.fit_b.iter().map(|_| C::new(0.0, 0.0)))
        .collect();
    let mut best = f64::INFINITY;
    for degree in degree_schedule(max_degree) {
        let Some(fit) = arnoldi_fit(&s, &target, degree) else {
            continue;
        };
        let mut m = RungeMultiplier {
            tau,
            nu,
            degree,
            center,
            scale,
            hessenberg: fit.hessenberg,
            coefficients: fit.coefficients,
            sup_error_a: 0.0,
            sup_error_b: 0.0,
            expr: HolomorphicExpr::real(0.0),
        };
        m.sup_error_a = samples.check_a.iter().map(|&z| (m.eval(z) - tau).norm()).fold(0.0, f64::max);
        m.sup_error_b = samples.check_b.iter().map(|&z| (m.eval(z) - 1.0).norm()).fold(0.0, f64::max);
        let worst = m.sup_error_a.max(m.sup_error_b);
        best = best.min(worst);
        if worst < nu {
            m.expr = exponent_expr(center, scale, &m.hessenberg, &m.coefficients).exp();
            return Ok(m);
        }
    }
    Err(DeformError::DegreeBudgetExceeded { max_degree, best, nu })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::complex::{Polyline, PoleExclusion, QuadratureOptions};
    use crate::planar::{Disk, PlanarRegion, SimplePolygon};
    use crate::weierstrass::{conformality_residual, metric, to_fg};
    use approx::assert_relative_eq;
    use nalgebra::Vector3;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn square() -> PlanarRegion {
        PlanarRegion::Polygon(
            SimplePolygon::new(vec![C::new(-2.0, -2.0), C::new(2.0, -2.0), C::new(2.0, 2.0), C::new(-2.0, 2.0)])
                .unwrap(),
        )
    }

    #[test]
    fn pole_factor_template_value() {
        let h = PoleFactor::new(C::new(0.0, 0.0), 0.01, I).unwrap();
        let v = h.expr().eval(C::new(0.01, 0.0)).unwrap();
        assert!((v - C::new(1.0, 1.0)).norm() < 1e-15);
        assert_eq!(h.expr().poles(), &[C::new(0.0, 0.0)]);
        assert!((h.zero() - C::new(0.0, -0.01)).norm() < 1e-18);
        assert!(h.expr().eval(h.zero()).unwrap().norm() < 1e-14);
    }

    #[test]
    fn pole_factor_rejects_real_theta() {
        assert!(PoleFactor::new(C::new(0.0, 0.0), 0.1, C::new(1.0, 0.0)).is_err());
        assert!(PoleFactor::new(C::new(0.0, 0.0), 0.1, C::new(0.0, 2.0)).is_err());
        assert!(PoleFactor::new(C::new(0.0, 0.0), 0.0, I).is_err());
    }

    #[test]
    fn identity_multiplier_changes_nothing() {
        let e = WeierstrassField::enneper(square());
        let frame = Frame::from_e3(Vector3::new(1.0, 2.0, 3.0)).unwrap();
        let out = lopez_ros(&e, &frame, &HolomorphicExpr::real(1.0)).unwrap();
        for z in [C::new(0.3, 0.1), C::new(-1.0, 0.5)] {
            let (a, b) = (e.eval(z).unwrap(), out.field.eval(z).unwrap());
            for j in 0..3 {
                assert!((a[j] - b[j]).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn constant_two_on_enneper() {
        let e = WeierstrassField::enneper(square());
        let out = lopez_ros(&e, &Frame::world(), &HolomorphicExpr::real(2.0)).unwrap();
        let fg = to_fg(&out.field, &Frame::world()).unwrap();
        let z = C::new(0.7, -0.2);
        assert!((fg.f.eval(z).unwrap() - 2.0).norm() < 1e-14);
        assert!((fg.g.unwrap().eval(z).unwrap() - z / 2.0).norm() < 1e-14);
        assert!(out.after.phi[2].ptr_eq(&out.before.phi[2]));
        assert!((out.field.eval(z).unwrap()[2] - z).norm() < 1e-15);
    }

    #[test]
    fn pole_factor_deformation_preserves_structure() {
        let e = WeierstrassField::enneper(square());
        let frame = Frame::from_e3(Vector3::new(0.3, -0.4, 0.8)).unwrap();
        let h = PoleFactor::new(C::new(0.5, 0.2), 0.05, C::from_polar(1.0, 1.1)).unwrap();
        let out = lopez_ros(&e, &frame, &h.expr()).unwrap();
        assert!(out.after.phi[2].ptr_eq(&out.before.phi[2]));
        let poles = out.field.poles();
        assert!(poles.iter().any(|&p| (p - h.p).norm() < 1e-15));
        assert!(poles.iter().any(|&p| (p - h.zero()).norm() < 1e-15));
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let samples: Vec<C> = (0..200).map(|_| C::new(rng.gen_range(-1.5..1.5), rng.gen_range(-1.5..1.5))).collect();
        assert!(conformality_residual(&out.field, &samples).unwrap() <= 1e-12);
        let before = to_fg(&e, &frame).unwrap();
        for &z in &samples {
            let f = before.f.eval(z).unwrap();
            let g = before.g.as_ref().unwrap().eval(z).unwrap();
            let hv = h.eval(z);
            let expected = 0.5 * (f * hv).norm() * (1.0 + (g / hv).norm_sqr());
            assert_relative_eq!(metric(&out.field, z).unwrap(), expected, max_relative = 1e-12);
        }
    }

    #[test]
    fn modulus_bound_on_radial_segment() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..20 {
            let p = C::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
            let theta = C::from_polar(1.0, rng.gen_range(0.1..3.0));
            let h = PoleFactor::new(p, rng.gen_range(1e-4..1e-1), theta).unwrap();
            let u = C::from_polar(1.0, rng.gen_range(0.0..std::f64::consts::TAU));
            for j in 1..=200 {
                let w = p + u * (0.1 * j as f64 / 200.0);
                assert!(h.eval(w).norm() > (theta * u.conj()).im.abs() - 1e-15);
            }
        }
    }

    #[test]
    fn factor_tends_to_one_away_from_pole() {
        let h = PoleFactor::new(C::new(0.0, 0.0), 1e-3, C::from_polar(1.0, 0.7)).unwrap();
        for j in 0..64 {
            let z = C::from_polar(0.5, j as f64 * 0.1);
            assert!((h.eval(z) - 1.0).norm() <= 1e-3 / 0.5 + 1e-15);
        }
    }

    #[test]
    fn closed_form_special_cases() {
        assert_eq!(radial_parameter(0.1, 1.0, 1.0, 0.0), 0.1);
        assert_relative_eq!(radial_parameter(0.1, 2.0, 1.0, 1.0), 0.1 / std::f64::consts::E, max_relative = 1e-15);
        assert_relative_eq!(radial_parameter(0.1, 1.0, 1.0, 1.0), 0.1 * (-2.0f64).exp(), max_relative = 1e-15);
        let p = C::new(1.0, 0.0);
        let a = locate_a(p, p + 0.1, 0.1, 2.0, C::new(0.0, 1.0), 1.0, 1.0).unwrap();
        assert_relative_eq!((a - p).norm(), 0.1 / std::f64::consts::E, max_relative = 1e-14);
        assert!(matches!(
            locate_a(p, p + 0.1, 0.1, 1e-3, C::new(1.0, 0.0), 1.0, 1.0),
            Err(DeformError::Underflow { .. })
        ));
    }

    #[test]
    fn closed_form_matches_quadrature() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let opts_excl = PoleExclusion { rel: 0.0 };
        for _ in 0..20 {
            let k = rng.gen_range(0.2..1.0);
            let f0 = rng.gen_range(1.0..5.0);
            let target: f64 = rng.gen_range(0.1..1.0);
            let delta = rng.gen_range(1e-3..0.5);
            let p = C::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
            let q = p + C::from_polar(delta, rng.gen_range(0.0..std::f64::consts::TAU));
            let a = locate_a(p, q, delta, k, C::new(f0, 0.0), target.sqrt(), 1.0).unwrap();
            let kernel = HolomorphicExpr::real(k) / (HolomorphicExpr::var() - HolomorphicExpr::constant(p));
            let path = Polyline::segment(q, a).unwrap();
            let mut opts = QuadratureOptions::with_tol(1e-12);
            opts.exclusion = opts_excl;
            let tape = crate::complex::Tape::compile(std::slice::from_ref(&kernel));
            let v = crate::complex::integrate_path_vec(&tape, &path, &opts).unwrap().values[0];
            let lhs = 0.5 * f0 * v.norm();
            assert!((lhs - target).abs() <= 1e-8 * target, "lhs {lhs} target {target}");
        }
    }

    #[test]
    fn calibration_returns_largest_admissible_k() {
        let e = WeierstrassField::enneper(square());
        let frame = Frame::from_e3(Vector3::new(1.0, 0.0, 0.0)).unwrap();
        let p = C::new(0.5, 0.0);
        let disk = PlanarRegion::Disk(Disk::new(p, 0.1).unwrap());
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let samples = disk.sample_points(200, &mut rng);
        let cal = calibrate_k(&e, p, &frame, &samples, CalibrationBudget::default(), |k| {
            Ok(vec![Constraint {
                label: "toy".into(),
                margin: 0.01 - k,
            }])
        })
        .unwrap();
        assert!(cal.k < 0.01 && 2.0 * cal.k >= 0.01);
        let err = calibrate_k(&e, p, &frame, &samples, CalibrationBudget { k_initial: 1.0, halvings: 3 }, |k| {
            Ok(vec![Constraint {
                label: "toy".into(),
                margin: 1e-6 - k,
            }])
        })
        .unwrap_err();
        assert_eq!(err, DeformError::CalibrationFailed { binding: "toy".into() });
    }

    #[test]
    fn constant_f_never_binds_quotient() {
        let plane = WeierstrassField::plane(3.0, square());
        let frame = Frame::from_e3(Vector3::new(1.0, 0.0, 0.0)).unwrap();
        let samples = vec![C::new(0.51, 0.0), C::new(0.5, 0.01)];
        let cal = calibrate_k(&plane, C::new(0.5, 0.0), &frame, &samples, CalibrationBudget::default(), |_| Ok(vec![]))
            .unwrap();
        assert_eq!(cal.k, 1.0);
        assert_eq!(cal.constraints[0].margin, 1.0);
    }

    fn disk_pair_samples(n_fit: usize, n_check: usize) -> RungeSamples {
        let circle = |c: C, r: f64, n: usize| -> Vec<C> {
            (0..n).map(|k| c + C::from_polar(r, 2.0 * std::f64::consts::PI * k as f64 / n as f64)).collect()
        };
        RungeSamples {
            fit_a: circle(C::new(-1.0, 0.0), 0.3, n_fit),
            fit_b: circle(C::new(1.0, 0.0), 0.3, n_fit),
            check_a: circle(C::new(-1.0, 0.0), 0.3, n_check),
            check_b: circle(C::new(1.0, 0.0), 0.3, n_check),
        }
    }

    #[test]
    fn unit_target_needs_no_fit() {
        let m = fit_runge_multiplier(&disk_pair_samples(20, 80), 1.0, 1e-3, 8).unwrap();
        assert_eq!(m.degree, 0);
        assert_eq!(m.expr.eval(C::new(5.0, 5.0)).unwrap(), C::new(1.0, 0.0));
    }

    #[test]
    fn separated_disks_fit_at_low_degree() {
        let s = disk_pair_samples(200, 800);
        let tau = std::f64::consts::E;
        let m = fit_runge_multiplier(&s, tau, 1e-3, 256).unwrap();
        assert!(m.degree <= 32);
        for &z in &s.check_a {
            assert!((m.expr.eval(z).unwrap() - tau).norm() < 1e-3);
            assert!((m.eval(z) - m.expr.eval(z).unwrap()).norm() < 1e-9);
        }
    }

    #[test]
    fn tiny_tolerance_exhausts_budget() {
        let err = fit_runge_multiplier(&disk_pair_samples(200, 800), 20.0, 1e-12, 8).unwrap_err();
        assert!(matches!(err, DeformError::DegreeBudgetExceeded { .. }));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn deformation_keeps_conformality(k in 1e-3f64..0.2, ang in 0.2f64..2.9, x in -1.4f64..1.4, y in -1.4f64..1.4) {
            let e = WeierstrassField::enneper(square());
            let frame = Frame::from_e3(Vector3::new(0.2, 0.9, -0.3)).unwrap();
            let h = PoleFactor::new(C::new(0.1, 0.3), k, C::from_polar(1.0, ang)).unwrap();
            let z = C::new(x, y);
            prop_assume!((z - h.p).norm() > 1e-3 && (z - h.zero()).norm() > 1e-3);
            let out = lopez_ros(&e, &frame, &h.expr()).unwrap();
            prop_assert!(conformality_residual(&out.field, &[z]).unwrap() <= 1e-12);
        }
    }
}
