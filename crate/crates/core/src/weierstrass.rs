//! Weierstrass data of conformal minimal immersions: frames, the `(f, g)`
//! view in a frame, immersion evaluation and the conformal metric.

use std::f64::consts::SQRT_2;
use std::sync::OnceLock;

use nalgebra::{Rotation3, Vector3};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::complex::{
    integrate_path_vec, ComplexError, ExprGraph, GraphError, HolomorphicExpr, Polyline, QuadratureOptions, Tape, C, I,
};
use crate::planar::{PathOracle, PlanarError, PlanarRegion};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum WeierstrassError {
    #[error("f·g² has a pole at {pole} inside the domain")]
    NotHolomorphic { pole: C },
    #[error("degenerate data: Σ|φ_j|² vanishes identically")]
    Degenerate,
    #[error("frame is degenerate for this field (f ≡ 0)")]
    DegenerateFrame,
    #[error("position {norm:e} too close to the origin to define a frame")]
    ZeroPosition { norm: f64 },
    #[error("conformality residual {residual:e} exceeds tolerance")]
    NotConformal { residual: f64 },
    #[error("frame is not orthonormal and right-handed")]
    InvalidFrame,
    #[error(transparent)]
    Complex(#[from] ComplexError),
    #[error(transparent)]
    Planar(#[from] PlanarError),
    #[error("field archive: {0}")]
    Archive(String),
}

pub type Result<T> = std::result::Result<T, WeierstrassError>;

/// Orthonormal right-handed triple in R³.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Frame {
    pub e1: Vector3<f64>,
    pub e2: Vector3<f64>,
    pub e3: Vector3<f64>,
}

impl Frame {
    pub fn world() -> Self {
        Frame {
            e1: Vector3::x(),
            e2: Vector3::y(),
            e3: Vector3::z(),
        }
    }

    pub fn new(e1: Vector3<f64>, e2: Vector3<f64>, e3: Vector3<f64>) -> Result<Self> {
        let f = Frame { e1, e2, e3 };
        if f.orthonormality_defect() > 1e-12 {
            return Err(WeierstrassError::InvalidFrame);
        }
        Ok(f)
    }

    /// Largest deviation from an orthonormal right-handed triple.
    pub fn orthonormality_defect(&self) -> f64 {
        let m = self.matrix();
        let d = (m * m.transpose() - nalgebra::Matrix3::identity()).abs().max();
        d.max((m.determinant() - 1.0).abs())
    }

    /// Frame with `e3` along `dir` and `e1` built from the world axis least
    /// aligned with `dir` (lowest index on ties).
    pub fn from_e3(dir: Vector3<f64>) -> Result<Self> {
        let norm = dir.norm();
        if !(norm > 0.0) || !norm.is_finite() {
            return Err(WeierstrassError::ZeroPosition { norm });
        }
        let e3 = dir / norm;
        let mut k = 0;
        for j in 1..3 {
            if e3[j].abs() < e3[k].abs() {
                k = j;
            }
        }
        let axis = Vector3::ith(k, 1.0);
        let e1 = (axis - e3 * e3.dot(&axis)).normalize();
        let e2 = e3.cross(&e1);
        Ok(Frame { e1, e2, e3 })
    }

    /// Rows are `e1, e2, e3`: maps world coordinates to frame coordinates.
    pub fn matrix(&self) -> nalgebra::Matrix3<f64> {
        nalgebra::Matrix3::from_rows(&[self.e1.transpose(), self.e2.transpose(), self.e3.transpose()])
    }

    /// The frame `R·S`.
    pub fn rotated(&self, r: &Rotation3<f64>) -> Frame {
        Frame {
            e1: r * self.e1,
            e2: r * self.e2,
            e3: r * self.e3,
        }
    }

    pub fn axis(&self, j: usize) -> Vector3<f64> {
        [self.e1, self.e2, self.e3][j]
    }

    /// Largest axis distance `max_j ‖e_j − e'_j‖`.
    pub fn distance(&self, other: &Frame) -> f64 {
        (0..3).map(|j| (self.axis(j) - other.axis(j)).norm()).fold(0.0, f64::max)
    }

    /// Frame coordinates of a world vector.
    pub fn coords(&self, v: &Vector3<f64>) -> Vector3<f64> {
        self.matrix() * v
    }
}

/// `Σ c_k·e_k`, skipping zero coefficients so constant data folds.
pub fn lincomb(terms: &[(C, &HolomorphicExpr)]) -> HolomorphicExpr {
    let zero = C::new(0.0, 0.0);
    let mut acc: Option<HolomorphicExpr> = None;
    for &(c, e) in terms {
        if c == zero {
            continue;
        }
        let term = e * c;
        acc = Some(match acc {
            None => term,
            Some(a) => a + term,
        });
    }
    acc.unwrap_or_else(|| HolomorphicExpr::constant(zero))
}

/// Frame-relative components `φ_{j,S} = e_j · φ`.
#[derive(Debug, Clone)]
pub struct FrameView {
    pub frame: Frame,
    pub phi: [HolomorphicExpr; 3],
}

impl FrameView {
    /// `φ_{1,S} − iφ_{2,S}`.
    pub fn f(&self) -> HolomorphicExpr {
        &self.phi[0] - &(&self.phi[1] * I)
    }

    /// `φ_{1,S} + iφ_{2,S}`, which equals `−f·g²`.
    pub fn fg2_neg(&self) -> HolomorphicExpr {
        &self.phi[0] + &(&self.phi[1] * I)
    }
}

/// The `(f, g)` view; `g = None` stands for the value ∞ of a degenerate frame.
///
/// `products` optionally carries `(f·g, f·g²)` in a form without the
/// removable singularities that `f·(φ3/f)` would declare at the zeros of f.
#[derive(Debug, Clone)]
pub struct FGPair {
    pub f: HolomorphicExpr,
    pub g: Option<HolomorphicExpr>,
    pub products: Option<(HolomorphicExpr, HolomorphicExpr)>,
    pub degenerate: bool,
}

impl FGPair {
    pub fn new(f: HolomorphicExpr, g: HolomorphicExpr) -> Self {
        FGPair {
            f,
            g: Some(g),
            products: None,
            degenerate: false,
        }
    }
}

/// Weierstrass triple in world coordinates with its domain and basepoint 0.
#[derive(Debug, Clone)]
pub struct WeierstrassField {
    pub phi: [HolomorphicExpr; 3],
    pub domain: PlanarRegion,
    pub basepoint: C,
}

fn sample_domain(domain: &PlanarRegion, n: usize) -> Vec<C> {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    domain.sample_points(n, &mut rng)
}

/// Build φ from `(f, g)` in `frame`:
/// `φ_{1,S} = ½f(1 − g²)`, `φ_{2,S} = (i/2)f(1 + g²)`, `φ_{3,S} = fg`.
pub fn from_fg(fg: &FGPair, frame: &Frame, domain: PlanarRegion) -> Result<WeierstrassField> {
    let zero = C::new(0.0, 0.0);
    if fg.f.as_constant() == Some(zero) || fg.degenerate {
        return Err(WeierstrassError::Degenerate);
    }
    let g = fg.g.as_ref().ok_or(WeierstrassError::Degenerate)?;
    let (fg1, fg2) = match &fg.products {
        Some((a, b)) => (a.clone(), b.clone()),
        None => (&fg.f * g, &fg.f * &g.powi(2)),
    };
    for &pole in fg2.poles().iter().chain(fg1.poles()).chain(fg.f.poles()) {
        if domain.in_closure(pole) {
            return Err(WeierstrassError::NotHolomorphic { pole });
        }
    }
    let half = C::new(0.5, 0.0);
    let phi_s = [
        (&fg.f - &fg2) * half,
        (&fg.f + &fg2) * (I * 0.5),
        fg1,
    ];
    let field = WeierstrassField::from_frame_components(&phi_s, frame, domain);
    let samples = sample_domain(&field.domain, 64);
    let residual = conformality_residual(&field, &samples)?;
    if residual > 1e-10 {
        return Err(WeierstrassError::NotConformal { residual });
    }
    Ok(field)
}

/// `(f, g)` of `field` in `frame`; flags the frame when f vanishes identically.
pub fn to_fg(field: &WeierstrassField, frame: &Frame) -> Result<FGPair> {
    let view = field.in_frame(frame);
    let f = view.f();
    if field.f_vanishes(&f)? {
        return Ok(FGPair {
            f: HolomorphicExpr::constant(C::new(0.0, 0.0)),
            g: None,
            products: None,
            degenerate: true,
        });
    }
    let g = view.phi[2].try_div(&f)?;
    Ok(FGPair {
        f,
        g: Some(g),
        products: Some((view.phi[2].clone(), -view.fg2_neg())),
        degenerate: false,
    })
}

/// `λ_X(z) = ‖φ(z)‖/√2`.
pub fn metric(field: &WeierstrassField, z: C) -> Result<f64> {
    Ok(field.eval(z)?.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt() / SQRT_2)
}

/// `max |Σφ_j²| / ‖φ‖²` over `samples`.
pub fn conformality_residual(field: &WeierstrassField, samples: &[C]) -> Result<f64> {
    let tape = field.tape();
    let mut regs = tape.registers();
    let mut out = [C::new(0.0, 0.0); 3];
    let mut worst = 0.0f64;
    for &z in samples {
        tape.eval_into(z, &mut regs, &mut out)?;
        let q: C = out.iter().map(|c| c * c).sum();
        let n2: f64 = out.iter().map(|c| c.norm_sqr()).sum();
        if n2 == 0.0 {
            return Err(WeierstrassError::Degenerate);
        }
        worst = worst.max(q.norm() / n2);
    }
    Ok(worst)
}

/// `X(z) = Re ∫_0^z φ` along a shortest path in the domain.
pub fn immerse(field: &WeierstrassField, z: C, tol: f64) -> Result<Vector3<f64>> {
    Immersion::new(field, QuadratureOptions::with_tol(tol)).at(z)
}

/// Frame `S(z)` with `e3 = X(z)/‖X(z)‖`.
pub fn frame_at(field: &WeierstrassField, z: C) -> Result<Frame> {
    let x = immerse(field, z, 1e-12)?;
    frame_from_position(&x)
}

pub fn frame_from_position(x: &Vector3<f64>) -> Result<Frame> {
    let norm = x.norm();
    if norm < 1e-9 {
        return Err(WeierstrassError::ZeroPosition { norm });
    }
    Frame::from_e3(*x)
}

impl WeierstrassField {
    pub fn new(phi: [HolomorphicExpr; 3], domain: PlanarRegion) -> Self {
        WeierstrassField {
            phi,
            domain,
            basepoint: C::new(0.0, 0.0),
        }
    }

    /// Plane `X(u + iv) = c·(u, v, 0)`: `φ = (c, −ic, 0)`.
    pub fn plane(c: f64, domain: PlanarRegion) -> Self {
        WeierstrassField::new(
            [
                HolomorphicExpr::real(c),
                HolomorphicExpr::constant(C::new(0.0, -c)),
                HolomorphicExpr::real(0.0),
            ],
            domain,
        )
    }

    /// Enneper data `f = 1, g = z` in the world frame.
    pub fn enneper(domain: PlanarRegion) -> Self {
        let fg = FGPair::new(HolomorphicExpr::real(1.0), HolomorphicExpr::var());
        from_fg(&fg, &Frame::world(), domain).expect("Enneper data are regular")
    }

    /// World triple from frame components: `φ = Σ φ_{j,S} e_j`.
    pub fn from_frame_components(phi_s: &[HolomorphicExpr; 3], frame: &Frame, domain: PlanarRegion) -> Self {
        let comp = |k: usize| {
            lincomb(&[
                (C::new(frame.e1[k], 0.0), &phi_s[0]),
                (C::new(frame.e2[k], 0.0), &phi_s[1]),
                (C::new(frame.e3[k], 0.0), &phi_s[2]),
            ])
        };
        WeierstrassField::new([comp(0), comp(1), comp(2)], domain)
    }

    pub fn in_frame(&self, frame: &Frame) -> FrameView {
        let comp = |e: Vector3<f64>| {
            lincomb(&[
                (C::new(e[0], 0.0), &self.phi[0]),
                (C::new(e[1], 0.0), &self.phi[1]),
                (C::new(e[2], 0.0), &self.phi[2]),
            ])
        };
        FrameView {
            frame: *frame,
            phi: [comp(frame.e1), comp(frame.e2), comp(frame.e3)],
        }
    }

    pub fn with_domain(&self, domain: PlanarRegion) -> Self {
        WeierstrassField {
            phi: self.phi.clone(),
            domain,
            basepoint: self.basepoint,
        }
    }

    pub fn tape(&self) -> Tape {
        Tape::compile(&self.phi)
    }

    pub fn eval(&self, z: C) -> Result<[C; 3]> {
        let v = self.tape().eval(z)?;
        Ok([v[0], v[1], v[2]])
    }

    /// Declared poles of all three components.
    pub fn poles(&self) -> Vec<C> {
        self.tape().poles().to_vec()
    }

    /// Whether `f` vanishes identically: structurally zero, or zero to
    /// roundoff at 16 domain samples relative to ‖φ‖.
    fn f_vanishes(&self, f: &HolomorphicExpr) -> Result<bool> {
        if let Some(c) = f.as_constant() {
            return Ok(c == C::new(0.0, 0.0));
        }
        let mut samples = sample_domain(&self.domain, 16);
        if samples.is_empty() {
            samples.push(self.basepoint);
        }
        let ftape = Tape::compile(std::slice::from_ref(f));
        let tape = self.tape();
        for &z in &samples {
            let fv = ftape.eval(z)?[0].norm();
            let scale: f64 = tape.eval(z)?.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
            if fv > 1e-13 * scale.max(f64::MIN_POSITIVE) {
                return Ok(false);
            }
        }
        Ok(true)
    }
}

/// Serialized field: the φ-triple as one shared expression graph, the
/// domain and the basepoint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldArchive {
    pub phi: ExprGraph,
    pub domain: PlanarRegion,
    pub basepoint: C,
}

impl FieldArchive {
    pub fn from_field(field: &WeierstrassField) -> Self {
        FieldArchive {
            phi: ExprGraph::from_exprs(&field.phi),
            domain: field.domain.clone(),
            basepoint: field.basepoint,
        }
    }

    pub fn to_field(&self) -> Result<WeierstrassField> {
        let e = self.phi.to_exprs().map_err(|e: GraphError| WeierstrassError::Archive(e.to_string()))?;
        let [a, b, c]: [HolomorphicExpr; 3] = e
            .try_into()
            .map_err(|v: Vec<HolomorphicExpr>| WeierstrassError::Archive(format!("{} roots, expected 3", v.len())))?;
        Ok(WeierstrassField {
            phi: [a, b, c],
            domain: self.domain.clone(),
            basepoint: self.basepoint,
        })
    }
}

/// Immersion evaluator with a compiled tape and a lazily built path oracle.
pub struct Immersion<'a> {
    field: &'a WeierstrassField,
    tape: Tape,
    opts: QuadratureOptions,
    oracle: OnceLock<std::result::Result<PathOracle, PlanarError>>,
}

impl<'a> Immersion<'a> {
    pub fn new(field: &'a WeierstrassField, opts: QuadratureOptions) -> Self {
        Immersion {
            field,
            tape: field.tape(),
            opts,
            oracle: OnceLock::new(),
        }
    }

    pub fn tape(&self) -> &Tape {
        &self.tape
    }

    /// `Re ∫_path φ`.
    pub fn along(&self, path: &Polyline) -> Result<Vector3<f64>> {
        let r = integrate_path_vec(&self.tape, path, &self.opts)?;
        Ok(Vector3::new(r.values[0].re, r.values[1].re, r.values[2].re))
    }

    /// Complex integral `∫_path φ` with its error estimate.
    pub fn along_complex(&self, path: &Polyline) -> Result<([C; 3], f64)> {
        let r = integrate_path_vec(&self.tape, path, &self.opts)?;
        Ok(([r.values[0], r.values[1], r.values[2]], r.error))
    }

    /// Path from the basepoint to `z`: the straight segment when it lies in
    /// the domain, otherwise a shortest path.
    pub fn path_to(&self, z: C) -> Result<Option<Polyline>> {
        let b = self.field.basepoint;
        if z == b {
            return Ok(None);
        }
        if self.field.domain.contains_segment(b, z) {
            return Ok(Some(Polyline::segment(b, z)?));
        }
        let oracle = self
            .oracle
            .get_or_init(|| PathOracle::new(&self.field.domain))
            .as_ref()
            .map_err(|e| e.clone())?;
        Ok(oracle.path_to(z)?.0)
    }

    pub fn at(&self, z: C) -> Result<Vector3<f64>> {
        match self.path_to(z)? {
            None => Ok(Vector3::zeros()),
            Some(path) => self.along(&path),
        }
    }
}
