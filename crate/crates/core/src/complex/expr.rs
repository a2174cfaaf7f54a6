use std::fmt;
use std::ops::{Add, Div, Mul, Neg, Sub};
use std::sync::Arc;

use super::poly::Rational;
use super::tape::{PoleExclusion, Tape};
use super::{ComplexError, Result, C};

/// Shape of one expression node.
#[derive(Debug, Clone)]
pub enum NodeKind {
    Const(C),
    Var,
    Sum(HolomorphicExpr, HolomorphicExpr),
    Product(HolomorphicExpr, HolomorphicExpr),
    Quotient(HolomorphicExpr, HolomorphicExpr),
    Power(HolomorphicExpr, i32),
    Exp(HolomorphicExpr),
    /// `outer(inner(z))`.
    Compose(HolomorphicExpr, HolomorphicExpr),
}

#[derive(Debug)]
pub(crate) struct Node {
    pub(crate) kind: NodeKind,
    poles: Arc<[C]>,
    zeros: Arc<[C]>,
    rational: Option<Rational>,
}

/// Immutable, shareable expression in one complex variable.
///
/// Each node carries the set of poles it declares (points where evaluation is
/// refused) and a set of known zeros used to propagate poles through
/// quotients. Nodes whose value is a rational function of small degree also
/// keep that rational form, so the poles of every pole factor and its
/// reciprocal are exact.
#[derive(Clone)]
pub struct HolomorphicExpr(pub(crate) Arc<Node>);

impl fmt::Debug for HolomorphicExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.0.kind {
            NodeKind::Const(c) => write!(f, "Const({c})"),
            NodeKind::Var => write!(f, "z"),
            NodeKind::Sum(a, b) => write!(f, "({a:?} + {b:?})"),
            NodeKind::Product(a, b) => write!(f, "({a:?} * {b:?})"),
            NodeKind::Quotient(a, b) => write!(f, "({a:?} / {b:?})"),
            NodeKind::Power(a, k) => write!(f, "({a:?})^{k}"),
            NodeKind::Exp(a) => write!(f, "exp({a:?})"),
            NodeKind::Compose(a, b) => write!(f, "{a:?}∘{b:?}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CombineOp {
    Add,
    Sub,
    Mul,
    Div,
    /// Integer power; the exponent is taken from the constant second operand.
    Pow(i32),
    Exp,
    Compose,
}

impl Drop for Node {
    // Iterative teardown so long chains of nodes do not exhaust the stack.
    fn drop(&mut self) {
        let mut stack = Vec::new();
        take_children(&mut self.kind, &mut stack);
        while let Some(e) = stack.pop() {
            if let Ok(mut node) = Arc::try_unwrap(e.0) {
                take_children(&mut node.kind, &mut stack);
            }
        }
    }
}

fn take_children(kind: &mut NodeKind, stack: &mut Vec<HolomorphicExpr>) {
    match std::mem::replace(kind, NodeKind::Var) {
        NodeKind::Const(_) | NodeKind::Var => {}
        NodeKind::Sum(a, b)
        | NodeKind::Product(a, b)
        | NodeKind::Quotient(a, b)
        | NodeKind::Compose(a, b) => {
            stack.push(a);
            stack.push(b);
        }
        NodeKind::Power(a, _) | NodeKind::Exp(a) => stack.push(a),
    }
}

fn empty() -> Arc<[C]> {
    Arc::from(Vec::<C>::new())
}

fn union(a: &Arc<[C]>, b: &Arc<[C]>) -> Arc<[C]> {
    if b.is_empty() {
        return a.clone();
    }
    if a.is_empty() {
        return b.clone();
    }
    let mut v: Vec<C> = a.iter().chain(b.iter()).copied().collect();
    v.sort_by(|x, y| {
        x.re.partial_cmp(&y.re)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(x.im.partial_cmp(&y.im).unwrap_or(std::cmp::Ordering::Equal))
    });
    v.dedup();
    Arc::from(v)
}

impl HolomorphicExpr {
    pub(crate) fn from_kind(kind: NodeKind) -> Self {
        let rational = match &kind {
            NodeKind::Const(c) => Some(Rational::constant(*c)),
            NodeKind::Var => Some(Rational::var()),
            NodeKind::Sum(a, b) => both(a, b).and_then(|(x, y)| x.add(y)),
            NodeKind::Product(a, b) => both(a, b).and_then(|(x, y)| x.mul(y)),
            NodeKind::Quotient(a, b) => both(a, b).and_then(|(x, y)| x.div(y)),
            NodeKind::Power(a, k) => a.0.rational.as_ref().and_then(|x| x.powi(*k)),
            NodeKind::Exp(a) => a
                .0
                .rational
                .as_ref()
                .and_then(|x| x.as_constant())
                .map(|c| Rational::constant(c.exp())),
            NodeKind::Compose(o, i) => both(o, i).and_then(|(x, y)| x.compose(y)),
        };
        let (poles, zeros) = match (&kind, rational.as_ref().and_then(|r| Some((r.poles()?, r.zeros())))) {
            (_, Some((p, z))) => (Arc::from(p), z.map(Arc::from).unwrap_or_else(empty)),
            (NodeKind::Const(_), None) | (NodeKind::Var, None) => (empty(), empty()),
            (NodeKind::Sum(a, b), None) => (union(&a.0.poles, &b.0.poles), empty()),
            (NodeKind::Product(a, b), None) => (
                union(&a.0.poles, &b.0.poles),
                union(&a.0.zeros, &b.0.zeros),
            ),
            (NodeKind::Quotient(a, b), None) => (
                union(&a.0.poles, &b.0.zeros),
                union(&a.0.zeros, &b.0.poles),
            ),
            (NodeKind::Power(a, k), None) => {
                if *k >= 0 {
                    (a.0.poles.clone(), a.0.zeros.clone())
                } else {
                    (a.0.zeros.clone(), a.0.poles.clone())
                }
            }
            (NodeKind::Exp(a), None) => (a.0.poles.clone(), empty()),
            (NodeKind::Compose(o, i), None) => (union(&i.0.poles, &preimages(&o.0.poles, i)), empty()),
        };
        HolomorphicExpr(Arc::new(Node {
            kind,
            poles,
            zeros,
            rational,
        }))
    }

    pub fn constant(c: C) -> Self {
        Self::from_kind(NodeKind::Const(c))
    }

    pub fn real(x: f64) -> Self {
        Self::constant(C::new(x, 0.0))
    }

    pub fn var() -> Self {
        Self::from_kind(NodeKind::Var)
    }

    pub fn kind(&self) -> &NodeKind {
        &self.0.kind
    }

    /// Declared poles of this expression.
    pub fn poles(&self) -> &[C] {
        &self.0.poles
    }

    /// Known zeros (not necessarily all zeros).
    pub fn known_zeros(&self) -> &[C] {
        &self.0.zeros
    }

    /// Exact rational form when this node is a rational function of small degree.
    pub fn as_rational(&self) -> Option<&Rational> {
        self.0.rational.as_ref()
    }

    pub fn as_constant(&self) -> Option<C> {
        match &self.0.kind {
            NodeKind::Const(c) => Some(*c),
            _ => None,
        }
    }

    /// Structurally identical node (same allocation).
    pub fn ptr_eq(&self, other: &HolomorphicExpr) -> bool {
        Arc::ptr_eq(&self.0, &other.0)
    }

    pub(crate) fn node_id(&self) -> usize {
        Arc::as_ptr(&self.0) as usize
    }

    fn is_identically_zero(&self) -> bool {
        self.0.rational.as_ref().is_some_and(|r| r.is_zero())
    }

    pub fn exp(&self) -> Self {
        if let Some(c) = self.as_constant() {
            return Self::constant(c.exp());
        }
        Self::from_kind(NodeKind::Exp(self.clone()))
    }

    pub fn powi(&self, k: i32) -> Self {
        match k {
            0 => Self::real(1.0),
            1 => self.clone(),
            _ => Self::from_kind(NodeKind::Power(self.clone(), k)),
        }
    }

    /// `self(inner(z))`.
    pub fn compose(&self, inner: &HolomorphicExpr) -> Self {
        Self::from_kind(NodeKind::Compose(self.clone(), inner.clone()))
    }

    pub fn try_div(&self, other: &HolomorphicExpr) -> Result<Self> {
        if other.is_identically_zero() {
            return Err(ComplexError::DivisionByZeroExpr);
        }
        if other.as_constant() == Some(C::new(1.0, 0.0)) {
            return Ok(self.clone());
        }
        Ok(Self::from_kind(NodeKind::Quotient(self.clone(), other.clone())))
    }

    pub fn eval(&self, z: C) -> Result<C> {
        self.eval_with(z, PoleExclusion::default())
    }

    pub fn eval_with(&self, z: C, exclusion: PoleExclusion) -> Result<C> {
        let tape = Tape::compile(std::slice::from_ref(self)).with_exclusion(exclusion);
        Ok(tape.eval(z)?[0])
    }

    /// Number of distinct nodes reachable from this root.
    pub fn node_count(&self) -> usize {
        Tape::compile(std::slice::from_ref(self)).len()
    }
}

fn both<'a>(a: &'a HolomorphicExpr, b: &'a HolomorphicExpr) -> Option<(&'a Rational, &'a Rational)> {
    Some((a.0.rational.as_ref()?, b.0.rational.as_ref()?))
}

/// Points where a rational `inner` hits one of `targets`; only for degree ≤ 2.
fn preimages(targets: &[C], inner: &HolomorphicExpr) -> Arc<[C]> {
    let Some(r) = inner.as_rational() else {
        return empty();
    };
    let mut out = Vec::new();
    for t in targets {
        let p = r.num.add(&r.den.scale(-t));
        if let Some(roots) = p.roots() {
            out.extend(roots);
        }
    }
    Arc::from(out)
}

/// Build a new expression from `a` (and `b` for binary operations).
pub fn combine(op: CombineOp, a: &HolomorphicExpr, b: Option<&HolomorphicExpr>) -> Result<HolomorphicExpr> {
    let need = || b.ok_or(ComplexError::MissingOperand);
    Ok(match op {
        CombineOp::Add => a + need()?,
        CombineOp::Sub => a - need()?,
        CombineOp::Mul => a * need()?,
        CombineOp::Div => a.try_div(need()?)?,
        CombineOp::Pow(k) => a.powi(k),
        CombineOp::Exp => a.exp(),
        CombineOp::Compose => a.compose(need()?),
    })
}

fn add(a: &HolomorphicExpr, b: &HolomorphicExpr) -> HolomorphicExpr {
    match (a.as_constant(), b.as_constant()) {
        (Some(x), Some(y)) => HolomorphicExpr::constant(x + y),
        (Some(x), None) if x == C::new(0.0, 0.0) => b.clone(),
        (None, Some(y)) if y == C::new(0.0, 0.0) => a.clone(),
        _ => HolomorphicExpr::from_kind(NodeKind::Sum(a.clone(), b.clone())),
    }
}

fn mul(a: &HolomorphicExpr, b: &HolomorphicExpr) -> HolomorphicExpr {
    let one = C::new(1.0, 0.0);
    match (a.as_constant(), b.as_constant()) {
        (Some(x), Some(y)) => HolomorphicExpr::constant(x * y),
        (Some(x), None) if x == one => b.clone(),
        (None, Some(y)) if y == one => a.clone(),
        _ => HolomorphicExpr::from_kind(NodeKind::Product(a.clone(), b.clone())),
    }
}

impl Add for &HolomorphicExpr {
    type Output = HolomorphicExpr;
    fn add(self, rhs: &HolomorphicExpr) -> HolomorphicExpr {
        add(self, rhs)
    }
}

impl Add for HolomorphicExpr {
    type Output = HolomorphicExpr;
    fn add(self, rhs: HolomorphicExpr) -> HolomorphicExpr {
        add(&self, &rhs)
    }
}

impl Sub for &HolomorphicExpr {
    type Output = HolomorphicExpr;
    fn sub(self, rhs: &HolomorphicExpr) -> HolomorphicExpr {
        add(self, &-rhs)
    }
}

impl Sub for HolomorphicExpr {
    type Output = HolomorphicExpr;
    fn sub(self, rhs: HolomorphicExpr) -> HolomorphicExpr {
        &self - &rhs
    }
}

impl Mul for &HolomorphicExpr {
    type Output = HolomorphicExpr;
    fn mul(self, rhs: &HolomorphicExpr) -> HolomorphicExpr {
        mul(self, rhs)
    }
}

impl Mul for HolomorphicExpr {
    type Output = HolomorphicExpr;
    fn mul(self, rhs: HolomorphicExpr) -> HolomorphicExpr {
        mul(&self, &rhs)
    }
}

impl Mul<C> for &HolomorphicExpr {
    type Output = HolomorphicExpr;
    fn mul(self, rhs: C) -> HolomorphicExpr {
        mul(&HolomorphicExpr::constant(rhs), self)
    }
}

impl Mul<C> for HolomorphicExpr {
    type Output = HolomorphicExpr;
    fn mul(self, rhs: C) -> HolomorphicExpr {
        &self * rhs
    }
}

/// Panics on division by the zero expression; use [`HolomorphicExpr::try_div`]
/// when the divisor is not known to be nonzero.
impl Div for &HolomorphicExpr {
    type Output = HolomorphicExpr;
    fn div(self, rhs: &HolomorphicExpr) -> HolomorphicExpr {
        self.try_div(rhs).expect("division by the zero expression")
    }
}

impl Div for HolomorphicExpr {
    type Output = HolomorphicExpr;
    fn div(self, rhs: HolomorphicExpr) -> HolomorphicExpr {
        &self / &rhs
    }
}

impl Neg for &HolomorphicExpr {
    type Output = HolomorphicExpr;
    fn neg(self) -> HolomorphicExpr {
        self * C::new(-1.0, 0.0)
    }
}

impl Neg for HolomorphicExpr {
    type Output = HolomorphicExpr;
    fn neg(self) -> HolomorphicExpr {
        -&self
    }
}
