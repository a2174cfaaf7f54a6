//! Complex expressions over one variable, their compiled evaluation, and
//! certified contour integration along polylines.

mod expr;
mod poly;
mod polyline;
mod quadrature;
mod serial;
mod tape;

pub use expr::{combine, CombineOp, HolomorphicExpr, NodeKind};
pub use poly::{Poly, Rational};
pub use polyline::{point_segment_distance, Polyline};
pub use serial::{ExprGraph, GraphError, SerialNode};
pub use quadrature::{
    integrate_path, integrate_path_vec, log_kernel_integral, QuadratureOptions, QuadratureResult,
    VecQuadratureResult,
};
pub use tape::{PoleExclusion, Tape};

use num_complex::Complex64;
use thiserror::Error;

/// Complex scalar used throughout the crate.
pub type C = Complex64;

pub const I: C = C::new(0.0, 1.0);

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ComplexError {
    #[error("evaluation point {z} lies within the exclusion radius of pole {pole}")]
    PoleHit { pole: C, z: C },
    #[error("non-finite value at {z} (undeclared singularity)")]
    NonFinite { z: C },
    #[error("pole {pole} lies on the integration path")]
    PoleOnPath { pole: C },
    #[error("quadrature tolerance {requested:e} not met: estimate {achieved:e} after {subdivisions} subdivisions")]
    ToleranceNotMet {
        requested: f64,
        achieved: f64,
        subdivisions: usize,
    },
    #[error("division by the zero expression")]
    DivisionByZeroExpr,
    #[error("operation requires a second operand")]
    MissingOperand,
    #[error("empty sample set")]
    EmptySampleSet,
    #[error("invalid polyline: {0}")]
    InvalidPolyline(String),
    #[error("tolerance must be positive, got {0}")]
    InvalidTolerance(f64),
}

pub type Result<T> = std::result::Result<T, ComplexError>;

/// Largest modulus of `expr` over `samples`.
///
/// This is a lower bound for the true supremum; density of the sample set is
/// the caller's responsibility.
pub fn sup_modulus(expr: &HolomorphicExpr, samples: &[C]) -> Result<f64> {
    if samples.is_empty() {
        return Err(ComplexError::EmptySampleSet);
    }
    let tape = Tape::compile(std::slice::from_ref(expr));
    let mut best = 0.0f64;
    let mut regs = tape.registers();
    let mut out = [C::new(0.0, 0.0)];
    for &z in samples {
        tape.eval_into(z, &mut regs, &mut out)?;
        best = best.max(out[0].norm());
    }
    Ok(best)
}

/// Evaluate `expr` at `z` with the default pole exclusion.
pub fn eval(expr: &HolomorphicExpr, z: C) -> Result<C> {
    expr.eval(z)
}
