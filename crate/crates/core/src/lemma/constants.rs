use serde::{Deserialize, Serialize};

use super::LemmaError;

/// `λ`, `s′` and the current `ε0` of a lemma run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Constants {
    pub lambda: f64,
    pub s_prime: f64,
    pub eps0: f64,
}

/// Slack of the 1.a inequality
/// `λ(r+s) − 2λ³√(λ⁴(r+s)² − r²) > r − 2√((r+s)² − r²)`.
pub fn lambda_margin(lambda: f64, r: f64, s: f64) -> f64 {
    let rs = r + s;
    let lhs = lambda * rs - 2.0 * lambda.powi(3) * (lambda.powi(4) * rs * rs - r * r).sqrt();
    let rhs = r - 2.0 * (rs * rs - r * r).sqrt();
    lhs - rhs
}

/// `s′ = √(λ⁴(r+s)² − r²)`.
pub fn s_prime(lambda: f64, r: f64, s: f64) -> f64 {
    let rs = r + s;
    (lambda.powi(4) * rs * rs - r * r).sqrt()
}

/// Floor of conclusion (d): `r − 3√(sr)`.
pub fn d_floor(r: f64, s: f64) -> f64 {
    r - 3.0 * (s * r).sqrt()
}

/// λ strictly inside the feasible interval of 1.a.
///
/// The margin equals `s > 0` at λ = 1 and decreases in λ, so bisection on
/// (1, 2^{1/3}) finds the upper end λ*; the midpoint of (1, λ*) is returned
/// so that 1.a holds with room.
pub fn choose_lambda(r: f64, s: f64) -> Result<f64, LemmaError> {
    if !(r > 0.0 && s > 0.0) {
        return Err(LemmaError::NoFeasibleLambda);
    }
    let hi_bound = 2f64.cbrt();
    let (mut lo, mut hi) = (1.0f64, hi_bound);
    if lambda_margin(hi, r, s) > 0.0 {
        lo = hi;
    } else {
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if lambda_margin(mid, r, s) > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
    }
    let lambda = 1.0 + 0.5 * (lo - 1.0);
    if !(lambda > 1.0) || !(lambda.powi(3) < 2.0) || !(lambda_margin(lambda, r, s) > 0.0) {
        return Err(LemmaError::NoFeasibleLambda);
    }
    Ok(lambda)
}

/// The explicit ε0 chains of the construction, each as (label, slack).
///
/// These are the inequalities the argument uses to pass from the labelled
/// properties to (a)–(d); all must be positive before a run starts.
pub fn eps0_chains(r: f64, s: f64, b1: f64, lambda: f64, sp: f64, eps0: f64) -> Vec<(&'static str, f64)> {
    let rs = r + s;
    let floor = d_floor(r, s);
    let l2 = lambda * lambda;
    let l3 = l2 * lambda;
    let p3 = eps0 * (4.0 * l2 * sp + 17.0);
    vec![
        ("1.c", 1.0 - eps0),
        ("(b) budget", b1 - 2.0 * eps0),
        ("(P4) lateral", lambda * sp - 2.0 * eps0 - sp),
        (
            "(P4) norm",
            (lambda.powi(4) * rs * rs - 4.0 * eps0 * (r - eps0)).sqrt() - eps0 - lambda * rs,
        ),
        ("lateral growth", l3 * sp - l2 * sp - 2.0 * eps0),
        ("tip norm on Q_i", lambda * rs - 5.0 * eps0 - rs),
        ("tip norm on Q_{i-1}", lambda * rs - p3 - 5.0 * eps0 - rs),
        ("tip norm off tubes", lambda * rs - 4.0 * eps0 - rs),
        ("tube sweep", 1.0 - 2.0 * eps0),
        ("(d) case 1", r - 2.0 * eps0 - floor),
        ("(d) case 2", r - 4.0 * eps0 - floor),
        ("(d) case 3", r - 2.0 * (rs * rs - r * r).sqrt() - 12.0 * eps0 - floor),
        ("(d) case 4", lambda * rs - p3 - 2.0 * l3 * sp - 12.0 * eps0 - floor),
        ("(d) case 5", lambda * rs - l3 * sp - 10.0 * eps0 - floor),
    ]
}

/// λ, s′ and the largest ε0 = ε_start·2^{−j} (j ≤ 200) satisfying every
/// chain of [`eps0_chains`], with ε_start = min(1, b1/10) (halved once if it
/// equals 1, as ε0 < 1 is required).
pub fn choose_constants(r: f64, s: f64, b1: f64, b2: f64) -> Result<Constants, LemmaError> {
    if !(s > 0.0 && s < r / 100.0) {
        return Err(LemmaError::InvalidConfig(format!("need 0 < s < r/100, got r = {r}, s = {s}")));
    }
    if !(b1 > 0.0 && b2 > 0.0) {
        return Err(LemmaError::InvalidConfig(format!("need b1, b2 > 0, got {b1}, {b2}")));
    }
    let lambda = choose_lambda(r, s)?;
    let sp = s_prime(lambda, r, s);
    let mut eps0 = (b1 / 10.0).min(1.0);
    if eps0 >= 1.0 {
        eps0 *= 0.5;
    }
    for _ in 0..=200 {
        if eps0_chains(r, s, b1, lambda, sp, eps0).iter().all(|(_, m)| *m > 0.0) {
            return Ok(Constants {
                lambda,
                s_prime: sp,
                eps0,
            });
        }
        eps0 *= 0.5;
    }
    Err(LemmaError::NoFeasibleEps0)
}
