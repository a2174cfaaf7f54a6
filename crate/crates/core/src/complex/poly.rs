use super::C;

/// Dense polynomial, coefficients from lowest to highest degree.
#[derive(Debug, Clone, PartialEq)]
pub struct Poly(pub Vec<C>);

impl Poly {
    pub fn constant(c: C) -> Self {
        Poly(vec![c]).trimmed()
    }

    pub fn var() -> Self {
        Poly(vec![C::new(0.0, 0.0), C::new(1.0, 0.0)])
    }

    fn trimmed(mut self) -> Self {
        while self.0.len() > 1 && *self.0.last().unwrap() == C::new(0.0, 0.0) {
            self.0.pop();
        }
        if self.0.is_empty() {
            self.0.push(C::new(0.0, 0.0));
        }
        self
    }

    pub fn degree(&self) -> usize {
        self.0.len() - 1
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|c| *c == C::new(0.0, 0.0))
    }

    pub fn eval(&self, z: C) -> C {
        self.0.iter().rev().fold(C::new(0.0, 0.0), |acc, c| acc * z + c)
    }

    pub fn add(&self, other: &Poly) -> Poly {
        let n = self.0.len().max(other.0.len());
        let mut out = vec![C::new(0.0, 0.0); n];
        for (i, c) in self.0.iter().enumerate() {
            out[i] += c;
        }
        for (i, c) in other.0.iter().enumerate() {
            out[i] += c;
        }
        Poly(out).trimmed()
    }

    pub fn mul(&self, other: &Poly) -> Poly {
        let mut out = vec![C::new(0.0, 0.0); self.0.len() + other.0.len() - 1];
        for (i, a) in self.0.iter().enumerate() {
            for (j, b) in other.0.iter().enumerate() {
                out[i + j] += a * b;
            }
        }
        Poly(out).trimmed()
    }

    pub fn scale(&self, c: C) -> Poly {
        Poly(self.0.iter().map(|a| a * c).collect()).trimmed()
    }

    /// Roots for degree at most 2; `None` for higher degree or the zero polynomial.
    pub fn roots(&self) -> Option<Vec<C>> {
        if self.is_zero() {
            return None;
        }
        match self.degree() {
            0 => Some(Vec::new()),
            1 => Some(vec![-self.0[0] / self.0[1]]),
            2 => {
                let (c, b, a) = (self.0[0], self.0[1], self.0[2]);
                let disc = (b * b - 4.0 * a * c).sqrt();
                // Choose the sign that avoids cancellation, then use Vieta.
                let q = if (b.conj() * disc).re >= 0.0 {
                    -0.5 * (b + disc)
                } else {
                    -0.5 * (b - disc)
                };
                if q == C::new(0.0, 0.0) {
                    return Some(vec![C::new(0.0, 0.0), C::new(0.0, 0.0)]);
                }
                Some(vec![q / a, c / q])
            }
            _ => None,
        }
    }
}

/// Quotient of two polynomials; denominator never the zero polynomial.
#[derive(Debug, Clone, PartialEq)]
pub struct Rational {
    pub num: Poly,
    pub den: Poly,
}

/// Highest degree tracked for the rational form of an expression node.
pub(crate) const MAX_RATIONAL_DEGREE: usize = 4;

impl Rational {
    pub fn constant(c: C) -> Self {
        Rational {
            num: Poly::constant(c),
            den: Poly::constant(C::new(1.0, 0.0)),
        }
    }

    pub fn var() -> Self {
        Rational {
            num: Poly::var(),
            den: Poly::constant(C::new(1.0, 0.0)),
        }
    }

    fn capped(self) -> Option<Self> {
        if self.num.degree() > MAX_RATIONAL_DEGREE || self.den.degree() > MAX_RATIONAL_DEGREE {
            None
        } else {
            Some(self)
        }
    }

    pub fn as_constant(&self) -> Option<C> {
        if self.num.degree() == 0 && self.den.degree() == 0 {
            Some(self.num.0[0] / self.den.0[0])
        } else {
            None
        }
    }

    pub fn is_zero(&self) -> bool {
        self.num.is_zero()
    }

    pub fn add(&self, o: &Rational) -> Option<Rational> {
        if self.den == o.den {
            return Rational {
                num: self.num.add(&o.num),
                den: self.den.clone(),
            }
            .capped();
        }
        Rational {
            num: self.num.mul(&o.den).add(&o.num.mul(&self.den)),
            den: self.den.mul(&o.den),
        }
        .capped()
    }

    pub fn mul(&self, o: &Rational) -> Option<Rational> {
        Rational {
            num: self.num.mul(&o.num),
            den: self.den.mul(&o.den),
        }
        .capped()
    }

    pub fn div(&self, o: &Rational) -> Option<Rational> {
        if o.is_zero() {
            return None;
        }
        Rational {
            num: self.num.mul(&o.den),
            den: self.den.mul(&o.num),
        }
        .capped()
    }

    pub fn powi(&self, k: i32) -> Option<Rational> {
        let base = if k < 0 {
            Rational::constant(C::new(1.0, 0.0)).div(self)?
        } else {
            self.clone()
        };
        let mut out = Rational::constant(C::new(1.0, 0.0));
        for _ in 0..k.unsigned_abs() {
            out = out.mul(&base)?;
        }
        Some(out)
    }

    pub fn compose(&self, inner: &Rational) -> Option<Rational> {
        // Homogenise: num(u/v) v^d / den(u/v) v^d with d the larger degree.
        let d = self.num.degree().max(self.den.degree());
        let hom = |p: &Poly| -> Poly {
            let mut acc = Poly::constant(C::new(0.0, 0.0));
            for (i, c) in p.0.iter().enumerate() {
                let mut term = Poly::constant(*c);
                for _ in 0..i {
                    term = term.mul(&inner.num);
                }
                for _ in i..d {
                    term = term.mul(&inner.den);
                }
                acc = acc.add(&term);
            }
            acc
        };
        let den = hom(&self.den);
        if den.is_zero() {
            return None;
        }
        Rational {
            num: hom(&self.num),
            den,
        }
        .capped()
    }

    /// Zeros of the denominator that are not cancelled by numerator zeros.
    pub fn poles(&self) -> Option<Vec<C>> {
        let dr = self.den.roots()?;
        let nr = self.num.roots().unwrap_or_default();
        Some(uncancelled(&dr, &nr))
    }

    /// Zeros of the numerator that are not cancelled by denominator zeros.
    pub fn zeros(&self) -> Option<Vec<C>> {
        let nr = self.num.roots()?;
        let dr = self.den.roots().unwrap_or_default();
        Some(uncancelled(&nr, &dr))
    }

    pub fn eval(&self, z: C) -> C {
        self.num.eval(z) / self.den.eval(z)
    }
}

fn uncancelled(roots: &[C], against: &[C]) -> Vec<C> {
    let mut used = vec![false; against.len()];
    let mut out = Vec::new();
    for r in roots {
        let tol = 1e-12 * r.norm().max(1.0);
        let hit = against
            .iter()
            .enumerate()
            .find(|(j, a)| !used[*j] && (*a - r).norm() <= tol);
        match hit {
            Some((j, _)) => used[j] = true,
            None => out.push(*r),
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadratic_roots_match_factorisation() {
        let a = C::new(1.0, 2.0);
        let b = C::new(-3.0, 0.5);
        let p = Poly(vec![-a, C::new(1.0, 0.0)]).mul(&Poly(vec![-b, C::new(1.0, 0.0)]));
        let mut r = p.roots().unwrap();
        r.sort_by(|x, y| x.re.partial_cmp(&y.re).unwrap());
        assert!((r[0] - b).norm() < 1e-14);
        assert!((r[1] - a).norm() < 1e-14);
    }

    #[test]
    fn cancellation_drops_common_roots() {
        let zp = Rational::var().add(&Rational::constant(C::new(-2.0, 0.0))).unwrap();
        let q = zp.div(&zp).unwrap();
        assert!(q.poles().unwrap().is_empty());
        assert!(q.zeros().unwrap().is_empty());
    }

    #[test]
    fn degree_cap_returns_none() {
        let z = Rational::var();
        assert!(z.powi(4).is_some());
        assert!(z.powi(5).is_none());
    }
}
