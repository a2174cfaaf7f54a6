use serde::{Deserialize, Serialize};

use super::{ComplexError, Result, C};

/// Open or closed chain of straight segments in the plane.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<C>", into = "Vec<C>")]
pub struct Polyline {
    vertices: Vec<C>,
    length: f64,
}

impl TryFrom<Vec<C>> for Polyline {
    type Error = ComplexError;
    fn try_from(v: Vec<C>) -> Result<Self> {
        Polyline::new(v)
    }
}

impl From<Polyline> for Vec<C> {
    fn from(p: Polyline) -> Vec<C> {
        p.vertices
    }
}

impl Polyline {
    pub fn new(vertices: Vec<C>) -> Result<Self> {
        if vertices.len() < 2 {
            return Err(ComplexError::InvalidPolyline(format!(
                "need at least 2 vertices, got {}",
                vertices.len()
            )));
        }
        if vertices.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
            return Err(ComplexError::InvalidPolyline("non-finite vertex".into()));
        }
        let mut length = 0.0;
        for (i, w) in vertices.windows(2).enumerate() {
            if w[0] == w[1] {
                return Err(ComplexError::InvalidPolyline(format!(
                    "vertices {i} and {} coincide",
                    i + 1
                )));
            }
            length += (w[1] - w[0]).norm();
        }
        Ok(Polyline { vertices, length })
    }

    /// Drops consecutive duplicates before building; `None` if fewer than two
    /// distinct vertices remain.
    pub fn from_points_dedup(points: impl IntoIterator<Item = C>) -> Option<Self> {
        let mut v: Vec<C> = Vec::new();
        for p in points {
            if v.last() != Some(&p) {
                v.push(p);
            }
        }
        Polyline::new(v).ok()
    }

    pub fn segment(a: C, b: C) -> Result<Self> {
        Polyline::new(vec![a, b])
    }

    pub fn vertices(&self) -> &[C] {
        &self.vertices
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn start(&self) -> C {
        self.vertices[0]
    }

    pub fn end(&self) -> C {
        *self.vertices.last().unwrap()
    }

    pub fn segments(&self) -> impl Iterator<Item = (C, C)> + '_ {
        self.vertices.windows(2).map(|w| (w[0], w[1]))
    }

    pub fn is_closed(&self) -> bool {
        self.start() == self.end()
    }

    pub fn reversed(&self) -> Polyline {
        let mut v = self.vertices.clone();
        v.reverse();
        Polyline {
            vertices: v,
            length: self.length,
        }
    }

    /// This path followed by `other`; the shared endpoint is kept once.
    pub fn concat(&self, other: &Polyline) -> Polyline {
        let mut v = self.vertices.clone();
        let skip = usize::from(self.end() == other.start());
        v.extend_from_slice(&other.vertices[skip..]);
        Polyline::new(v).expect("concatenation of valid polylines")
    }

    /// Point at arc length `s` from the start, clamped to the path.
    pub fn point_at(&self, s: f64) -> C {
        let mut left = s.max(0.0);
        for (a, b) in self.segments() {
            let l = (b - a).norm();
            if left <= l {
                return a + (b - a) * (left / l);
            }
            left -= l;
        }
        self.end()
    }

    /// Split at arc length `s` into two polylines; `None` if `s` is not
    /// strictly inside the path.
    pub fn split_at(&self, s: f64) -> Option<(Polyline, Polyline)> {
        if s <= 0.0 || s >= self.length {
            return None;
        }
        let mut left = s;
        for (i, (a, b)) in self.segments().enumerate() {
            let l = (b - a).norm();
            if left < l {
                let m = a + (b - a) * (left / l);
                let mut first: Vec<C> = self.vertices[..=i].to_vec();
                let mut second: Vec<C> = self.vertices[i + 1..].to_vec();
                if m != a {
                    first.push(m);
                }
                if m != b {
                    second.insert(0, m);
                }
                return Some((Polyline::new(first).ok()?, Polyline::new(second).ok()?));
            }
            left -= l;
        }
        None
    }

    /// Points spaced at most `h` apart along the path, including all vertices.
    pub fn sample(&self, h: f64) -> Vec<C> {
        let mut out = vec![self.start()];
        for (a, b) in self.segments() {
            let n = ((b - a).norm() / h).ceil().max(1.0) as usize;
            for k in 1..=n {
                out.push(a + (b - a) * (k as f64 / n as f64));
            }
        }
        out
    }

    /// Euclidean distance from `z` to the path.
    pub fn distance(&self, z: C) -> f64 {
        self.segments()
            .map(|(a, b)| point_segment_distance(z, a, b))
            .fold(f64::INFINITY, f64::min)
    }
}

pub fn point_segment_distance(z: C, a: C, b: C) -> f64 {
    let d = b - a;
    let len2 = d.norm_sqr();
    if len2 == 0.0 {
        return (z - a).norm();
    }
    let t = (((z - a) * d.conj()).re / len2).clamp(0.0, 1.0);
    (z - (a + d * t)).norm()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_degenerate_input() {
        assert!(Polyline::new(vec![C::new(0.0, 0.0)]).is_err());
        assert!(Polyline::new(vec![C::new(0.0, 0.0), C::new(0.0, 0.0)]).is_err());
    }

    #[test]
    fn length_and_split() {
        let p = Polyline::new(vec![
            C::new(0.0, 0.0),
            C::new(1.0, 0.0),
            C::new(1.0, 1.0),
        ])
        .unwrap();
        assert_eq!(p.length(), 2.0);
        let (a, b) = p.split_at(1.5).unwrap();
        assert!((a.length() - 1.5).abs() < 1e-15);
        assert!((b.length() - 0.5).abs() < 1e-15);
        assert_eq!(a.end(), b.start());
        let (a, b) = p.split_at(1.0).unwrap();
        assert_eq!(a.vertices().len(), 2);
        assert_eq!(b.vertices().len(), 2);
    }

    #[test]
    fn distance_to_segment_interior_and_ends() {
        let p = Polyline::segment(C::new(0.0, 0.0), C::new(1.0, 0.0)).unwrap();
        assert!((p.distance(C::new(0.5, 0.05)) - 0.05).abs() < 1e-15);
        assert!((p.distance(C::new(2.0, 0.0)) - 1.0).abs() < 1e-15);
    }
}
