/// Finite union of disjoint closed intervals, kept sorted.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct IntervalSet(Vec<(f64, f64)>);

impl IntervalSet {
    pub fn empty() -> Self {
        IntervalSet(Vec::new())
    }

    pub fn single(lo: f64, hi: f64) -> Self {
        if hi < lo {
            IntervalSet::empty()
        } else {
            IntervalSet(vec![(lo, hi)])
        }
    }

    pub fn from_unsorted(mut v: Vec<(f64, f64)>) -> Self {
        v.retain(|(a, b)| a <= b);
        v.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut out: Vec<(f64, f64)> = Vec::with_capacity(v.len());
        for (a, b) in v {
            match out.last_mut() {
                Some(last) if a <= last.1 => last.1 = last.1.max(b),
                _ => out.push((a, b)),
            }
        }
        IntervalSet(out)
    }

    pub fn intervals(&self) -> &[(f64, f64)] {
        &self.0
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn union(&self, other: &IntervalSet) -> IntervalSet {
        let mut v = self.0.clone();
        v.extend_from_slice(&other.0);
        IntervalSet::from_unsorted(v)
    }

    pub fn intersect(&self, other: &IntervalSet) -> IntervalSet {
        let mut out = Vec::new();
        let (mut i, mut j) = (0, 0);
        while i < self.0.len() && j < other.0.len() {
            let (a0, a1) = self.0[i];
            let (b0, b1) = other.0[j];
            let lo = a0.max(b0);
            let hi = a1.min(b1);
            if lo <= hi {
                out.push((lo, hi));
            }
            if a1 < b1 {
                i += 1;
            } else {
                j += 1;
            }
        }
        IntervalSet(out)
    }

    /// Complement within `[lo, hi]`; the result is closed, so boundary points
    /// of `self` are kept in both.
    pub fn complement_within(&self, lo: f64, hi: f64) -> IntervalSet {
        let mut out = Vec::new();
        let mut cur = lo;
        for &(a, b) in &self.0 {
            if b < lo || a > hi {
                continue;
            }
            if a > cur {
                out.push((cur, a));
            }
            cur = cur.max(b);
        }
        if cur < hi {
            out.push((cur, hi));
        }
        IntervalSet(out)
    }

    pub fn difference(&self, other: &IntervalSet, lo: f64, hi: f64) -> IntervalSet {
        self.intersect(&other.complement_within(lo, hi))
    }

    /// Whether `[lo, hi]` is covered up to gaps no longer than `gap`.
    pub fn covers(&self, lo: f64, hi: f64, gap: f64) -> bool {
        let mut cur = lo;
        for &(a, b) in &self.0 {
            if b < cur {
                continue;
            }
            if a > cur + gap {
                return false;
            }
            cur = cur.max(b);
            if cur >= hi - gap {
                return true;
            }
        }
        cur >= hi - gap
    }

    pub fn total_length(&self) -> f64 {
        self.0.iter().map(|(a, b)| b - a).sum()
    }
}
