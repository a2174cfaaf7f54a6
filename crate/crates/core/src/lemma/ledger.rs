use serde::{Deserialize, Serialize};

use crate::complex::C;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Verified,
    Violated,
    Skipped,
}

/// Margin of one stratum of a stratified check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaseMargin {
    pub case: String,
    pub samples: usize,
    pub margin: Option<f64>,
    pub witness: Option<C>,
}

/// One labelled property with the sample set it was checked on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LedgerEntry {
    pub label: String,
    pub index: Option<usize>,
    pub status: Status,
    /// Smallest slack over the samples (positive passes); `None` when not
    /// finite or not applicable.
    pub margin: Option<f64>,
    pub samples: usize,
    pub sample_set: String,
    pub witness: Option<C>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub cases: Vec<CaseMargin>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

fn finite(x: f64) -> Option<f64> {
    x.is_finite().then_some(x)
}

impl LedgerEntry {
    pub fn from_worst(label: &str, index: Option<usize>, worst: &Worst, sample_set: impl Into<String>) -> Self {
        let status = if worst.samples == 0 {
            Status::Skipped
        } else if worst.margin > 0.0 {
            Status::Verified
        } else {
            Status::Violated
        };
        LedgerEntry {
            label: label.to_string(),
            index,
            status,
            margin: finite(worst.margin),
            samples: worst.samples,
            sample_set: sample_set.into(),
            witness: worst.witness,
            cases: Vec::new(),
            note: None,
        }
    }

    /// A property that holds or fails by construction, e.g. an identity of
    /// expression nodes.
    pub fn structural(label: &str, index: Option<usize>, holds: bool, sample_set: impl Into<String>) -> Self {
        LedgerEntry {
            label: label.to_string(),
            index,
            status: if holds { Status::Verified } else { Status::Violated },
            margin: Some(0.0),
            samples: 0,
            sample_set: sample_set.into(),
            witness: None,
            cases: Vec::new(),
            note: None,
        }
    }

    pub fn skipped(label: &str, index: Option<usize>, note: impl Into<String>) -> Self {
        LedgerEntry {
            label: label.to_string(),
            index,
            status: Status::Skipped,
            margin: None,
            samples: 0,
            sample_set: String::new(),
            witness: None,
            cases: Vec::new(),
            note: Some(note.into()),
        }
    }

    pub fn with_note(mut self, note: impl Into<String>) -> Self {
        self.note = Some(note.into());
        self
    }
}

/// Running minimum of a margin with the sample that attains it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Worst {
    pub margin: f64,
    pub witness: Option<C>,
    pub samples: usize,
}

impl Default for Worst {
    fn default() -> Self {
        Worst {
            margin: f64::INFINITY,
            witness: None,
            samples: 0,
        }
    }
}

impl Worst {
    pub fn push(&mut self, margin: f64, z: C) {
        self.samples += 1;
        // NaN margins count as failures.
        if !(margin >= self.margin) {
            self.margin = margin;
            self.witness = Some(z);
        }
    }

    pub fn merge(&mut self, other: &Worst) {
        self.samples += other.samples;
        if !(other.margin >= self.margin) {
            self.margin = other.margin;
            self.witness = other.witness;
        }
    }

    pub fn passed(&self) -> bool {
        self.margin > 0.0
    }
}

/// Auxiliary check outside the lemma's labelled property set (placement
/// conditions, domain checks, calibration constraints).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Diagnostic {
    pub label: String,
    pub index: Option<usize>,
    pub passed: bool,
    pub margin: Option<f64>,
    pub samples: usize,
}

impl Diagnostic {
    pub fn new(label: &str, index: Option<usize>, worst: &Worst) -> Self {
        Diagnostic {
            label: label.to_string(),
            index,
            passed: worst.passed(),
            margin: finite(worst.margin),
            samples: worst.samples,
        }
    }

    pub fn flag(label: &str, index: Option<usize>, passed: bool, margin: f64, samples: usize) -> Self {
        Diagnostic {
            label: label.to_string(),
            index,
            passed,
            margin: finite(margin),
            samples,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PropertyLedger {
    pub entries: Vec<LedgerEntry>,
}

impl PropertyLedger {
    pub fn push(&mut self, e: LedgerEntry) {
        self.entries.push(e);
    }

    pub fn get(&self, label: &str, index: Option<usize>) -> Option<&LedgerEntry> {
        self.entries.iter().find(|e| e.label == label && e.index == index)
    }

    pub fn with_label<'a>(&'a self, label: &'a str) -> impl Iterator<Item = &'a LedgerEntry> + 'a {
        self.entries.iter().filter(move |e| e.label == label)
    }

    pub fn any_violated(&self) -> bool {
        self.entries.iter().any(|e| e.status == Status::Violated)
    }

    pub fn all_verified(&self) -> bool {
        !self.entries.is_empty() && self.entries.iter().all(|e| e.status == Status::Verified)
    }

    pub fn count(&self, status: Status) -> usize {
        self.entries.iter().filter(|e| e.status == status).count()
    }

    /// Labels a finished run must carry for `n` points: (A1)–(A3) for
    /// i < n, (A4)–(A8) for every i, (A9) for i = 2..=n+1, (P1)–(P5) and
    /// (B1)–(B5) for every i, and the conclusions (a)–(d).
    pub fn expected_labels(n: usize) -> Vec<(String, Option<usize>)> {
        let mut out = Vec::new();
        for i in 1..=n {
            for a in 1..=8 {
                if a <= 3 && i == n {
                    continue;
                }
                out.push((format!("(A{a})"), Some(i)));
            }
        }
        for i in 2..=n + 1 {
            out.push(("(A9)".to_string(), Some(i)));
        }
        for p in ["P", "B"] {
            for k in 1..=5 {
                for i in 1..=n {
                    out.push((format!("({p}{k})"), Some(i)));
                }
            }
        }
        for c in ["(a)", "(b)", "(c)", "(d)"] {
            out.push((c.to_string(), None));
        }
        out
    }

    /// Expected labels missing from the ledger, or present but skipped.
    pub fn incomplete(&self, n: usize) -> Vec<(String, Option<usize>)> {
        Self::expected_labels(n)
            .into_iter()
            .filter(|(l, i)| self.get(l, *i).is_none_or(|e| e.status == Status::Skipped))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn worst_tracks_minimum_and_nan() {
        let mut w = Worst::default();
        w.push(0.5, C::new(1.0, 0.0));
        w.push(0.2, C::new(2.0, 0.0));
        w.push(0.9, C::new(3.0, 0.0));
        assert_eq!(w.margin, 0.2);
        assert_eq!(w.witness, Some(C::new(2.0, 0.0)));
        w.push(f64::NAN, C::new(4.0, 0.0));
        assert!(!w.passed());
    }

    #[test]
    fn expected_label_count() {
        // 3(n−1) + 5n + n + 5n + 5n + 4
        let n = 4;
        assert_eq!(PropertyLedger::expected_labels(n).len(), 3 * (n - 1) + 5 * n + n + 10 * n + 4);
        assert!(PropertyLedger::expected_labels(n).contains(&("(A9)".to_string(), Some(n + 1))));
    }

    #[test]
    fn entry_json_round_trip() {
        let mut w = Worst::default();
        w.push(0.1, C::new(0.5, 0.25));
        let e = LedgerEntry::from_worst("(b)", None, &w, "Int P, 1 sample");
        let s = serde_json::to_string(&e).unwrap();
        let back: LedgerEntry = serde_json::from_str(&s).unwrap();
        assert_eq!(back, e);
        let inf = LedgerEntry::from_worst("(b)", None, &Worst::default(), "none");
        assert_eq!(inf.status, Status::Skipped);
        assert!(serde_json::to_string(&inf).unwrap().contains("\"margin\":null"));
    }
}
