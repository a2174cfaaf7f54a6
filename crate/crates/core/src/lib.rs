//! Numerical construction of conformal minimal immersions of the disk from
//! Weierstrass data, with a verification ledger for every stage inequality.

// `!(x > 0.0)` is used on purpose so that NaN inputs are rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod complex;
pub mod deformations;
pub mod lemma;
pub mod planar;
pub mod report;
pub mod theorem;
pub mod weierstrass;
