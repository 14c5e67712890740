//! Probabilistic optimal power flow through multi-parametric LP critical
//! regions, a noisy variational quantum region classifier, and a differential
//! privacy audit of the resulting randomized region selection.

// `!(a <= b)` is used deliberately so that NaN inputs fail validation, and the
// dense linear algebra reads most clearly with index loops.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop, clippy::too_many_arguments)]

pub mod grid;
pub mod lp;
pub mod matrix;
pub mod provenance;
pub mod mplp;
pub mod circuit;
pub mod classifier;
pub mod privacy;
pub mod eval;
