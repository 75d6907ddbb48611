//! Greedy sparse approximation in finite-dimensional `l_p` spaces (`p >= 2`).
//!
//! Three greedy pursuits share one driver: weak orthogonal matching pursuit
//! (Hilbert case only), the weak Chebyshev greedy algorithm, and the weak
//! quasi-orthogonal greedy algorithm. The [`analysis`] module certifies
//! dictionary constants by exhaustive sweeps, and [`experiments`] runs the
//! seeded Monte Carlo and single-instance checks exposed by the CLI.

// `!(x >= y)` comparisons are used on purpose so that NaN is rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod cli;
pub mod error;
pub mod experiments;
pub mod greedy;
pub mod projection;
pub mod space;

pub use error::{Error, Result};
