//! Integer sequences, their gap statistics, and spectral analysis of
//! band-limited reconstructions built from them.

// `!(x > 0.0)` style guards are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod classical;
pub mod error;
pub mod gap_histogram;
pub mod generalized;
pub mod io;
pub mod par;
pub mod peaks;
pub mod pipeline;
pub mod sequences;
pub mod sieve;
pub mod signal;
pub mod spectrum;

pub use error::{Error, Result};
pub use par::Exec;
