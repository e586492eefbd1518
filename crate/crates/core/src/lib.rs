//! Nonlinear 1-bit precoding for the massive MU-MIMO downlink.
//!
//! A base station with `B` antennas and a pair of 1-bit DACs per antenna can
//! only transmit entries from the quaternary set `{±l ± jl}`. Mapping a
//! `U`-dimensional symbol vector onto such a transmit vector while cancelling
//! multi-user interference is a combinatorial problem; this crate implements
//! two iterative solvers for it, `c1po` (alternating minimization on a
//! biconvex relaxation) and `c2po` (forward-backward splitting on the direct
//! nonconvex objective), together with:
//!
//! - [`numerics`]: the dense complex linear algebra the solvers need
//!   (products, Hermitian Gram, Cholesky solve, power iteration),
//! - [`signal`]: constellations with Gray mapping, i.i.d. Rayleigh channels,
//!   AWGN, and receiver-side scaling/detection,
//! - [`precoders`]: the floating-point solvers plus MRT/ZF baselines and
//!   their sign-quantized variants,
//! - [`fixedpoint`]: bit-exact Q-format arithmetic (wrap-around overflow,
//!   truncation) and functional fixed-point models of both datapaths,
//! - [`hwsim`]: cycle-accurate simulation of the two systolic PE-array
//!   architectures with exact per-iteration latency counters,
//! - [`harness`]: a deterministic Monte-Carlo BER sweep engine with CSV
//!   output.
//!
//! The `precode` binary exposes the harness and the hardware simulator on the
//! command line; see the README for the config-file grammar.

pub mod fixedpoint;
pub mod harness;
pub mod hwsim;
pub mod numerics;
pub mod precoders;
pub mod signal;

pub use numerics::{CMat, CVec};
pub use precoders::{BcrParams, PrecodeResult, ProblemSetup};
pub use signal::{Constellation, PrecodeProblem, RngStream};

/// Errors shared across the library. Contract violations (dimension
/// mismatches, invalid parameters) are reported here rather than by panicking
/// so that the CLI and the C API can map them to exit/status codes.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("matrix is not positive definite (pivot {pivot:.3e} at index {index})")]
    NotPositiveDefinite { index: usize, pivot: f64 },
    #[error("zero symbol vector: orthogonal projector is undefined")]
    ZeroSymbolVector,
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
