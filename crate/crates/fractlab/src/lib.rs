//! Multiscale laboratory for discretized measures on `R^d`.
//!
//! The crate works with one currency: sparse nonnegative mass assignments on
//! the dyadic lattice `2^{-k} Z^d` ([`DyadicMeasure`]). On top of that it
//! provides
//!
//! - `L^q` norms, entropy at scale, component measures and dimension fitting
//!   ([`dyadic`]),
//! - exact and transform-accelerated lattice convolution together with
//!   self-convolution flattening experiments ([`convolution`]),
//! - Fourier transforms, large-frequency bad-set scans and moment bounds
//!   ([`fourier`]),
//! - affine non-concentration scanners and hyperplane decay fits
//!   ([`nonconc`]),
//! - additive-combinatorics and entropy diagnostics ([`entropy_diag`]),
//! - generators for self-similar and Patterson-Sullivan test measures
//!   ([`zoo`]).
//!
//! All operations are pure functions over immutable values. Parallel code
//! paths reduce through fixed-shape trees, so results are bit-identical for
//! any thread count.

#![forbid(unsafe_code)]

pub mod convolution;
pub mod dyadic;
pub mod entropy_diag;
pub mod error;
pub mod fmz;
pub mod fourier;
pub mod nonconc;
pub mod par;
pub mod report;
pub mod zoo;

pub use dyadic::{CellIndex, DimEstimate, DyadicMeasure, LqExponent};
pub use error::{Error, Result};
pub use report::ExperimentReport;
