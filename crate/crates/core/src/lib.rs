//! Characteristic-matrix analysis of general linear boundary-value problems
//!
//! ```text
//! y'(t) + A(t) y(t) = f(t),  t ∈ (a, b),      B y = c,
//! ```
//!
//! where `B` is any finite combination of point-derivative, integral and
//! fractional-derivative conditions mapping into `ℂ^r`. The problem is
//! Fredholm with index `m - r`; its kernel and cokernel dimensions equal
//! those of the numeric `r × m` matrix `M = [BY]`, built by applying `B`
//! column-wise to the fundamental matrix `Y`.

pub mod boundary;
pub mod characteristic;
pub mod cli;
pub mod error;
pub mod function;
pub mod limits;
pub mod ode;
pub mod oracle;
pub mod solver;

pub use error::{Error, Result};
