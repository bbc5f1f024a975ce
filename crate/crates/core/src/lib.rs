//! Finite-dimensional K-frame toolkit.
//!
//! A frame here is an ordered family of vectors in R^n, stored as columns of
//! a synthesis matrix. On top of a small dense matrix kernel the crate
//! provides:
//!
//! - frame/analysis/Gram operators, optimal K-frame bounds, and Parseval
//!   K-frame checks ([`frame`]);
//! - scalings making a frame Parseval with respect to an operator K, solved
//!   as a nonnegative least-squares problem, plus the operator transforms
//!   that preserve them ([`scalability`]);
//! - piecewise scalings split across an orthogonal projection and its
//!   complement ([`piecewise`]);
//! - a projected-contraction solver for coercive variational inequalities
//!   with energy-minimization certificates and two-sided bounds on the
//!   minimum ([`variational`]).

pub mod frame;
pub mod matrix;
pub mod piecewise;
pub mod scalability;
pub mod variational;

pub use frame::{
    build_ops, canonical_k, kframe_bounds, parseval_k_check, Frame, FrameBounds, FrameError,
    FrameOps, KOperator, ParsevalReport,
};
pub use matrix::{Mat, SymEig};
