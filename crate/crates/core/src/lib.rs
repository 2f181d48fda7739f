//! Multilinear potential operators `T_φ`, their BMO commutators, Orlicz
//! multilinear maximal operators and the dyadic discretization machinery,
//! all evaluated on uniform grids, plus harnesses that measure empirical
//! constants for weighted inequalities.

pub mod error;
pub mod dyadic;
pub mod grid;
pub mod kernels;
pub mod operators;
pub mod orlicz;
pub mod verify;
mod quad;
pub mod weights;

pub use error::{Error, Result};
