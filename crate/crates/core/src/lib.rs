//! Numerical construction and verification of solutions to the two-phase
//! overdetermined problem `Δu = 0` in `{-1 < u < 1}`, `|∇u| = 1` on the free
//! boundary, built as thin tubes around catenoids and the leaves of the
//! foliation of the Simons cone in ℝ⁸.

pub mod error;
pub mod field;
pub mod geometry;
pub mod gluing;
pub mod kernels;
pub mod minimizer;
pub mod norms;
pub mod numerics;
pub mod reduced_solver;

pub use error::{Error, Result};
