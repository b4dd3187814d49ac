//! Steady incompressible Navier-Stokes flow in two-dimensional channels with
//! full-slip walls.
//!
//! The solution is split as `u = g + v`: `g` is an explicit solenoidal flux
//! carrier that matches the slip conditions and the far-field shear state
//! `(Φ/2, 0)`, and `v` is a zero-flux perturbation computed with Taylor-Hood
//! elements on a truncated channel. The [`analysis`] module estimates the
//! functional-inequality constants that control the problem and runs decay,
//! growth and uniqueness diagnostics on computed solutions.

// Negated comparisons reject NaN on purpose; index loops mirror the tensor
// notation of the forms.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod analysis;
pub mod carrier;
pub mod discretization;
pub mod error;
pub mod fields;
pub mod geometry;
pub mod io;
pub mod quadrature;
pub mod solver;

pub use error::{Error, Result};
