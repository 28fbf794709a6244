//! Degenerate p-Poisson solver on planar grids and the regularity checks
//! built on top of it.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod corrector;
pub mod error;
pub mod exponents;
pub mod grid;
pub mod io;
pub mod oscillation;
pub mod quasiregular;
pub mod scaling;
pub mod solver;
pub mod sparse;

pub use error::{Error, Result};
