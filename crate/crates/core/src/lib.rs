//! Pseudo-spectral laboratory for the isothermal Navier–Stokes–Korteweg system.

// `!(x > 0.0)` style guards are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod config;
pub mod diagnostics;
pub mod error;
pub mod field;
pub mod grid;
pub mod initial_data;
pub mod io;
pub mod linear;
pub mod littlewood_paley;
pub mod model;
pub mod quadrature;
pub mod run;
pub mod solver;
pub mod state;
pub mod verify;

pub use error::{Error, Result};
pub use field::{SpectralField, VectorField};
pub use grid::Grid;
pub use state::FluidState;
