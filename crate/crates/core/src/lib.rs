//! Spectral analysis of the Dirac operator `-B y' + Q(x) y = lambda y` on
//! `[0, pi]` with general two-point boundary conditions.

pub mod boundary;
pub mod cli;
pub mod config;
pub mod diagnostics;
pub mod error;
pub mod expr;
pub mod grid;
pub mod ode;
pub mod potential;
pub mod quadrature;
pub mod solutions;
pub mod spectrum;

pub use error::{Error, Result};
pub use num_complex::Complex64;
