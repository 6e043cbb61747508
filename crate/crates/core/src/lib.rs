//! Exact stencils, dispersion-minimized mass and blended quadratures for
//! maximal-continuity B-spline discretizations of the Laplace eigenproblem.

#![allow(clippy::needless_range_loop)]

pub mod assembly;
pub mod dispersion;
pub mod dmm;
pub mod eigensolve;
pub mod error;
pub mod quadrature;
pub mod rational;
pub mod splines;
pub mod stencils;
pub mod study;

pub use error::{Error, Result};
pub use rational::Rational;
