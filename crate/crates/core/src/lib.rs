//! Bernstein–Bézier spline collocation for the second boundary value problem
//! of the Monge–Ampère equation, with an optimal-transport front end and
//! image warping utilities.

// `!(x > 0.0)` is used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod assembly;
pub mod bbspline;
pub mod bench;
pub mod cli;
pub mod config;
pub mod error;
pub mod imaging;
pub mod lsq;
pub mod mae;
pub mod mesh;
pub mod quadrature;
pub mod sparse;
pub mod transport;

pub use error::{Error, Result};
