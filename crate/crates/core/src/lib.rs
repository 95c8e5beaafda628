//! Numerical laboratory for the first eigenvalue of the 1-Laplacian (the
//! Cheeger constant) on grid domains, the 1-capacity of compact sets, and the
//! response of the eigenvalue to domain perturbations.

// Checks such as `!(x > 0.0)` are written that way so NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod capacity;
pub mod cheeger_solver;
pub mod error;
pub mod geometry;
pub mod oracles;
pub mod perturbation_lab;
mod primal_dual;
pub mod tv_core;

pub use cheeger_solver::{EigenResult, SolverOptions};
pub use error::{Error, Result};
pub use geometry::{CompactSet, GridDomain, GridSpec, Measure, Shape};
pub use tv_core::{ScalarField, VectorField};
