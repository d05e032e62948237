//! Finite-element homogenization of magneto-active elastomer RVEs.
//!
//! A periodic hexahedral RVE is discretized with trilinear displacements
//! and lowest-order Nedelec vector potentials. The coupled problem is solved
//! monolithically by Newton's method with an exact tangent from forward-mode
//! automatic differentiation, and the response is averaged over the cell.
//!
//! The `examples/` directory walks through each capability.

pub mod autodiff;
pub mod config;
pub mod constitutive;
pub mod constraints;
pub mod derivatives;
pub mod driver;
pub mod error;
pub mod fem;
pub mod homogenization;
pub mod linear;
pub mod mesh;
pub mod oracle;
pub mod output;
pub mod runner;
pub mod solver;

pub use error::{Error, Result};
