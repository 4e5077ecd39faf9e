//! Numerical laboratory for the two-dimensional linearized Monge–Ampère
//! operator: convex domains and grids, a monotone Monge–Ampère solver, the
//! divergence-form operator built from the cofactor matrix, discrete Green's
//! functions and their integrability statistics, the divergence-form
//! Dirichlet problem, Hölder exponent measurement and a splitting scheme for
//! an Abreu-type fourth-order system.

pub mod abreu;
pub mod acceptance;
pub mod catalog;
pub mod divsolve;
pub mod error;
pub mod field;
pub mod geometry;
pub mod green;
pub mod grid;
pub mod linop;
pub mod metrics;
pub mod ma;
pub mod sparse;

pub use error::{Error, Result};

/// Crate version, recorded in run manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
