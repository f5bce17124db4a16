//! Numerical laboratory for the vectorial p-Laplacian eigenvalue problem.
//!
//! The crate minimizes the local Rayleigh quotient over discretized vector
//! fields with zero boundary values, integrates the associated first-order
//! ODE system to reproduce the closed-form eigenvalue ladder, evaluates the
//! fractional (Gagliardo) quotient, and exposes the exact vector-algebra
//! identities that drive the rank-one collapse of minimizers.
//!
//! Modules:
//! - [`fields`]: grids, scalar/vector fields, discrete gradients, p-norm quadrature;
//! - [`vecalg`]: Lagrange identity, modulus fields, gradient domination,
//!   rank-one factorization, monotonicity inequalities;
//! - [`psine`]: the generalized sine ODE, shooting, and the eigenvalue ladder;
//! - [`local`]: the local Rayleigh quotient and its projected-descent minimizer;
//! - [`fractional`]: the Gagliardo energy, kernel assembly, and the fractional
//!   quotient minimizer.

pub mod error;
pub mod fields;
pub mod fractional;
pub mod local;
pub mod psine;
pub mod quad;
pub mod rng;
pub mod vecalg;

mod optim;

pub use error::{Error, Result};
