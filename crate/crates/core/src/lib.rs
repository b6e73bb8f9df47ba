//! Linearized L1 Galerkin finite elements for Kirchhoff-type time-fractional
//! integro-differential equations
//!
//! ```text
//! D^alpha u - M(||grad u||^2) Lap u = f + int_0^t b(x, t, s) u(s) ds   in (0,1)^2 x (0, T]
//! ```
//!
//! on graded time meshes, together with a manufactured-solution convergence harness.
//!
//! Module map:
//! - [`fractional`]: graded meshes, L1 kernels, history sums, extrapolation, gamma
//! - [`mesh`]: structured triangulation of the unit square and the P1 space
//! - [`assembly`]: mass/stiffness/memory/load assembly, projections, error norms
//! - [`linalg`]: CG, BiCGStab, dense LU and Sherman-Morrison solves
//! - [`scheme`]: the time stepper (Newton first step, linearized later steps)
//! - [`problems`]: the two manufactured test problems
//! - [`harness`]: convergence studies, CSV/JSON reports and SVG plots

// Guards are written `!(x > 0.0)` on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod assembly;
pub mod error;
pub mod fractional;
pub mod harness;
pub mod linalg;
pub mod mesh;
pub mod problems;
pub mod quadrature;
pub mod scheme;
pub mod sparse;

pub use error::{Error, Result};
