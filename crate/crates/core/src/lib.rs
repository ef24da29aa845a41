//! cG(1)dG(0) space-time finite elements for semilinear parabolic problems
//!
//! ```text
//! ∂_t u − Δu + d(t, x, u) = f   in (0, T] × Ω,   u = 0 on ∂Ω,   u(0) = u₀
//! ```
//!
//! on the unit square, with continuous piecewise-linear elements in space and
//! piecewise-constant discontinuous Galerkin steps in time. Each time step
//! solves a monotone nonlinear system by damped Newton iteration.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod dg0;
pub mod error;
pub mod fem;
pub mod linalg;
pub mod mms;
pub mod mesh;
pub mod nonlinearity;
pub mod quadrature;
pub mod study;
pub mod time_grid;

pub use dg0::{march, SolverOptions, SpaceTimeDG0};
pub use error::{Error, Result};
pub use fem::{FeFunction, FeSpace};
pub use linalg::{CgOptions, CsrMatrix};
pub use mesh::{build_unit_square_mesh, refine_uniform, TriMesh};
pub use nonlinearity::Nonlinearity;
pub use time_grid::{GridValidityReport, TimeGrid};
pub use mms::{ExactSolution, MmsProblem};
pub use study::{ConvergenceReport, ProbeReport, StudyConfig};
