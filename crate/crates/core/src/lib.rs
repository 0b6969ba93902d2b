//! Stabilized finite element method for the unique continuation (data
//! assimilation) problem of the convection-diffusion equation
//!
//! ```text
//!     -mu * Lap(u) + beta . grad(u) = f   in the unit square,
//! ```
//!
//! where no boundary data are available and `u` is only observed, possibly
//! with noise, on a subregion `omega`. The discrete problem is the optimality
//! system of a Lagrangian regularized by gradient-jump penalties; it couples
//! the primal unknown `u_h` with a Lagrange multiplier `z_h` in a symmetric
//! indefinite block system.
//!
//! Module map:
//! - [`mesh`]: structured triangulations, face connectivity, regions.
//! - [`quadrature`] and [`fem`]: P1 basis, interpolation, L2 projection, norms.
//! - [`sparse`]: compressed sparse row operators.
//! - [`forms`]: the bilinear forms and load vectors.
//! - [`saddle`]: block system, direct solve, condition numbers.
//! - [`experiments`]: exact solution, convection fields, geometries, noise,
//!   mesh ladders and fitted convergence rates.
//! - [`probe`]: executable checks of the conditional stability estimates.
//! - `cli` (feature `cli`, on by default): command implementations behind
//!   the `stabfem` binary.

#[cfg(feature = "cli")]
pub mod cli;
pub mod error;
pub mod experiments;
pub mod fem;
pub mod forms;
pub mod mesh;
pub mod probe;
pub mod quadrature;
pub mod saddle;
pub mod sparse;

pub use error::{Error, Result};
pub use fem::{FeFunction, Field, Norms};
pub use forms::{AssembledForms, ConvectionField, ProblemSpec};
pub use mesh::{Mesh, Rect, Region};
pub use quadrature::QuadDegree;
pub use saddle::{CondMode, SaddleSystem, Solution};
