//! Optimal control of the integral fractional Laplacian on an interval with
//! pointwise state constraints handled by Moreau-Yosida regularization.
//!
//! The crate is organized bottom-up:
//!
//! * [`mesh`] 1D partitions and the P1 (state) / P0 (control) function families.
//! * [`assembly`] the fractional stiffness matrix with zero exterior extension,
//!   the P1 mass matrix and the P1×P0 coupling, bundled in [`FracOperator`].
//! * [`pde`] state and adjoint solves, including exact integration of the
//!   positive-part penalty term.
//! * [`ocp`] reduced objective, adjoint gradient, optimizers and γ-continuation.
//! * [`analysis`] closed-form solutions, independent oracles, norms and rate fits.
//! * [`cli`] configuration files, experiment runners and CSV output used by the
//!   `frac-ocp` binary.
//!
//! The runnable programs in `examples/` walk through each capability.

pub mod analysis;
pub mod assembly;
pub mod cli;
pub mod error;
pub mod mesh;
pub mod ocp;
pub mod pde;
pub mod quadrature;

pub use assembly::FracOperator;
pub use error::{Error, Result};
pub use mesh::{Mesh, NodalFunction, P0Function, P1Function};
pub use ocp::{OcpSolution, PathReport, ProblemConfig};
