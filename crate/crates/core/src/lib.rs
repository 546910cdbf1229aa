//! Entropy-conserving and entropy-dissipative ADER discontinuous Galerkin
//! schemes on triangular meshes.

pub mod basis;
pub mod cases;
pub mod convergence;
pub mod corrector;
pub mod discretization;
pub mod error;
pub mod io;
pub mod mesh;
pub mod pde;
pub mod predictor;
pub mod quadrature;
pub mod relaxation;
pub mod run;
pub mod solver;

pub use error::{Result, SolverError};
