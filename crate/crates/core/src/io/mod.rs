//! Configuration files and output writers.

pub mod config;
pub mod output;
pub mod vtk;

pub use config::RunConfig;
pub use output::{read_diag_csv, write_budget_csv, write_diag_csv, DIAG_HEADER};
pub use vtk::write_vtk;

use std::path::Path;

use crate::error::SolverError;

pub(crate) fn io_error(path: &Path) -> impl FnOnce(std::io::Error) -> SolverError + '_ {
    move |source| SolverError::Io {
        path: path.display().to_string(),
        source,
    }
}
