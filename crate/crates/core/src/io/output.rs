//! CSV diagnostics.

use std::path::Path;

use crate::error::{Result, SolverError};
use crate::solver::{RunDiagnostics, StepRecord};

use super::io_error;

pub const DIAG_HEADER: [&str; 10] = [
    "step",
    "t",
    "dt",
    "gamma",
    "entropy",
    "entropy_residual",
    "mass_0",
    "newton_iters",
    "alpha_min",
    "alpha_max",
];

pub const BUDGET_HEADER: [&str; 12] = [
    "step",
    "t",
    "boundary_flux",
    "dissipation",
    "budget",
    "cumulative_boundary_flux",
    "cumulative_dissipation",
    "cumulative_budget",
    "gamma_method",
    "predictor_iterations",
    "predictor_unconverged",
    "retries",
];

/// 17 significant digits, enough for a bitwise round trip.
fn num(x: f64) -> String {
    format!("{x:.16e}")
}

fn csv_error(path: &Path) -> impl Fn(csv::Error) -> SolverError + '_ {
    move |e| SolverError::Io {
        path: path.display().to_string(),
        source: std::io::Error::other(e.to_string()),
    }
}

pub fn write_diag_csv(path: &Path, diag: &RunDiagnostics) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(csv_error(path))?;
    w.write_record(DIAG_HEADER).map_err(csv_error(path))?;
    for r in &diag.rows {
        w.write_record([
            r.step.to_string(),
            num(r.time),
            num(r.dt),
            num(r.gamma),
            num(r.entropy),
            num(r.entropy_residual),
            num(r.mass_0),
            r.newton_iters.to_string(),
            num(r.alpha_min),
            num(r.alpha_max),
        ])
        .map_err(csv_error(path))?;
    }
    w.flush().map_err(io_error(path))
}

pub fn write_budget_csv(path: &Path, diag: &RunDiagnostics) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(csv_error(path))?;
    w.write_record(BUDGET_HEADER).map_err(csv_error(path))?;
    let (mut boundary, mut dissipation, mut budget) = (0.0, 0.0, 0.0);
    for r in &diag.rows {
        boundary += r.boundary_flux;
        dissipation += r.dissipation;
        budget += r.budget;
        w.write_record([
            r.step.to_string(),
            num(r.time),
            num(r.boundary_flux),
            num(r.dissipation),
            num(r.budget),
            num(boundary),
            num(dissipation),
            num(budget),
            r.gamma_method.map_or("none".to_string(), |m| format!("{m:?}").to_lowercase()),
            r.predictor_iterations.to_string(),
            r.predictor_unconverged.to_string(),
            r.retries.to_string(),
        ])
        .map_err(csv_error(path))?;
    }
    w.flush().map_err(io_error(path))
}

/// Rows of `diag.csv` with the diagnostics columns filled in; other fields
/// keep their defaults.
pub fn read_diag_csv(path: &Path) -> Result<Vec<StepRecord>> {
    let mut r = csv::Reader::from_path(path).map_err(csv_error(path))?;
    let header = r.headers().map_err(csv_error(path))?.clone();
    if header.iter().ne(DIAG_HEADER) {
        return Err(SolverError::Config(format!("{}: unexpected header", path.display())));
    }
    let bad = |line: usize, field: &str| SolverError::Config(format!("{}: line {line}: bad {field}", path.display()));
    let mut rows = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec.map_err(csv_error(path))?;
        let line = i + 2;
        let f = |k: usize| rec[k].parse::<f64>().map_err(|_| bad(line, DIAG_HEADER[k]));
        let u = |k: usize| rec[k].parse::<usize>().map_err(|_| bad(line, DIAG_HEADER[k]));
        rows.push(StepRecord {
            step: u(0)?,
            time: f(1)?,
            dt: f(2)?,
            gamma: f(3)?,
            entropy: f(4)?,
            entropy_residual: f(5)?,
            mass_0: f(6)?,
            newton_iters: u(7)?,
            alpha_min: f(8)?,
            alpha_max: f(9)?,
            ..StepRecord::default()
        });
    }
    Ok(rows)
}
