//! Config-driven runs that write diagnostics and snapshots to disk.

use std::fmt::Write as _;
use std::path::PathBuf;

use crate::cases::TestCase;
use crate::error::Result;
use crate::io::{self, io_error, RunConfig};
use crate::pde::{Pde, PdeSystem, Vars};
use crate::solver::{RelaxationMode, Solver};

#[derive(Debug)]
pub struct RunReport {
    pub case: TestCase,
    pub solver: Solver<Pde>,
    pub mode: RelaxationMode,
    pub final_time: f64,
    pub l2_errors: Option<Vars>,
    pub files: Vec<PathBuf>,
}

impl RunReport {
    pub fn summary(&self) -> String {
        let d = &self.solver.diagnostics;
        let e0 = d.initial_entropy;
        let mut s = String::new();
        let _ = writeln!(s, "case = {}", self.case.name);
        let _ = writeln!(s, "degree = {}", self.solver.disc.degree());
        let _ = writeln!(s, "cells = {}", self.solver.disc.num_cells());
        let _ = writeln!(s, "relaxation = {:?}", self.mode);
        let _ = writeln!(s, "steps = {}", d.rows.len() - 1);
        let _ = writeln!(s, "time = {:.16e}", self.solver.state.time);
        let _ = writeln!(s, "initial_entropy = {:.16e}", e0);
        let last = d.rows.last().map_or(e0, |r| r.entropy);
        let _ = writeln!(s, "final_entropy = {:.16e}", last);
        let _ = writeln!(s, "cumulative_boundary_flux = {:.16e}", d.cumulative_boundary_flux);
        let _ = writeln!(s, "cumulative_dissipation = {:.16e}", d.cumulative_dissipation);
        let acc = d.accounted_entropy(self.mode);
        let _ = writeln!(s, "accounting_residual = {:.16e}", (acc - e0) / e0.abs().max(f64::MIN_POSITIVE));
        if let Some(err) = self.l2_errors {
            for (v, name) in self.case.pde.var_names().iter().enumerate() {
                let _ = writeln!(s, "l2_error_{name} = {:.16e}", err[v]);
            }
        }
        s
    }
}

/// Runs `cfg`, writing `diag.csv`, `budget.csv`, `summary.txt`, the resolved
/// `config.toml` and VTK snapshots into the output directory. On failure the
/// files are written for the last accepted state before the error is returned.
pub fn execute(cfg: &RunConfig) -> Result<RunReport> {
    cfg.validate()?;
    let (case, disc) = cfg.build()?;
    let mode = cfg.relaxation_mode(&case);
    let opts = cfg.scheme_options(mode)?;
    let tf = cfg.final_time(&case);
    let dir = cfg.output.dir.clone();
    std::fs::create_dir_all(&dir).map_err(io_error(&dir))?;
    let config_path = dir.join("config.toml");
    std::fs::write(&config_path, cfg.to_toml_string()?).map_err(io_error(&config_path))?;
    let subdivisions = cfg.output.vtk_subdivisions.unwrap_or(cfg.scheme.degree);

    let state = case.initial_state(&disc)?;
    let mut solver = Solver::new(disc, opts, state)?;
    let mut files = vec![config_path];
    let every = cfg.output.vtk_every;
    if every > 0 {
        let p = dir.join("solution_00000.vtk");
        io::write_vtk(&solver.disc, &solver.state, &p, subdivisions)?;
        files.push(p);
    }
    let mut snapshot_error = None;
    let outcome = solver.run(tf, |s, rec| {
        if every > 0 && rec.step % every == 0 && snapshot_error.is_none() {
            let p = dir.join(format!("solution_{:05}.vtk", rec.step));
            match io::write_vtk(&s.disc, &s.state, &p, subdivisions) {
                Ok(()) => files.push(p),
                Err(e) => snapshot_error = Some(e),
            }
        }
    });

    let diag_path = dir.join("diag.csv");
    io::write_diag_csv(&diag_path, &solver.diagnostics)?;
    let budget_path = dir.join("budget.csv");
    io::write_budget_csv(&budget_path, &solver.diagnostics)?;
    files.push(diag_path);
    files.push(budget_path);
    if cfg.output.vtk_final || outcome.is_err() {
        let p = dir.join("solution_final.vtk");
        io::write_vtk(&solver.disc, &solver.state, &p, subdivisions)?;
        files.push(p);
    }
    let l2_errors = match case.exact {
        Some(_) => Some(case.l2_error(&solver.disc, &solver.state)?),
        None => None,
    };
    let report = RunReport {
        case,
        solver,
        mode,
        final_time: tf,
        l2_errors,
        files,
    };
    let summary_path = dir.join("summary.txt");
    std::fs::write(&summary_path, report.summary()).map_err(io_error(&summary_path))?;
    outcome?;
    if let Some(e) = snapshot_error {
        return Err(e);
    }
    let mut report = report;
    report.files.push(summary_path);
    Ok(report)
}
