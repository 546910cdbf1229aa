//! Mesh refinement studies against exact solutions.

use std::fmt::Write as _;

use crate::cases::{self, observed_order};
use crate::error::{Result, SolverError};
use crate::io::config::default_ny;
use crate::solver::{SchemeOptions, Solver};

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceRow {
    pub nx: usize,
    pub ny: usize,
    pub cells: usize,
    /// Mean circumradius.
    pub h: f64,
    /// L2 error of the first variable.
    pub error: f64,
    /// Order against the previous row.
    pub order: Option<f64>,
    pub steps: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceTable {
    pub case: String,
    pub degree: usize,
    pub final_time: f64,
    pub rows: Vec<ConvergenceRow>,
}

/// Runs `case` at `degree` on structured meshes with the given `nx`.
pub fn convergence_study(
    case_name: &str,
    degree: usize,
    meshes: &[usize],
    opts: &SchemeOptions,
    final_time: Option<f64>,
) -> Result<ConvergenceTable> {
    let probe = cases::by_name(case_name, 1.0)?;
    if probe.exact.is_none() {
        return Err(SolverError::Unsupported(format!("case {case_name} has no exact solution")));
    }
    let tf = final_time.unwrap_or(probe.final_time);
    let mut rows: Vec<ConvergenceRow> = Vec::with_capacity(meshes.len());
    for &nx in meshes {
        let ny = default_ny(&probe, nx);
        let mesh = probe.structured_mesh(nx, ny)?;
        let case = cases::by_name(case_name, mesh.mean_h)?;
        let h = mesh.mean_h;
        let disc = case.discretize(mesh, degree)?;
        let state = case.initial_state(&disc)?;
        let mut solver = Solver::new(disc, *opts, state)?;
        solver.run(tf, |_, _| {})?;
        let error = case.l2_error(&solver.disc, &solver.state)?[0];
        let order = rows.last().map(|p| observed_order(&[p.error, error], &[p.h, h])[0]);
        rows.push(ConvergenceRow {
            nx,
            ny,
            cells: solver.disc.num_cells(),
            h,
            error,
            order,
            steps: solver.diagnostics.rows.len() - 1,
        });
    }
    Ok(ConvergenceTable {
        case: case_name.to_string(),
        degree,
        final_time: tf,
        rows,
    })
}

impl ConvergenceTable {
    pub fn orders(&self) -> Vec<f64> {
        self.rows.iter().filter_map(|r| r.order).collect()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("degree,nx,ny,cells,h,l2_error,order,steps\n");
        for r in &self.rows {
            let order = r.order.map_or(String::new(), |o| format!("{o:.16e}"));
            let _ = writeln!(
                out,
                "{},{},{},{},{:.16e},{:.16e},{},{}",
                self.degree, r.nx, r.ny, r.cells, r.h, r.error, order, r.steps
            );
        }
        out
    }

    /// Aligned table: mesh size, L2 error and observed order per row.
    pub fn to_text(&self) -> String {
        let mut out = format!("{} P{} t_f = {}\n", self.case, self.degree, self.final_time);
        let _ = writeln!(out, "{:>8} {:>12} {:>12} {:>8}", "cells", "h", "L2 error", "order");
        for r in &self.rows {
            let order = r.order.map_or("-".to_string(), |o| format!("{o:.2}"));
            let _ = writeln!(out, "{:>8} {:>12.4e} {:>12.4e} {:>8}", r.cells, r.h, r.error, order);
        }
        out
    }
}
