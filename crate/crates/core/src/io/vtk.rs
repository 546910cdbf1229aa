//! Legacy ASCII VTK output.

use std::fmt::Write as _;
use std::path::Path;

use crate::discretization::{DgState, Discretization};
use crate::error::Result;
use crate::pde::PdeSystem;

use super::io_error;

/// Writes the state on a sub-triangulation with `k²` triangles per cell
/// (`k = subdivisions`), with point data for each conserved variable and the
/// pointwise entropy. Points are duplicated per cell so jumps stay visible.
pub fn write_vtk<P: PdeSystem>(
    disc: &Discretization<P>,
    state: &DgState,
    path: &Path,
    subdivisions: usize,
) -> Result<()> {
    std::fs::write(path, vtk_string(disc, state, subdivisions)).map_err(io_error(path))
}

pub fn vtk_string<P: PdeSystem>(disc: &Discretization<P>, state: &DgState, subdivisions: usize) -> String {
    let k = subdivisions.max(1);
    let mesh = &disc.mesh;
    let per_cell_points = (k + 1) * (k + 2) / 2;
    let per_cell_tris = k * k;
    let n_points = mesh.num_cells() * per_cell_points;
    let n_tris = mesh.num_cells() * per_cell_tris;
    let m = disc.num_vars();

    let mut points = Vec::with_capacity(n_points);
    let mut values = Vec::with_capacity(n_points);
    let mut tris = Vec::with_capacity(n_tris);
    // Lattice index of (i, j) with i + j ≤ k.
    let id = |i: usize, j: usize| j * (k + 1) - j * (j.saturating_sub(1)) / 2 + i;
    for (ci, cell) in mesh.cells.iter().enumerate() {
        let [a, b, c] = cell.vertices.map(|v| mesh.vertices[v]);
        let base = points.len();
        for j in 0..=k {
            for i in 0..=k - j {
                let (s, t) = (i as f64 / k as f64, j as f64 / k as f64);
                let x = [
                    a[0] + s * (b[0] - a[0]) + t * (c[0] - a[0]),
                    a[1] + s * (b[1] - a[1]) + t * (c[1] - a[1]),
                ];
                points.push(x);
                values.push(disc.eval_point(state, ci, x));
            }
        }
        for j in 0..k {
            for i in 0..k - j {
                tris.push([base + id(i, j), base + id(i + 1, j), base + id(i, j + 1)]);
                if i + j + 1 < k {
                    tris.push([base + id(i + 1, j), base + id(i + 1, j + 1), base + id(i, j + 1)]);
                }
            }
        }
    }

    let mut out = String::new();
    out.push_str("# vtk DataFile Version 3.0\n");
    let _ = writeln!(out, "{} t={:.16e}", disc.pde.name(), state.time);
    out.push_str("ASCII\nDATASET UNSTRUCTURED_GRID\n");
    let _ = writeln!(out, "POINTS {} double", points.len());
    for p in &points {
        let _ = writeln!(out, "{:.16e} {:.16e} 0", p[0], p[1]);
    }
    let _ = writeln!(out, "CELLS {} {}", tris.len(), 4 * tris.len());
    for t in &tris {
        let _ = writeln!(out, "3 {} {} {}", t[0], t[1], t[2]);
    }
    let _ = writeln!(out, "CELL_TYPES {}", tris.len());
    for _ in &tris {
        out.push_str("5\n");
    }
    let _ = writeln!(out, "POINT_DATA {}", points.len());
    for (v, name) in disc.pde.var_names().iter().enumerate().take(m) {
        let _ = writeln!(out, "SCALARS {name} double 1\nLOOKUP_TABLE default");
        for u in &values {
            let _ = writeln!(out, "{:.16e}", u[v]);
        }
    }
    out.push_str("SCALARS entropy double 1\nLOOKUP_TABLE default\n");
    for u in &values {
        let _ = writeln!(out, "{:.16e}", disc.pde.entropy(u).unwrap_or(f64::NAN));
    }
    out
}
