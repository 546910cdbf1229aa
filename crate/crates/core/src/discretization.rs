//! Precomputed per-cell and per-face tables shared by the predictor and the
//! corrector, and the modal state container.

use nalgebra::{Cholesky, DMatrix, Dyn};

use crate::basis::{
    cell_vertices, mass_matrix, physical_rule, CellFrame, SpaceTimeBasis, SpatialBasis,
};
use crate::error::{Result, SolverError, StateError};
use crate::mesh::{Across, BoundaryCondition, BoundarySpec, FaceKind, GhostRule, Mesh, Point, Side};
use crate::pde::{PdeSystem, Vars, MAX_VARS};
use crate::quadrature::{face_rule, time_rule, triangle_rule, LineRule};

/// Modal coefficients of all cells plus the current time.
///
/// Layout: `cell * (m * N) + var * N + mode`, with `N` spatial modes.
#[derive(Debug, Clone, PartialEq)]
pub struct DgState {
    pub coeffs: Vec<f64>,
    pub time: f64,
}

/// Quadrature exactness and stage counts.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadratureOptions {
    pub volume_degree: usize,
    pub face_degree: usize,
    pub time_stages: usize,
}

impl QuadratureOptions {
    pub fn for_degree(n: usize) -> Self {
        Self {
            volume_degree: 2 * n + 2,
            face_degree: 2 * n + 2,
            time_stages: n,
        }
    }
}

#[derive(Debug, Clone)]
pub struct CellOps {
    pub frame: CellFrame,
    pub area: f64,
    pub inradius: f64,
    pub points: Vec<Point>,
    pub weights: Vec<f64>,
    /// `phi[p * N + a]`
    pub phi: Vec<f64>,
    /// `grad[p * N + a]`
    pub grad: Vec<[f64; 2]>,
    pub mass: DMatrix<f64>,
    pub mass_chol: Cholesky<f64, Dyn>,
    /// `∫ φ_a`
    pub integrals: Vec<f64>,
    /// Inverse of the scaled space-time predictor matrix.
    pub predictor_inv: DMatrix<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FaceNeighbor {
    Cell { cell: usize, offset: Point },
    Ghost { side: Side, rule: GhostRule },
}

/// A face carrying one numerical flux evaluation, shared by its two sides.
#[derive(Debug, Clone)]
pub struct FluxFace {
    pub left: usize,
    pub right: FaceNeighbor,
    /// Unit normal out of the left cell.
    pub normal: Point,
    pub length: f64,
    /// Quadrature points in the left cell's frame.
    pub points: Vec<Point>,
    /// Weights including the face length.
    pub weights: Vec<f64>,
    pub phi_left: Vec<f64>,
    /// Empty for boundary faces.
    pub phi_right: Vec<f64>,
}

impl FluxFace {
    pub fn right_cell(&self) -> Option<usize> {
        match self.right {
            FaceNeighbor::Cell { cell, .. } => Some(cell),
            FaceNeighbor::Ghost { .. } => None,
        }
    }

    /// Quadrature point `p` as seen from the right cell.
    pub fn right_point(&self, p: usize) -> Point {
        match self.right {
            FaceNeighbor::Cell { offset, .. } => {
                [self.points[p][0] + offset[0], self.points[p][1] + offset[1]]
            }
            FaceNeighbor::Ghost { .. } => self.points[p],
        }
    }
}

pub struct Discretization<P> {
    pub pde: P,
    pub mesh: Mesh,
    pub bc: BoundarySpec,
    pub basis: SpatialBasis,
    pub st_basis: SpaceTimeBasis,
    pub time_rule: LineRule,
    pub quadrature: QuadratureOptions,
    pub cells: Vec<CellOps>,
    pub faces: Vec<FluxFace>,
    /// Per cell: `(face index, cell is the left side)`.
    pub cell_faces: Vec<Vec<(usize, bool)>>,
}

fn factorial(n: usize) -> f64 {
    (1..=n).map(|k| k as f64).product()
}

/// Time coupling of the predictor after scaling out `Δt / h`: rows with
/// `r_k = 0` give `1/r_l!`, others `r_l / (r_k! r_l! (r_k + r_l))`.
fn time_coupling(rk: usize, rl: usize) -> f64 {
    if rk == 0 {
        1.0 / factorial(rl)
    } else {
        rl as f64 / (factorial(rk) * factorial(rl) * (rk + rl) as f64)
    }
}

impl<P: PdeSystem> Discretization<P> {
    pub fn new(pde: P, mesh: Mesh, bc: BoundarySpec, degree: usize) -> Result<Self> {
        Self::with_quadrature(pde, mesh, bc, degree, QuadratureOptions::for_degree(degree))
    }

    pub fn with_quadrature(
        pde: P,
        mesh: Mesh,
        bc: BoundarySpec,
        degree: usize,
        quadrature: QuadratureOptions,
    ) -> Result<Self> {
        let basis = SpatialBasis::new(degree)?;
        let st_basis = SpaceTimeBasis::new(degree)?;
        if quadrature.volume_degree < 2 * degree {
            return Err(SolverError::Config(format!(
                "volume quadrature degree {} below 2N = {}",
                quadrature.volume_degree,
                2 * degree
            )));
        }
        mesh.check_periodic(&bc)?;
        let vol_rule = triangle_rule(quadrature.volume_degree)?;
        let frule = face_rule(quadrature.face_degree);
        let trule = time_rule(quadrature.time_stages);
        let n = basis.len();
        let q = st_basis.len();

        let mut cells = Vec::with_capacity(mesh.num_cells());
        for (ci, c) in mesh.cells.iter().enumerate() {
            let frame = CellFrame::of_cell(&mesh, ci);
            let verts = cell_vertices(&mesh, ci);
            let (points, weights) = physical_rule(&verts, c.area, &vol_rule);
            let mut phi = vec![0.0; points.len() * n];
            let mut grad = vec![[0.0; 2]; points.len() * n];
            for (p, x) in points.iter().enumerate() {
                basis.eval_all_with_grad(
                    *x,
                    &frame,
                    &mut phi[p * n..(p + 1) * n],
                    &mut grad[p * n..(p + 1) * n],
                );
            }
            let mass = mass_matrix(&basis, &frame, &points, &weights);
            let mass_chol = mass
                .clone()
                .cholesky()
                .ok_or(SolverError::SingularMass(ci))?;
            let integrals = (0..n).map(|a| mass[(0, a)]).collect();
            let mut k = DMatrix::zeros(q, q);
            for kk in 0..q {
                for l in 0..q {
                    let (a, b) = (st_basis.spatial_index(kk), st_basis.spatial_index(l));
                    k[(kk, l)] =
                        mass[(a, b)] * time_coupling(st_basis.time_power(kk), st_basis.time_power(l));
                }
            }
            let predictor_inv = k.try_inverse().ok_or(SolverError::SingularMass(ci))?;
            cells.push(CellOps {
                frame,
                area: c.area,
                inradius: c.inradius,
                points,
                weights,
                phi,
                grad,
                mass,
                mass_chol,
                integrals,
                predictor_inv,
            });
        }

        let mut faces = Vec::new();
        let mut cell_faces = vec![Vec::new(); mesh.num_cells()];
        for (fi, f) in mesh.faces.iter().enumerate() {
            let right = match f.kind {
                FaceKind::Interior { right } => FaceNeighbor::Cell {
                    cell: right,
                    offset: [0.0, 0.0],
                },
                FaceKind::Boundary { side } => {
                    // A periodic pair is owned by its Left/Bottom face.
                    if bc.is_periodic(side) && matches!(side, Side::Right | Side::Top) {
                        continue;
                    }
                    let local = mesh.cells[f.left]
                        .faces
                        .iter()
                        .position(|&x| x == fi)
                        .expect("face is listed by its left cell");
                    match mesh.neighbor_across(f.left, local, &bc)? {
                        Across::Cell { cell, offset } => FaceNeighbor::Cell { cell, offset },
                        Across::Ghost { side, rule } => FaceNeighbor::Ghost { side, rule },
                    }
                }
            };
            let [pa, pb] = mesh.face_points(fi);
            let points: Vec<Point> = frule
                .points
                .iter()
                .map(|s| [pa[0] + s[0] * (pb[0] - pa[0]), pa[1] + s[0] * (pb[1] - pa[1])])
                .collect();
            let weights: Vec<f64> = frule.weights.iter().map(|w| w * f.length).collect();
            let mut phi_left = vec![0.0; points.len() * n];
            for (p, x) in points.iter().enumerate() {
                basis.eval_all(*x, &cells[f.left].frame, &mut phi_left[p * n..(p + 1) * n]);
            }
            let mut face = FluxFace {
                left: f.left,
                right,
                normal: f.normal,
                length: f.length,
                points,
                weights,
                phi_left,
                phi_right: Vec::new(),
            };
            if let FaceNeighbor::Cell { cell, .. } = right {
                let mut phi_right = vec![0.0; face.points.len() * n];
                for p in 0..face.points.len() {
                    let x = face.right_point(p);
                    basis.eval_all(x, &cells[cell].frame, &mut phi_right[p * n..(p + 1) * n]);
                }
                face.phi_right = phi_right;
                cell_faces[cell].push((faces.len(), false));
            }
            cell_faces[f.left].push((faces.len(), true));
            faces.push(face);
        }

        Ok(Self {
            pde,
            mesh,
            bc,
            basis,
            st_basis,
            time_rule: trule,
            quadrature,
            cells,
            faces,
            cell_faces,
        })
    }

    pub fn num_vars(&self) -> usize {
        self.pde.num_vars()
    }

    pub fn num_modes(&self) -> usize {
        self.basis.len()
    }

    pub fn degree(&self) -> usize {
        self.basis.degree()
    }

    pub fn num_cells(&self) -> usize {
        self.cells.len()
    }

    /// Length of one cell's coefficient block.
    pub fn block_len(&self) -> usize {
        self.num_vars() * self.num_modes()
    }

    pub fn cell_block<'a>(&self, coeffs: &'a [f64], cell: usize) -> &'a [f64] {
        let b = self.block_len();
        &coeffs[cell * b..(cell + 1) * b]
    }

    /// L2 projection of a state function onto the basis.
    pub fn project(&self, f: impl Fn(Point) -> Vars + Sync, time: f64) -> DgState {
        let m = self.num_vars();
        let n = self.num_modes();
        let mut coeffs = vec![0.0; self.num_cells() * m * n];
        let mut rhs = nalgebra::DVector::zeros(n);
        for (ci, c) in self.cells.iter().enumerate() {
            let values: Vec<Vars> = c.points.iter().map(|&x| f(x)).collect();
            if values.iter().all(|u| *u == values[0]) {
                // Constant data: exact mean, exactly zero higher modes.
                for var in 0..m {
                    coeffs[ci * m * n + var * n] = values[0][var];
                }
                continue;
            }
            for var in 0..m {
                rhs.fill(0.0);
                for (p, (u, w)) in values.iter().zip(&c.weights).enumerate() {
                    for a in 0..n {
                        rhs[a] += w * u[var] * c.phi[p * n + a];
                    }
                }
                let proj = c.mass_chol.solve(&rhs);
                let start = ci * m * n + var * n;
                coeffs[start..start + n].copy_from_slice(proj.as_slice());
            }
        }
        DgState { coeffs, time }
    }

    /// Evaluates the state of a cell at point `x` using precomputed values
    /// of the basis.
    pub fn eval_with(&self, block: &[f64], phi: &[f64]) -> Vars {
        let m = self.num_vars();
        let n = self.num_modes();
        let mut u = [0.0; MAX_VARS];
        for var in 0..m {
            let c = &block[var * n..(var + 1) * n];
            u[var] = c.iter().zip(phi).map(|(a, b)| a * b).sum();
        }
        u
    }

    /// Value and gradient from coefficients and basis tables.
    pub fn eval_with_grad(&self, block: &[f64], phi: &[f64], grad: &[[f64; 2]]) -> (Vars, [Vars; 2]) {
        let m = self.num_vars();
        let n = self.num_modes();
        let mut u = [0.0; MAX_VARS];
        let mut g = [[0.0; MAX_VARS]; 2];
        for var in 0..m {
            let c = &block[var * n..(var + 1) * n];
            let (mut s, mut gx, mut gy) = (0.0, 0.0, 0.0);
            for a in 0..n {
                s += c[a] * phi[a];
                gx += c[a] * grad[a][0];
                gy += c[a] * grad[a][1];
            }
            u[var] = s;
            g[0][var] = gx;
            g[1][var] = gy;
        }
        (u, g)
    }

    /// State at an arbitrary point of a cell.
    pub fn eval_point(&self, state: &DgState, cell: usize, x: Point) -> Vars {
        let mut phi = vec![0.0; self.num_modes()];
        self.basis.eval_all(x, &self.cells[cell].frame, &mut phi);
        self.eval_with(self.cell_block(&state.coeffs, cell), &phi)
    }

    /// Values at the volume quadrature points of a cell.
    pub fn cell_point_values(&self, block: &[f64], cell: usize) -> Vec<Vars> {
        let c = &self.cells[cell];
        let n = self.num_modes();
        (0..c.points.len())
            .map(|p| self.eval_with(block, &c.phi[p * n..(p + 1) * n]))
            .collect()
    }

    /// Checks admissibility at every volume and face quadrature point.
    pub fn check_admissible(&self, state: &DgState) -> std::result::Result<(), StateError> {
        (0..self.num_cells()).try_for_each(|ci| self.check_cell(self.cell_block(&state.coeffs, ci), ci))
    }

    /// Admissibility at the volume points and at every face trace of one cell.
    pub fn check_cell(&self, block: &[f64], ci: usize) -> std::result::Result<(), StateError> {
        let n = self.num_modes();
        for u in self.cell_point_values(block, ci) {
            self.pde.check_admissible(&u)?;
        }
        for &(fi, is_left) in &self.cell_faces[ci] {
            let f = &self.faces[fi];
            let phi = if is_left { &f.phi_left } else { &f.phi_right };
            for p in 0..f.points.len() {
                self.pde.check_admissible(&self.eval_with(block, &phi[p * n..(p + 1) * n]))?;
            }
        }
        Ok(())
    }

    /// Pulls inadmissible cells toward their (admissible) cell mean,
    /// `u ← ū + θ(u − ū)` with the largest admissible `θ` found by bisection.
    /// Cell means are unchanged. Returns the number of modified cells.
    pub fn scale_to_admissible(&self, state: &mut DgState) -> std::result::Result<usize, StateError> {
        let m = self.num_vars();
        let n = self.num_modes();
        let b = self.block_len();
        let mut modified = 0;
        for ci in 0..self.num_cells() {
            let block = state.coeffs[ci * b..(ci + 1) * b].to_vec();
            if self.check_cell(&block, ci).is_ok() {
                continue;
            }
            let c = &self.cells[ci];
            let mean: Vec<f64> = (0..m)
                .map(|var| (0..n).map(|a| block[var * n + a] * c.integrals[a]).sum::<f64>() / c.area)
                .collect();
            let scaled = |theta: f64| {
                let mut out: Vec<f64> = block.iter().map(|v| theta * v).collect();
                for var in 0..m {
                    out[var * n] += (1.0 - theta) * mean[var];
                }
                out
            };
            self.check_cell(&scaled(0.0), ci)?;
            let (mut lo, mut hi) = (0.0, 1.0);
            for _ in 0..40 {
                let mid = 0.5 * (lo + hi);
                if self.check_cell(&scaled(mid), ci).is_ok() {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            state.coeffs[ci * b..(ci + 1) * b].copy_from_slice(&scaled(lo));
            modified += 1;
        }
        Ok(modified)
    }

    /// `∫ u_v` over the domain for every variable.
    pub fn mass(&self, state: &DgState) -> Vars {
        let m = self.num_vars();
        let n = self.num_modes();
        let mut out = [0.0; MAX_VARS];
        for (ci, c) in self.cells.iter().enumerate() {
            let block = self.cell_block(&state.coeffs, ci);
            for var in 0..m {
                out[var] += (0..n).map(|a| c.integrals[a] * block[var * n + a]).sum::<f64>();
            }
        }
        out
    }

    /// `∫ |u_v|` over the domain, a scale for relative mass errors.
    pub fn l1_norm(&self, state: &DgState) -> Vars {
        let m = self.num_vars();
        let mut out = [0.0; MAX_VARS];
        for ci in 0..self.num_cells() {
            let c = &self.cells[ci];
            let vals = self.cell_point_values(self.cell_block(&state.coeffs, ci), ci);
            for (u, w) in vals.iter().zip(&c.weights) {
                for var in 0..m {
                    out[var] += w * u[var].abs();
                }
            }
        }
        out
    }

    /// Total entropy `Σ ∫ η(u_h)`.
    pub fn total_entropy(&self, state: &DgState) -> std::result::Result<f64, StateError> {
        let mut total = 0.0;
        for ci in 0..self.num_cells() {
            let c = &self.cells[ci];
            let vals = self.cell_point_values(self.cell_block(&state.coeffs, ci), ci);
            for (u, w) in vals.iter().zip(&c.weights) {
                total += w * self.pde.entropy(u)?;
            }
        }
        Ok(total)
    }

    /// Per-variable L2 error against `exact` at time `t`.
    pub fn l2_error(&self, state: &DgState, exact: impl Fn(Point, f64) -> Vars) -> Vars {
        let m = self.num_vars();
        let mut out = [0.0; MAX_VARS];
        for ci in 0..self.num_cells() {
            let c = &self.cells[ci];
            let vals = self.cell_point_values(self.cell_block(&state.coeffs, ci), ci);
            for ((u, w), x) in vals.iter().zip(&c.weights).zip(&c.points) {
                let e = exact(*x, state.time);
                for var in 0..m {
                    out[var] += w * (u[var] - e[var]).powi(2);
                }
            }
        }
        out.map(f64::sqrt)
    }

    /// Ghost trace across a boundary face.
    pub fn ghost_state(&self, side: Side, rule: GhostRule, inner: &Vars, n: Point, x: Point, t: f64) -> Vars {
        match rule {
            GhostRule::Reflect => self.pde.reflect(inner, n),
            GhostRule::Transmissive => *inner,
            GhostRule::Dirichlet => match self.bc.side(side) {
                BoundaryCondition::Dirichlet(f) => f(x, t),
                other => unreachable!("Dirichlet ghost rule on a {other:?} side"),
            },
        }
    }
}
