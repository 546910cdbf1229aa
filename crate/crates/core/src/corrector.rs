//! Corrector: Rusanov face fluxes split into a central and a dissipative
//! part, the per-cell entropy ledger, the entropy-correction coefficient and
//! the modal update.

use rayon::prelude::*;

use crate::discretization::{DgState, Discretization, FaceNeighbor};
use crate::error::StateError;
use crate::mesh::Point;
use crate::pde::{dot, mat_vec, PdeSystem, Vars, MAX_VARS};
use crate::predictor::{default_max_iterations, DEFAULT_TOLERANCE};

/// Central part `(F⁺ + F⁻)/2 · n` and dissipative part `-a (q⁺ - q⁻)/2`.
pub fn split_flux<P: PdeSystem>(
    pde: &P,
    um: &Vars,
    up: &Vars,
    n: Point,
    x: Point,
) -> Result<(Vars, Vars), StateError> {
    let m = pde.num_vars();
    let fm = pde.flux(um, x)?;
    let fp = pde.flux(up, x)?;
    let a = pde.max_wavespeed(um, up, n, x)?;
    let mut central = [0.0; MAX_VARS];
    let mut diss = [0.0; MAX_VARS];
    for i in 0..m {
        central[i] = 0.5 * (fm[0][i] + fp[0][i]) * n[0] + 0.5 * (fm[1][i] + fp[1][i]) * n[1];
        diss[i] = -0.5 * a * (up[i] - um[i]);
    }
    Ok((central, diss))
}

/// Numerical entropy flux `v̄ᵀ ℱᶜ - ψ̄ · n` with arithmetic means.
pub fn numerical_entropy_flux<P: PdeSystem>(
    pde: &P,
    um: &Vars,
    up: &Vars,
    central: &Vars,
    n: Point,
    x: Point,
) -> Result<f64, StateError> {
    let m = pde.num_vars();
    let vm = pde.entropy_vars(um)?;
    let vp = pde.entropy_vars(up)?;
    let pm = pde.entropy_potential(um, x)?;
    let pp = pde.entropy_potential(up, x)?;
    let mut vbar = [0.0; MAX_VARS];
    for i in 0..m {
        vbar[i] = 0.5 * (vm[i] + vp[i]);
    }
    let psi = 0.5 * (pm[0] + pp[0]) * n[0] + 0.5 * (pm[1] + pp[1]) * n[1];
    Ok(dot(&vbar, central, m) - psi)
}

/// Entropy correction coefficient. Returns `(α, flagged)`; cells whose
/// correction term is not safely positive get `α = 0` and are flagged.
pub fn compute_alpha(flux: f64, correction: f64, entropy_flux: f64, floor: f64) -> (f64, bool) {
    if correction > 0.0 && correction >= floor {
        ((entropy_flux - flux) / correction, false)
    } else {
        (0.0, true)
    }
}

/// Face data at one stage and quadrature point.
#[derive(Debug, Clone, Copy, Default)]
struct FacePoint {
    flux: Vars,
    entropy_flux: f64,
    central_left: f64,
    diss_left: f64,
    central_right: f64,
    diss_right: f64,
}

/// Entropy ledger of one cell at one stage.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct CellLedger {
    /// `F = ∮⟨v, ℱᶜ⟩ - ∫ ∇v · F`
    pub flux: f64,
    /// `D = ∮⟨v, ℱᵈ⟩`
    pub dissipation: f64,
    /// `E = ∫ ∇vᵀ A0 ∇v`
    pub correction: f64,
    /// `Ĝ = ∮ 𝒢`
    pub entropy_flux: f64,
    pub alpha: f64,
    pub flagged: bool,
}

/// Per-stage contribution of one cell before `α` is known.
#[derive(Debug, Clone)]
struct CellStage {
    ledger: CellLedger,
    residual: Vec<f64>,
    corr: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CorrectorOptions {
    pub correction: bool,
    pub predictor_max_iter: usize,
    pub predictor_tol: f64,
}

impl CorrectorOptions {
    pub fn for_degree(degree: usize) -> Self {
        Self {
            correction: true,
            predictor_max_iter: default_max_iterations(degree),
            predictor_tol: DEFAULT_TOLERANCE,
        }
    }
}

/// Everything one step produces before relaxation.
#[derive(Debug, Clone)]
pub struct Update {
    /// `Δû`, same layout as the state.
    pub delta: Vec<f64>,
    /// `ledger[cell * S + s]`
    pub ledger: Vec<CellLedger>,
    pub stages: usize,
    /// Positivity floor of `E` per stage.
    pub floor: Vec<f64>,
    /// `Σ_s β_s Σ_i (flagged ? Ĝ : F + αE)`
    pub budget_flux: f64,
    /// `Σ_s β_s Σ_i D`
    pub budget_dissipation: f64,
    /// `Σ_s β_s ∮𝒢` over domain boundary faces.
    pub boundary_flux: f64,
    pub predictor_iterations: usize,
    pub predictor_unconverged: usize,
}

impl Update {
    pub fn cell_ledger(&self, cell: usize, stage: usize) -> &CellLedger {
        &self.ledger[cell * self.stages + stage]
    }

    /// Extreme `α` over unflagged cell stages, `None` if all are flagged.
    pub fn alpha_range(&self) -> Option<(f64, f64)> {
        self.ledger
            .iter()
            .filter(|l| !l.flagged)
            .fold(None, |acc, l| match acc {
                None => Some((l.alpha, l.alpha)),
                Some((lo, hi)) => Some((lo.min(l.alpha), hi.max(l.alpha))),
            })
    }
}

impl<P: PdeSystem> Discretization<P> {
    /// Predictor stage coefficients of every cell.
    fn predict_all(
        &self,
        state: &DgState,
        dt: f64,
        opts: &CorrectorOptions,
    ) -> Result<(Vec<Vec<f64>>, usize, usize), StateError> {
        let results: Vec<_> = (0..self.num_cells())
            .into_par_iter()
            .map(|ci| {
                let p = self.solve_predictor(
                    ci,
                    self.cell_block(&state.coeffs, ci),
                    dt,
                    opts.predictor_max_iter,
                    opts.predictor_tol,
                )?;
                Ok((self.stage_coefficients(&p.z), p.iterations, p.converged))
            })
            .collect::<Result<_, StateError>>()?;
        let iters = results.iter().map(|r| r.1).max().unwrap_or(0);
        let unconverged = results.iter().filter(|r| !r.2).count();
        Ok((results.into_iter().map(|r| r.0).collect(), iters, unconverged))
    }

    fn face_pass(&self, stages: &[Vec<f64>], t0: f64, dt: f64) -> Result<Vec<Vec<FacePoint>>, StateError> {
        let n = self.num_modes();
        let b = self.block_len();
        let m = self.num_vars();
        self.faces
            .par_iter()
            .map(|f| {
                let nq = f.points.len();
                let mut out = Vec::with_capacity(self.time_rule.len() * nq);
                for (s, tau) in self.time_rule.points.iter().enumerate() {
                    let t = t0 + tau[0] * dt;
                    let left = &stages[f.left][s * b..(s + 1) * b];
                    for p in 0..nq {
                        let x = f.points[p];
                        let um = self.eval_with(left, &f.phi_left[p * n..(p + 1) * n]);
                        let up = match f.right {
                            FaceNeighbor::Cell { cell, .. } => self.eval_with(
                                &stages[cell][s * b..(s + 1) * b],
                                &f.phi_right[p * n..(p + 1) * n],
                            ),
                            FaceNeighbor::Ghost { side, rule } => self.ghost_state(side, rule, &um, f.normal, x, t),
                        };
                        let (central, diss) = split_flux(&self.pde, &um, &up, f.normal, x)?;
                        let g = numerical_entropy_flux(&self.pde, &um, &up, &central, f.normal, x)?;
                        let vm = self.pde.entropy_vars(&um)?;
                        let vp = self.pde.entropy_vars(&up)?;
                        let mut flux = [0.0; MAX_VARS];
                        for i in 0..m {
                            flux[i] = central[i] + diss[i];
                        }
                        out.push(FacePoint {
                            flux,
                            entropy_flux: g,
                            central_left: dot(&vm, &central, m),
                            diss_left: dot(&vm, &diss, m),
                            central_right: dot(&vp, &central, m),
                            diss_right: dot(&vp, &diss, m),
                        });
                    }
                }
                Ok(out)
            })
            .collect()
    }

    /// Physical flux of the cell mean, subtracted pointwise so that constant
    /// states are preserved exactly.
    fn reference_flux(&self, mean: &Vars, x: Point) -> [Vars; 2] {
        self.pde.flux(mean, x).unwrap_or([[0.0; MAX_VARS]; 2])
    }

    fn cell_pass(
        &self,
        ci: usize,
        state: &DgState,
        stages: &[f64],
        faces: &[Vec<FacePoint>],
    ) -> Result<Vec<CellStage>, StateError> {
        let m = self.num_vars();
        let n = self.num_modes();
        let b = self.block_len();
        let c = &self.cells[ci];
        let block = self.cell_block(&state.coeffs, ci);
        let mut mean = [0.0; MAX_VARS];
        for var in 0..m {
            mean[var] = block[var * n];
        }
        let mut out = Vec::with_capacity(self.time_rule.len());
        for s in 0..self.time_rule.len() {
            let coeffs = &stages[s * b..(s + 1) * b];
            let mut stage_mean = [0.0; MAX_VARS];
            for var in 0..m {
                stage_mean[var] =
                    (0..n).map(|a| c.integrals[a] * coeffs[var * n + a]).sum::<f64>() / c.area;
            }
            let a0 = self.pde.a0(&stage_mean)?;
            let mut ledger = CellLedger::default();
            let mut residual = vec![0.0; b];
            let mut corr = vec![0.0; b];

            for (p, (x, w)) in c.points.iter().zip(&c.weights).enumerate() {
                let phi = &c.phi[p * n..(p + 1) * n];
                let grad = &c.grad[p * n..(p + 1) * n];
                let (u, g) = self.eval_with_grad(coeffs, phi, grad);
                let f = self.pde.flux(&u, *x)?;
                let fref = self.reference_flux(&mean, *x);
                let h = self.pde.entropy_hessian(&u)?;
                let gv = [mat_vec(&h, &g[0], m), mat_vec(&h, &g[1], m)];
                let ag = [mat_vec(&a0, &gv[0], m), mat_vec(&a0, &gv[1], m)];
                ledger.flux -= w * (dot(&gv[0], &f[0], m) + dot(&gv[1], &f[1], m));
                ledger.correction += w * (dot(&gv[0], &ag[0], m) + dot(&gv[1], &ag[1], m));
                for var in 0..m {
                    let fx = w * (f[0][var] - fref[0][var]);
                    let fy = w * (f[1][var] - fref[1][var]);
                    let (ax, ay) = (w * ag[0][var], w * ag[1][var]);
                    for k in 0..n {
                        residual[var * n + k] -= grad[k][0] * fx + grad[k][1] * fy;
                        corr[var * n + k] += grad[k][0] * ax + grad[k][1] * ay;
                    }
                }
            }

            for &(fi, is_left) in &self.cell_faces[ci] {
                let f = &self.faces[fi];
                let nq = f.points.len();
                let (sign, phi_tab) = if is_left { (1.0, &f.phi_left) } else { (-1.0, &f.phi_right) };
                let normal = [sign * f.normal[0], sign * f.normal[1]];
                for p in 0..nq {
                    let d = &faces[fi][s * nq + p];
                    let w = f.weights[p];
                    let x = if is_left { f.points[p] } else { f.right_point(p) };
                    let fref = self.reference_flux(&mean, x);
                    let phi = &phi_tab[p * n..(p + 1) * n];
                    for var in 0..m {
                        let fr = fref[0][var] * normal[0] + fref[1][var] * normal[1];
                        let net = w * (sign * d.flux[var] - fr);
                        for k in 0..n {
                            residual[var * n + k] += phi[k] * net;
                        }
                    }
                    let (vc, vd) = if is_left {
                        (d.central_left, d.diss_left)
                    } else {
                        (d.central_right, d.diss_right)
                    };
                    ledger.flux += sign * w * vc;
                    ledger.dissipation += sign * w * vd;
                    ledger.entropy_flux += sign * w * d.entropy_flux;
                }
            }
            out.push(CellStage { ledger, residual, corr });
        }
        Ok(out)
    }

    /// Predictor, corrector and entropy ledger for one step of size `dt`.
    pub fn compute_update(&self, state: &DgState, dt: f64, opts: &CorrectorOptions) -> Result<Update, StateError> {
        let (stages, predictor_iterations, predictor_unconverged) = self.predict_all(state, dt, opts)?;
        let faces = self.face_pass(&stages, state.time, dt)?;
        let mut cells: Vec<Vec<CellStage>> = (0..self.num_cells())
            .into_par_iter()
            .map(|ci| self.cell_pass(ci, state, &stages[ci], &faces))
            .collect::<Result<_, _>>()?;

        let ns = self.time_rule.len();
        let hbar_n = self.mesh.mean_h.powi(self.degree() as i32);
        let floor: Vec<f64> = (0..ns)
            .map(|s| hbar_n * cells.iter().fold(0.0f64, |acc, c| acc.max(c[s].ledger.correction)))
            .collect();
        for c in cells.iter_mut() {
            for (s, st) in c.iter_mut().enumerate() {
                let l = &mut st.ledger;
                (l.alpha, l.flagged) = if opts.correction {
                    compute_alpha(l.flux, l.correction, l.entropy_flux, floor[s])
                } else {
                    (0.0, true)
                };
            }
        }

        let b = self.block_len();
        let n = self.num_modes();
        let m = self.num_vars();
        let betas = &self.time_rule.weights;
        let deltas: Vec<Vec<f64>> = cells
            .par_iter()
            .enumerate()
            .map(|(ci, c)| {
                let mut rhs = vec![0.0; b];
                for (s, st) in c.iter().enumerate() {
                    let alpha = st.ledger.alpha;
                    for ((r, res), corr) in rhs.iter_mut().zip(&st.residual).zip(&st.corr) {
                        *r -= dt * betas[s] * (res + alpha * corr);
                    }
                }
                let chol = &self.cells[ci].mass_chol;
                for var in 0..m {
                    let v = nalgebra::DVector::from_column_slice(&rhs[var * n..(var + 1) * n]);
                    rhs[var * n..(var + 1) * n].copy_from_slice(chol.solve(&v).as_slice());
                }
                rhs
            })
            .collect();

        let mut budget_flux = 0.0;
        let mut budget_dissipation = 0.0;
        for c in &cells {
            for (s, st) in c.iter().enumerate() {
                let l = &st.ledger;
                let stage = if l.flagged { l.entropy_flux } else { l.flux + l.alpha * l.correction };
                budget_flux += betas[s] * stage;
                budget_dissipation += betas[s] * l.dissipation;
            }
        }
        let mut boundary_flux = 0.0;
        for (fi, f) in self.faces.iter().enumerate() {
            if f.right_cell().is_none() {
                let nq = f.points.len();
                for s in 0..ns {
                    let g: f64 = (0..nq).map(|p| f.weights[p] * faces[fi][s * nq + p].entropy_flux).sum();
                    boundary_flux += betas[s] * g;
                }
            }
        }

        let mut delta = Vec::with_capacity(state.coeffs.len());
        for d in deltas {
            delta.extend_from_slice(&d);
        }
        let ledger = cells.into_iter().flat_map(|c| c.into_iter().map(|s| s.ledger)).collect();
        if let Some(bad) = delta.iter().find(|v| !v.is_finite()) {
            return Err(StateError {
                system: self.pde.name(),
                quantity: "update",
                value: *bad,
            });
        }
        Ok(Update {
            delta,
            ledger,
            stages: ns,
            floor,
            budget_flux,
            budget_dissipation,
            boundary_flux,
            predictor_iterations,
            predictor_unconverged,
        })
    }

    /// `Σ_k û_k r_k` for the undamped residual of every cell and stage, used
    /// to check the discrete entropy balance when `v = u`.
    #[doc(hidden)]
    pub fn stage_residual_projections(&self, state: &DgState, dt: f64) -> Result<Vec<(f64, f64)>, StateError> {
        let opts = CorrectorOptions::for_degree(self.degree());
        let (stages, _, _) = self.predict_all(state, dt, &opts)?;
        let faces = self.face_pass(&stages, state.time, dt)?;
        let b = self.block_len();
        let mut out = Vec::new();
        for ci in 0..self.num_cells() {
            for (s, st) in self.cell_pass(ci, state, &stages[ci], &faces)?.iter().enumerate() {
                let q = &stages[ci][s * b..(s + 1) * b];
                let r: f64 = q.iter().zip(&st.residual).map(|(a, b)| a * b).sum();
                let c: f64 = q.iter().zip(&st.corr).map(|(a, b)| a * b).sum();
                out.push((r, c));
            }
        }
        Ok(out)
    }
}
