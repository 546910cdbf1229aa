//! Local space-time predictor: Picard iteration on the element-local weak
//! problem, with time upwinding at `t^n`.
//!
//! The unknowns are stored scaled, `z_l = (Δt/h)^{r_l} q̂_l`, so that
//! `q_h(x, τ) = Σ_l z_l φ_{a_l}(x) τ^{r_l}/r_l!` for `τ ∈ [0, 1]` and the
//! local matrix is independent of `Δt`.

use crate::discretization::Discretization;
use crate::error::StateError;
use crate::pde::{PdeSystem, Vars};

/// Default Picard tolerance, relative to `1 + ‖z‖∞`.
pub const DEFAULT_TOLERANCE: f64 = 1e-12;

/// Default iteration cap, `N + 2`.
pub fn default_max_iterations(degree: usize) -> usize {
    degree + 2
}

/// Predictor of one cell.
#[derive(Debug, Clone, PartialEq)]
pub struct Predictor {
    /// Scaled space-time coefficients, `z[var * Q + l]`.
    pub z: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    /// Last update size `‖Δz‖∞`.
    pub update: f64,
}

fn inv_factorial(r: usize) -> f64 {
    1.0 / (1..=r).map(|k| k as f64).product::<f64>()
}

impl<P: PdeSystem> Discretization<P> {
    /// Initial guess: the spatial coefficients in block 0, zero elsewhere.
    pub fn predictor_init(&self, u_hat: &[f64]) -> Vec<f64> {
        let m = self.num_vars();
        let n = self.num_modes();
        let q = self.st_basis.len();
        let mut z = vec![0.0; m * q];
        for var in 0..m {
            z[var * q..var * q + n].copy_from_slice(&u_hat[var * n..(var + 1) * n]);
        }
        z
    }

    /// Spatial coefficients of `q_h(·, τ)`, `out[var * N + a]`.
    pub fn predictor_at(&self, z: &[f64], tau: f64, out: &mut [f64]) {
        let m = self.num_vars();
        let n = self.num_modes();
        let q = self.st_basis.len();
        out[..m * n].fill(0.0);
        for r in 0..=self.degree() {
            let s = tau.powi(r as i32) * inv_factorial(r);
            for l in self.st_basis.block(r) {
                let a = self.st_basis.spatial_index(l);
                for var in 0..m {
                    out[var * n + a] += s * z[var * q + l];
                }
            }
        }
    }

    /// Spatial coefficients at every time node, `out[s * (m N) + var * N + a]`.
    pub fn stage_coefficients(&self, z: &[f64]) -> Vec<f64> {
        let b = self.block_len();
        let mut out = vec![0.0; self.time_rule.len() * b];
        for (s, tau) in self.time_rule.points.iter().enumerate() {
            self.predictor_at(z, tau[0], &mut out[s * b..(s + 1) * b]);
        }
        out
    }

    /// One Picard update `z ← z⁰ - K̃⁻¹ D̃(z)`.
    pub fn picard_step(&self, cell: usize, z0: &[f64], z: &[f64], dt: f64) -> Result<Vec<f64>, StateError> {
        let m = self.num_vars();
        let n = self.num_modes();
        let q = self.st_basis.len();
        let c = &self.cells[cell];
        let stages = self.stage_coefficients(z);
        let b = self.block_len();

        // D̃[var][l] = Δt Σ_s w_s τ_s^r/r! ∫ φ_a ∇·F(q_h(·, τ_s)).
        let mut d = vec![0.0; m * q];
        let mut proj = vec![0.0; m * n];
        for (s, (tau, wt)) in self.time_rule.iter().enumerate() {
            let coeffs = &stages[s * b..(s + 1) * b];
            proj.fill(0.0);
            for (p, (x, w)) in c.points.iter().zip(&c.weights).enumerate() {
                let phi = &c.phi[p * n..(p + 1) * n];
                let (u, g) = self.eval_with_grad(coeffs, phi, &c.grad[p * n..(p + 1) * n]);
                let div: Vars = self.pde.flux_divergence(&u, &g, *x)?;
                for var in 0..m {
                    let wd = w * div[var];
                    for a in 0..n {
                        proj[var * n + a] += wd * phi[a];
                    }
                }
            }
            for r in 0..=self.degree() {
                let f = dt * wt * tau[0].powi(r as i32) * inv_factorial(r);
                for l in self.st_basis.block(r) {
                    let a = self.st_basis.spatial_index(l);
                    for var in 0..m {
                        d[var * q + l] += f * proj[var * n + a];
                    }
                }
            }
        }

        let mut out = z0.to_vec();
        let kinv = &c.predictor_inv;
        for var in 0..m {
            let dv = &d[var * q..(var + 1) * q];
            for k in 0..q {
                let mut acc = 0.0;
                for l in 0..q {
                    acc += kinv[(k, l)] * dv[l];
                }
                out[var * q + k] -= acc;
            }
        }
        if let Some(bad) = out.iter().find(|v| !v.is_finite()) {
            return Err(StateError {
                system: self.pde.name(),
                quantity: "predictor",
                value: *bad,
            });
        }
        Ok(out)
    }

    /// Iterates the predictor of one cell to convergence or `max_iter`.
    pub fn solve_predictor(
        &self,
        cell: usize,
        u_hat: &[f64],
        dt: f64,
        max_iter: usize,
        tol: f64,
    ) -> Result<Predictor, StateError> {
        let z0 = self.predictor_init(u_hat);
        let mut z = z0.clone();
        let mut update = f64::INFINITY;
        for it in 1..=max_iter.max(1) {
            let next = self.picard_step(cell, &z0, &z, dt)?;
            update = next
                .iter()
                .zip(&z)
                .fold(0.0f64, |acc, (a, b)| acc.max((a - b).abs()));
            let scale = next.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
            z = next;
            if update <= tol * (1.0 + scale) {
                return Ok(Predictor {
                    z,
                    iterations: it,
                    converged: true,
                    update,
                });
            }
        }
        Ok(Predictor {
            z,
            iterations: max_iter.max(1),
            converged: false,
            update,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{BoundarySpec, Mesh, Rect};
    use crate::pde::{Advection, ShallowWater};
    use crate::quadrature::gauss_legendre_unit;

    fn advection(degree: usize, pde: Advection) -> Discretization<Advection> {
        let mesh = Mesh::structured(3, 3, Rect::new(-1.0, 1.0, -1.0, 1.0)).unwrap();
        Discretization::new(pde, mesh, BoundarySpec::periodic(), degree).unwrap()
    }

    /// Weak space-time residual of the predictor, assembled directly from
    /// space-time test functions `φ_a τ^r / r!`.
    fn weak_residual<P: PdeSystem>(d: &Discretization<P>, cell: usize, u_hat: &[f64], z: &[f64], dt: f64) -> f64 {
        let c = &d.cells[cell];
        let n = d.num_modes();
        let m = d.num_vars();
        let trule = gauss_legendre_unit(8);
        let mut buf = vec![0.0; d.block_len()];
        let mut worst = 0.0f64;
        for k in 0..d.st_basis.len() {
            let (a, r) = (d.st_basis.spatial_index(k), d.st_basis.time_power(k));
            let theta = |tau: f64| tau.powi(r as i32) * inv_factorial(r);
            let dtheta = |tau: f64| if r == 0 { 0.0 } else { tau.powi(r as i32 - 1) * inv_factorial(r - 1) };
            for var in 0..m {
                let mut res = 0.0;
                for (p, w) in c.weights.iter().enumerate() {
                    let phi = &c.phi[p * n..(p + 1) * n];
                    d.predictor_at(z, 1.0, &mut buf);
                    res += w * phi[a] * theta(1.0) * d.eval_with(&buf, phi)[var];
                    res -= w * phi[a] * theta(0.0) * d.eval_with(u_hat, phi)[var];
                    for (tau, wt) in trule.iter() {
                        d.predictor_at(z, tau[0], &mut buf);
                        let (u, g) = d.eval_with_grad(&buf, phi, &c.grad[p * n..(p + 1) * n]);
                        let div = d.pde.flux_divergence(&u, &g, c.points[p]).unwrap();
                        res -= w * wt * phi[a] * dtheta(tau[0]) * u[var];
                        res += dt * w * wt * phi[a] * theta(tau[0]) * div[var];
                    }
                }
                worst = worst.max(res.abs());
            }
        }
        worst
    }

    #[test]
    fn constant_state_is_a_bitwise_fixed_point() {
        for n in 1..=4 {
            let d = advection(n, Advection::rotation());
            let s = d.project(|_| [0.7, 0.0, 0.0, 0.0], 0.0);
            let u = d.cell_block(&s.coeffs, 4);
            let p = d.solve_predictor(4, u, 0.1, 6, 1e-12).unwrap();
            assert_eq!(p.z, d.predictor_init(u));
            assert_eq!(p.iterations, 1);
            assert!(p.converged);
        }
    }

    #[test]
    fn fixed_point_solves_the_weak_space_time_problem() {
        for n in 1..=4 {
            let d = advection(n, Advection::rotation());
            let s = d.project(|x| [(1.3 * x[0]).sin() * (0.7 * x[1] + 0.2).cos(), 0.0, 0.0, 0.0], 0.0);
            for cell in [0, 7, 13] {
                let u = d.cell_block(&s.coeffs, cell);
                let p = d.solve_predictor(cell, u, 0.05, 40, 1e-12).unwrap();
                assert!(p.converged, "N={n} update={}", p.update);
                let r = weak_residual(&d, cell, u, &p.z, 0.05);
                assert!(r < 1e-12, "N={n} cell={cell} residual={r}");
            }
        }
    }

    #[test]
    fn linear_data_is_transported_exactly() {
        // ∂_t q = -a·∇q pointwise when the data is linear.
        let a = [1.0, 0.5];
        let d = advection(3, Advection::constant(a[0], a[1]));
        let s = d.project(|x| [2.0 * x[0] - x[1] + 0.3, 0.0, 0.0, 0.0], 0.0);
        let dt = 0.07;
        let n = d.num_modes();
        for cell in 0..d.num_cells() {
            let u = d.cell_block(&s.coeffs, cell);
            let p = d.solve_predictor(cell, u, dt, 5, 1e-12).unwrap();
            let c = &d.cells[cell];
            let mut q0 = vec![0.0; n];
            let mut q1 = vec![0.0; n];
            for tau in [0.2, 0.6, 0.9] {
                let h = 1e-4;
                d.predictor_at(&p.z, tau - h, &mut q0);
                d.predictor_at(&p.z, tau + h, &mut q1);
                for pt in 0..c.points.len() {
                    let phi = &c.phi[pt * n..(pt + 1) * n];
                    let grad = &c.grad[pt * n..(pt + 1) * n];
                    let ut = (d.eval_with(&q1, phi)[0] - d.eval_with(&q0, phi)[0]) / (2.0 * h * dt);
                    d.predictor_at(&p.z, tau, &mut q0);
                    let (_, g) = d.eval_with_grad(&q0, phi, grad);
                    assert!((ut + a[0] * g[0][0] + a[1] * g[1][0]).abs() < 1e-8);
                    d.predictor_at(&p.z, tau - h, &mut q0);
                }
            }
        }
    }

    #[test]
    fn polynomial_profiles_are_translated_exactly() {
        let a = [0.8, -0.4];
        let profile = |x: [f64; 2]| 0.5 + x[0] * x[0] * x[1] - 0.3 * x[1].powi(3) + x[0];
        let d = advection(3, Advection::constant(a[0], a[1]));
        let s = d.project(|x| [profile(x), 0.0, 0.0, 0.0], 0.0);
        let dt = 0.1;
        let n = d.num_modes();
        let mut buf = vec![0.0; n];
        for cell in 0..d.num_cells() {
            let u = d.cell_block(&s.coeffs, cell);
            let p = d.solve_predictor(cell, u, dt, default_max_iterations(3), DEFAULT_TOLERANCE).unwrap();
            assert!(p.converged);
            let c = &d.cells[cell];
            for tau in [0.0, 0.5, 1.0] {
                d.predictor_at(&p.z, tau, &mut buf);
                for (pt, x) in c.points.iter().enumerate() {
                    let got = d.eval_with(&buf, &c.phi[pt * n..(pt + 1) * n])[0];
                    let t = tau * dt;
                    let want = profile([x[0] - a[0] * t, x[1] - a[1] * t]);
                    assert!((got - want).abs() < 1e-10, "{got} vs {want}");
                }
            }
        }
    }

    #[test]
    fn nonlinear_iteration_contracts() {
        let mesh = Mesh::structured(4, 4, Rect::new(0.0, 1.0, 0.0, 1.0)).unwrap();
        let d = Discretization::new(ShallowWater::default(), mesh, BoundarySpec::periodic(), 3).unwrap();
        let s = d.project(
            |x| {
                let h = 1.0 + 0.1 * (6.0 * x[0]).sin() * (5.0 * x[1]).cos();
                [h, 0.3 * h, -0.2 * h * x[0], 0.0]
            },
            0.0,
        );
        let u = d.cell_block(&s.coeffs, 5);
        let dt = 0.2 * d.cells[5].inradius / 4.0;
        let z0 = d.predictor_init(u);
        let mut z = z0.clone();
        let mut prev = f64::INFINITY;
        for _ in 0..8 {
            let next = d.picard_step(5, &z0, &z, dt).unwrap();
            let diff = next.iter().zip(&z).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
            assert!(diff < prev || diff < 1e-14);
            prev = diff;
            z = next;
        }
        assert!(prev < 1e-10);
        let r = weak_residual(&d, 5, u, &z, dt);
        // The scheme integrates the flux divergence at its own time nodes.
        assert!(r < 1e-6, "{r}");
    }

    #[test]
    fn non_finite_state_is_reported() {
        let d = advection(2, Advection::constant(1.0, 0.0));
        let mut s = d.project(|_| [1.0, 0.0, 0.0, 0.0], 0.0);
        s.coeffs[0] = f64::NAN;
        let u = d.cell_block(&s.coeffs, 0);
        assert!(d.solve_predictor(0, u, 0.1, 4, 1e-12).is_err());
    }
}
