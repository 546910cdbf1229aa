//! Global relaxation: scales the update by `γ` so that the total entropy
//! obeys the discrete entropy budget of the step exactly.

use crate::discretization::{DgState, Discretization};
use crate::error::{RelaxationError, StateError};
use crate::pde::{dot, PdeSystem, Vars, MAX_VARS};

/// Smallest accepted `γ`; excludes the trivial root at zero.
pub const GAMMA_MIN: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GammaMethod {
    Newton,
    Quadratic,
    Bisection,
    /// `Δû = 0`, `γ = 1` by convention.
    Trivial,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GammaResult {
    pub gamma: f64,
    pub iterations: usize,
    pub residual: f64,
    pub method: GammaMethod,
}

/// `R(γ) = 𝓔(u + γΔu) - 𝓔(u) + γ b`, with `b = Δt Σ_s β_s B_s`, evaluated
/// from point values at the volume quadrature nodes.
pub struct RelaxationProblem<'a, P> {
    pde: &'a P,
    num_vars: usize,
    u: Vec<Vars>,
    du: Vec<Vars>,
    weights: Vec<f64>,
    /// `Δt Σ_s β_s B_s`
    pub budget: f64,
    /// `𝓔(u)`
    pub entropy: f64,
    trivial: bool,
}

impl<'a, P: PdeSystem> RelaxationProblem<'a, P> {
    pub fn new(disc: &'a Discretization<P>, state: &DgState, delta: &[f64], budget: f64) -> Result<Self, StateError> {
        let mut u = Vec::new();
        let mut du = Vec::new();
        let mut weights = Vec::new();
        let mut entropy = 0.0;
        for ci in 0..disc.num_cells() {
            let c = &disc.cells[ci];
            let vals = disc.cell_point_values(disc.cell_block(&state.coeffs, ci), ci);
            let dvals = disc.cell_point_values(disc.cell_block(delta, ci), ci);
            for ((a, b), w) in vals.into_iter().zip(dvals).zip(&c.weights) {
                entropy += w * disc.pde.entropy(&a)?;
                u.push(a);
                du.push(b);
                weights.push(*w);
            }
        }
        Ok(Self {
            pde: &disc.pde,
            num_vars: disc.num_vars(),
            u,
            du,
            weights,
            budget,
            entropy,
            trivial: delta.iter().all(|d| *d == 0.0),
        })
    }

    fn shifted(&self, p: usize, gamma: f64) -> (Vars, Vars) {
        let mut step = [0.0; MAX_VARS];
        let mut w = self.u[p];
        for i in 0..self.num_vars {
            step[i] = gamma * self.du[p][i];
            w[i] += step[i];
        }
        (step, w)
    }

    pub fn residual(&self, gamma: f64) -> Result<f64, StateError> {
        let mut r = 0.0;
        for p in 0..self.u.len() {
            let (step, _) = self.shifted(p, gamma);
            r += self.weights[p] * self.pde.entropy_difference(&self.u[p], &step)?;
        }
        Ok(r + gamma * self.budget)
    }

    pub fn derivative(&self, gamma: f64) -> Result<f64, StateError> {
        let mut d = 0.0;
        for p in 0..self.u.len() {
            let (_, w) = self.shifted(p, gamma);
            let v = self.pde.entropy_vars(&w)?;
            d += self.weights[p] * dot(&v, &self.du[p], self.num_vars);
        }
        Ok(d + self.budget)
    }

    /// Default acceptance tolerance `1e-13 max(1, |𝓔|)`.
    pub fn default_tolerance(&self) -> f64 {
        1e-13 * self.entropy.abs().max(1.0)
    }

    /// Newton from `γ = 1`, falling back to bisection if the iterate leaves
    /// `(0, 2]` or the tolerance is not met.
    pub fn solve(&self, tol: f64, max_iter: usize) -> Result<GammaResult, RelaxationError> {
        if self.trivial {
            return Ok(GammaResult {
                gamma: 1.0,
                iterations: 0,
                residual: 0.0,
                method: GammaMethod::Trivial,
            });
        }
        let mut gamma = 1.0;
        let mut iterations = 0;
        let mut newton_ok = false;
        while iterations < max_iter {
            iterations += 1;
            let (r, d) = match (self.residual(gamma), self.derivative(gamma)) {
                (Ok(r), Ok(d)) => (r, d),
                _ => break,
            };
            if d == 0.0 || !d.is_finite() {
                break;
            }
            let step = r / d;
            gamma -= step;
            if !(GAMMA_MIN..=2.0).contains(&gamma) {
                break;
            }
            if step.abs() <= 1e-15 * gamma.abs() || r == 0.0 {
                newton_ok = true;
                break;
            }
        }
        if newton_ok || (GAMMA_MIN..=2.0).contains(&gamma) {
            if let Ok(r) = self.residual(gamma) {
                if r.abs() <= tol {
                    return Ok(GammaResult {
                        gamma,
                        iterations,
                        residual: r,
                        method: GammaMethod::Newton,
                    });
                }
            }
        }
        self.bisect(tol, iterations)
    }

    fn bisect(&self, tol: f64, mut iterations: usize) -> Result<GammaResult, RelaxationError> {
        let mut lo = GAMMA_MIN;
        let r_lo = self.residual(lo)?;
        let mut hi = 2.0;
        let mut r_hi = self.residual(hi).unwrap_or(f64::NAN);
        while !(r_lo * r_hi <= 0.0) {
            if hi >= 4.0 {
                return Err(RelaxationError::NoRoot { lo, hi, r_lo, r_hi });
            }
            hi *= 2.0;
            r_hi = self.residual(hi).unwrap_or(f64::NAN);
        }
        let mut best = if r_lo.abs() < r_hi.abs() { (lo, r_lo) } else { (hi, r_hi) };
        for _ in 0..200 {
            iterations += 1;
            let mid = 0.5 * (lo + hi);
            let r = self.residual(mid)?;
            if r.abs() < best.1.abs() {
                best = (mid, r);
            }
            if r.abs() <= tol || hi - lo <= 4.0 * f64::EPSILON * hi {
                break;
            }
            if (r < 0.0) == (r_lo < 0.0) {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        if best.1.abs() > tol {
            return Err(RelaxationError::NotConverged {
                residual: best.1,
                tol,
                iterations,
            });
        }
        Ok(GammaResult {
            gamma: best.0,
            iterations,
            residual: best.1,
            method: GammaMethod::Bisection,
        })
    }
}

/// Closed-form `γ` for the quadratic entropy `u²/2`, with inner products
/// taken through the cell mass matrices.
pub fn solve_gamma_quadratic<P: PdeSystem>(
    disc: &Discretization<P>,
    state: &DgState,
    delta: &[f64],
    budget: f64,
) -> Result<GammaResult, RelaxationError> {
    if !disc.pde.has_quadratic_entropy() {
        return Err(RelaxationError::NotQuadratic);
    }
    let n = disc.num_modes();
    let (mut du_u, mut du_du) = (0.0, 0.0);
    for (ci, c) in disc.cells.iter().enumerate() {
        let u = nalgebra::DVector::from_column_slice(&state.coeffs[ci * n..(ci + 1) * n]);
        let d = nalgebra::DVector::from_column_slice(&delta[ci * n..(ci + 1) * n]);
        let md = &c.mass * &d;
        du_u += md.dot(&u);
        du_du += md.dot(&d);
    }
    Ok(quadratic_gamma(budget, du_u, du_du))
}

/// `γ = -2 (b + ⟨Δu, u⟩) / ⟨Δu, Δu⟩`, or 1 for a vanishing update.
pub fn quadratic_gamma(budget: f64, du_u: f64, du_du: f64) -> GammaResult {
    if du_du < 1e-28 {
        return GammaResult {
            gamma: 1.0,
            iterations: 0,
            residual: 0.0,
            method: GammaMethod::Trivial,
        };
    }
    let gamma = -2.0 * (budget + du_u) / du_du;
    let residual = gamma * (du_u + budget) + 0.5 * gamma * gamma * du_du;
    GammaResult {
        gamma,
        iterations: 0,
        residual,
        method: GammaMethod::Quadratic,
    }
}

/// `û ← û + γΔû`, `t ← t + γΔt`.
pub fn apply_relaxation(state: &mut DgState, delta: &[f64], gamma: f64, dt: f64) {
    if gamma == 1.0 {
        for (u, d) in state.coeffs.iter_mut().zip(delta) {
            *u += d;
        }
    } else {
        for (u, d) in state.coeffs.iter_mut().zip(delta) {
            *u += gamma * d;
        }
    }
    state.time += gamma * dt;
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{BoundarySpec, Mesh, Rect};
    use crate::pde::{Advection, Euler};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn advection() -> Discretization<Advection> {
        let mesh = Mesh::structured(3, 3, Rect::new(0.0, 1.0, 0.0, 1.0)).unwrap();
        Discretization::new(Advection::constant(1.0, 0.0), mesh, BoundarySpec::periodic(), 2).unwrap()
    }

    fn random_pair(d: &Discretization<Advection>, seed: u64, scale: f64) -> (DgState, Vec<f64>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let len = d.num_cells() * d.block_len();
        let u = (0..len).map(|_| rng.random_range(-1.0..1.0)).collect();
        let du = (0..len).map(|_| scale * rng.random_range(-1.0..1.0)).collect();
        (DgState { coeffs: u, time: 0.0 }, du)
    }

    #[test]
    fn quadratic_arithmetic_examples() {
        assert_eq!(quadratic_gamma(0.0, -1.0, 2.0).gamma, 1.0);
        assert_eq!(quadratic_gamma(0.5, -1.0, 2.0).gamma, 0.5);
        assert_eq!(quadratic_gamma(0.3, 1.0, 1e-30).method, GammaMethod::Trivial);
    }

    #[test]
    fn residual_vanishes_at_zero_and_is_linear_for_zero_update() {
        let d = advection();
        let (s, _) = random_pair(&d, 1, 0.1);
        let zero = vec![0.0; s.coeffs.len()];
        let p = RelaxationProblem::new(&d, &s, &zero, 0.25).unwrap();
        assert_eq!(p.residual(0.0).unwrap(), 0.0);
        assert_eq!(p.residual(0.8).unwrap(), 0.8 * 0.25);
        assert_eq!(p.derivative(1.7).unwrap(), 0.25);
        let r = p.solve(1e-13, 20).unwrap();
        assert_eq!((r.gamma, r.method), (1.0, GammaMethod::Trivial));
    }

    #[test]
    fn derivative_at_zero_for_quadratic_entropy() {
        let d = advection();
        let (s, du) = random_pair(&d, 2, 0.1);
        let p = RelaxationProblem::new(&d, &s, &du, 0.1).unwrap();
        let n = d.num_modes();
        let mut inner = 0.0;
        for (ci, c) in d.cells.iter().enumerate() {
            let u = nalgebra::DVector::from_column_slice(&s.coeffs[ci * n..(ci + 1) * n]);
            let v = nalgebra::DVector::from_column_slice(&du[ci * n..(ci + 1) * n]);
            inner += (&c.mass * v).dot(&u);
        }
        assert!((p.derivative(0.0).unwrap() - (inner + 0.1)).abs() < 1e-13);
    }

    #[test]
    fn manufactured_unit_gamma() {
        // ⟨u, Δu⟩ = -½⟨Δu, Δu⟩ with zero budget: Δu = -2u gives γ = 1.
        let d = advection();
        let (s, _) = random_pair(&d, 3, 0.0);
        let du: Vec<f64> = s.coeffs.iter().map(|u| -2.0 * u).collect();
        let p = RelaxationProblem::new(&d, &s, &du, 0.0).unwrap();
        let r = p.solve(1e-13, 50).unwrap();
        assert!((r.gamma - 1.0).abs() < 1e-12);
        assert!((solve_gamma_quadratic(&d, &s, &du, 0.0).unwrap().gamma - 1.0).abs() < 1e-12);
    }

    #[test]
    fn quadratic_form_requires_quadratic_entropy() {
        let mesh = Mesh::structured(2, 2, Rect::new(0.0, 1.0, 0.0, 1.0)).unwrap();
        let d = Discretization::new(Euler::default(), mesh, BoundarySpec::periodic(), 1).unwrap();
        let s = d.project(|_| [1.0, 0.0, 0.0, 2.5], 0.0);
        let du = vec![0.0; s.coeffs.len()];
        assert!(matches!(solve_gamma_quadratic(&d, &s, &du, 0.0), Err(RelaxationError::NotQuadratic)));
    }

    #[test]
    fn no_root_is_reported() {
        // R(γ) = γ(⟨u,Δu⟩ + b) + γ²/2 |Δu|² has no positive root when both terms are positive.
        let d = advection();
        let (s, _) = random_pair(&d, 4, 0.0);
        let du: Vec<f64> = s.coeffs.iter().map(|u| 0.1 * u).collect();
        let p = RelaxationProblem::new(&d, &s, &du, 1.0).unwrap();
        assert!(matches!(p.solve(1e-13, 20), Err(RelaxationError::NoRoot { .. })));
    }

    #[test]
    fn relaxation_off_matches_plain_update_bitwise() {
        let d = advection();
        let (s, du) = random_pair(&d, 5, 0.1);
        let mut a = s.clone();
        apply_relaxation(&mut a, &du, 1.0, 0.1);
        let plain: Vec<f64> = s.coeffs.iter().zip(&du).map(|(u, d)| u + d).collect();
        assert_eq!(a.coeffs, plain);
        let mut b = s.clone();
        apply_relaxation(&mut b, &du, 0.5, 0.1);
        assert_eq!(b.time, 0.05);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn residual_matches_the_closed_form_quadratic(seed in 0u64..1000, gamma in 0.0f64..2.0, b in -0.5f64..0.5) {
            let d = advection();
            let (s, du) = random_pair(&d, seed, 0.2);
            let p = RelaxationProblem::new(&d, &s, &du, b).unwrap();
            let n = d.num_modes();
            let (mut uu, mut dd) = (0.0, 0.0);
            for (ci, c) in d.cells.iter().enumerate() {
                let u = nalgebra::DVector::from_column_slice(&s.coeffs[ci * n..(ci + 1) * n]);
                let v = nalgebra::DVector::from_column_slice(&du[ci * n..(ci + 1) * n]);
                let mv = &c.mass * v.clone();
                uu += mv.dot(&u);
                dd += mv.dot(&v);
            }
            let closed = gamma * (uu + b) + 0.5 * gamma * gamma * dd;
            prop_assert!((p.residual(gamma).unwrap() - closed).abs() < 1e-13);
        }

        #[test]
        fn newton_matches_the_closed_form(seed in 0u64..1000) {
            let d = advection();
            let (s, du) = random_pair(&d, seed, 0.01);
            // Choose the budget so that the root sits near 1.
            let p0 = RelaxationProblem::new(&d, &s, &du, 0.0).unwrap();
            let b = -p0.residual(1.0).unwrap() * (1.0 + 1e-3);
            let p = RelaxationProblem::new(&d, &s, &du, b).unwrap();
            let newton = p.solve(p.default_tolerance(), 50).unwrap();
            let quad = solve_gamma_quadratic(&d, &s, &du, b).unwrap();
            prop_assert!((newton.gamma - quad.gamma).abs() < 1e-12);
        }

        #[test]
        fn derivative_matches_finite_differences(seed in 0u64..1000, gamma in 0.2f64..1.8) {
            let mesh = Mesh::structured(2, 2, Rect::new(0.0, 1.0, 0.0, 1.0)).unwrap();
            let d = Discretization::new(Euler::default(), mesh, BoundarySpec::periodic(), 1).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let s = d.project(|x| d.pde.conserved(1.0 + 0.2 * x[0], 0.3 * x[1], -0.1, 1.0 + 0.1 * x[1]), 0.0);
            let du: Vec<f64> = s.coeffs.iter().map(|u| 0.05 * u * rng.random_range(-1.0..1.0)).collect();
            let p = RelaxationProblem::new(&d, &s, &du, 0.01).unwrap();
            let h = 1e-6;
            let fd = (p.residual(gamma + h).unwrap() - p.residual(gamma - h).unwrap()) / (2.0 * h);
            let an = p.derivative(gamma).unwrap();
            prop_assert!((fd - an).abs() <= 1e-6 * an.abs().max(1e-3), "{fd} vs {an}");
        }
    }
}
