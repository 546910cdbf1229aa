//! Hyperbolic systems with their entropy pairs.
//!
//! States are fixed-size arrays of [`MAX_VARS`] entries; only the first
//! [`PdeSystem::num_vars`] are meaningful and the rest stay zero.

mod advection;
mod euler;
mod shallow_water;

pub use advection::{Advection, Velocity};
pub use euler::Euler;
pub use shallow_water::ShallowWater;

use crate::error::StateError;
use crate::mesh::Point;

pub const MAX_VARS: usize = 4;

/// A state or state-like vector.
pub type Vars = [f64; MAX_VARS];
/// A square matrix acting on [`Vars`].
pub type Mat = [[f64; MAX_VARS]; MAX_VARS];

/// Smallest admissible depth, density or pressure.
pub const ADMISSIBILITY_FLOOR: f64 = 1e-12;

pub fn mat_vec(a: &Mat, x: &Vars, m: usize) -> Vars {
    let mut y = [0.0; MAX_VARS];
    for i in 0..m {
        for j in 0..m {
            y[i] += a[i][j] * x[j];
        }
    }
    y
}

pub fn dot(a: &Vars, b: &Vars, m: usize) -> f64 {
    (0..m).map(|i| a[i] * b[i]).sum()
}

pub trait PdeSystem: Send + Sync {
    fn name(&self) -> &'static str;

    fn num_vars(&self) -> usize;

    /// Component names, for output headers.
    fn var_names(&self) -> &'static [&'static str];

    fn check_admissible(&self, u: &Vars) -> Result<(), StateError>;

    /// Physical flux; `F[d]` is the flux in direction `d`.
    fn flux(&self, u: &Vars, x: Point) -> Result<[Vars; 2], StateError>;

    /// `J[d][i][j] = ∂F_d,i / ∂u_j`.
    fn flux_jacobian(&self, u: &Vars, x: Point) -> Result<[Mat; 2], StateError>;

    /// `∇·F(u(x))` given the state and its spatial gradient `grad[d] = ∂_d u`.
    fn flux_divergence(&self, u: &Vars, grad: &[Vars; 2], x: Point) -> Result<Vars, StateError> {
        let m = self.num_vars();
        let [jx, jy] = self.flux_jacobian(u, x)?;
        let a = mat_vec(&jx, &grad[0], m);
        let b = mat_vec(&jy, &grad[1], m);
        let mut out = [0.0; MAX_VARS];
        for i in 0..m {
            out[i] = a[i] + b[i];
        }
        Ok(out)
    }

    /// Spectral radius of the flux Jacobian in direction `n`.
    fn normal_speed(&self, u: &Vars, n: Point, x: Point) -> Result<f64, StateError>;

    /// Largest signal speed in any direction, used for the time step.
    fn max_speed(&self, u: &Vars, x: Point) -> Result<f64, StateError>;

    /// Rusanov dissipation coefficient for the pair of traces.
    fn max_wavespeed(&self, um: &Vars, up: &Vars, n: Point, x: Point) -> Result<f64, StateError> {
        Ok(self.normal_speed(um, n, x)?.max(self.normal_speed(up, n, x)?))
    }

    fn entropy(&self, u: &Vars) -> Result<f64, StateError>;

    /// `η(u + du) - η(u)`; overridden where a cancellation-free form exists.
    fn entropy_difference(&self, u: &Vars, du: &Vars) -> Result<f64, StateError> {
        let mut w = *u;
        for i in 0..self.num_vars() {
            w[i] += du[i];
        }
        Ok(self.entropy(&w)? - self.entropy(u)?)
    }

    fn entropy_vars(&self, u: &Vars) -> Result<Vars, StateError>;

    /// `∂v/∂u`, the Hessian of the entropy.
    fn entropy_hessian(&self, u: &Vars) -> Result<Mat, StateError>;

    fn entropy_flux(&self, u: &Vars, x: Point) -> Result<[f64; 2], StateError>;

    /// `ψ = vᵀF - G`.
    fn entropy_potential(&self, u: &Vars, x: Point) -> Result<[f64; 2], StateError> {
        let m = self.num_vars();
        let v = self.entropy_vars(u)?;
        let f = self.flux(u, x)?;
        let g = self.entropy_flux(u, x)?;
        Ok([dot(&v, &f[0], m) - g[0], dot(&v, &f[1], m) - g[1]])
    }

    /// Inverse entropy Hessian.
    fn a0(&self, u: &Vars) -> Result<Mat, StateError>;

    /// Ghost state of a reflective wall with outward normal `n`.
    fn reflect(&self, u: &Vars, n: Point) -> Vars;

    /// True if the entropy is `u²/2` of a scalar state.
    fn has_quadratic_entropy(&self) -> bool {
        false
    }
}

/// Any of the built-in systems.
#[derive(Debug, Clone, PartialEq)]
pub enum Pde {
    Advection(Advection),
    ShallowWater(ShallowWater),
    Euler(Euler),
}

macro_rules! dispatch {
    ($self:ident, $p:ident => $e:expr) => {
        match $self {
            Pde::Advection($p) => $e,
            Pde::ShallowWater($p) => $e,
            Pde::Euler($p) => $e,
        }
    };
}

impl PdeSystem for Pde {
    fn name(&self) -> &'static str {
        dispatch!(self, p => p.name())
    }
    fn num_vars(&self) -> usize {
        dispatch!(self, p => p.num_vars())
    }
    fn var_names(&self) -> &'static [&'static str] {
        dispatch!(self, p => p.var_names())
    }
    fn check_admissible(&self, u: &Vars) -> Result<(), StateError> {
        dispatch!(self, p => p.check_admissible(u))
    }
    fn flux(&self, u: &Vars, x: Point) -> Result<[Vars; 2], StateError> {
        dispatch!(self, p => p.flux(u, x))
    }
    fn flux_jacobian(&self, u: &Vars, x: Point) -> Result<[Mat; 2], StateError> {
        dispatch!(self, p => p.flux_jacobian(u, x))
    }
    fn flux_divergence(&self, u: &Vars, grad: &[Vars; 2], x: Point) -> Result<Vars, StateError> {
        dispatch!(self, p => p.flux_divergence(u, grad, x))
    }
    fn normal_speed(&self, u: &Vars, n: Point, x: Point) -> Result<f64, StateError> {
        dispatch!(self, p => p.normal_speed(u, n, x))
    }
    fn max_speed(&self, u: &Vars, x: Point) -> Result<f64, StateError> {
        dispatch!(self, p => p.max_speed(u, x))
    }
    fn max_wavespeed(&self, um: &Vars, up: &Vars, n: Point, x: Point) -> Result<f64, StateError> {
        dispatch!(self, p => p.max_wavespeed(um, up, n, x))
    }
    fn entropy(&self, u: &Vars) -> Result<f64, StateError> {
        dispatch!(self, p => p.entropy(u))
    }
    fn entropy_difference(&self, u: &Vars, du: &Vars) -> Result<f64, StateError> {
        dispatch!(self, p => p.entropy_difference(u, du))
    }
    fn entropy_vars(&self, u: &Vars) -> Result<Vars, StateError> {
        dispatch!(self, p => p.entropy_vars(u))
    }
    fn entropy_hessian(&self, u: &Vars) -> Result<Mat, StateError> {
        dispatch!(self, p => p.entropy_hessian(u))
    }
    fn entropy_flux(&self, u: &Vars, x: Point) -> Result<[f64; 2], StateError> {
        dispatch!(self, p => p.entropy_flux(u, x))
    }
    fn entropy_potential(&self, u: &Vars, x: Point) -> Result<[f64; 2], StateError> {
        dispatch!(self, p => p.entropy_potential(u, x))
    }
    fn a0(&self, u: &Vars) -> Result<Mat, StateError> {
        dispatch!(self, p => p.a0(u))
    }
    fn reflect(&self, u: &Vars, n: Point) -> Vars {
        dispatch!(self, p => p.reflect(u, n))
    }
    fn has_quadratic_entropy(&self) -> bool {
        dispatch!(self, p => p.has_quadratic_entropy())
    }
}

impl From<Advection> for Pde {
    fn from(p: Advection) -> Self {
        Pde::Advection(p)
    }
}

impl From<ShallowWater> for Pde {
    fn from(p: ShallowWater) -> Self {
        Pde::ShallowWater(p)
    }
}

impl From<Euler> for Pde {
    fn from(p: Euler) -> Self {
        Pde::Euler(p)
    }
}

/// Reflects the momentum components `1..=2` about the plane with normal `n`.
pub(crate) fn reflect_momentum(u: &Vars, n: Point) -> Vars {
    let mn = u[1] * n[0] + u[2] * n[1];
    let mut g = *u;
    g[1] -= 2.0 * mn * n[0];
    g[2] -= 2.0 * mn * n[1];
    g
}

pub(crate) fn nonfinite(system: &'static str, u: &Vars, m: usize) -> Result<(), StateError> {
    for (i, &value) in u[..m].iter().enumerate() {
        if !value.is_finite() {
            const NAMES: [&str; MAX_VARS] = ["u0", "u1", "u2", "u3"];
            return Err(StateError {
                system,
                quantity: NAMES[i],
                value,
            });
        }
    }
    Ok(())
}
