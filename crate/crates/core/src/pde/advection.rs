use super::{nonfinite, Mat, PdeSystem, Vars, MAX_VARS};
use crate::error::StateError;
use crate::mesh::Point;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Velocity {
    Constant([f64; 2]),
    /// Solid-body rotation `a = (-y, x)`.
    Rotation,
}

impl Velocity {
    pub fn at(&self, x: Point) -> [f64; 2] {
        match *self {
            Velocity::Constant(a) => a,
            Velocity::Rotation => [-x[1], x[0]],
        }
    }
}

/// Scalar transport `u_t + ∇·(a u) = 0` with divergence-free `a`, entropy `u²/2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Advection {
    pub velocity: Velocity,
}

impl Advection {
    pub fn constant(a1: f64, a2: f64) -> Self {
        Self {
            velocity: Velocity::Constant([a1, a2]),
        }
    }

    pub fn rotation() -> Self {
        Self {
            velocity: Velocity::Rotation,
        }
    }
}

fn scalar(v: f64) -> Vars {
    let mut u = [0.0; MAX_VARS];
    u[0] = v;
    u
}

impl PdeSystem for Advection {
    fn name(&self) -> &'static str {
        "advection"
    }

    fn num_vars(&self) -> usize {
        1
    }

    fn var_names(&self) -> &'static [&'static str] {
        &["u"]
    }

    fn check_admissible(&self, u: &Vars) -> Result<(), StateError> {
        nonfinite("advection", u, 1)
    }

    fn flux(&self, u: &Vars, x: Point) -> Result<[Vars; 2], StateError> {
        self.check_admissible(u)?;
        let a = self.velocity.at(x);
        Ok([scalar(a[0] * u[0]), scalar(a[1] * u[0])])
    }

    fn flux_jacobian(&self, u: &Vars, x: Point) -> Result<[Mat; 2], StateError> {
        self.check_admissible(u)?;
        let a = self.velocity.at(x);
        let mut jx = [[0.0; MAX_VARS]; MAX_VARS];
        let mut jy = jx;
        jx[0][0] = a[0];
        jy[0][0] = a[1];
        Ok([jx, jy])
    }

    fn normal_speed(&self, u: &Vars, n: Point, x: Point) -> Result<f64, StateError> {
        self.check_admissible(u)?;
        let a = self.velocity.at(x);
        Ok((a[0] * n[0] + a[1] * n[1]).abs())
    }

    fn max_speed(&self, u: &Vars, x: Point) -> Result<f64, StateError> {
        self.check_admissible(u)?;
        let a = self.velocity.at(x);
        Ok(a[0].hypot(a[1]))
    }

    fn entropy(&self, u: &Vars) -> Result<f64, StateError> {
        self.check_admissible(u)?;
        Ok(0.5 * u[0] * u[0])
    }

    fn entropy_difference(&self, u: &Vars, du: &Vars) -> Result<f64, StateError> {
        self.check_admissible(u)?;
        Ok(du[0] * (u[0] + 0.5 * du[0]))
    }

    fn entropy_vars(&self, u: &Vars) -> Result<Vars, StateError> {
        self.check_admissible(u)?;
        Ok(scalar(u[0]))
    }

    fn entropy_hessian(&self, u: &Vars) -> Result<Mat, StateError> {
        self.check_admissible(u)?;
        let mut h = [[0.0; MAX_VARS]; MAX_VARS];
        h[0][0] = 1.0;
        Ok(h)
    }

    fn entropy_flux(&self, u: &Vars, x: Point) -> Result<[f64; 2], StateError> {
        let eta = self.entropy(u)?;
        let a = self.velocity.at(x);
        Ok([eta * a[0], eta * a[1]])
    }

    fn a0(&self, u: &Vars) -> Result<Mat, StateError> {
        self.entropy_hessian(u)
    }

    fn reflect(&self, u: &Vars, _n: Point) -> Vars {
        *u
    }

    fn has_quadratic_entropy(&self) -> bool {
        true
    }
}
