use super::{nonfinite, reflect_momentum, Mat, PdeSystem, Vars, ADMISSIBILITY_FLOOR};
use crate::error::StateError;
use crate::mesh::Point;

/// Shallow water equations in `(h, hu, hv)`; entropy is the total energy.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShallowWater {
    pub g: f64,
}

impl Default for ShallowWater {
    fn default() -> Self {
        Self { g: 9.81 }
    }
}

impl ShallowWater {
    pub fn new(g: f64) -> Self {
        Self { g }
    }

    /// `(h, u, v)` of an admissible state.
    fn primitive(&self, u: &Vars) -> Result<(f64, f64, f64), StateError> {
        self.check_admissible(u)?;
        let h = u[0];
        Ok((h, u[1] / h, u[2] / h))
    }
}

impl PdeSystem for ShallowWater {
    fn name(&self) -> &'static str {
        "swe"
    }

    fn num_vars(&self) -> usize {
        3
    }

    fn var_names(&self) -> &'static [&'static str] {
        &["h", "hu", "hv"]
    }

    fn check_admissible(&self, u: &Vars) -> Result<(), StateError> {
        nonfinite("swe", u, 3)?;
        if u[0] <= ADMISSIBILITY_FLOOR {
            return Err(StateError {
                system: "swe",
                quantity: "h",
                value: u[0],
            });
        }
        Ok(())
    }

    fn flux(&self, u: &Vars, _x: Point) -> Result<[Vars; 2], StateError> {
        let (h, vx, vy) = self.primitive(u)?;
        let p = 0.5 * self.g * h * h;
        Ok([
            [u[1], u[1] * vx + p, u[2] * vx, 0.0],
            [u[2], u[1] * vy, u[2] * vy + p, 0.0],
        ])
    }

    fn flux_jacobian(&self, u: &Vars, _x: Point) -> Result<[Mat; 2], StateError> {
        let (h, a, b) = self.primitive(u)?;
        let gh = self.g * h;
        Ok([
            [
                [0.0, 1.0, 0.0, 0.0],
                [gh - a * a, 2.0 * a, 0.0, 0.0],
                [-a * b, b, a, 0.0],
                [0.0; 4],
            ],
            [
                [0.0, 0.0, 1.0, 0.0],
                [-a * b, b, a, 0.0],
                [gh - b * b, 0.0, 2.0 * b, 0.0],
                [0.0; 4],
            ],
        ])
    }

    fn normal_speed(&self, u: &Vars, n: Point, _x: Point) -> Result<f64, StateError> {
        let (h, a, b) = self.primitive(u)?;
        Ok((a * n[0] + b * n[1]).abs() + (self.g * h).sqrt())
    }

    fn max_speed(&self, u: &Vars, _x: Point) -> Result<f64, StateError> {
        let (h, a, b) = self.primitive(u)?;
        Ok(a.hypot(b) + (self.g * h).sqrt())
    }

    fn entropy(&self, u: &Vars) -> Result<f64, StateError> {
        let (h, a, b) = self.primitive(u)?;
        Ok(0.5 * h * (a * a + b * b) + 0.5 * self.g * h * h)
    }

    fn entropy_vars(&self, u: &Vars) -> Result<Vars, StateError> {
        let (h, a, b) = self.primitive(u)?;
        let k = 0.5 * (a * a + b * b);
        Ok([self.g * h - k, a, b, 0.0])
    }

    fn entropy_hessian(&self, u: &Vars) -> Result<Mat, StateError> {
        let (h, a, b) = self.primitive(u)?;
        let k = 0.5 * (a * a + b * b);
        let s = 1.0 / h;
        Ok([
            [s * (self.g * h + 2.0 * k), -s * a, -s * b, 0.0],
            [-s * a, s, 0.0, 0.0],
            [-s * b, 0.0, s, 0.0],
            [0.0; 4],
        ])
    }

    fn entropy_flux(&self, u: &Vars, _x: Point) -> Result<[f64; 2], StateError> {
        let (h, a, b) = self.primitive(u)?;
        let k = 0.5 * (a * a + b * b);
        let c = self.g * h + k;
        Ok([u[1] * c, u[2] * c])
    }

    fn a0(&self, u: &Vars) -> Result<Mat, StateError> {
        let (h, a, b) = self.primitive(u)?;
        let gh = self.g * h;
        let s = 1.0 / self.g;
        Ok([
            [s, s * a, s * b, 0.0],
            [s * a, s * (gh + a * a), s * a * b, 0.0],
            [s * b, s * a * b, s * (gh + b * b), 0.0],
            [0.0; 4],
        ])
    }

    fn reflect(&self, u: &Vars, n: Point) -> Vars {
        reflect_momentum(u, n)
    }
}
