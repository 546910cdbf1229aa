//! Test problems: initial data, boundary conditions, exact solutions and
//! convergence helpers.

use std::f64::consts::PI;
use std::sync::Arc;

use crate::discretization::{DgState, Discretization};
use crate::error::{Result, SolverError};
use crate::mesh::{BoundaryCondition, BoundarySpec, Mesh, Point, Rect, StateFn};
use crate::pde::{Advection, Euler, Pde, ShallowWater, Vars};
use crate::solver::RelaxationMode;

pub const CASE_NAMES: [&str; 6] = [
    "traveling_bump",
    "rotating_bump",
    "sw_vortex",
    "shu_vortex",
    "contact_discontinuity",
    "problem_123",
];

#[derive(Clone)]
pub struct TestCase {
    pub name: &'static str,
    pub pde: Pde,
    pub domain: Rect,
    pub bc: BoundarySpec,
    pub initial: StateFn,
    pub exact: Option<StateFn>,
    pub final_time: f64,
    pub default_relaxation: RelaxationMode,
}

impl std::fmt::Debug for TestCase {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("TestCase")
            .field("name", &self.name)
            .field("pde", &self.pde)
            .field("domain", &self.domain)
            .field("final_time", &self.final_time)
            .finish_non_exhaustive()
    }
}

impl TestCase {
    pub fn initial_at(&self, x: Point) -> Vars {
        (self.initial)(x, 0.0)
    }

    pub fn structured_mesh(&self, nx: usize, ny: usize) -> Result<Mesh> {
        Ok(Mesh::structured(nx, ny, self.domain)?)
    }

    pub fn discretize(&self, mesh: Mesh, degree: usize) -> Result<Discretization<Pde>> {
        Discretization::new(self.pde.clone(), mesh, self.bc.clone(), degree)
    }

    /// L2 projection of the initial data. Cells whose projection is not
    /// admissible are pulled toward their cell mean.
    pub fn initial_state(&self, disc: &Discretization<Pde>) -> Result<DgState> {
        let mut state = disc.project(|x| self.initial_at(x), 0.0);
        disc.scale_to_admissible(&mut state)?;
        Ok(state)
    }

    /// Per-variable L2 error at the state's time.
    pub fn l2_error(&self, disc: &Discretization<Pde>, state: &DgState) -> Result<Vars> {
        let exact = self
            .exact
            .as_ref()
            .ok_or_else(|| SolverError::Unsupported(format!("case {} has no exact solution", self.name)))?;
        Ok(disc.l2_error(state, |x, t| exact(x, t)))
    }
}

/// Observed orders `log(e₁/e₂) / log(h₁/h₂)` between consecutive meshes.
pub fn observed_order(errors: &[f64], sizes: &[f64]) -> Vec<f64> {
    errors
        .windows(2)
        .zip(sizes.windows(2))
        .map(|(e, h)| (e[0] / e[1]).ln() / (h[0] / h[1]).ln())
        .collect()
}

/// Case by name; `mean_h` enters the contact smoothing width.
pub fn by_name(name: &str, mean_h: f64) -> Result<TestCase> {
    match name {
        "traveling_bump" => Ok(traveling_bump()),
        "rotating_bump" => Ok(rotating_bump()),
        "sw_vortex" => Ok(sw_vortex()),
        "shu_vortex" => Ok(shu_vortex()),
        "contact_discontinuity" => Ok(contact_discontinuity(mean_h)),
        "problem_123" => Ok(problem_123()),
        other => Err(SolverError::Config(format!(
            "unknown case '{other}', expected one of {}",
            CASE_NAMES.join(", ")
        ))),
    }
}

fn scalar(v: f64) -> Vars {
    [v, 0.0, 0.0, 0.0]
}

/// `e^{1 - 1/(1-r²)}` for `r < 1`, zero outside.
pub fn bump(r2: f64) -> f64 {
    if r2 < 1.0 {
        (1.0 - 1.0 / (1.0 - r2)).exp()
    } else {
        0.0
    }
}

/// Wraps `d` into `[-L/2, L/2)`.
fn nearest_image(d: f64, length: f64) -> f64 {
    d - length * (d / length + 0.5).floor()
}

pub fn traveling_bump() -> TestCase {
    let domain = Rect::new(-1.5, 1.5, -1.5, 1.5);
    let exact: StateFn = Arc::new(move |x: Point, t: f64| {
        let y = nearest_image(x[0] - t, 3.0);
        scalar(bump(y * y + x[1] * x[1]))
    });
    TestCase {
        name: "traveling_bump",
        pde: Advection::constant(1.0, 0.0).into(),
        domain,
        bc: BoundarySpec::new(
            BoundaryCondition::Periodic,
            BoundaryCondition::Periodic,
            BoundaryCondition::Wall,
            BoundaryCondition::Wall,
        )
        .expect("paired periodic sides"),
        initial: exact.clone(),
        exact: Some(exact),
        final_time: 3.0,
        default_relaxation: RelaxationMode::Conservative,
    }
}

pub fn rotating_bump() -> TestCase {
    let exact: StateFn = Arc::new(|x: Point, t: f64| {
        // Rotate back by angle t.
        let (s, c) = t.sin_cos();
        let (x0, y0) = (c * x[0] + s * x[1], -s * x[0] + c * x[1]);
        let dy = y0 - 1.5;
        scalar(bump(x0 * x0 + dy * dy))
    });
    let zero: StateFn = Arc::new(|_, _| [0.0; 4]);
    TestCase {
        name: "rotating_bump",
        pde: Advection::rotation().into(),
        domain: Rect::new(-3.0, 3.0, -3.0, 3.0),
        bc: BoundarySpec::uniform(BoundaryCondition::Dirichlet(zero)).expect("no periodic sides"),
        initial: exact.clone(),
        exact: Some(exact),
        final_time: 0.1,
        default_relaxation: RelaxationMode::Conservative,
    }
}

/// Parameters of the compactly supported shallow water vortex.
#[derive(Debug, Clone, Copy)]
pub struct SwVortex {
    pub g: f64,
    pub center: Point,
    pub r0: f64,
    pub dh: f64,
    pub hc: f64,
    pub uc: f64,
    pub vc: f64,
}

impl Default for SwVortex {
    fn default() -> Self {
        Self {
            g: 9.81,
            center: [0.5, 0.5],
            r0: 0.45,
            dh: 0.1,
            hc: 1.0,
            uc: 1.0,
            vc: 0.0,
        }
    }
}

impl SwVortex {
    pub fn omega(&self) -> f64 {
        PI / self.r0
    }

    pub fn intensity(&self) -> f64 {
        12.0 * PI * (self.g * self.dh).sqrt() / (self.r0 * (315.0 * PI * PI - 2048.0).sqrt())
    }

    pub fn lambda(r: f64) -> f64 {
        let (s, c) = r.sin_cos();
        20.0 * c / 3.0 + 27.0 * c * c / 16.0 + 4.0 * c.powi(3) / 9.0 + c.powi(4) / 16.0 + 20.0 * r * s / 3.0
            + 35.0 * r * r / 16.0
            + 27.0 * r * c * s / 8.0
            + 4.0 * r * c * c * s / 3.0
            + r * c.powi(3) * s / 4.0
    }

    /// Primitive `(h, u, v)` at `(x, t)` on the unit periodic box.
    pub fn primitive(&self, x: Point, t: f64) -> [f64; 3] {
        let ix = nearest_image(x[0] - self.center[0] - self.uc * t, 1.0);
        let iy = nearest_image(x[1] - self.center[1] - self.vc * t, 1.0);
        let w = self.omega();
        let r = ix.hypot(iy);
        if w * r > PI {
            return [self.hc, self.uc, self.vc];
        }
        let gam = self.intensity();
        let h = self.hc + gam * gam / (self.g * w * w) * (Self::lambda(w * r) - Self::lambda(PI));
        let f = gam * (1.0 + (w * r).cos()).powi(2);
        [h, self.uc - f * iy, self.vc + f * ix]
    }
}

pub fn sw_vortex() -> TestCase {
    let v = SwVortex::default();
    let exact: StateFn = Arc::new(move |x: Point, t: f64| {
        let [h, a, b] = v.primitive(x, t);
        [h, h * a, h * b, 0.0]
    });
    TestCase {
        name: "sw_vortex",
        pde: ShallowWater::new(v.g).into(),
        domain: Rect::new(0.0, 1.0, 0.0, 1.0),
        bc: BoundarySpec::periodic(),
        initial: exact.clone(),
        exact: Some(exact),
        final_time: 1.0,
        default_relaxation: RelaxationMode::Conservative,
    }
}

/// Isentropic vortex with strength 5 on `[0, 10]²`, background `(1, 1, 1, 1)`.
pub fn shu_vortex() -> TestCase {
    let e = Euler::new(1.4);
    let beta = 5.0;
    let exact: StateFn = Arc::new(move |x: Point, t: f64| {
        let g = e.gamma;
        let dx = nearest_image(x[0] - 5.0 - t, 10.0);
        let dy = nearest_image(x[1] - 5.0 - t, 10.0);
        let r2 = dx * dx + dy * dy;
        let du = beta / (2.0 * PI) * (0.5 * (1.0 - r2)).exp();
        let temp = 1.0 - (g - 1.0) * beta * beta / (8.0 * g * PI * PI) * (1.0 - r2).exp();
        let rho = temp.powf(1.0 / (g - 1.0));
        e.conserved(rho, 1.0 - du * dy, 1.0 + du * dx, rho * temp)
    });
    TestCase {
        name: "shu_vortex",
        pde: e.into(),
        domain: Rect::new(0.0, 10.0, 0.0, 10.0),
        bc: BoundarySpec::periodic(),
        initial: exact.clone(),
        exact: Some(exact),
        final_time: 1.0,
        default_relaxation: RelaxationMode::Conservative,
    }
}

/// Smoothed contact between `(1.5, 1, 0, 1)` and `(1, 1, 0, 1)` in `(ρ, u, v, p)`,
/// moving right with unit speed.
pub fn contact_discontinuity(mean_h: f64) -> TestCase {
    let e = Euler::new(1.4);
    let width = 2.0 * mean_h;
    let exact: StateFn = Arc::new(move |x: Point, t: f64| {
        let (rl, rr) = (1.5, 1.0);
        let rho = 0.5 * (rr + rl) + 0.5 * (rr - rl) * libm::erf((x[0] - t) / width);
        e.conserved(rho, 1.0, 0.0, 1.0)
    });
    TestCase {
        name: "contact_discontinuity",
        pde: e.into(),
        domain: Rect::new(-1.0, 1.0, 0.0, 1.0),
        bc: BoundarySpec::new(
            BoundaryCondition::Dirichlet(exact.clone()),
            BoundaryCondition::Transmissive,
            BoundaryCondition::Periodic,
            BoundaryCondition::Periodic,
        )
        .expect("paired periodic sides"),
        initial: exact.clone(),
        exact: Some(exact),
        final_time: 0.2,
        default_relaxation: RelaxationMode::Conservative,
    }
}

pub fn problem_123() -> TestCase {
    let e = Euler::new(1.4);
    let initial: StateFn = Arc::new(move |x: Point, _t: f64| {
        let s = 2.0 / (x[0].hypot(x[1]) + 1e-4);
        e.conserved(1.0, s * x[0], s * x[1], 0.4)
    });
    TestCase {
        name: "problem_123",
        pde: e.into(),
        domain: Rect::new(-1.2, 1.2, -1.2, 1.2),
        bc: BoundarySpec::uniform(BoundaryCondition::Transmissive).expect("no periodic sides"),
        initial,
        exact: None,
        final_time: 0.15,
        default_relaxation: RelaxationMode::Conservative,
    }
}
