use super::{nonfinite, reflect_momentum, Mat, PdeSystem, Vars, ADMISSIBILITY_FLOOR};
use crate::error::StateError;
use crate::mesh::Point;

/// Compressible Euler equations in `(ρ, ρu, ρv, E)` for an ideal gas, with
/// entropy `η = -(γ+1)/(γ-1) (ρ p)^{1/(γ+1)}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Euler {
    pub gamma: f64,
}

impl Default for Euler {
    fn default() -> Self {
        Self { gamma: 1.4 }
    }
}

struct Prim {
    rho: f64,
    u: f64,
    v: f64,
    p: f64,
}

impl Euler {
    pub fn new(gamma: f64) -> Self {
        Self { gamma }
    }

    pub fn pressure(&self, u: &Vars) -> f64 {
        (self.gamma - 1.0) * (u[3] - 0.5 * (u[1] * u[1] + u[2] * u[2]) / u[0])
    }

    /// Conserved state from `(ρ, u, v, p)`.
    pub fn conserved(&self, rho: f64, vx: f64, vy: f64, p: f64) -> Vars {
        [
            rho,
            rho * vx,
            rho * vy,
            p / (self.gamma - 1.0) + 0.5 * rho * (vx * vx + vy * vy),
        ]
    }

    fn prim(&self, u: &Vars) -> Result<Prim, StateError> {
        self.check_admissible(u)?;
        Ok(Prim {
            rho: u[0],
            u: u[1] / u[0],
            v: u[2] / u[0],
            p: self.pressure(u),
        })
    }

    /// `(ρp)^{-γ/(γ+1)}` and `z = (E, -m, ρ)`.
    fn entropy_factors(&self, u: &Vars, w: &Prim) -> (f64, Vars) {
        let a = self.gamma / (self.gamma + 1.0);
        ((w.rho * w.p).powf(-a), [u[3], -u[1], -u[2], u[0]])
    }
}

impl PdeSystem for Euler {
    fn name(&self) -> &'static str {
        "euler"
    }

    fn num_vars(&self) -> usize {
        4
    }

    fn var_names(&self) -> &'static [&'static str] {
        &["rho", "rhou", "rhov", "E"]
    }

    fn check_admissible(&self, u: &Vars) -> Result<(), StateError> {
        nonfinite("euler", u, 4)?;
        if u[0] <= ADMISSIBILITY_FLOOR {
            return Err(StateError {
                system: "euler",
                quantity: "rho",
                value: u[0],
            });
        }
        let p = self.pressure(u);
        if !(p > ADMISSIBILITY_FLOOR) {
            return Err(StateError {
                system: "euler",
                quantity: "p",
                value: p,
            });
        }
        Ok(())
    }

    fn flux(&self, u: &Vars, _x: Point) -> Result<[Vars; 2], StateError> {
        let w = self.prim(u)?;
        Ok([
            [u[1], u[1] * w.u + w.p, u[2] * w.u, (u[3] + w.p) * w.u],
            [u[2], u[1] * w.v, u[2] * w.v + w.p, (u[3] + w.p) * w.v],
        ])
    }

    fn flux_jacobian(&self, u: &Vars, _x: Point) -> Result<[Mat; 2], StateError> {
        let w = self.prim(u)?;
        let g = self.gamma;
        let gm = g - 1.0;
        let (a, b) = (w.u, w.v);
        let k = 0.5 * (a * a + b * b);
        let hh = (u[3] + w.p) / w.rho;
        Ok([
            [
                [0.0, 1.0, 0.0, 0.0],
                [gm * k - a * a, (3.0 - g) * a, -gm * b, gm],
                [-a * b, b, a, 0.0],
                [a * (gm * k - hh), hh - gm * a * a, -gm * a * b, g * a],
            ],
            [
                [0.0, 0.0, 1.0, 0.0],
                [-a * b, b, a, 0.0],
                [gm * k - b * b, -gm * a, (3.0 - g) * b, gm],
                [b * (gm * k - hh), -gm * a * b, hh - gm * b * b, g * b],
            ],
        ])
    }

    fn normal_speed(&self, u: &Vars, n: Point, _x: Point) -> Result<f64, StateError> {
        let w = self.prim(u)?;
        Ok((w.u * n[0] + w.v * n[1]).abs() + (self.gamma * w.p / w.rho).sqrt())
    }

    fn max_speed(&self, u: &Vars, _x: Point) -> Result<f64, StateError> {
        let w = self.prim(u)?;
        Ok(w.u.hypot(w.v) + (self.gamma * w.p / w.rho).sqrt())
    }

    fn entropy(&self, u: &Vars) -> Result<f64, StateError> {
        let w = self.prim(u)?;
        let g = self.gamma;
        Ok(-(g + 1.0) / (g - 1.0) * (w.rho * w.p).powf(1.0 / (g + 1.0)))
    }

    fn entropy_vars(&self, u: &Vars) -> Result<Vars, StateError> {
        let w = self.prim(u)?;
        let (s, z) = self.entropy_factors(u, &w);
        Ok(z.map(|zi| -s * zi))
    }

    fn entropy_hessian(&self, u: &Vars) -> Result<Mat, StateError> {
        let w = self.prim(u)?;
        let g = self.gamma;
        let (s, z) = self.entropy_factors(u, &w);
        let c = g * (g - 1.0) / (g + 1.0) * s / (w.rho * w.p);
        let mut h = [[0.0; 4]; 4];
        for i in 0..4 {
            for j in 0..4 {
                h[i][j] = c * z[i] * z[j];
            }
        }
        h[0][3] -= s;
        h[3][0] -= s;
        h[1][1] += s;
        h[2][2] += s;
        Ok(h)
    }

    fn entropy_flux(&self, u: &Vars, _x: Point) -> Result<[f64; 2], StateError> {
        let w = self.prim(u)?;
        let eta = self.entropy(u)?;
        Ok([eta * w.u, eta * w.v])
    }

    fn a0(&self, u: &Vars) -> Result<Mat, StateError> {
        let w = self.prim(u)?;
        let g = self.gamma;
        let (rho, a, b, p, e) = (w.rho, w.u, w.v, w.p, u[3]);
        let k = 0.5 * (a * a + b * b);
        let c = g * rho * (rho * p).powf(-1.0 / (g + 1.0));
        let q = p / (g * (g - 1.0));
        let d = 0.5 * rho * (a * a - b * b);
        let m = [
            [rho, rho * a, rho * b, rho * k + q],
            [rho * a, e - q + d, rho * a * b, a * e],
            [rho * b, rho * a * b, e - q - d, b * e],
            [rho * k + q, e * a, e * b, e * e / rho],
        ];
        Ok(m.map(|row| row.map(|x| c * x)))
    }

    fn reflect(&self, u: &Vars, n: Point) -> Vars {
        reflect_momentum(u, n)
    }
}

#[cfg(test)]
mod tests {
    use super::super::testing::check_entropy_algebra;
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn state_at_rest() {
        let p = Euler::default();
        let u = p.conserved(1.0, 0.0, 0.0, 1.0);
        assert!((u[3] - 2.5).abs() < 1e-15);
        let f = p.flux(&u, [0.0, 0.0]).unwrap();
        assert_eq!(f[0], [0.0, 1.0, 0.0, 0.0]);
        assert!((p.entropy(&u).unwrap() + 6.0).abs() < 1e-14);
    }

    #[test]
    fn wavespeed_example() {
        let p = Euler::default();
        let u = p.conserved(1.0, 1.0, 0.0, 1.0);
        let s = p.max_wavespeed(&u, &u, [1.0, 0.0], [0.0, 0.0]).unwrap();
        assert!((s - (1.0 + 1.4f64.sqrt())).abs() < 1e-15);
        assert!((s - 2.1832).abs() < 1e-4);
    }

    #[test]
    fn negative_pressure_is_rejected() {
        let p = Euler::default();
        let e = p.flux(&[1.0, 3.0, 0.0, 1.0], [0.0, 0.0]).unwrap_err();
        assert_eq!(e.quantity, "p");
        assert!(e.value < 0.0);
    }

    #[test]
    fn wall_keeps_energy() {
        let p = Euler::default();
        let u = p.conserved(1.2, 0.5, -0.3, 0.9);
        let g = p.reflect(&u, [0.0, 1.0]);
        assert_eq!(g, [u[0], u[1], -u[2], u[3]]);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(100))]
        #[test]
        fn entropy_algebra(
            rho in 0.2f64..3.0,
            a in -2.0f64..2.0,
            b in -2.0f64..2.0,
            pr in 0.2f64..3.0,
            gamma in prop::sample::select(vec![1.4, 5.0 / 3.0]),
        ) {
            let p = Euler::new(gamma);
            check_entropy_algebra(&p, &p.conserved(rho, a, b, pr), [0.0, 0.0]);
        }
    }
}
