//! Cell-anchored Taylor modal bases in space and space-time, and per-cell
//! volume quadrature and mass matrices.
//!
//! A spatial mode with exponents `(p, q)` is
//! `((x - xb)/h)^p / p! * ((y - yb)/h)^q / q!`, where `xb` is the cell
//! barycenter and `h` its circumradius. Space-time modes add the factor
//! `((t - tn)/h)^r / r!`.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::error::CapabilityError;
use crate::mesh::{Mesh, Point};
use crate::quadrature::TriangleRule;

/// Highest supported polynomial degree.
pub const MAX_DEGREE: usize = 4;

/// Number of spatial modes of total degree at most `n` in two dimensions.
pub fn num_spatial_modes(n: usize) -> usize {
    (n + 1) * (n + 2) / 2
}

/// Number of space-time modes of total degree at most `n`.
pub fn num_space_time_modes(n: usize) -> usize {
    (n + 1) * (n + 2) * (n + 3) / 6
}

fn check_degree(n: usize) -> Result<(), CapabilityError> {
    if (1..=MAX_DEGREE).contains(&n) {
        Ok(())
    } else {
        Err(CapabilityError::PolynomialDegree(n))
    }
}

/// Anchor of a cell's Taylor basis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CellFrame {
    pub center: Point,
    pub h: f64,
}

impl CellFrame {
    pub fn of_cell(mesh: &Mesh, cell: usize) -> Self {
        let c = &mesh.cells[cell];
        Self {
            center: c.barycenter,
            h: c.circumradius,
        }
    }

    fn local(&self, x: Point) -> [f64; 2] {
        [(x[0] - self.center[0]) / self.h, (x[1] - self.center[1]) / self.h]
    }
}

/// Scaled powers `s^k / k!` for `k = 0..=n`.
fn scaled_powers(s: f64, n: usize, out: &mut [f64]) {
    out[0] = 1.0;
    for k in 1..=n {
        out[k] = out[k - 1] * s / k as f64;
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpatialBasis {
    degree: usize,
    exponents: Vec<(usize, usize)>,
}

impl SpatialBasis {
    /// Modes are ordered by total degree, then by descending `p`.
    pub fn new(degree: usize) -> Result<Self, CapabilityError> {
        check_degree(degree)?;
        let mut exponents = Vec::with_capacity(num_spatial_modes(degree));
        for d in 0..=degree {
            for p in (0..=d).rev() {
                exponents.push((p, d - p));
            }
        }
        Ok(Self { degree, exponents })
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn len(&self) -> usize {
        self.exponents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.exponents.is_empty()
    }

    pub fn exponents(&self) -> &[(usize, usize)] {
        &self.exponents
    }

    /// Value and physical gradient of mode `l` at `x`.
    pub fn phi_eval(&self, l: usize, x: Point, frame: &CellFrame) -> (f64, [f64; 2]) {
        let n = self.degree;
        let [xi, eta] = frame.local(x);
        let mut px = [0.0; MAX_DEGREE + 1];
        let mut py = [0.0; MAX_DEGREE + 1];
        scaled_powers(xi, n, &mut px);
        scaled_powers(eta, n, &mut py);
        let (p, q) = self.exponents[l];
        let gx = if p > 0 { px[p - 1] * py[q] / frame.h } else { 0.0 };
        let gy = if q > 0 { px[p] * py[q - 1] / frame.h } else { 0.0 };
        (px[p] * py[q], [gx, gy])
    }

    /// Values of all modes at `x`.
    pub fn eval_all(&self, x: Point, frame: &CellFrame, values: &mut [f64]) {
        let n = self.degree;
        let [xi, eta] = frame.local(x);
        let mut px = [0.0; MAX_DEGREE + 1];
        let mut py = [0.0; MAX_DEGREE + 1];
        scaled_powers(xi, n, &mut px);
        scaled_powers(eta, n, &mut py);
        for (v, &(p, q)) in values.iter_mut().zip(&self.exponents) {
            *v = px[p] * py[q];
        }
    }

    /// Values and physical gradients of all modes at `x`.
    pub fn eval_all_with_grad(
        &self,
        x: Point,
        frame: &CellFrame,
        values: &mut [f64],
        grads: &mut [[f64; 2]],
    ) {
        let n = self.degree;
        let [xi, eta] = frame.local(x);
        let mut px = [0.0; MAX_DEGREE + 1];
        let mut py = [0.0; MAX_DEGREE + 1];
        scaled_powers(xi, n, &mut px);
        scaled_powers(eta, n, &mut py);
        for (l, &(p, q)) in self.exponents.iter().enumerate() {
            values[l] = px[p] * py[q];
            let gx = if p > 0 { px[p - 1] * py[q] / frame.h } else { 0.0 };
            let gy = if q > 0 { px[p] * py[q - 1] / frame.h } else { 0.0 };
            grads[l] = [gx, gy];
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpaceTimeBasis {
    degree: usize,
    spatial: SpatialBasis,
    exponents: Vec<(usize, usize, usize)>,
    /// Spatial mode index of each space-time mode.
    spatial_index: Vec<usize>,
    /// Start of each time-power block.
    block_start: Vec<usize>,
}

impl SpaceTimeBasis {
    /// Modes are grouped by time power `r`; block `r` holds the spatial modes
    /// of degree at most `N - r` in spatial order, so block 0 reproduces the
    /// spatial basis.
    pub fn new(degree: usize) -> Result<Self, CapabilityError> {
        let spatial = SpatialBasis::new(degree)?;
        let mut exponents = Vec::with_capacity(num_space_time_modes(degree));
        let mut spatial_index = Vec::with_capacity(num_space_time_modes(degree));
        let mut block_start = Vec::with_capacity(degree + 2);
        for r in 0..=degree {
            block_start.push(exponents.len());
            for a in 0..num_spatial_modes(degree - r) {
                let (p, q) = spatial.exponents[a];
                exponents.push((p, q, r));
                spatial_index.push(a);
            }
        }
        block_start.push(exponents.len());
        Ok(Self {
            degree,
            spatial,
            exponents,
            spatial_index,
            block_start,
        })
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn len(&self) -> usize {
        self.exponents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.exponents.is_empty()
    }

    pub fn spatial(&self) -> &SpatialBasis {
        &self.spatial
    }

    pub fn exponents(&self) -> &[(usize, usize, usize)] {
        &self.exponents
    }

    pub fn spatial_index(&self, l: usize) -> usize {
        self.spatial_index[l]
    }

    pub fn time_power(&self, l: usize) -> usize {
        self.exponents[l].2
    }

    /// Index range of the modes with time power `r`.
    pub fn block(&self, r: usize) -> std::ops::Range<usize> {
        self.block_start[r]..self.block_start[r + 1]
    }

    /// Value, physical gradient and time derivative of mode `l` at `(x, t)`.
    pub fn theta_eval(
        &self,
        l: usize,
        x: Point,
        t: f64,
        frame: &CellFrame,
        tn: f64,
    ) -> (f64, [f64; 2], f64) {
        let (a, r) = (self.spatial_index[l], self.exponents[l].2);
        let (phi, grad) = self.spatial.phi_eval(a, x, frame);
        let mut pt = [0.0; MAX_DEGREE + 1];
        scaled_powers((t - tn) / frame.h, self.degree, &mut pt);
        let dt = if r > 0 { phi * pt[r - 1] / frame.h } else { 0.0 };
        (phi * pt[r], [grad[0] * pt[r], grad[1] * pt[r]], dt)
    }
}

/// Maps a point of the reference triangle to the physical triangle.
pub fn map_reference(verts: &[Point; 3], p: [f64; 2]) -> Point {
    let [a, b, c] = verts;
    [
        a[0] + (b[0] - a[0]) * p[0] + (c[0] - a[0]) * p[1],
        a[1] + (b[1] - a[1]) * p[0] + (c[1] - a[1]) * p[1],
    ]
}

pub fn cell_vertices(mesh: &Mesh, cell: usize) -> [Point; 3] {
    mesh.cells[cell].vertices.map(|v| mesh.vertices[v])
}

/// Physical quadrature points and weights of a reference rule on one cell.
pub fn physical_rule(verts: &[Point; 3], area: f64, rule: &TriangleRule) -> (Vec<Point>, Vec<f64>) {
    let points = rule.points.iter().map(|&p| map_reference(verts, p)).collect();
    let weights = rule.weights.iter().map(|w| 2.0 * area * w).collect();
    (points, weights)
}

/// `M_kl = ∫ φ_k φ_l` on one cell.
pub fn mass_matrix(
    basis: &SpatialBasis,
    frame: &CellFrame,
    points: &[Point],
    weights: &[f64],
) -> DMatrix<f64> {
    let n = basis.len();
    let mut m = DMatrix::zeros(n, n);
    let mut phi = vec![0.0; n];
    for (x, &w) in points.iter().zip(weights) {
        basis.eval_all(*x, frame, &mut phi);
        for k in 0..n {
            for l in 0..=k {
                m[(k, l)] += w * phi[k] * phi[l];
            }
        }
    }
    for k in 0..n {
        for l in 0..k {
            m[(l, k)] = m[(k, l)];
        }
    }
    m
}

/// L2 projection of a scalar function onto the basis of one cell.
pub fn project(
    basis: &SpatialBasis,
    frame: &CellFrame,
    points: &[Point],
    weights: &[f64],
    mass: &Cholesky<f64, Dyn>,
    f: impl Fn(Point) -> f64,
) -> DVector<f64> {
    let n = basis.len();
    let mut rhs = DVector::zeros(n);
    let mut phi = vec![0.0; n];
    for (x, &w) in points.iter().zip(weights) {
        basis.eval_all(*x, frame, &mut phi);
        let fx = f(*x);
        for k in 0..n {
            rhs[k] += w * fx * phi[k];
        }
    }
    mass.solve(&rhs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::Rect;
    use crate::quadrature::triangle_rule;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn frame() -> CellFrame {
        CellFrame {
            center: [0.3, -0.2],
            h: 0.7,
        }
    }

    #[test]
    fn mode_counts() {
        let spatial: Vec<usize> = (1..=3).map(|n| SpatialBasis::new(n).unwrap().len()).collect();
        let st: Vec<usize> = (1..=3).map(|n| SpaceTimeBasis::new(n).unwrap().len()).collect();
        assert_eq!(spatial, [3, 6, 10]);
        assert_eq!(st, [4, 10, 20]);
        for n in 1..=MAX_DEGREE {
            assert_eq!(SpatialBasis::new(n).unwrap().len(), num_spatial_modes(n));
            assert_eq!(SpaceTimeBasis::new(n).unwrap().len(), num_space_time_modes(n));
        }
        assert!(SpatialBasis::new(0).is_err());
        assert!(SpatialBasis::new(MAX_DEGREE + 1).is_err());
    }

    #[test]
    fn graded_ordering() {
        let b = SpatialBasis::new(2).unwrap();
        assert_eq!(b.exponents(), &[(0, 0), (1, 0), (0, 1), (2, 0), (1, 1), (0, 2)]);
        let st = SpaceTimeBasis::new(2).unwrap();
        for (l, &(p, q)) in b.exponents().iter().enumerate() {
            assert_eq!(st.exponents()[l], (p, q, 0));
        }
        assert_eq!(st.block(1), 6..9);
        assert_eq!(st.block(2), 9..10);
        assert_eq!(st.exponents()[9], (0, 0, 2));
    }

    #[test]
    fn constant_and_linear_modes() {
        let b = SpatialBasis::new(3).unwrap();
        let f = frame();
        let (v, g) = b.phi_eval(0, [4.0, 1.0], &f);
        assert_eq!((v, g), (1.0, [0.0, 0.0]));
        let (v, g) = b.phi_eval(1, [f.center[0] + f.h, f.center[1]], &f);
        assert!((v - 1.0).abs() < 1e-15);
        assert!((g[0] - 1.0 / f.h).abs() < 1e-15 && g[1] == 0.0);
    }

    #[test]
    fn spatial_gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let b = SpatialBasis::new(4).unwrap();
        let f = frame();
        let step = 1e-6 * f.h;
        for _ in 0..50 {
            let x = [
                f.center[0] + rng.random_range(-1.0..1.0) * f.h,
                f.center[1] + rng.random_range(-1.0..1.0) * f.h,
            ];
            for l in 0..b.len() {
                let (_, g) = b.phi_eval(l, x, &f);
                for d in 0..2 {
                    let mut xp = x;
                    let mut xm = x;
                    xp[d] += step;
                    xm[d] -= step;
                    let fd = (b.phi_eval(l, xp, &f).0 - b.phi_eval(l, xm, &f).0) / (2.0 * step);
                    let scale = g[d].abs().max(1.0 / f.h);
                    assert!((fd - g[d]).abs() <= 1e-7 * scale, "mode {l} dir {d}: {fd} vs {}", g[d]);
                }
            }
        }
    }

    #[test]
    fn time_derivative_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let b = SpaceTimeBasis::new(3).unwrap();
        let f = frame();
        let tn = 0.4;
        let step = 1e-6 * f.h;
        // Pure time mode r = 1 at t = tn + h.
        let l = b.block(1).start;
        let (v, g, dt) = b.theta_eval(l, f.center, tn + f.h, &f, tn);
        assert!((v - 1.0).abs() < 1e-15 && g == [0.0, 0.0]);
        assert!((dt - 1.0 / f.h).abs() < 1e-15);
        assert_eq!(b.theta_eval(0, [9.0, 9.0], 3.0, &f, tn), (1.0, [0.0, 0.0], 0.0));
        for _ in 0..50 {
            let x = [
                f.center[0] + rng.random_range(-1.0..1.0) * f.h,
                f.center[1] + rng.random_range(-1.0..1.0) * f.h,
            ];
            let t = tn + rng.random_range(0.0..1.0) * f.h;
            for l in 0..b.len() {
                let (_, _, dt) = b.theta_eval(l, x, t, &f, tn);
                let fd = (b.theta_eval(l, x, t + step, &f, tn).0
                    - b.theta_eval(l, x, t - step, &f, tn).0)
                    / (2.0 * step);
                let scale = dt.abs().max(1.0 / f.h);
                assert!((fd - dt).abs() <= 1e-7 * scale);
            }
        }
    }

    fn sample_cell() -> ([Point; 3], f64, CellFrame) {
        let mesh = Mesh::structured(3, 2, Rect::new(-1.0, 2.0, 0.0, 1.0)).unwrap();
        let c = 3;
        (cell_vertices(&mesh, c), mesh.cells[c].area, CellFrame::of_cell(&mesh, c))
    }

    #[test]
    fn mass_matrix_basic_properties() {
        let (verts, area, f) = sample_cell();
        let b = SpatialBasis::new(3).unwrap();
        let (pts, wts) = physical_rule(&verts, area, &triangle_rule(2 * 3).unwrap());
        let m = mass_matrix(&b, &f, &pts, &wts);
        assert!((m[(0, 0)] - area).abs() < 1e-15);
        assert!((&m - m.transpose()).amax() < 1e-14);
        assert!(m.clone().cholesky().is_some());
        // Exactness against a much higher-order rule.
        let (hp, hw) = physical_rule(&verts, area, &triangle_rule(20).unwrap());
        let mh = mass_matrix(&b, &f, &hp, &hw);
        assert!((&m - &mh).amax() < 1e-13 * mh.amax());
    }

    #[test]
    fn mass_matrix_matches_monte_carlo() {
        let (verts, area, f) = sample_cell();
        let b = SpatialBasis::new(2).unwrap();
        let (pts, wts) = physical_rule(&verts, area, &triangle_rule(4).unwrap());
        let m = mass_matrix(&b, &f, &pts, &wts);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let samples = 1_000_000;
        let n = b.len();
        let mut mc = DMatrix::<f64>::zeros(n, n);
        let mut phi = vec![0.0; n];
        for _ in 0..samples {
            let (mut s, mut t): (f64, f64) = (rng.random(), rng.random());
            if s + t > 1.0 {
                s = 1.0 - s;
                t = 1.0 - t;
            }
            b.eval_all(map_reference(&verts, [s, t]), &f, &mut phi);
            for k in 0..n {
                for l in 0..n {
                    mc[(k, l)] += phi[k] * phi[l];
                }
            }
        }
        mc *= area / samples as f64;
        let err = (&mc - &m).amax();
        assert!(err <= 1e-3 * m.amax(), "Monte Carlo mismatch {err:e}");
    }

    #[test]
    fn projection_of_degree_n_polynomial_is_idempotent() {
        let (verts, area, f) = sample_cell();
        for n in 1..=MAX_DEGREE {
            let b = SpatialBasis::new(n).unwrap();
            let (pts, wts) = physical_rule(&verts, area, &triangle_rule(2 * n + 2).unwrap());
            let chol = mass_matrix(&b, &f, &pts, &wts).cholesky().unwrap();
            let poly = |x: Point| {
                let mut s = 0.3;
                for d in 1..=n {
                    s += (0.5 + d as f64) * x[0].powi(d as i32) - 0.25 * x[0] * x[1].powi(d as i32 - 1);
                }
                s
            };
            let c = project(&b, &f, &pts, &wts, &chol, poly);
            let mut phi = vec![0.0; b.len()];
            for &p in &[[0.2, 0.3], [0.6, 0.1], [0.1, 0.8]] {
                let x = map_reference(&verts, p);
                b.eval_all(x, &f, &mut phi);
                let v: f64 = phi.iter().zip(c.iter()).map(|(a, b)| a * b).sum();
                assert!((v - poly(x)).abs() < 1e-12 * poly(x).abs().max(1.0), "degree {n}");
            }
        }
    }
}
