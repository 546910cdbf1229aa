//! Quadrature rules on the reference triangle, on the unit interval (faces) and
//! on normalized time slabs.
//!
//! Triangle rules live on the reference triangle `{x, y >= 0, x + y <= 1}` and
//! their weights sum to its area `0.5`. Line rules live on `[0, 1]` with weights
//! summing to one.

use std::sync::OnceLock;

use nalgebra::{DMatrix, DVector};

use crate::error::CapabilityError;

/// Points and weights of a quadrature formula in `D` reference coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureRule<const D: usize> {
    pub points: Vec<[f64; D]>,
    pub weights: Vec<f64>,
    /// Highest total polynomial degree integrated exactly.
    pub degree: usize,
}

pub type TriangleRule = QuadratureRule<2>;
pub type LineRule = QuadratureRule<1>;

impl<const D: usize> QuadratureRule<D> {
    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&[f64; D], f64)> + '_ {
        self.points.iter().zip(self.weights.iter().copied())
    }
}

/// Highest degree for which a triangle rule is available.
pub const MAX_TRIANGLE_DEGREE: usize = 40;

/// Symmetric triangle rule exact to `degree` (Dunavant tables up to degree 8,
/// collapsed Gauss products beyond that).
pub fn triangle_rule(degree: usize) -> Result<TriangleRule, CapabilityError> {
    let builder = match degree {
        0 | 1 => dunavant_1 as fn() -> SymmetricRule,
        2 => dunavant_2,
        3 | 4 => dunavant_4,
        5 => dunavant_5,
        6 => dunavant_6,
        7 | 8 => dunavant_8,
        d if d <= MAX_TRIANGLE_DEGREE => return Ok(collapsed_rule(d)),
        d => {
            return Err(CapabilityError::QuadratureDegree {
                requested: d,
                max: MAX_TRIANGLE_DEGREE,
            })
        }
    };
    static CACHE: [OnceLock<TriangleRule>; 9] = [const { OnceLock::new() }; 9];
    let mut rule = CACHE[degree.max(1)]
        .get_or_init(|| builder().polished())
        .clone();
    rule.degree = rule.degree.max(degree);
    Ok(rule)
}

/// Gauss–Legendre rule on `[0, 1]` exact to `degree`, with `ceil((degree+1)/2)` points.
pub fn face_rule(degree: usize) -> LineRule {
    let n = (degree + 2) / 2;
    gauss_legendre_unit(n.max(1))
}

/// Gauss–Legendre time rule with `stages + 1` nodes on the normalized slab
/// `[0, 1]`, exact to degree `2 * stages + 1`.
pub fn time_rule(stages: usize) -> LineRule {
    gauss_legendre_unit(stages + 1)
}

/// `n`-point Gauss–Legendre nodes and weights on `[0, 1]`.
pub fn gauss_legendre_unit(n: usize) -> LineRule {
    let (x, w) = gauss_legendre(n);
    LineRule {
        points: x.iter().map(|&xi| [0.5 * (xi + 1.0)]).collect(),
        weights: w.iter().map(|&wi| 0.5 * wi).collect(),
        degree: 2 * n - 1,
    }
}

/// `n`-point Gauss–Legendre nodes (ascending) and weights on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1, "Gauss-Legendre rule needs at least one point");
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let nf = n as f64;
    for i in 0..n.div_ceil(2) {
        // Tricomi initial guess, then Newton on P_n.
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() <= 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(n, x);
        if d != 0.0 {
            dp = d;
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    (nodes, weights)
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Conical product rule: Gauss–Legendre in both directions of the collapsed square.
fn collapsed_rule(degree: usize) -> TriangleRule {
    let n = degree / 2 + 1;
    let g = gauss_legendre_unit(n);
    let gt = gauss_legendre_unit(n + 1);
    let mut points = Vec::with_capacity(n * (n + 1));
    let mut weights = Vec::with_capacity(n * (n + 1));
    for (t, wt) in gt.iter() {
        for (s, ws) in g.iter() {
            points.push([s[0] * (1.0 - t[0]), t[0]]);
            weights.push(ws * wt * (1.0 - t[0]));
        }
    }
    TriangleRule {
        points,
        weights,
        degree,
    }
}

/// Symmetric rule in orbit form; weights are normalized to sum to one.
struct SymmetricRule {
    degree: usize,
    centroid: Option<f64>,
    orbit3: &'static [(f64, f64)],
    orbit6: &'static [(f64, f64, f64)],
}

impl SymmetricRule {
    /// Tabulated parameters, flattened: centroid weight, orbit3 pairs, orbit6 triples.
    fn params(&self) -> Vec<f64> {
        let mut p: Vec<f64> = self.centroid.into_iter().collect();
        for &(a, w) in self.orbit3 {
            p.extend([a, w]);
        }
        for &(a, b, w) in self.orbit6 {
            p.extend([a, b, w]);
        }
        p
    }

    fn expand(&self, params: &[f64]) -> TriangleRule {
        let mut points = Vec::new();
        let mut weights = Vec::new();
        let mut it = params.iter().copied();
        let mut next = || it.next().expect("parameter count matches the orbit layout");
        if self.centroid.is_some() {
            points.push([1.0 / 3.0, 1.0 / 3.0]);
            weights.push(0.5 * next());
        }
        for _ in self.orbit3 {
            let (a, w) = (next(), next());
            let c = 1.0 - 2.0 * a;
            for p in [[a, a], [a, c], [c, a]] {
                points.push(p);
                weights.push(0.5 * w);
            }
        }
        for _ in self.orbit6 {
            let (a, b, w) = (next(), next(), next());
            let c = 1.0 - a - b;
            for p in [[a, b], [b, a], [a, c], [c, a], [b, c], [c, b]] {
                points.push(p);
                weights.push(0.5 * w);
            }
        }
        TriangleRule {
            points,
            weights,
            degree: self.degree,
        }
    }

    /// Moment residuals `Q(x^i y^j) - ∫ x^i y^j` for `i + j <= degree`.
    fn residuals(&self, params: &[f64]) -> DVector<f64> {
        let rule = self.expand(params);
        let mut r = Vec::new();
        for i in 0..=self.degree {
            for j in 0..=(self.degree - i) {
                let q: f64 = rule
                    .iter()
                    .map(|(p, w)| w * p[0].powi(i as i32) * p[1].powi(j as i32))
                    .sum();
                r.push(q - monomial_integral(i, j));
            }
        }
        DVector::from_vec(r)
    }

    /// The tables carry 15 digits; a few Gauss-Newton steps on the moment
    /// equations recover full double precision.
    fn polished(&self) -> TriangleRule {
        let mut params = self.params();
        for _ in 0..4 {
            let r = self.residuals(&params);
            if r.amax() < 1e-17 {
                break;
            }
            let mut jac = DMatrix::zeros(r.len(), params.len());
            for k in 0..params.len() {
                let h = 1e-7;
                let mut pp = params.clone();
                let mut pm = params.clone();
                pp[k] += h;
                pm[k] -= h;
                let col = (self.residuals(&pp) - self.residuals(&pm)) / (2.0 * h);
                jac.set_column(k, &col);
            }
            let delta = jac
                .svd(true, true)
                .solve(&r, 1e-12)
                .expect("SVD was computed with both factors");
            for (p, d) in params.iter_mut().zip(delta.iter()) {
                *p -= d;
            }
        }
        self.expand(&params)
    }
}

fn factorial(n: usize) -> f64 {
    (1..=n).map(|k| k as f64).product()
}

/// Exact integral of `x^a y^b` over the reference triangle: `a! b! / (a+b+2)!`.
fn monomial_integral(a: usize, b: usize) -> f64 {
    factorial(a) * factorial(b) / factorial(a + b + 2)
}

fn dunavant_1() -> SymmetricRule {
    SymmetricRule {
        degree: 1,
        centroid: Some(1.0),
        orbit3: &[],
        orbit6: &[],
    }
}

fn dunavant_2() -> SymmetricRule {
    SymmetricRule {
        degree: 2,
        centroid: None,
        orbit3: &[(1.0 / 6.0, 1.0 / 3.0)],
        orbit6: &[],
    }
}

fn dunavant_4() -> SymmetricRule {
    SymmetricRule {
        degree: 4,
        centroid: None,
        orbit3: &[
            (0.445_948_490_915_965, 0.223_381_589_678_011),
            (0.091_576_213_509_771, 0.109_951_743_655_322),
        ],
        orbit6: &[],
    }
}

fn dunavant_5() -> SymmetricRule {
    SymmetricRule {
        degree: 5,
        centroid: Some(0.225),
        orbit3: &[
            (0.470_142_064_105_115, 0.132_394_152_788_506),
            (0.101_286_507_323_456, 0.125_939_180_544_827),
        ],
        orbit6: &[],
    }
}

fn dunavant_6() -> SymmetricRule {
    SymmetricRule {
        degree: 6,
        centroid: None,
        orbit3: &[
            (0.249_286_745_170_910, 0.116_786_275_726_379),
            (0.063_089_014_491_502, 0.050_844_906_370_207),
        ],
        orbit6: &[(0.053_145_049_844_817, 0.310_352_451_033_784, 0.082_851_075_618_374)],
    }
}

fn dunavant_8() -> SymmetricRule {
    SymmetricRule {
        degree: 8,
        centroid: Some(0.144_315_607_677_787),
        orbit3: &[
            (0.459_292_588_292_723, 0.095_091_634_267_285),
            (0.170_569_307_751_760, 0.103_217_370_534_718),
            (0.050_547_228_317_031, 0.032_458_497_623_198),
        ],
        orbit6: &[(0.008_394_777_409_958, 0.263_112_829_634_638, 0.027_230_314_174_435)],
    }
}
