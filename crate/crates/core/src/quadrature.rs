//! Quadrature rules on the reference simplex.
//!
//! Rules are built as collapsed (Duffy) tensor products of Gauss–Legendre
//! rules, which gives positive weights and exactness up to any requested
//! polynomial degree. Points are stored in barycentric coordinates and the
//! weights sum to one, so an element integral is `|K| * sum_q w_q f(x_q)`.

use std::f64::consts::PI;

/// Gauss–Legendre nodes and weights on `[0, 1]`.
pub fn gauss_legendre_unit(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1, "need at least one Gauss point");
    let mut nodes = Vec::with_capacity(n);
    let mut weights = Vec::with_capacity(n);
    for i in 0..n {
        let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(n, x);
        if d != 0.0 {
            dp = d;
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes.push(0.5 * (1.0 - x));
        weights.push(0.5 * w);
    }
    (nodes, weights)
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let k = k as f64;
        let p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
    }
    let nf = n as f64;
    let dp = nf * (x * p1 - p0) / (x * x - 1.0);
    (p1, dp)
}

/// A quadrature rule on the reference `dim`-simplex.
#[derive(Debug, Clone)]
pub struct SimplexRule {
    pub dim: usize,
    pub degree: usize,
    /// Barycentric coordinates; only the first `dim + 1` entries are used.
    pub points: Vec<[f64; 4]>,
    /// Weights normalized to sum to one.
    pub weights: Vec<f64>,
}

impl SimplexRule {
    /// Rule exact for polynomials of total degree `degree` on a `dim`-simplex.
    pub fn new(dim: usize, degree: usize) -> Self {
        assert!(dim == 2 || dim == 3, "simplex rules exist for dim 2 and 3");
        let n = (degree + dim).div_ceil(2).max(1);
        let (x, w) = gauss_legendre_unit(n);
        let mut points = Vec::new();
        let mut weights = Vec::new();
        if dim == 2 {
            for (u, wu) in x.iter().zip(&w) {
                for (v, wv) in x.iter().zip(&w) {
                    let a = *u;
                    let b = v * (1.0 - u);
                    points.push([1.0 - a - b, a, b, 0.0]);
                    weights.push(2.0 * wu * wv * (1.0 - u));
                }
            }
        } else {
            for (u, wu) in x.iter().zip(&w) {
                for (v, wv) in x.iter().zip(&w) {
                    for (s, ws) in x.iter().zip(&w) {
                        let a = *u;
                        let b = v * (1.0 - u);
                        let c = s * (1.0 - u) * (1.0 - v);
                        points.push([1.0 - a - b - c, a, b, c]);
                        weights.push(6.0 * wu * wv * ws * (1.0 - u) * (1.0 - u) * (1.0 - v));
                    }
                }
            }
        }
        SimplexRule {
            dim,
            degree,
            points,
            weights,
        }
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }
}

/// Exact integral of a barycentric monomial over a simplex of unit measure.
///
/// `int_K prod lambda_i^{a_i} = |K| d! prod a_i! / (sum a_i + d)!`.
pub fn barycentric_monomial_average(dim: usize, exps: &[u32]) -> f64 {
    let fact = |n: u32| (1..=n).map(|k| k as f64).product::<f64>();
    let total: u32 = exps.iter().sum();
    let num: f64 = exps.iter().map(|&a| fact(a)).product::<f64>() * fact(dim as u32);
    num / fact(total + dim as u32)
}
