//! Gauss quadrature on the reference triangle `{x, y ≥ 0, x + y ≤ 1}` and the
//! reference edge `[0, 1]`.
//!
//! Low degrees use the classical symmetric rules (centroid, three-point,
//! seven-point Radon). Degrees 6–12 use a conical product of Gauss–Legendre
//! rules, which keeps all weights positive.

use std::f64::consts::PI;

pub const MAX_DEGREE: usize = 12;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum QuadratureError {
    #[error("unsupported quadrature degree {0} (supported: 1..={MAX_DEGREE})")]
    UnsupportedDegree(usize),
}

/// Quadrature rule on a reference triangle.
///
/// Points are barycentric `(λ0, λ1, λ2)`, with `λ1, λ2` the reference
/// coordinates `(x, y)`. Weights sum to the reference area `1/2`.
#[derive(Debug, Clone)]
pub struct TriangleRule {
    pub points: Vec<[f64; 3]>,
    pub weights: Vec<f64>,
    pub exact_degree: usize,
}

/// Quadrature rule on `[0, 1]`; weights sum to 1.
#[derive(Debug, Clone)]
pub struct EdgeRule {
    pub points: Vec<f64>,
    pub weights: Vec<f64>,
    pub exact_degree: usize,
}

impl TriangleRule {
    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    /// Iterate `(barycentric point, weight)` pairs.
    pub fn iter(&self) -> impl Iterator<Item = (&[f64; 3], f64)> + '_ {
        self.points.iter().zip(self.weights.iter().copied())
    }
}

impl EdgeRule {
    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.points
            .iter()
            .copied()
            .zip(self.weights.iter().copied())
    }
}

/// A rule on the reference triangle exact for total degree `degree`.
pub fn triangle_rule(degree: usize) -> Result<TriangleRule, QuadratureError> {
    match degree {
        1 => Ok(TriangleRule {
            points: vec![[1.0 / 3.0; 3]],
            weights: vec![0.5],
            exact_degree: 1,
        }),
        2 => {
            let (a, b) = (2.0 / 3.0, 1.0 / 6.0);
            Ok(TriangleRule {
                points: vec![[a, b, b], [b, a, b], [b, b, a]],
                weights: vec![1.0 / 6.0; 3],
                exact_degree: 2,
            })
        }
        3..=5 => Ok(radon_seven_point()),
        6..=MAX_DEGREE => Ok(conical_product(degree)),
        _ => Err(QuadratureError::UnsupportedDegree(degree)),
    }
}

/// Gauss–Legendre on `[0, 1]` exact for polynomials of degree `degree`.
pub fn edge_rule(degree: usize) -> Result<EdgeRule, QuadratureError> {
    if !(1..=MAX_DEGREE).contains(&degree) {
        return Err(QuadratureError::UnsupportedDegree(degree));
    }
    let n = degree / 2 + 1;
    let (points, weights) = gauss_legendre_unit(n);
    Ok(EdgeRule {
        points,
        weights,
        exact_degree: 2 * n - 1,
    })
}

fn radon_seven_point() -> TriangleRule {
    let s15 = 15f64.sqrt();
    let a1 = (6.0 - s15) / 21.0;
    let a2 = (6.0 + s15) / 21.0;
    let w1 = (155.0 - s15) / 2400.0;
    let w2 = (155.0 + s15) / 2400.0;
    let mut points = vec![[1.0 / 3.0; 3]];
    let mut weights = vec![9.0 / 80.0];
    for (a, w) in [(a1, w1), (a2, w2)] {
        let b = 1.0 - 2.0 * a;
        points.extend([[b, a, a], [a, b, a], [a, a, b]]);
        weights.extend([w; 3]);
    }
    TriangleRule {
        points,
        weights,
        exact_degree: 5,
    }
}

/// Collapsed (Duffy) product rule: `(x, y) = (s, (1 − s) t)` with Jacobian
/// `1 − s`, so the `s` direction needs one extra degree.
fn conical_product(degree: usize) -> TriangleRule {
    let nt = degree / 2 + 1;
    let ns = (degree + 1) / 2 + 1;
    let (ts, tw) = gauss_legendre_unit(nt);
    let (ss, sw) = gauss_legendre_unit(ns);
    let mut points = Vec::with_capacity(nt * ns);
    let mut weights = Vec::with_capacity(nt * ns);
    for (&s, &ws) in ss.iter().zip(&sw) {
        for (&t, &wt) in ts.iter().zip(&tw) {
            let x = s;
            let y = (1.0 - s) * t;
            points.push([1.0 - x - y, x, y]);
            weights.push(ws * wt * (1.0 - s));
        }
    }
    TriangleRule {
        points,
        weights,
        exact_degree: degree,
    }
}

/// `n`-point Gauss–Legendre nodes and weights mapped to `[0, 1]`.
pub fn gauss_legendre_unit(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        // Chebyshev-type initial guess, then Newton on P_n.
        let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 1.0;
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
        dp = if d != 0.0 { d } else { dp };
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        // nodes come out descending in x; store ascending in [0, 1]
        nodes[i] = 0.5 * (1.0 - x);
        nodes[n - 1 - i] = 0.5 * (1.0 + x);
        weights[i] = 0.5 * w;
        weights[n - 1 - i] = 0.5 * w;
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
