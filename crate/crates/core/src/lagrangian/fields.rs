//! Scalar fields: sources, exact solutions and test polynomials.

use std::f64::consts::PI;

use crate::{Mat2, Vec2};

/// A differentiable scalar field on the plane.
pub trait ScalarField: Send + Sync {
    fn value(&self, x: Vec2) -> f64;
    fn gradient(&self, x: Vec2) -> Vec2;
}

/// A twice-differentiable scalar field.
pub trait SmoothField: ScalarField {
    fn hessian(&self, x: Vec2) -> Mat2;
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Constant(pub f64);

impl ScalarField for Constant {
    fn value(&self, _: Vec2) -> f64 {
        self.0
    }
    fn gradient(&self, _: Vec2) -> Vec2 {
        Vec2::zeros()
    }
}

impl SmoothField for Constant {
    fn hessian(&self, _: Vec2) -> Mat2 {
        Mat2::zeros()
    }
}

/// Field built from a value closure and a gradient closure.
pub struct FnField<F, G> {
    value: F,
    gradient: G,
}

impl<F, G> FnField<F, G>
where
    F: Fn(Vec2) -> f64 + Send + Sync,
    G: Fn(Vec2) -> Vec2 + Send + Sync,
{
    pub fn new(value: F, gradient: G) -> Self {
        FnField { value, gradient }
    }
}

impl<F, G> ScalarField for FnField<F, G>
where
    F: Fn(Vec2) -> f64 + Send + Sync,
    G: Fn(Vec2) -> Vec2 + Send + Sync,
{
    fn value(&self, x: Vec2) -> f64 {
        (self.value)(x)
    }
    fn gradient(&self, x: Vec2) -> Vec2 {
        (self.gradient)(x)
    }
}

/// `u(x) = sin(π‖x‖²)`, zero on the unit circle.
#[derive(Debug, Clone, Copy, Default)]
pub struct DiskSolution;

impl ScalarField for DiskSolution {
    fn value(&self, x: Vec2) -> f64 {
        (PI * x.norm_squared()).sin()
    }
    fn gradient(&self, x: Vec2) -> Vec2 {
        x * (2.0 * PI * (PI * x.norm_squared()).cos())
    }
}

impl SmoothField for DiskSolution {
    fn hessian(&self, x: Vec2) -> Mat2 {
        let r2 = x.norm_squared();
        let (s, c) = (PI * r2).sin_cos();
        Mat2::identity() * (2.0 * PI * c) - x * x.transpose() * (4.0 * PI * PI * s)
    }
}

/// The source `f = −div(‖∇u‖^{p−2}∇u)` for `u = sin(π‖x‖²)`.
///
/// Writing the flux as `φ(r) x` gives `f = −(2φ + rφ')`, i.e. with
/// `c = cos(πr²)`, `s = sin(πr²)` and `A = (2π)^{p−1}`:
///
/// `f = −A (p sgn(c)|c|^{p−1} r^{p−2} − 2π(p−1)|c|^{p−2} s r^p)`.
///
/// For `p < 2` the first term is unbounded at the origin and the value there
/// is `−∞`.
pub fn manufactured_f(p: f64, x: Vec2) -> f64 {
    let r2 = x.norm_squared();
    let r = r2.sqrt();
    let (s, c) = (PI * r2).sin_cos();
    let a = (2.0 * PI).powf(p - 1.0);
    let t1 = p * c.signum() * c.abs().powf(p - 1.0) * r.powf(p - 2.0);
    let t2 = 2.0 * PI * (p - 1.0) * c.abs().powf(p - 2.0) * s * r.powf(p);
    -a * (t1 - t2)
}

/// Gradient of [`manufactured_f`], `f'(r) x / r`; zero at the origin.
pub fn manufactured_f_gradient(p: f64, x: Vec2) -> Vec2 {
    let r2 = x.norm_squared();
    if r2 == 0.0 {
        return Vec2::zeros();
    }
    let r = r2.sqrt();
    let (s, c) = (PI * r2).sin_cos();
    let a = (2.0 * PI).powf(p - 1.0);
    let ac = c.abs();
    let sg = c.signum();
    let two_pi = 2.0 * PI;
    // (dT1/dr) / r and (dT2/dr) / r
    let mut d1 = -two_pi * (p - 1.0) * ac.powf(p - 2.0) * s * r.powf(p - 2.0);
    if p != 2.0 {
        d1 += (p - 2.0) * sg * ac.powf(p - 1.0) * r.powf(p - 4.0);
    }
    d1 *= p;
    let mut d2 =
        two_pi * ac.powf(p - 2.0) * c * r.powf(p) + p * ac.powf(p - 2.0) * s * r.powf(p - 2.0);
    if p != 2.0 {
        d2 -= two_pi * (p - 2.0) * ac.powf(p - 3.0) * sg * s * s * r.powf(p);
    }
    d2 *= two_pi * (p - 1.0);
    x * (-a * (d1 - d2))
}

/// [`manufactured_f`] as a field.
#[derive(Debug, Clone, Copy)]
pub struct DiskSource {
    pub p: f64,
}

impl ScalarField for DiskSource {
    fn value(&self, x: Vec2) -> f64 {
        manufactured_f(self.p, x)
    }
    fn gradient(&self, x: Vec2) -> Vec2 {
        manufactured_f_gradient(self.p, x)
    }
}

/// `u(x) = exp(−10‖x‖²)`.
#[derive(Debug, Clone, Copy, Default)]
pub struct GaussianSolution;

impl ScalarField for GaussianSolution {
    fn value(&self, x: Vec2) -> f64 {
        (-10.0 * x.norm_squared()).exp()
    }
    fn gradient(&self, x: Vec2) -> Vec2 {
        x * (-20.0 * self.value(x))
    }
}

impl SmoothField for GaussianSolution {
    fn hessian(&self, x: Vec2) -> Mat2 {
        (x * x.transpose() * 400.0 - Mat2::identity() * 20.0) * self.value(x)
    }
}

/// `f = −Δu` for `u = exp(−10‖x‖²)`.
#[derive(Debug, Clone, Copy, Default)]
pub struct GaussianSource;

impl ScalarField for GaussianSource {
    fn value(&self, x: Vec2) -> f64 {
        let r2 = x.norm_squared();
        (-10.0 * r2).exp() * (40.0 - 400.0 * r2)
    }
    fn gradient(&self, x: Vec2) -> Vec2 {
        let r2 = x.norm_squared();
        x * ((-10.0 * r2).exp() * (8000.0 * r2 - 1600.0))
    }
}

/// Bivariate polynomial `Σ c_{ab} x^a y^b`.
#[derive(Debug, Clone, PartialEq)]
pub struct Polynomial {
    terms: Vec<(i32, i32, f64)>,
}

impl Polynomial {
    pub fn new(terms: Vec<(i32, i32, f64)>) -> Self {
        assert!(terms.iter().all(|&(a, b, _)| a >= 0 && b >= 0));
        Polynomial { terms }
    }

    /// Polynomial of total degree `degree` with all coefficients from `coef`,
    /// in the order `x^a y^b` by increasing `a + b`, then increasing `b`.
    pub fn dense(degree: i32, mut coef: impl FnMut() -> f64) -> Self {
        let mut terms = Vec::new();
        for total in 0..=degree {
            for b in 0..=total {
                terms.push((total - b, b, coef()));
            }
        }
        Polynomial { terms }
    }
}

fn mono(t: f64, e: i32) -> f64 {
    if e < 0 {
        0.0
    } else {
        t.powi(e)
    }
}

impl ScalarField for Polynomial {
    fn value(&self, x: Vec2) -> f64 {
        self.terms
            .iter()
            .map(|&(a, b, c)| c * mono(x.x, a) * mono(x.y, b))
            .sum()
    }
    fn gradient(&self, x: Vec2) -> Vec2 {
        self.terms
            .iter()
            .map(|&(a, b, c)| {
                Vec2::new(
                    c * a as f64 * mono(x.x, a - 1) * mono(x.y, b),
                    c * b as f64 * mono(x.x, a) * mono(x.y, b - 1),
                )
            })
            .sum()
    }
}

impl SmoothField for Polynomial {
    fn hessian(&self, x: Vec2) -> Mat2 {
        self.terms
            .iter()
            .map(|&(a, b, c)| {
                let (af, bf) = (a as f64, b as f64);
                let xy = c * af * bf * mono(x.x, a - 1) * mono(x.y, b - 1);
                Mat2::new(
                    c * af * (af - 1.0) * mono(x.x, a - 2) * mono(x.y, b),
                    xy,
                    xy,
                    c * bf * (bf - 1.0) * mono(x.x, a) * mono(x.y, b - 2),
                )
            })
            .sum()
    }
}
