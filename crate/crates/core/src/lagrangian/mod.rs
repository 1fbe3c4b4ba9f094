//! First-order Lagrangians `L(x, u, ∇u)` and their derivatives.

mod fields;

use std::sync::Arc;

pub use fields::{
    manufactured_f, manufactured_f_gradient, Constant, DiskSolution, DiskSource, FnField,
    GaussianSolution, GaussianSource, Polynomial, ScalarField, SmoothField,
};

use crate::fespace::{FEFunction, PointValue};
use crate::{Mat2, Vec2};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ModelError {
    #[error("p-Laplacian exponent must exceed 1, got {0}")]
    InvalidExponent(f64),
    #[error("regularization must be non-negative, got {0}")]
    InvalidRegularization(f64),
    #[error("derivatives are singular at ∇u = 0 for p = {0} < 2 without regularization")]
    Singular(f64),
}

/// `L` and its partial derivatives at one state `(x, u, g)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Derivatives {
    pub l: f64,
    pub dl_du: f64,
    /// `∂L/∂g`, the derivative with respect to the gradient slot.
    pub dl_dg: Vec2,
    /// `∂L/∂x` with `u` and `g` held fixed.
    pub dl_dx: Vec2,
    pub d2l_dgdg: Mat2,
    pub d2l_dgdu: Vec2,
    /// Entry `(i, j)` is `∂(∂L/∂g_i)/∂x_j`.
    pub d2l_dgdx: Mat2,
    pub d2l_du2: f64,
}

pub trait Lagrangian: Send + Sync {
    fn derivatives(&self, x: Vec2, u: f64, g: Vec2) -> Result<Derivatives, ModelError>;

    /// Derivatives used to build Newton Jacobians; may be regularized.
    fn jacobian_derivatives(&self, x: Vec2, u: f64, g: Vec2) -> Result<Derivatives, ModelError> {
        self.derivatives(x, u, g)
    }

    /// Euler–Lagrange operator `−div(∂L/∂g) + ∂L/∂u` for a smooth field.
    fn euler_lagrange(&self, x: Vec2, u: f64, g: Vec2, hessian: Mat2) -> Result<f64, ModelError> {
        let d = self.derivatives(x, u, g)?;
        let div = d.d2l_dgdx.trace() + d.d2l_dgdu.dot(&g) + (d.d2l_dgdg * hessian).trace();
        Ok(-div + d.dl_du)
    }
}

/// Jacobian regularization used when the model's own `eps` is smaller.
pub const JACOBIAN_EPS: f64 = 1e-10;

/// `L = (1/p)(‖g‖² + ε)^{p/2} − f(x) u`.
#[derive(Clone)]
pub struct PLaplacian {
    p: f64,
    eps: f64,
    source: Arc<dyn ScalarField>,
}

impl std::fmt::Debug for PLaplacian {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("PLaplacian")
            .field("p", &self.p)
            .field("eps", &self.eps)
            .finish_non_exhaustive()
    }
}

impl PLaplacian {
    pub fn new(p: f64, source: Arc<dyn ScalarField>) -> Result<Self, ModelError> {
        Self::regularized(p, 0.0, source)
    }

    pub fn regularized(p: f64, eps: f64, source: Arc<dyn ScalarField>) -> Result<Self, ModelError> {
        if !(p > 1.0) || !p.is_finite() {
            return Err(ModelError::InvalidExponent(p));
        }
        if !(eps >= 0.0) {
            return Err(ModelError::InvalidRegularization(eps));
        }
        Ok(PLaplacian { p, eps, source })
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    pub fn source(&self) -> &Arc<dyn ScalarField> {
        &self.source
    }

    /// Same source, different exponent.
    pub fn with_exponent(&self, p: f64) -> Result<Self, ModelError> {
        Self::regularized(p, self.eps, self.source.clone())
    }

    fn eval(
        &self,
        x: Vec2,
        u: f64,
        g: Vec2,
        eps: f64,
        hessian_eps: f64,
    ) -> Result<Derivatives, ModelError> {
        let p = self.p;
        let s = g.norm_squared() + eps;
        let f = self.source.value(x);
        let (l_grad, dl_dg) = if s == 0.0 {
            if p < 2.0 {
                return Err(ModelError::Singular(p));
            }
            (0.0, Vec2::zeros())
        } else {
            (s.powf(0.5 * p) / p, g * s.powf(0.5 * (p - 2.0)))
        };
        let sh = g.norm_squared() + hessian_eps;
        let d2l_dgdg = if sh == 0.0 {
            if p < 2.0 {
                return Err(ModelError::Singular(p));
            }
            if p == 2.0 {
                Mat2::identity()
            } else {
                Mat2::zeros()
            }
        } else {
            (Mat2::identity() + g * g.transpose() * ((p - 2.0) / sh)) * sh.powf(0.5 * (p - 2.0))
        };
        Ok(Derivatives {
            l: l_grad - f * u,
            dl_du: -f,
            dl_dg,
            dl_dx: self.source.gradient(x) * (-u),
            d2l_dgdg,
            d2l_dgdu: Vec2::zeros(),
            d2l_dgdx: Mat2::zeros(),
            d2l_du2: 0.0,
        })
    }
}

impl Lagrangian for PLaplacian {
    fn derivatives(&self, x: Vec2, u: f64, g: Vec2) -> Result<Derivatives, ModelError> {
        self.eval(x, u, g, self.eps, self.eps)
    }

    fn jacobian_derivatives(&self, x: Vec2, u: f64, g: Vec2) -> Result<Derivatives, ModelError> {
        self.eval(x, u, g, self.eps, self.eps.max(JACOBIAN_EPS))
    }
}

/// Total derivative of `x ↦ L(x, U(x), ∇U(x))` given the point values of `U`:
/// `∂L/∂x + (∂L/∂u)∇U + D²U ∂L/∂g`.
pub fn total_gradient(d: &Derivatives, pv: &PointValue) -> Vec2 {
    d.dl_dx + pv.gradient * d.dl_du + pv.hessian * d.dl_dg
}

/// [`total_gradient`] of `L` along a discrete function inside triangle `t`.
pub fn total_gradient_l(
    model: &dyn Lagrangian,
    u: &FEFunction,
    t: usize,
    bary: [f64; 3],
) -> Result<Vec2, ModelError> {
    let pv = u.eval(t, bary);
    let [a, b, c] = u.space().mesh().corners(t);
    let x = a * bary[0] + b * bary[1] + c * bary[2];
    let d = model.derivatives(x, pv.value, pv.gradient)?;
    Ok(total_gradient(&d, &pv))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fespace::FunctionSpace;
    use crate::mesh::{build_square_mesh, SquareMeshOptions};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn zero_source() -> Arc<dyn ScalarField> {
        Arc::new(Constant(0.0))
    }

    fn model(p: f64) -> PLaplacian {
        PLaplacian::new(p, zero_source()).unwrap()
    }

    #[test]
    fn laplace_derivatives() {
        let d = model(2.0)
            .derivatives(Vec2::zeros(), 0.0, Vec2::new(1.0, 0.0))
            .unwrap();
        assert_eq!(d.dl_dg, Vec2::new(1.0, 0.0));
        assert_eq!(d.d2l_dgdg, Mat2::identity());
    }

    #[test]
    fn quartic_derivatives() {
        let d = model(4.0)
            .derivatives(Vec2::zeros(), 0.0, Vec2::new(1.0, 1.0))
            .unwrap();
        assert!((d.dl_dg - Vec2::new(2.0, 2.0)).norm() < 1e-15);
        assert!((d.l - 1.0).abs() < 1e-15);
    }

    #[test]
    fn degenerate_states() {
        let d = model(3.0)
            .derivatives(Vec2::zeros(), 1.0, Vec2::zeros())
            .unwrap();
        assert_eq!(d.dl_dg, Vec2::zeros());
        assert_eq!(d.l, 0.0);
        assert_eq!(
            model(1.5).derivatives(Vec2::zeros(), 0.0, Vec2::zeros()),
            Err(ModelError::Singular(1.5))
        );
        let reg = PLaplacian::regularized(1.5, 1e-8, zero_source()).unwrap();
        assert!(reg.derivatives(Vec2::zeros(), 0.0, Vec2::zeros()).is_ok());
        let j = model(3.0)
            .jacobian_derivatives(Vec2::zeros(), 0.0, Vec2::zeros())
            .unwrap();
        assert!(j.d2l_dgdg[(0, 0)] > 0.0);
        assert!(PLaplacian::new(1.0, zero_source()).is_err());
    }

    #[test]
    fn derivatives_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let src: Arc<dyn ScalarField> = Arc::new(DiskSource { p: 3.0 });
        for _ in 0..200 {
            let p = rng.gen_range(1.5..5.0);
            let m = PLaplacian::new(p, src.clone()).unwrap();
            let x = Vec2::new(rng.gen_range(-0.9..0.9), rng.gen_range(-0.9..0.9));
            let u = rng.gen_range(-1.0..1.0);
            let g = Vec2::new(rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0));
            if g.norm() < 0.2 || x.norm() < 0.05 {
                continue;
            }
            let d = m.derivatives(x, u, g).unwrap();
            let h = 1e-6;
            let l = |x: Vec2, u: f64, g: Vec2| m.derivatives(x, u, g).unwrap();
            for k in 0..2 {
                let mut e = Vec2::zeros();
                e[k] = h;
                let fd = (l(x, u, g + e).l - l(x, u, g - e).l) / (2.0 * h);
                assert!((fd - d.dl_dg[k]).abs() <= 1e-6 * d.dl_dg.norm().max(1.0));
                let fd = (l(x, u, g + e).dl_dg - l(x, u, g - e).dl_dg) / (2.0 * h);
                let col = d.d2l_dgdg.column(k).into_owned();
                assert!((fd - col).norm() <= 1e-6 * d.d2l_dgdg.norm().max(1.0));
                let fd = (l(x + e, u, g).l - l(x - e, u, g).l) / (2.0 * h);
                assert!((fd - d.dl_dx[k]).abs() <= 1e-6 * d.dl_dx.norm().max(1.0));
            }
            let fd = (l(x, u + h, g).l - l(x, u - h, g).l) / (2.0 * h);
            assert!((fd - d.dl_du).abs() <= 1e-6 * d.dl_du.abs().max(1.0));
            assert_eq!(d.d2l_dgdg, d.d2l_dgdg.transpose());
        }
    }

    #[test]
    fn convex_for_p_at_least_two() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..200 {
            let p = rng.gen_range(2.0..6.0);
            let g = Vec2::new(rng.gen_range(-3.0..3.0), rng.gen_range(-3.0..3.0));
            let d = model(p).derivatives(Vec2::zeros(), 0.0, g).unwrap();
            let eig = d.d2l_dgdg.symmetric_eigenvalues();
            assert!(eig.min() >= -1e-12);
        }
    }

    #[test]
    fn total_gradient_of_quadratic() {
        let mesh = Arc::new(build_square_mesh(2, &SquareMeshOptions::default()));
        let s = Arc::new(FunctionSpace::unconstrained(mesh.clone(), 2).unwrap());
        let u = s.interpolate(|x| x.x * x.x);
        let m = model(2.0);
        for t in 0..mesh.num_triangles() {
            let bary = [0.2, 0.5, 0.3];
            let [a, b, c] = mesh.corners(t);
            let x = a * bary[0] + b * bary[1] + c * bary[2];
            let g = total_gradient_l(&m, &u, t, bary).unwrap();
            assert!((g - Vec2::new(4.0 * x.x, 0.0)).norm() < 1e-10);
        }
        let zero = FEFunction::zero(s);
        assert_eq!(
            total_gradient_l(&m, &zero, 0, [0.3, 0.3, 0.4]).unwrap(),
            Vec2::zeros()
        );
    }

    #[test]
    fn total_gradient_for_linear_elements() {
        let mesh = Arc::new(build_square_mesh(2, &SquareMeshOptions::default()));
        let s = Arc::new(FunctionSpace::unconstrained(mesh, 1).unwrap());
        let u = s.interpolate(|x| 2.0 * x.x - x.y);
        let m = PLaplacian::new(3.0, Arc::new(Constant(1.5))).unwrap();
        let g = total_gradient_l(&m, &u, 3, [0.1, 0.2, 0.7]).unwrap();
        assert!((g - Vec2::new(2.0, -1.0) * -1.5).norm() < 1e-13);
    }

    #[test]
    fn euler_lagrange_vanishes_on_benchmark() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for &p in &[2.0, 3.0, 4.0] {
            let m = PLaplacian::new(p, Arc::new(DiskSource { p })).unwrap();
            for _ in 0..20 {
                let x = Vec2::new(rng.gen_range(-0.7..0.7), rng.gen_range(-0.7..0.7));
                let u = DiskSolution;
                let r = m
                    .euler_lagrange(x, u.value(x), u.gradient(x), u.hessian(x))
                    .unwrap();
                assert!(r.abs() < 1e-9 * (1.0 + manufactured_f(p, x).abs()), "{r}");
            }
        }
    }
}
