//! Symmetries, Noether fluxes and the conserved quantities built from them.
//!
//! A symmetry is represented by its infinitesimals `(ξ, φ)`. For a
//! Lagrangian `L` the characteristic is `Q = φ − ξ·∇u` and the flux is
//! `C = Lξ + (∂L/∂g) Q`. On smooth fields `div C = −Q 𝓛[u]` where
//! `𝓛[u] = −div(∂L/∂g) + ∂L/∂u` (see [`IDENTITY_SIGN`]).

mod estimator;

pub use estimator::{combine_indicators, estimator, Aggregation, NoetherReport};

use std::sync::Arc;

use crate::fespace::{FEFunction, PointValue};
use crate::lagrangian::{total_gradient, Derivatives, Lagrangian, ModelError, SmoothField};
use crate::mesh::Mesh;
use crate::quadrature::edge_rule;
use crate::{Mat2, Vec2};

/// Sign `s` in the pointwise identity `div C[u] = s · Q · 𝓛[u]`.
pub const IDENTITY_SIGN: f64 = -1.0;

/// Infinitesimal generator `(ξ, φ)` of a one-parameter group acting on `(x, u)`.
pub trait Symmetry: Send + Sync {
    fn name(&self) -> &'static str;
    fn xi(&self, x: Vec2, u: f64) -> Vec2;
    /// Entry `(i, j)` is `∂ξ_i/∂x_j` at fixed `u`.
    fn xi_jacobian(&self, x: Vec2, u: f64) -> Mat2;
    fn xi_du(&self, _x: Vec2, _u: f64) -> Vec2 {
        Vec2::zeros()
    }
    fn phi(&self, x: Vec2, u: f64) -> f64;
    fn phi_dx(&self, _x: Vec2, _u: f64) -> Vec2 {
        Vec2::zeros()
    }
    fn phi_du(&self, _x: Vec2, _u: f64) -> f64 {
        0.0
    }
    fn depends_on_u(&self) -> bool {
        false
    }
    /// True when `φ ≡ 0`, which lets assembly skip the projection of `φ`.
    fn phi_vanishes(&self) -> bool {
        false
    }
}

/// Rotations about the origin: `ξ = (−x₂, x₁)`, `φ = 0`.
#[derive(Debug, Clone, Copy, Default)]
pub struct RotationSymmetry;

impl Symmetry for RotationSymmetry {
    fn name(&self) -> &'static str {
        "rotation"
    }
    fn xi(&self, x: Vec2, _: f64) -> Vec2 {
        Vec2::new(-x.y, x.x)
    }
    fn xi_jacobian(&self, _: Vec2, _: f64) -> Mat2 {
        Mat2::new(0.0, -1.0, 1.0, 0.0)
    }
    fn phi(&self, _: Vec2, _: f64) -> f64 {
        0.0
    }
    fn phi_vanishes(&self) -> bool {
        true
    }
}

/// Translation of the dependent variable: `ξ = 0`, `φ = 1`.
#[derive(Debug, Clone, Copy, Default)]
pub struct TranslationUSymmetry;

impl Symmetry for TranslationUSymmetry {
    fn name(&self) -> &'static str {
        "translation-u"
    }
    fn xi(&self, _: Vec2, _: f64) -> Vec2 {
        Vec2::zeros()
    }
    fn xi_jacobian(&self, _: Vec2, _: f64) -> Mat2 {
        Mat2::zeros()
    }
    fn phi(&self, _: Vec2, _: f64) -> f64 {
        1.0
    }
}

/// Look up a built-in symmetry by its command-line name.
pub fn symmetry_by_name(name: &str) -> Option<Arc<dyn Symmetry>> {
    match name {
        "rotation" => Some(Arc::new(RotationSymmetry)),
        "translation-u" => Some(Arc::new(TranslationUSymmetry)),
        _ => None,
    }
}

/// `Q = φ − ξ·g`.
pub fn characteristic(sym: &dyn Symmetry, x: Vec2, u: f64, g: Vec2) -> f64 {
    sym.phi(x, u) - sym.xi(x, u).dot(&g)
}

/// Total Jacobian of `x ↦ ξ(x, u(x))`.
fn xi_total_jacobian(sym: &dyn Symmetry, x: Vec2, u: f64, g: Vec2) -> Mat2 {
    sym.xi_jacobian(x, u) + sym.xi_du(x, u) * g.transpose()
}

fn div_xi(sym: &dyn Symmetry, x: Vec2, u: f64, g: Vec2) -> f64 {
    xi_total_jacobian(sym, x, u, g).trace()
}

/// Divergence of `∂L/∂g` along a field with the given point values.
fn div_dl_dg(d: &Derivatives, pv: &PointValue) -> f64 {
    d.d2l_dgdx.trace() + d.d2l_dgdu.dot(&pv.gradient) + (d.d2l_dgdg * pv.hessian).trace()
}

fn flux_from(d: &Derivatives, sym: &dyn Symmetry, x: Vec2, u: f64, g: Vec2) -> Vec2 {
    sym.xi(x, u) * d.l + d.dl_dg * characteristic(sym, x, u, g)
}

/// Noether flux `C = Lξ + (∂L/∂g)(φ − ξ·g)` at one state.
pub fn flux_c(
    model: &dyn Lagrangian,
    sym: &dyn Symmetry,
    x: Vec2,
    u: f64,
    g: Vec2,
) -> Result<Vec2, ModelError> {
    let d = model.derivatives(x, u, g)?;
    Ok(flux_from(&d, sym, x, u, g))
}

/// Closed-form rotation flux of `L = ½‖g‖² − f u`.
pub fn flux_c_rotation_laplace(x: Vec2, u: f64, g: Vec2, f: f64) -> Vec2 {
    let half = 0.5 * (g.x * g.x - g.y * g.y);
    Vec2::new(
        x.y * half - x.x * g.x * g.y + x.y * f * u,
        x.x * half + x.y * g.x * g.y - x.x * f * u,
    )
}

/// `div C` along a field, by the chain rule. Second derivatives of the
/// field enter only through `∂L/∂g`; the Hessian terms of `ξ·∇u` cancel
/// against those of `∇L`.
pub fn flux_divergence(
    model: &dyn Lagrangian,
    sym: &dyn Symmetry,
    x: Vec2,
    pv: &PointValue,
) -> Result<f64, ModelError> {
    let d = model.derivatives(x, pv.value, pv.gradient)?;
    Ok(flux_divergence_from(&d, sym, x, pv))
}

fn flux_divergence_from(d: &Derivatives, sym: &dyn Symmetry, x: Vec2, pv: &PointValue) -> f64 {
    let (u, g) = (pv.value, pv.gradient);
    let xi = sym.xi(x, u);
    let jac = xi_total_jacobian(sym, x, u, g);
    let q = characteristic(sym, x, u, g);
    let grad_phi = sym.phi_dx(x, u) + g * sym.phi_du(x, u);
    // ∇Q without the −D²u ξ part, which cancels with D²u ∂L/∂g in ∇L·ξ.
    let grad_q = grad_phi - jac.transpose() * g;
    (d.dl_dx + g * d.dl_du).dot(&xi)
        + d.l * jac.trace()
        + div_dl_dg(d, pv) * q
        + d.dl_dg.dot(&grad_q)
}

/// Fourth-order centred difference of `C` along `x`, used as an independent
/// oracle for `div C`.
pub fn flux_divergence_fd(
    model: &dyn Lagrangian,
    sym: &dyn Symmetry,
    u: &dyn SmoothField,
    x: Vec2,
    step: f64,
) -> Result<f64, ModelError> {
    let flux = |y: Vec2| flux_c(model, sym, y, u.value(y), u.gradient(y));
    let mut div = 0.0;
    for i in 0..2 {
        let mut e = Vec2::zeros();
        e[i] = step;
        let c = [
            flux(x - 2.0 * e)?[i],
            flux(x - e)?[i],
            flux(x + e)?[i],
            flux(x + 2.0 * e)?[i],
        ];
        div += (c[0] - 8.0 * c[1] + 8.0 * c[2] - c[3]) / (12.0 * step);
    }
    Ok(div)
}

/// `(div C[u], Q·𝓛[u])` at `x`: the divergence by finite differences
/// (step `1e−4`), the right-hand side analytically.
pub fn conservation_residual(
    model: &dyn Lagrangian,
    sym: &dyn Symmetry,
    u: &dyn SmoothField,
    x: Vec2,
) -> Result<(f64, f64), ModelError> {
    let div = flux_divergence_fd(model, sym, u, x, 1e-4)?;
    let (v, g, h) = (u.value(x), u.gradient(x), u.hessian(x));
    let q_el = characteristic(sym, x, v, g) * model.euler_lagrange(x, v, g, h)?;
    Ok((div, q_el))
}

/// How `∇_K L` is read in the discrete conserved quantity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum GradientConvention {
    /// `∂L/∂x` at fixed `(u, g)`.
    Explicit,
    /// Total derivative of `x ↦ L(x, U(x), ∇U(x))` inside each element.
    #[default]
    Total,
}

/// Options shared by [`discrete_noether`] and [`weak_law_residual`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoetherOptions {
    pub gradient: GradientConvention,
    /// Sign of the `(∂L/∂g · ∇u) div ξ` term.
    pub div_xi_sign: f64,
    /// Quadrature degree for volume and edge integrals; `None` uses `2k + 3`
    /// for discrete fields and the highest available rule otherwise.
    pub quadrature_degree: Option<usize>,
}

impl Default for NoetherOptions {
    fn default() -> Self {
        NoetherOptions {
            gradient: GradientConvention::Total,
            div_xi_sign: -1.0,
            quadrature_degree: None,
        }
    }
}

/// Volume integrand shared by the discrete quantity and the weak law.
fn volume_density(
    d: &Derivatives,
    sym: &dyn Symmetry,
    x: Vec2,
    pv: &PointValue,
    phi: f64,
    opts: &NoetherOptions,
) -> f64 {
    let grad_l = match opts.gradient {
        GradientConvention::Explicit => d.dl_dx,
        GradientConvention::Total => total_gradient(d, pv),
    };
    let xi = sym.xi(x, pv.value);
    let dxi = div_xi(sym, x, pv.value, pv.gradient);
    (-div_dl_dg(d, pv) + d.dl_du) * phi
        + grad_l.dot(&xi)
        + d.l * dxi
        + opts.div_xi_sign * d.dl_dg.dot(&pv.gradient) * dxi
}

/// One side of an interface: point values and outward normal.
struct Trace {
    pv: PointValue,
    normal: Vec2,
}

/// `[[∂L/∂g]] {φ} + [[L]]·{ξ}` at a point of an interface.
fn skeleton_density(
    model: &dyn Lagrangian,
    sym: &dyn Symmetry,
    x: Vec2,
    sides: [&Trace; 2],
    phis: [f64; 2],
) -> Result<f64, ModelError> {
    let mut jump_flux = 0.0;
    let mut jump_l = Vec2::zeros();
    let mut avg_phi = 0.0;
    let mut avg_xi = Vec2::zeros();
    for (s, phi) in sides.into_iter().zip(phis) {
        let d = model.derivatives(x, s.pv.value, s.pv.gradient)?;
        jump_flux += d.dl_dg.dot(&s.normal);
        jump_l += s.normal * d.l;
        avg_phi += 0.5 * phi;
        avg_xi += 0.5 * sym.xi(x, s.pv.value);
    }
    Ok(jump_flux * avg_phi + jump_l.dot(&avg_xi))
}

fn volume_degree(k: usize, opts: &NoetherOptions) -> usize {
    opts.quadrature_degree.unwrap_or(2 * k + 3)
}

/// Discrete conserved quantity `N[U]`: elementwise volume terms with `Pφ`
/// (the L² projection of `φ` onto the space of `U`) plus jump/average terms
/// over interior edges.
pub fn discrete_noether(
    model: &dyn Lagrangian,
    sym: &dyn Symmetry,
    u: &FEFunction,
    opts: &NoetherOptions,
) -> crate::Result<f64> {
    let space = u.space();
    let mesh = space.mesh().clone();
    let projected =
        if sym.phi_vanishes() {
            None
        } else if sym.depends_on_u() {
            Some(space.l2_project_on_elements(|t, x| {
                sym.phi(x, u.eval(t, mesh.barycentric(t, x)).value)
            })?)
        } else {
            Some(space.l2_project(|x| sym.phi(x, 0.0))?)
        };
    let phi_at = |t: usize, bary: [f64; 3]| match &projected {
        Some(p) => p.eval(t, bary).value,
        None => 0.0,
    };

    let tab = space.tabulate_degree(volume_degree(space.degree(), opts));
    let mut total = 0.0;
    for t in 0..mesh.num_triangles() {
        let map = space.element_map(t);
        let local = u.local_values(t);
        let p_local = projected.as_ref().map(|p| p.local_values(t));
        for (q, w) in tab.rule.weights.iter().enumerate() {
            let x = map.to_physical(tab.reference_point(q));
            let pv = crate::fespace::eval_local(&local, &tab.basis[q], &map);
            let phi = p_local
                .as_ref()
                .map(|pl| {
                    pl.iter()
                        .zip(&tab.basis[q].values)
                        .map(|(a, b)| a * b)
                        .sum()
                })
                .unwrap_or(0.0);
            let d = model.derivatives(x, pv.value, pv.gradient)?;
            total += w * map.det * volume_density(&d, sym, x, &pv, phi, opts);
        }
    }

    let erule = edge_rule(volume_degree(space.degree(), opts))?;
    for &e in mesh.interior_edges() {
        let edge = mesh.edge(e);
        let (l, r) = (edge.left, edge.right.expect("interior edge"));
        let geo = mesh.edge_geometry(e);
        for (s, w) in erule.iter() {
            let x = mesh.edge_point(e, s);
            let (bl, br) = (mesh.barycentric(l, x), mesh.barycentric(r, x));
            let tl = Trace {
                pv: u.eval(l, bl),
                normal: geo.normal_left,
            };
            let tr = Trace {
                pv: u.eval(r, br),
                normal: geo.normal_right,
            };
            let phis = [phi_at(l, bl), phi_at(r, br)];
            let density = skeleton_density(model, sym, x, [&tl, &tr], phis)?;
            total += w * geo.length * density;
        }
    }
    Ok(total)
}

/// A field that is smooth on each piece of a decomposition of a mesh.
pub trait PiecewiseField {
    /// Value, gradient and Hessian of the restriction to `piece` at `x`,
    /// where `x` lies in triangle `t` of that piece (or on its boundary).
    fn eval(&self, piece: usize, t: usize, x: Vec2) -> PointValue;
}

impl<F: Fn(usize, usize, Vec2) -> PointValue> PiecewiseField for F {
    fn eval(&self, piece: usize, t: usize, x: Vec2) -> PointValue {
        self(piece, t, x)
    }
}

/// A smooth field restricted to every piece.
pub struct Smooth<'a>(pub &'a dyn SmoothField);

impl PiecewiseField for Smooth<'_> {
    fn eval(&self, _: usize, _: usize, x: Vec2) -> PointValue {
        PointValue {
            value: self.0.value(x),
            gradient: self.0.gradient(x),
            hessian: self.0.hessian(x),
        }
    }
}

/// A discrete function viewed as broken across its own triangles.
pub struct Broken<'a>(pub &'a FEFunction);

impl PiecewiseField for Broken<'_> {
    fn eval(&self, _: usize, t: usize, x: Vec2) -> PointValue {
        let mesh = self.0.space().mesh();
        self.0.eval(t, mesh.barycentric(t, x))
    }
}

/// Conservation functional of a piecewise-smooth field.
///
/// `piece_of[t]` assigns triangle `t` to a piece. The result is
/// `Σ_i ∫_{Ω_i} (𝓛[u] φ + ∇L·ξ + L div ξ + s (∂L/∂g·∇u) div ξ)` plus
/// `∫_F [[∂L/∂g]]{φ} + [[L]]·{ξ}` over interfaces `F` between different
/// pieces. `φ` and `ξ` are evaluated exactly (no projection).
pub fn weak_law_residual(
    mesh: &Mesh,
    piece_of: &[usize],
    model: &dyn Lagrangian,
    sym: &dyn Symmetry,
    u: &dyn PiecewiseField,
    opts: &NoetherOptions,
) -> crate::Result<f64> {
    assert_eq!(
        piece_of.len(),
        mesh.num_triangles(),
        "one piece index per triangle"
    );
    let degree = opts
        .quadrature_degree
        .unwrap_or(crate::quadrature::MAX_DEGREE);
    let rule = crate::quadrature::triangle_rule(degree)?;
    let mut total = 0.0;
    for t in 0..mesh.num_triangles() {
        let [a, b, c] = mesh.corners(t);
        let det = 2.0 * mesh.area(t);
        for (bary, w) in rule.iter() {
            let x = a * bary[0] + b * bary[1] + c * bary[2];
            let pv = u.eval(piece_of[t], t, x);
            let d = model.derivatives(x, pv.value, pv.gradient)?;
            let phi = sym.phi(x, pv.value);
            total += w * det * volume_density(&d, sym, x, &pv, phi, opts);
        }
    }
    let erule = edge_rule(degree)?;
    for &e in mesh.interior_edges() {
        let edge = mesh.edge(e);
        let (l, r) = (edge.left, edge.right.expect("interior edge"));
        if piece_of[l] == piece_of[r] {
            continue;
        }
        let geo = mesh.edge_geometry(e);
        for (s, w) in erule.iter() {
            let x = mesh.edge_point(e, s);
            let tl = Trace {
                pv: u.eval(piece_of[l], l, x),
                normal: geo.normal_left,
            };
            let tr = Trace {
                pv: u.eval(piece_of[r], r, x),
                normal: geo.normal_right,
            };
            let phis = [sym.phi(x, tl.pv.value), sym.phi(x, tr.pv.value)];
            let density = skeleton_density(model, sym, x, [&tl, &tr], phis)?;
            total += w * geo.length * density;
        }
    }
    Ok(total)
}

#[cfg(test)]
mod tests;
