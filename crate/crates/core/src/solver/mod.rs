//! Assembly of the discrete Euler–Lagrange equations and their solution by
//! damped Newton iteration with continuation in the exponent.

mod sparse;

pub(crate) use sparse::norm;
pub use sparse::{linear_solve, CsrMatrix, LinearSolution, SparseSystem};

use crate::fespace::{eval_local, FEFunction, FunctionSpace, Tabulation};
use crate::lagrangian::{Lagrangian, ModelError, PLaplacian};
use crate::Vec2;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SolverError {
    #[error(
        "matrix is not positive definite (curvature {curvature:e} at CG iteration {iteration})"
    )]
    Indefinite { iteration: usize, curvature: f64 },
    #[error("conjugate gradients stopped after {iterations} iterations at relative residual {relative_residual:e}")]
    LinearNotConverged {
        iterations: usize,
        relative_residual: f64,
    },
    #[error(
        "Newton iteration for p = {p} did not reach the tolerance; residual history {history:?}"
    )]
    NotConverged { p: f64, history: Vec<f64> },
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// When to solve a sequence of intermediate exponents.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Continuation {
    Off,
    /// Continuation for `p > 3`.
    Auto,
    Always,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NewtonConfig {
    /// Euclidean norm of the assembled residual vector.
    pub tolerance: f64,
    pub max_iterations: usize,
    pub backtrack_factor: f64,
    pub max_halvings: usize,
    pub continuation: Continuation,
    /// Largest exponent increment along the continuation path.
    pub continuation_step: f64,
    /// Relative tolerance of the inner CG solves.
    pub linear_tolerance: f64,
}

impl Default for NewtonConfig {
    fn default() -> Self {
        NewtonConfig {
            tolerance: 1e-10,
            max_iterations: 50,
            backtrack_factor: 0.5,
            max_halvings: 20,
            continuation: Continuation::Auto,
            continuation_step: 0.5,
            linear_tolerance: 1e-12,
        }
    }
}

#[derive(Debug, Clone)]
pub struct NewtonResult {
    pub solution: FEFunction,
    /// Newton steps summed over the continuation path.
    pub iterations: usize,
    /// Residual norms of the final exponent, starting with the initial guess.
    pub history: Vec<f64>,
    /// Exponents solved for, in order.
    pub path: Vec<f64>,
}

fn volume_tabulation(space: &FunctionSpace) -> Tabulation {
    space.tabulate_degree(2 * space.degree() + 3)
}

/// `R_i = ∫ ∂L/∂g(∇U)·∇V_i + ∂L/∂u V_i` for every free basis function `V_i`.
pub fn assemble_residual(model: &dyn Lagrangian, u: &FEFunction) -> Result<Vec<f64>, ModelError> {
    let space = u.space();
    let tab = volume_tabulation(space);
    let mut r = vec![0.0; space.dim()];
    let mut grads = vec![Vec2::zeros(); space.local_dofs()];
    for t in 0..space.mesh().num_triangles() {
        let map = space.element_map(t);
        let block = space.free_block(t);
        let local = u.local_values(t);
        for (q, w) in tab.rule.weights.iter().enumerate() {
            let basis = &tab.basis[q];
            let x = map.to_physical(tab.reference_point(q));
            let pv = eval_local(&local, basis, &map);
            let d = model.derivatives(x, pv.value, pv.gradient)?;
            let wq = w * map.det;
            for (a, g) in grads.iter_mut().enumerate() {
                *g = map.gradient(basis.gradients[a]);
            }
            for (a, &i) in block.iter().enumerate() {
                if i != usize::MAX {
                    r[i] += wq * (d.dl_dg.dot(&grads[a]) + d.dl_du * basis.values[a]);
                }
            }
        }
    }
    Ok(r)
}

/// Gateaux derivative of [`assemble_residual`] over the free degrees of freedom.
pub fn assemble_jacobian(model: &dyn Lagrangian, u: &FEFunction) -> Result<CsrMatrix, ModelError> {
    let space = u.space();
    let tab = volume_tabulation(space);
    let mut m = space.sparsity();
    let mut grads = vec![Vec2::zeros(); space.local_dofs()];
    for t in 0..space.mesh().num_triangles() {
        let map = space.element_map(t);
        let block = space.free_block(t);
        let local = u.local_values(t);
        for (q, w) in tab.rule.weights.iter().enumerate() {
            let basis = &tab.basis[q];
            let x = map.to_physical(tab.reference_point(q));
            let pv = eval_local(&local, basis, &map);
            let d = model.jacobian_derivatives(x, pv.value, pv.gradient)?;
            let wq = w * map.det;
            for (a, g) in grads.iter_mut().enumerate() {
                *g = map.gradient(basis.gradients[a]);
            }
            for (a, &i) in block.iter().enumerate() {
                if i == usize::MAX {
                    continue;
                }
                let ag = d.d2l_dgdg * grads[a];
                for (b, &j) in block.iter().enumerate() {
                    if j == usize::MAX {
                        continue;
                    }
                    let mut v = ag.dot(&grads[b]);
                    v += d.d2l_dgdu.dot(&grads[a]) * basis.values[b]
                        + d.d2l_dgdu.dot(&grads[b]) * basis.values[a];
                    v += d.d2l_du2 * basis.values[a] * basis.values[b];
                    m.add(i, j, wq * v);
                }
            }
        }
    }
    Ok(m)
}

/// The action `∫ L(x, U, ∇U)`.
pub fn energy(model: &dyn Lagrangian, u: &FEFunction) -> Result<f64, ModelError> {
    let space = u.space();
    let tab = volume_tabulation(space);
    let mut e = 0.0;
    for t in 0..space.mesh().num_triangles() {
        let map = space.element_map(t);
        let local = u.local_values(t);
        for (q, w) in tab.rule.weights.iter().enumerate() {
            let x = map.to_physical(tab.reference_point(q));
            let pv = eval_local(&local, &tab.basis[q], &map);
            e += w * map.det * model.derivatives(x, pv.value, pv.gradient)?.l;
        }
    }
    Ok(e)
}

/// Damped Newton for a fixed Lagrangian. Boundary values of `u0` are kept.
pub fn newton_fixed(
    model: &dyn Lagrangian,
    config: &NewtonConfig,
    u0: FEFunction,
    p_label: f64,
) -> Result<(FEFunction, usize, Vec<f64>), SolverError> {
    let mut u = u0;
    let mut r = assemble_residual(model, &u)?;
    let mut rn = norm(&r);
    let mut history = vec![rn];
    if u.space().dim() == 0 {
        return Ok((u, 0, history));
    }
    for it in 1..=config.max_iterations {
        if rn <= config.tolerance {
            return Ok((u, it - 1, history));
        }
        let jac = assemble_jacobian(model, &u)?;
        let step = linear_solve(
            &SparseSystem {
                matrix: jac,
                rhs: r.iter().map(|v| -v).collect(),
            },
            config.linear_tolerance,
        )?;
        let base = u.coefficients();
        let mut alpha = 1.0;
        let mut accepted = None;
        // fallback when the residual never decreases: the trial with the
        // lowest energy (Newton directions descend for convex actions)
        let mut best_energy: Option<(f64, FEFunction, Vec<f64>, f64)> = None;
        let e0 = energy(model, &u)?;
        for _ in 0..=config.max_halvings {
            let trial_c: Vec<f64> = base
                .iter()
                .zip(&step.x)
                .map(|(c, d)| c + alpha * d)
                .collect();
            let mut trial = u.clone();
            trial.set_coefficients(&trial_c);
            let tr = assemble_residual(model, &trial)?;
            let tn = norm(&tr);
            if tn < rn {
                accepted = Some((trial, tr, tn));
                break;
            }
            let te = energy(model, &trial)?;
            if te < e0 && best_energy.as_ref().map_or(true, |b| te < b.0) {
                best_energy = Some((te, trial, tr, tn));
            }
            alpha *= config.backtrack_factor;
        }
        let (nu, nr, nn) = match (accepted, best_energy) {
            (Some(a), _) => a,
            (None, Some((_, t, tr, tn))) => (t, tr, tn),
            (None, None) => {
                return Err(SolverError::NotConverged {
                    p: p_label,
                    history,
                })
            }
        };
        u = nu;
        r = nr;
        rn = nn;
        history.push(rn);
    }
    if rn <= config.tolerance {
        let n = history.len() - 1;
        return Ok((u, n, history));
    }
    Err(SolverError::NotConverged {
        p: p_label,
        history,
    })
}

/// Exponents visited by continuation from 2 to `p`.
pub fn continuation_path(p: f64, step: f64) -> Vec<f64> {
    if p <= 2.0 {
        return vec![p];
    }
    let n = ((p - 2.0) / step).ceil().max(1.0) as usize;
    let mut path: Vec<f64> = (0..=n)
        .map(|i| 2.0 + (p - 2.0) * i as f64 / n as f64)
        .collect();
    path[n] = p;
    path
}

/// Solve the discrete Euler–Lagrange equations of a p-Laplacian, starting
/// from `u0` (whose boundary values are kept as Dirichlet data).
pub fn newton_solve(
    model: &PLaplacian,
    config: &NewtonConfig,
    u0: FEFunction,
) -> Result<NewtonResult, SolverError> {
    let p = model.p();
    let continue_ = match config.continuation {
        Continuation::Off => false,
        Continuation::Auto => p > 3.0,
        Continuation::Always => p > 2.0,
    };
    let path = if continue_ {
        continuation_path(p, config.continuation_step)
    } else {
        vec![p]
    };
    let mut u = u0;
    let mut iterations = 0;
    let mut history = Vec::new();
    for &q in &path {
        let m = model.with_exponent(q)?;
        let (nu, it, h) = newton_fixed(&m, config, u, q)?;
        u = nu;
        iterations += it;
        history = h;
    }
    Ok(NewtonResult {
        solution: u,
        iterations,
        history,
        path,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lagrangian::{Constant, DiskSource, ScalarField};
    use crate::mesh::{build_disk_mesh, build_square_mesh, SquareMeshOptions};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::sync::Arc;

    fn disk_space(levels: usize, k: usize) -> Arc<FunctionSpace> {
        Arc::new(FunctionSpace::new(Arc::new(build_disk_mesh(levels)), k).unwrap())
    }

    fn disk_model(p: f64) -> PLaplacian {
        PLaplacian::new(p, Arc::new(DiskSource { p })).unwrap()
    }

    #[test]
    fn zero_state_zero_residual() {
        let s = disk_space(1, 2);
        let m = PLaplacian::new(3.0, Arc::new(Constant(0.0))).unwrap();
        let r = assemble_residual(&m, &FEFunction::zero(s)).unwrap();
        assert!(r.iter().all(|&v| v == 0.0));
    }

    /// Stiffness matrix and load vector assembled directly from the basis.
    fn laplace_system(space: &FunctionSpace, f: &dyn ScalarField) -> (CsrMatrix, Vec<f64>) {
        let tab = space.tabulate_degree(2 * space.degree() + 3);
        let mut a = space.sparsity();
        let mut b = vec![0.0; space.dim()];
        for t in 0..space.mesh().num_triangles() {
            let map = space.element_map(t);
            let block = space.free_block(t);
            for (q, w) in tab.rule.weights.iter().enumerate() {
                let x = map.to_physical(tab.reference_point(q));
                let bv = &tab.basis[q];
                for (i, &gi) in block.iter().enumerate() {
                    if gi == usize::MAX {
                        continue;
                    }
                    b[gi] += w * map.det * f.value(x) * bv.values[i];
                    for (j, &gj) in block.iter().enumerate() {
                        if gj != usize::MAX {
                            let v = map
                                .gradient(bv.gradients[i])
                                .dot(&map.gradient(bv.gradients[j]));
                            a.add(gi, gj, w * map.det * v);
                        }
                    }
                }
            }
        }
        (a, b)
    }

    #[test]
    fn laplace_residual_is_affine() {
        let s = disk_space(1, 2);
        let m = disk_model(2.0);
        let (a, b) = laplace_system(&s, &DiskSource { p: 2.0 });
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let c: Vec<f64> = (0..s.dim()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let u = FEFunction::from_coefficients(s.clone(), &c);
        let r = assemble_residual(&m, &u).unwrap();
        let au = a.mul_vec(&c);
        for i in 0..s.dim() {
            assert!((r[i] - (au[i] - b[i])).abs() < 1e-12);
        }
        let j = assemble_jacobian(&m, &u).unwrap();
        for i in 0..s.dim() {
            for (col, v) in j.row(i) {
                assert!((v - a.get(i, col)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn jacobian_matches_directional_differences() {
        let s = disk_space(1, 2);
        let m = disk_model(3.0);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let c: Vec<f64> = (0..s.dim()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let w: Vec<f64> = (0..s.dim()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let u = FEFunction::from_coefficients(s.clone(), &c);
        let j = assemble_jacobian(&m, &u).unwrap();
        assert!(j.asymmetry() <= 1e-12);
        let jw = j.mul_vec(&w);
        let tau = 1e-6;
        let shifted = |sign: f64| {
            let cc: Vec<f64> = c.iter().zip(&w).map(|(a, b)| a + sign * tau * b).collect();
            assemble_residual(&m, &FEFunction::from_coefficients(s.clone(), &cc)).unwrap()
        };
        let (rp, rm) = (shifted(1.0), shifted(-1.0));
        let fd: Vec<f64> = rp
            .iter()
            .zip(&rm)
            .map(|(a, b)| (a - b) / (2.0 * tau))
            .collect();
        let diff: Vec<f64> = fd.iter().zip(&jw).map(|(a, b)| a - b).collect();
        assert!(
            norm(&diff) <= 1e-5 * norm(&jw),
            "{} vs {}",
            norm(&diff),
            norm(&jw)
        );
    }

    #[test]
    fn laplace_newton_is_one_step() {
        let s = disk_space(2, 1);
        let m = disk_model(2.0);
        let res = newton_solve(&m, &NewtonConfig::default(), FEFunction::zero(s.clone())).unwrap();
        assert_eq!(res.iterations, 1);
        let (a, b) = laplace_system(&s, &DiskSource { p: 2.0 });
        let direct = linear_solve(&SparseSystem { matrix: a, rhs: b }, 1e-13).unwrap();
        for (x, y) in res.solution.coefficients().iter().zip(&direct.x) {
            assert!((x - y).abs() < 1e-10);
        }
    }

    #[test]
    fn cubic_benchmark_converges() {
        let s = disk_space(3, 1);
        let m = disk_model(3.0);
        let u0 = FEFunction::zero(s);
        let e0 = energy(&m, &u0).unwrap();
        let res = newton_solve(&m, &NewtonConfig::default(), u0).unwrap();
        let last = *res.history.last().unwrap();
        assert!(last <= 1e-10, "{last}");
        assert!(energy(&m, &res.solution).unwrap() <= e0 + 1e-12);
    }

    #[test]
    fn continuation_reaches_p5() {
        let s = disk_space(2, 1);
        let m = disk_model(5.0);
        let res = newton_solve(&m, &NewtonConfig::default(), FEFunction::zero(s)).unwrap();
        assert_eq!(res.path, vec![2.0, 2.5, 3.0, 3.5, 4.0, 4.5, 5.0]);
        assert!(*res.history.last().unwrap() <= 1e-10);
    }

    #[test]
    fn inhomogeneous_boundary_values_are_kept() {
        let mesh = Arc::new(build_square_mesh(4, &SquareMeshOptions::default()));
        let s = Arc::new(FunctionSpace::new(mesh, 1).unwrap());
        let m = PLaplacian::new(2.0, Arc::new(Constant(0.0))).unwrap();
        // harmonic data is reproduced exactly by P1 when it is linear
        let mut u0 = s.interpolate(|x| 1.0 + 2.0 * x.x - x.y);
        let lift = u0.clone();
        u0.set_coefficients(&vec![0.0; s.dim()]);
        let res = newton_solve(&m, &NewtonConfig::default(), u0).unwrap();
        for (a, b) in res.solution.values().iter().zip(lift.values()) {
            assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn path_steps() {
        assert_eq!(continuation_path(2.0, 0.5), vec![2.0]);
        assert_eq!(continuation_path(3.0, 0.5), vec![2.0, 2.5, 3.0]);
        let p = continuation_path(4.2, 0.5);
        assert!(p.windows(2).all(|w| w[1] - w[0] <= 0.5 + 1e-15));
        assert_eq!(*p.last().unwrap(), 4.2);
    }
}
