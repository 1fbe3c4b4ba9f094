//! SOLVE → ESTIMATE → MARK → REFINE, driven by the conservation estimator.

use std::io::Write;
use std::sync::Arc;

use crate::fespace::{FEFunction, FunctionSpace};
use crate::lagrangian::{PLaplacian, SmoothField};
use crate::mesh::{bisect, shape_regularity, Mesh};
use crate::noether::{estimator, Aggregation, NoetherOptions, Symmetry};
use crate::solver::{newton_solve, NewtonConfig};
use crate::Vec2;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdaptConfig {
    /// Maximum-strategy fraction `θ ∈ (0, 1]`.
    pub theta: f64,
    pub target_e: f64,
    pub max_dofs: usize,
    pub max_rounds: usize,
}

impl Default for AdaptConfig {
    fn default() -> Self {
        AdaptConfig {
            theta: 0.5,
            target_e: 0.0,
            max_dofs: 1_000_000,
            max_rounds: 40,
        }
    }
}

/// Everything the loop needs besides the mesh.
#[derive(Clone)]
pub struct AdaptProblem {
    pub model: PLaplacian,
    pub symmetry: Arc<dyn Symmetry>,
    pub degree: usize,
    /// Dirichlet data, applied at boundary nodes.
    pub boundary: Arc<dyn Fn(Vec2) -> f64 + Send + Sync>,
    /// Exact solution, when known, for error columns.
    pub exact: Option<Arc<dyn SmoothField>>,
    pub newton: NewtonConfig,
    pub noether: NoetherOptions,
    pub aggregation: Aggregation,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdaptRound {
    pub round: usize,
    pub dofs: usize,
    pub e_total: f64,
    pub n_value: f64,
    pub lp_err: Option<f64>,
    pub w1p_err: Option<f64>,
    pub triangles: usize,
    pub shape_regularity: f64,
    pub newton_iterations: usize,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct AdaptTrace {
    pub rounds: Vec<AdaptRound>,
}

impl AdaptTrace {
    /// CSV with columns `round,dofs,E,N,lp_err,w1p_err` followed by mesh
    /// diagnostics. Missing errors are left empty.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(
            out,
            "round,dofs,E,N,lp_err,w1p_err,triangles,shape_regularity,newton_iterations"
        )?;
        for r in &self.rounds {
            writeln!(
                out,
                "{},{},{},{},{},{},{},{},{}",
                r.round,
                r.dofs,
                fmt_real(r.e_total),
                fmt_real(r.n_value),
                r.lp_err.map(fmt_real).unwrap_or_default(),
                r.w1p_err.map(fmt_real).unwrap_or_default(),
                r.triangles,
                fmt_real(r.shape_regularity),
                r.newton_iterations
            )?;
        }
        Ok(())
    }
}

/// A real with 15 significant digits.
pub fn fmt_real(v: f64) -> String {
    format!("{v:.14e}")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopReason {
    TargetReached,
    MaxDofs,
    MaxRounds,
    NothingMarked,
}

pub struct AdaptOutcome {
    pub trace: AdaptTrace,
    pub mesh: Arc<Mesh>,
    pub solution: FEFunction,
    pub reason: StopReason,
}

/// A failed solve, with the rounds completed before it.
#[derive(Debug, thiserror::Error)]
#[error("adaptive loop aborted after {} rounds: {error}", trace.rounds.len())]
pub struct AdaptFailure {
    pub trace: AdaptTrace,
    #[source]
    pub error: crate::Error,
}

/// Triangles whose indicator is at least `θ` times the largest one.
/// Returns nothing when every indicator is zero.
pub fn mark_maximum(indicators: &[f64], theta: f64) -> Vec<usize> {
    assert!(theta > 0.0 && theta <= 1.0, "θ must lie in (0, 1]");
    let max = indicators.iter().cloned().fold(0.0, f64::max);
    if max <= 0.0 {
        return Vec::new();
    }
    indicators
        .iter()
        .enumerate()
        .filter(|&(_, &v)| v >= theta * max)
        .map(|(i, _)| i)
        .collect()
}

fn initial_guess(
    space: &Arc<FunctionSpace>,
    previous: Option<&FEFunction>,
    problem: &AdaptProblem,
) -> crate::Result<FEFunction> {
    let mut u = match previous {
        Some(prev) => prev.transfer(space)?,
        None => FEFunction::zero(space.clone()),
    };
    let values = u.values_mut();
    for (i, &x) in space.nodes().iter().enumerate() {
        if space.is_boundary_node(i) {
            values[i] = (problem.boundary)(x);
        }
    }
    Ok(u)
}

pub fn adapt_loop(
    problem: &AdaptProblem,
    initial: Mesh,
    config: &AdaptConfig,
) -> Result<AdaptOutcome, AdaptFailure> {
    let mut trace = AdaptTrace::default();
    let mut mesh = Arc::new(initial);
    let mut previous: Option<FEFunction> = None;
    let fail = |trace: &AdaptTrace, error: crate::Error| AdaptFailure {
        trace: trace.clone(),
        error,
    };
    for round in 0..config.max_rounds {
        let space = FunctionSpace::new(mesh.clone(), problem.degree)
            .map(Arc::new)
            .map_err(|e| fail(&trace, e.into()))?;
        let u0 = initial_guess(&space, previous.as_ref(), problem).map_err(|e| fail(&trace, e))?;
        let solved = newton_solve(&problem.model, &problem.newton, u0)
            .map_err(|e| fail(&trace, e.into()))?;
        let u = solved.solution;
        let report = estimator(
            &problem.model,
            problem.symmetry.as_ref(),
            &u,
            &problem.noether,
            problem.aggregation,
        )
        .map_err(|e| fail(&trace, e))?;
        let (lp_err, w1p_err) = match &problem.exact {
            Some(ex) => {
                let (a, b) = u.error_norms(|x| (ex.value(x), ex.gradient(x)), problem.model.p());
                (Some(a), Some(b))
            }
            None => (None, None),
        };
        trace.rounds.push(AdaptRound {
            round,
            dofs: space.dim(),
            e_total: report.e_total,
            n_value: report.n_value,
            lp_err,
            w1p_err,
            triangles: mesh.num_triangles(),
            shape_regularity: shape_regularity(&mesh),
            newton_iterations: solved.iterations,
        });

        let reason = if report.e_total <= config.target_e {
            Some(StopReason::TargetReached)
        } else if space.dim() >= config.max_dofs {
            Some(StopReason::MaxDofs)
        } else if round + 1 == config.max_rounds {
            Some(StopReason::MaxRounds)
        } else {
            None
        };
        let marked = mark_maximum(&report.triangle_indicators(&mesh), config.theta);
        let reason = reason.or(marked.is_empty().then_some(StopReason::NothingMarked));
        if let Some(reason) = reason {
            return Ok(AdaptOutcome {
                trace,
                mesh,
                solution: u,
                reason,
            });
        }
        mesh = Arc::new(bisect(&mesh, &marked).map_err(|e| fail(&trace, e.into()))?);
        previous = Some(u);
    }
    unreachable!("the last round always stops")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lagrangian::{GaussianSolution, GaussianSource, ScalarField};
    use crate::mesh::{build_square_mesh, SquareMeshOptions};
    use crate::noether::RotationSymmetry;

    #[test]
    fn maximum_strategy() {
        assert_eq!(mark_maximum(&[1.0, 0.6, 0.49, 0.1], 0.5), vec![0, 1]);
        assert_eq!(mark_maximum(&[2.0; 5], 0.5), vec![0, 1, 2, 3, 4]);
        assert_eq!(mark_maximum(&[0.0; 3], 0.5), Vec::<usize>::new());
        assert_eq!(mark_maximum(&[0.1, 5.0, 0.2], 1.0), vec![1]);
    }

    fn gaussian_problem() -> AdaptProblem {
        AdaptProblem {
            model: PLaplacian::new(2.0, Arc::new(GaussianSource)).unwrap(),
            symmetry: Arc::new(RotationSymmetry),
            degree: 1,
            boundary: Arc::new(|x| GaussianSolution.value(x)),
            exact: Some(Arc::new(GaussianSolution)),
            newton: NewtonConfig::default(),
            noether: NoetherOptions::default(),
            aggregation: Aggregation::Broken,
        }
    }

    #[test]
    fn huge_target_stops_after_one_round() {
        let config = AdaptConfig {
            target_e: 1e9,
            ..Default::default()
        };
        let out = adapt_loop(
            &gaussian_problem(),
            build_square_mesh(2, &SquareMeshOptions::default()),
            &config,
        )
        .unwrap();
        assert_eq!(out.trace.rounds.len(), 1);
        assert_eq!(out.reason, StopReason::TargetReached);
    }

    #[test]
    fn rounds_refine_and_reduce_estimate() {
        let config = AdaptConfig {
            target_e: 0.5,
            max_rounds: 12,
            ..Default::default()
        };
        let out = adapt_loop(
            &gaussian_problem(),
            build_square_mesh(2, &SquareMeshOptions::default()),
            &config,
        )
        .unwrap();
        let rounds = &out.trace.rounds;
        assert!(rounds.len() > 2);
        for w in rounds.windows(2) {
            assert!(w[1].dofs > w[0].dofs);
            assert!(w[1].e_total <= 1.5 * w[0].e_total);
        }
        assert!(rounds.iter().all(|r| r.shape_regularity > 0.05));
        out.mesh.check_conformity().unwrap();

        let mut csv = Vec::new();
        out.trace.write_csv(&mut csv).unwrap();
        let text = String::from_utf8(csv).unwrap();
        assert!(text.starts_with("round,dofs,E,N,lp_err,w1p_err"));
        assert_eq!(text.lines().count(), rounds.len() + 1);
    }
}
