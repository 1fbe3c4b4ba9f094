use serde::Serialize;

use super::{discrete_noether, flux_divergence_from, flux_from, NoetherOptions, Symmetry};
use crate::fespace::{eval_local, FEFunction};
use crate::lagrangian::Lagrangian;
use crate::mesh::Mesh;
use crate::quadrature::edge_rule;

/// How element and edge norms are combined into `E`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Aggregation {
    /// `(Σ_K ‖div C‖²_K)^{1/2} + (Σ_e ‖[[C]]‖²_e)^{1/2}`: the broken
    /// L²(Ω) norm of `div C` plus the L² norm of the jumps on the skeleton.
    #[default]
    Broken,
    /// `(Σ_K h_K² ‖div C‖²_K + Σ_e h_e ‖[[C]]‖²_e)^{1/2}`, the classical
    /// residual weighting.
    Weighted,
    /// `Σ_K ‖div C‖_K + Σ_e ‖[[C]]‖_e`.
    Literal,
}

/// Conserved quantity and conservation-violation estimate of one discrete state.
#[derive(Debug, Clone, Serialize)]
pub struct NoetherReport {
    #[serde(rename = "N")]
    pub n_value: f64,
    #[serde(rename = "E")]
    pub e_total: f64,
    /// `‖div C[U]‖_{L²(K)}` per triangle.
    #[serde(rename = "elements")]
    pub element_indicators: Vec<f64>,
    /// `‖[[C[U]]]‖_{L²(e)}` per interior edge, in the order of
    /// [`Mesh::interior_edges`].
    #[serde(rename = "edges")]
    pub edge_indicators: Vec<f64>,
    #[serde(skip)]
    pub aggregation: Aggregation,
    /// Literal sum of all indicators, whatever the aggregation.
    #[serde(skip)]
    pub e_literal: f64,
}

impl NoetherReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("report is plain data")
    }

    /// Per-triangle indicators for marking; see [`combine_indicators`].
    pub fn triangle_indicators(&self, mesh: &Mesh) -> Vec<f64> {
        combine_indicators(
            mesh,
            &self.element_indicators,
            &self.edge_indicators,
            self.aggregation,
        )
    }
}

/// Adds half of each interior edge indicator to both neighbours. The
/// square-summed aggregations combine (weighted) squares and return roots.
pub fn combine_indicators(
    mesh: &Mesh,
    elements: &[f64],
    edges: &[f64],
    aggregation: Aggregation,
) -> Vec<f64> {
    let mut out: Vec<f64> = match aggregation {
        Aggregation::Literal => elements.to_vec(),
        Aggregation::Broken => elements.iter().map(|eta| eta * eta).collect(),
        Aggregation::Weighted => elements
            .iter()
            .enumerate()
            .map(|(t, eta)| (mesh.diameter(t) * eta).powi(2))
            .collect(),
    };
    for (&e, &eta) in mesh.interior_edges().iter().zip(edges) {
        let edge = mesh.edge(e);
        let share = match aggregation {
            Aggregation::Literal => 0.5 * eta,
            Aggregation::Broken => 0.5 * eta * eta,
            Aggregation::Weighted => 0.5 * mesh.edge_geometry(e).length * eta * eta,
        };
        out[edge.left] += share;
        out[edge.right.expect("interior edge")] += share;
    }
    if aggregation != Aggregation::Literal {
        out.iter_mut().for_each(|v| *v = v.sqrt());
    }
    out
}

/// `N[U]` together with element norms of `div C[U]` and edge norms of
/// `[[C[U]]]`, aggregated into `E`.
pub fn estimator(
    model: &dyn Lagrangian,
    sym: &dyn Symmetry,
    u: &FEFunction,
    opts: &NoetherOptions,
    aggregation: Aggregation,
) -> crate::Result<NoetherReport> {
    let n_value = discrete_noether(model, sym, u, opts)?;
    let space = u.space();
    let mesh = space.mesh();
    let k = space.degree();

    let tab = space.tabulate_degree(2 * k + 4);
    let mut element_indicators = Vec::with_capacity(mesh.num_triangles());
    for t in 0..mesh.num_triangles() {
        let map = space.element_map(t);
        let local = u.local_values(t);
        let mut sq = 0.0;
        for (q, w) in tab.rule.weights.iter().enumerate() {
            let x = map.to_physical(tab.reference_point(q));
            let pv = eval_local(&local, &tab.basis[q], &map);
            let d = model.derivatives(x, pv.value, pv.gradient)?;
            sq += w * map.det * flux_divergence_from(&d, sym, x, &pv).powi(2);
        }
        element_indicators.push(sq.sqrt());
    }

    let erule = edge_rule(2 * k + 4)?;
    let mut edge_indicators = Vec::with_capacity(mesh.interior_edges().len());
    for &e in mesh.interior_edges() {
        let edge = mesh.edge(e);
        let (l, r) = (edge.left, edge.right.expect("interior edge"));
        let geo = mesh.edge_geometry(e);
        let mut sq = 0.0;
        for (s, w) in erule.iter() {
            let x = mesh.edge_point(e, s);
            let mut jump = 0.0;
            for (t, n) in [(l, geo.normal_left), (r, geo.normal_right)] {
                let pv = u.eval(t, mesh.barycentric(t, x));
                let d = model.derivatives(x, pv.value, pv.gradient)?;
                jump += flux_from(&d, sym, x, pv.value, pv.gradient).dot(&n);
            }
            sq += w * geo.length * jump * jump;
        }
        edge_indicators.push(sq.sqrt());
    }

    let e_literal = element_indicators.iter().sum::<f64>() + edge_indicators.iter().sum::<f64>();
    let e_total = match aggregation {
        Aggregation::Literal => e_literal,
        Aggregation::Broken => {
            let sq = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
            sq(&element_indicators) + sq(&edge_indicators)
        }
        Aggregation::Weighted => {
            let vol: f64 = element_indicators
                .iter()
                .enumerate()
                .map(|(t, eta)| (mesh.diameter(t) * eta).powi(2))
                .sum();
            let skel: f64 = mesh
                .interior_edges()
                .iter()
                .zip(&edge_indicators)
                .map(|(&e, eta)| mesh.edge_geometry(e).length * eta * eta)
                .sum();
            (vol + skel).sqrt()
        }
    };
    Ok(NoetherReport {
        n_value,
        e_total,
        element_indicators,
        edge_indicators,
        aggregation,
        e_literal,
    })
}
