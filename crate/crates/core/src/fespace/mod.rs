//! Continuous Lagrange P1–P3 spaces on a [`Mesh`].
//!
//! A [`FEFunction`] stores one value per Lagrange node, boundary nodes
//! included. In a constrained space only the interior nodes are degrees of
//! freedom; boundary values are data (zero for members of the space proper,
//! a Dirichlet lift otherwise).

mod reference;

use std::io::{BufRead, Write};
use std::sync::Arc;

pub use reference::{BasisValues, ReferenceElement};

use crate::mesh::Mesh;
use crate::quadrature::{triangle_rule, TriangleRule, MAX_DEGREE};
use crate::solver::{linear_solve, CsrMatrix, SparseSystem};
use crate::{Mat2, Vec2};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SpaceError {
    #[error("unsupported Lagrange degree {0} (supported: 1, 2, 3)")]
    UnsupportedDegree(usize),
    #[error("invalid EOC input: {0}")]
    EocDomain(String),
    #[error("function does not belong to this space: {0}")]
    Mismatch(String),
    #[error("malformed function file: {0}")]
    Parse(String),
}

/// Quadrature degree clamped to the available range.
pub(crate) fn rule_degree(d: usize) -> usize {
    d.clamp(1, MAX_DEGREE)
}

/// Affine map `x = origin + J ξ` from the reference triangle to a mesh triangle.
#[derive(Debug, Clone, Copy)]
pub struct ElementMap {
    pub origin: Vec2,
    pub jacobian: Mat2,
    pub inv_transpose: Mat2,
    pub det: f64,
}

impl ElementMap {
    pub fn new([a, b, c]: [Vec2; 3]) -> Self {
        let jacobian = Mat2::from_columns(&[b - a, c - a]);
        let det = jacobian.determinant();
        let inv = Mat2::new(
            jacobian[(1, 1)],
            -jacobian[(0, 1)],
            -jacobian[(1, 0)],
            jacobian[(0, 0)],
        ) / det;
        ElementMap {
            origin: a,
            jacobian,
            inv_transpose: inv.transpose(),
            det,
        }
    }

    pub fn to_physical(&self, xi: Vec2) -> Vec2 {
        self.origin + self.jacobian * xi
    }

    pub fn gradient(&self, reference: Vec2) -> Vec2 {
        self.inv_transpose * reference
    }

    pub fn hessian(&self, reference: Mat2) -> Mat2 {
        self.inv_transpose * reference * self.inv_transpose.transpose()
    }
}

/// Value, gradient and Hessian of a discrete function at a point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PointValue {
    pub value: f64,
    pub gradient: Vec2,
    pub hessian: Mat2,
}

/// Combine local nodal values with tabulated shape functions.
pub fn eval_local(local: &[f64], basis: &BasisValues, map: &ElementMap) -> PointValue {
    let mut value = 0.0;
    let mut g = Vec2::zeros();
    let mut h = Mat2::zeros();
    for (i, &c) in local.iter().enumerate() {
        value += c * basis.values[i];
        g += basis.gradients[i] * c;
        h += basis.hessians[i] * c;
    }
    PointValue {
        value,
        gradient: map.gradient(g),
        hessian: map.hessian(h),
    }
}

/// Shape functions tabulated at the points of a quadrature rule.
#[derive(Debug, Clone)]
pub struct Tabulation {
    pub rule: TriangleRule,
    pub basis: Vec<BasisValues>,
}

impl Tabulation {
    pub fn reference_point(&self, q: usize) -> Vec2 {
        let p = self.rule.points[q];
        Vec2::new(p[1], p[2])
    }
}

#[derive(Debug, Clone)]
pub struct FunctionSpace {
    mesh: Arc<Mesh>,
    reference: ReferenceElement,
    local_dofs: usize,
    dofs: Vec<usize>,
    nodes: Vec<Vec2>,
    boundary_node: Vec<bool>,
    free_index: Vec<Option<usize>>,
    free_nodes: Vec<usize>,
    constrained: bool,
}

impl FunctionSpace {
    /// P_k space with zero trace: boundary nodes are not degrees of freedom.
    pub fn new(mesh: Arc<Mesh>, degree: usize) -> Result<Self, SpaceError> {
        Self::build(mesh, degree, true)
    }

    /// P_k space without boundary constraint.
    pub fn unconstrained(mesh: Arc<Mesh>, degree: usize) -> Result<Self, SpaceError> {
        Self::build(mesh, degree, false)
    }

    fn build(mesh: Arc<Mesh>, degree: usize, constrained: bool) -> Result<Self, SpaceError> {
        if !(1..=3).contains(&degree) {
            return Err(SpaceError::UnsupportedDegree(degree));
        }
        let reference = ReferenceElement::new(degree);
        let nloc = reference.num_basis();
        let nv = mesh.num_vertices();
        let ne = mesh.num_edges();
        let nt = mesh.num_triangles();
        let per_edge = degree - 1;
        let edge_base = nv;
        let interior_base = nv + ne * per_edge;
        let num_nodes = interior_base + if degree == 3 { nt } else { 0 };

        let mut nodes = Vec::with_capacity(num_nodes);
        let mut boundary_node = vec![false; num_nodes];
        nodes.extend_from_slice(mesh.vertices());
        for v in 0..nv {
            boundary_node[v] = mesh.is_boundary_vertex(v);
        }
        for (e, edge) in mesh.edges().iter().enumerate() {
            for j in 0..per_edge {
                let s = (j + 1) as f64 / degree as f64;
                nodes.push(mesh.edge_point(e, s));
                boundary_node[edge_base + e * per_edge + j] = !edge.is_interior();
            }
        }
        if degree == 3 {
            for t in 0..nt {
                nodes.push(mesh.centroid(t));
            }
        }

        let mut dofs = Vec::with_capacity(nt * nloc);
        for t in 0..nt {
            let tri = mesh.triangles()[t];
            dofs.extend_from_slice(&tri);
            let tedges = mesh.triangle_edges(t);
            for i in 0..3 {
                let e = tedges[i];
                let forward = mesh.edge(e).vertices[0] == tri[(i + 1) % 3];
                for j in 0..per_edge {
                    let jj = if forward { j } else { per_edge - 1 - j };
                    dofs.push(edge_base + e * per_edge + jj);
                }
            }
            if degree == 3 {
                dofs.push(interior_base + t);
            }
        }

        let mut free_index = vec![None; num_nodes];
        let mut free_nodes = Vec::new();
        for i in 0..num_nodes {
            if !(constrained && boundary_node[i]) {
                free_index[i] = Some(free_nodes.len());
                free_nodes.push(i);
            }
        }

        Ok(FunctionSpace {
            mesh,
            reference,
            local_dofs: nloc,
            dofs,
            nodes,
            boundary_node,
            free_index,
            free_nodes,
            constrained,
        })
    }

    pub fn mesh(&self) -> &Arc<Mesh> {
        &self.mesh
    }

    pub fn degree(&self) -> usize {
        self.reference.degree()
    }

    pub fn reference(&self) -> &ReferenceElement {
        &self.reference
    }

    pub fn is_constrained(&self) -> bool {
        self.constrained
    }

    /// Number of degrees of freedom (free nodes).
    pub fn dim(&self) -> usize {
        self.free_nodes.len()
    }

    pub fn num_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn local_dofs(&self) -> usize {
        self.local_dofs
    }

    /// Global node indices of triangle `t`, in reference node order.
    pub fn element_dofs(&self, t: usize) -> &[usize] {
        &self.dofs[t * self.local_dofs..(t + 1) * self.local_dofs]
    }

    pub fn node(&self, i: usize) -> Vec2 {
        self.nodes[i]
    }

    pub fn nodes(&self) -> &[Vec2] {
        &self.nodes
    }

    pub fn is_boundary_node(&self, i: usize) -> bool {
        self.boundary_node[i]
    }

    pub fn free_index(&self, i: usize) -> Option<usize> {
        self.free_index[i]
    }

    pub fn free_nodes(&self) -> &[usize] {
        &self.free_nodes
    }

    pub fn element_map(&self, t: usize) -> ElementMap {
        ElementMap::new(self.mesh.corners(t))
    }

    pub fn tabulate(&self, rule: TriangleRule) -> Tabulation {
        let basis = rule
            .points
            .iter()
            .map(|p| self.reference.tabulate(Vec2::new(p[1], p[2])))
            .collect();
        Tabulation { rule, basis }
    }

    /// Tabulation for a rule exact to `degree` (clamped to the supported range).
    pub fn tabulate_degree(&self, degree: usize) -> Tabulation {
        self.tabulate(triangle_rule(rule_degree(degree)).expect("degree clamped to range"))
    }

    /// Free-index block of triangle `t`; constrained nodes map to `usize::MAX`.
    pub fn free_block(&self, t: usize) -> Vec<usize> {
        self.element_dofs(t)
            .iter()
            .map(|&i| self.free_index[i].unwrap_or(usize::MAX))
            .collect()
    }

    /// Zero matrix over the free degrees of freedom with the coupling pattern
    /// of the space.
    pub fn sparsity(&self) -> CsrMatrix {
        let blocks: Vec<Vec<usize>> = (0..self.mesh.num_triangles())
            .map(|t| self.free_block(t))
            .collect();
        CsrMatrix::from_blocks(self.dim(), blocks.iter().map(|b| b.as_slice()))
    }

    /// Mass matrix over the free degrees of freedom.
    pub fn mass_matrix(&self) -> CsrMatrix {
        let mut m = self.sparsity();
        let tab = self.tabulate_degree(2 * self.degree());
        for t in 0..self.mesh.num_triangles() {
            let map = self.element_map(t);
            let block = self.free_block(t);
            for (q, w) in tab.rule.weights.iter().enumerate() {
                let phi = &tab.basis[q].values;
                let wq = w * map.det;
                for (a, &i) in block.iter().enumerate() {
                    if i == usize::MAX {
                        continue;
                    }
                    for (b, &j) in block.iter().enumerate() {
                        if j != usize::MAX {
                            m.add(i, j, wq * phi[a] * phi[b]);
                        }
                    }
                }
            }
        }
        m
    }

    /// L² projection onto the space: `(P f, V) = (f, V)` for every `V`.
    /// Boundary values of the result are zero in a constrained space.
    pub fn l2_project(self: &Arc<Self>, f: impl Fn(Vec2) -> f64) -> crate::Result<FEFunction> {
        self.l2_project_on_elements(|_, x| f(x))
    }

    /// [`FunctionSpace::l2_project`] of a function that may depend on the
    /// triangle containing `x` (e.g. a broken field).
    pub fn l2_project_on_elements(
        self: &Arc<Self>,
        f: impl Fn(usize, Vec2) -> f64,
    ) -> crate::Result<FEFunction> {
        let mut out = FEFunction::zero(self.clone());
        if self.dim() == 0 {
            return Ok(out);
        }
        let tab = self.tabulate_degree(2 * self.degree() + 4);
        let mut rhs = vec![0.0; self.dim()];
        for t in 0..self.mesh.num_triangles() {
            let map = self.element_map(t);
            let block = self.free_block(t);
            for (q, w) in tab.rule.weights.iter().enumerate() {
                let x = map.to_physical(tab.reference_point(q));
                let fw = f(t, x) * w * map.det;
                for (a, &i) in block.iter().enumerate() {
                    if i != usize::MAX {
                        rhs[i] += fw * tab.basis[q].values[a];
                    }
                }
            }
        }
        let sol = linear_solve(
            &SparseSystem {
                matrix: self.mass_matrix(),
                rhs,
            },
            1e-13,
        )?;
        out.set_coefficients(&sol.x);
        Ok(out)
    }

    /// Nodal interpolant of `f`, boundary nodes included.
    pub fn interpolate(self: &Arc<Self>, f: impl Fn(Vec2) -> f64) -> FEFunction {
        let values = self.nodes.iter().map(|&x| f(x)).collect();
        FEFunction {
            space: self.clone(),
            values,
        }
    }
}

/// A discrete function: one value per Lagrange node of its space.
#[derive(Debug, Clone)]
pub struct FEFunction {
    space: Arc<FunctionSpace>,
    values: Vec<f64>,
}

impl FEFunction {
    pub fn zero(space: Arc<FunctionSpace>) -> Self {
        let n = space.num_nodes();
        FEFunction {
            space,
            values: vec![0.0; n],
        }
    }

    /// Function with the given degree-of-freedom values and zero boundary values.
    pub fn from_coefficients(space: Arc<FunctionSpace>, coefficients: &[f64]) -> Self {
        let mut u = FEFunction::zero(space);
        u.set_coefficients(coefficients);
        u
    }

    pub fn from_values(space: Arc<FunctionSpace>, values: Vec<f64>) -> Result<Self, SpaceError> {
        if values.len() != space.num_nodes() {
            return Err(SpaceError::Mismatch(format!(
                "{} values for {} nodes",
                values.len(),
                space.num_nodes()
            )));
        }
        Ok(FEFunction { space, values })
    }

    pub fn space(&self) -> &Arc<FunctionSpace> {
        &self.space
    }

    /// All nodal values.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    /// Degree-of-freedom values (free nodes only).
    pub fn coefficients(&self) -> Vec<f64> {
        self.space
            .free_nodes
            .iter()
            .map(|&i| self.values[i])
            .collect()
    }

    pub fn set_coefficients(&mut self, c: &[f64]) {
        assert_eq!(c.len(), self.space.dim(), "coefficient length mismatch");
        for (k, &i) in self.space.free_nodes.iter().enumerate() {
            self.values[i] = c[k];
        }
    }

    /// Set every boundary node to zero.
    pub fn clear_boundary(&mut self) {
        for i in 0..self.values.len() {
            if self.space.boundary_node[i] {
                self.values[i] = 0.0;
            }
        }
    }

    pub fn local_values(&self, t: usize) -> Vec<f64> {
        self.space
            .element_dofs(t)
            .iter()
            .map(|&i| self.values[i])
            .collect()
    }

    /// Value, gradient and Hessian at barycentric point `bary` of triangle `t`.
    pub fn eval(&self, t: usize, bary: [f64; 3]) -> PointValue {
        let basis = self.space.reference.tabulate(Vec2::new(bary[1], bary[2]));
        eval_local(&self.local_values(t), &basis, &self.space.element_map(t))
    }

    /// Nodal interpolation onto a space whose mesh was refined from this
    /// function's mesh in one step (uses the refinement ancestry).
    pub fn transfer(&self, target: &Arc<FunctionSpace>) -> Result<FEFunction, SpaceError> {
        let fine = target.mesh();
        let coarse = self.space.mesh();
        if fine.parents().iter().any(|&p| p >= coarse.num_triangles()) {
            return Err(SpaceError::Mismatch(
                "target mesh is not a refinement of this mesh".into(),
            ));
        }
        let mut values = vec![0.0; target.num_nodes()];
        let mut seen = vec![false; target.num_nodes()];
        for t in 0..fine.num_triangles() {
            let parent = fine.parents()[t];
            for &i in target.element_dofs(t) {
                if seen[i] {
                    continue;
                }
                seen[i] = true;
                values[i] = self
                    .eval(parent, coarse.barycentric(parent, target.node(i)))
                    .value;
            }
        }
        Ok(FEFunction {
            space: target.clone(),
            values,
        })
    }

    /// `((∫|u − U|^p)^{1/p}, (∫‖∇u − ∇U‖^p)^{1/p})` by quadrature of degree `2k + 4`.
    pub fn error_norms(&self, exact: impl Fn(Vec2) -> (f64, Vec2), p: f64) -> (f64, f64) {
        let space = &self.space;
        let tab = space.tabulate_degree(2 * space.degree() + 4);
        let (mut lp, mut w1p) = (0.0, 0.0);
        for t in 0..space.mesh.num_triangles() {
            let map = space.element_map(t);
            let local = self.local_values(t);
            for (q, w) in tab.rule.weights.iter().enumerate() {
                let x = map.to_physical(tab.reference_point(q));
                let uh = eval_local(&local, &tab.basis[q], &map);
                let (u, gu) = exact(x);
                let wq = w * map.det;
                lp += wq * (u - uh.value).abs().powf(p);
                w1p += wq * (gu - uh.gradient).norm().powf(p);
            }
        }
        (lp.powf(1.0 / p), w1p.powf(1.0 / p))
    }
}

/// Experimental orders of convergence `log(a_{i+1}/a_i) / log(h_{i+1}/h_i)`.
pub fn eoc(values: &[f64], meshsizes: &[f64]) -> Result<Vec<f64>, SpaceError> {
    if values.len() != meshsizes.len() || values.len() < 2 {
        return Err(SpaceError::EocDomain(format!(
            "need two or more paired values, got {} and {}",
            values.len(),
            meshsizes.len()
        )));
    }
    if values.iter().chain(meshsizes).any(|&v| !(v > 0.0)) {
        return Err(SpaceError::EocDomain(
            "values and meshsizes must be positive".into(),
        ));
    }
    Ok(values
        .windows(2)
        .zip(meshsizes.windows(2))
        .map(|(a, h)| (a[1] / a[0]).ln() / (h[1] / h[0]).ln())
        .collect())
}

/// Write all nodal values: a count line, then one value per line.
pub fn write_function<W: Write>(u: &FEFunction, mut out: W) -> std::io::Result<()> {
    writeln!(out, "{}", u.values.len())?;
    for v in &u.values {
        writeln!(out, "{v:.17e}")?;
    }
    Ok(())
}

pub fn read_function<R: BufRead>(
    space: Arc<FunctionSpace>,
    input: R,
) -> Result<FEFunction, SpaceError> {
    let mut tokens = Vec::new();
    for line in input.lines() {
        let line = line.map_err(|e| SpaceError::Parse(e.to_string()))?;
        tokens.extend(line.split_whitespace().map(str::to_owned));
    }
    let mut it = tokens.into_iter();
    let n: usize = it
        .next()
        .ok_or_else(|| SpaceError::Parse("empty input".into()))?
        .parse()
        .map_err(|_| SpaceError::Parse("bad count".into()))?;
    let values: Vec<f64> = it
        .map(|s| {
            s.parse()
                .map_err(|_| SpaceError::Parse(format!("bad value {s:?}")))
        })
        .collect::<Result<_, _>>()?;
    if values.len() != n {
        return Err(SpaceError::Parse(format!(
            "expected {n} values, got {}",
            values.len()
        )));
    }
    FEFunction::from_values(space, values)
}
