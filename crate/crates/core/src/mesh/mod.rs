//! Conforming triangulations of polygonal domains.
//!
//! Triangles are stored counter-clockwise with their *newest vertex* in local
//! position 0, so the refinement edge of triangle `t` is always the edge
//! `(triangles[t][1], triangles[t][2])`. Local edge `i` is the edge opposite
//! local vertex `i`.

mod generators;
mod io;
mod refine;

use std::collections::HashMap;

use crate::Vec2;

pub use generators::{build_disk_mesh, build_square_mesh, SquareMeshOptions};
pub use io::{read_mesh, write_mesh};
pub use refine::{bisect, uniform_refine};

/// Coordinate tolerance for geometric predicates.
pub const GEOMETRY_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum MeshError {
    #[error("triangle {0} references vertex {1}, but the mesh has {2} vertices")]
    VertexOutOfRange(usize, usize, usize),
    #[error("triangle {0} has non-positive signed area {1:e}")]
    NonPositiveArea(usize, f64),
    #[error("edge ({0}, {1}) is shared by more than two triangles")]
    NonManifoldEdge(usize, usize),
    #[error("edge ({0}, {1}) is traversed in the same direction by two triangles")]
    InconsistentOrientation(usize, usize),
    #[error("vertex {0} hangs on edge ({1}, {2})")]
    HangingNode(usize, usize, usize),
    #[error("triangle index {0} out of range")]
    TriangleOutOfRange(usize),
    #[error("malformed mesh file: {0}")]
    Parse(String),
}

/// How boundary vertices created by refinement are placed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum BoundaryKind {
    /// New boundary vertices stay at edge midpoints.
    #[default]
    Polygon,
    /// New boundary vertices are projected radially onto the unit circle.
    UnitCircle,
}

impl BoundaryKind {
    fn place(self, p: Vec2) -> Vec2 {
        match self {
            BoundaryKind::Polygon => p,
            BoundaryKind::UnitCircle => p / p.norm(),
        }
    }
}

/// An edge of the triangulation. `left` is the first incident triangle,
/// `right` the second one (absent on the boundary).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Edge {
    /// Endpoints, sorted ascending.
    pub vertices: [usize; 2],
    pub left: usize,
    pub right: Option<usize>,
}

impl Edge {
    pub fn is_interior(&self) -> bool {
        self.right.is_some()
    }
}

/// Normals, length and midpoint of an edge. `normal_left` points out of the
/// left triangle; `normal_right = -normal_left`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EdgeGeometry {
    pub normal_left: Vec2,
    pub normal_right: Vec2,
    pub length: f64,
    pub midpoint: Vec2,
}

#[derive(Debug, Clone)]
pub struct Mesh {
    vertices: Vec<Vec2>,
    triangles: Vec<[usize; 3]>,
    generation: Vec<u32>,
    parents: Vec<usize>,
    boundary_kind: BoundaryKind,
    edges: Vec<Edge>,
    triangle_edges: Vec<[usize; 3]>,
    interior_edges: Vec<usize>,
    boundary_edges: Vec<usize>,
    boundary_vertex: Vec<bool>,
}

impl Mesh {
    /// Build a mesh from raw parts. Triangles must be counter-clockwise with
    /// their newest vertex first.
    pub fn new(
        vertices: Vec<Vec2>,
        triangles: Vec<[usize; 3]>,
        boundary_kind: BoundaryKind,
    ) -> Result<Self, MeshError> {
        let n = triangles.len();
        Self::with_history(
            vertices,
            triangles,
            vec![0; n],
            (0..n).collect(),
            boundary_kind,
        )
    }

    pub(crate) fn with_history(
        vertices: Vec<Vec2>,
        triangles: Vec<[usize; 3]>,
        generation: Vec<u32>,
        parents: Vec<usize>,
        boundary_kind: BoundaryKind,
    ) -> Result<Self, MeshError> {
        let nv = vertices.len();
        for (t, tri) in triangles.iter().enumerate() {
            if let Some(&v) = tri.iter().find(|&&v| v >= nv) {
                return Err(MeshError::VertexOutOfRange(t, v, nv));
            }
            let a = signed_area(vertices[tri[0]], vertices[tri[1]], vertices[tri[2]]);
            if !(a > 0.0) {
                return Err(MeshError::NonPositiveArea(t, a));
            }
        }

        let mut edges: Vec<Edge> = Vec::with_capacity(triangles.len() * 3 / 2 + nv);
        let mut triangle_edges = vec![[0usize; 3]; triangles.len()];
        // value: (edge index, directed start vertex as seen by `left`)
        let mut lookup: HashMap<(usize, usize), (usize, usize)> =
            HashMap::with_capacity(triangles.len() * 2);
        for (t, tri) in triangles.iter().enumerate() {
            for i in 0..3 {
                let a = tri[(i + 1) % 3];
                let b = tri[(i + 2) % 3];
                let key = (a.min(b), a.max(b));
                match lookup.get(&key) {
                    None => {
                        lookup.insert(key, (edges.len(), a));
                        triangle_edges[t][i] = edges.len();
                        edges.push(Edge {
                            vertices: [key.0, key.1],
                            left: t,
                            right: None,
                        });
                    }
                    Some(&(e, start)) => {
                        if edges[e].right.is_some() {
                            return Err(MeshError::NonManifoldEdge(key.0, key.1));
                        }
                        if start == a {
                            return Err(MeshError::InconsistentOrientation(key.0, key.1));
                        }
                        edges[e].right = Some(t);
                        triangle_edges[t][i] = e;
                    }
                }
            }
        }

        let mut interior_edges = Vec::new();
        let mut boundary_edges = Vec::new();
        let mut boundary_vertex = vec![false; nv];
        for (e, edge) in edges.iter().enumerate() {
            if edge.is_interior() {
                interior_edges.push(e);
            } else {
                boundary_edges.push(e);
                boundary_vertex[edge.vertices[0]] = true;
                boundary_vertex[edge.vertices[1]] = true;
            }
        }

        Ok(Mesh {
            vertices,
            triangles,
            generation,
            parents,
            boundary_kind,
            edges,
            triangle_edges,
            interior_edges,
            boundary_edges,
            boundary_vertex,
        })
    }

    pub fn vertices(&self) -> &[Vec2] {
        &self.vertices
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    pub fn num_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn num_triangles(&self) -> usize {
        self.triangles.len()
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn edge(&self, e: usize) -> &Edge {
        &self.edges[e]
    }

    /// Edge indices of triangle `t`; local edge `i` is opposite local vertex `i`.
    pub fn triangle_edges(&self, t: usize) -> [usize; 3] {
        self.triangle_edges[t]
    }

    pub fn interior_edges(&self) -> &[usize] {
        &self.interior_edges
    }

    pub fn boundary_edges(&self) -> &[usize] {
        &self.boundary_edges
    }

    pub fn is_boundary_vertex(&self, v: usize) -> bool {
        self.boundary_vertex[v]
    }

    /// Refinement level of each triangle.
    pub fn generation(&self) -> &[u32] {
        &self.generation
    }

    /// Index, in the mesh this one was refined from, of the triangle that
    /// contains each triangle. The identity for freshly generated meshes.
    pub fn parents(&self) -> &[usize] {
        &self.parents
    }

    pub fn boundary_kind(&self) -> BoundaryKind {
        self.boundary_kind
    }

    /// Global index of the newest vertex of triangle `t`.
    pub fn newest_vertex(&self, t: usize) -> usize {
        self.triangles[t][0]
    }

    pub fn corners(&self, t: usize) -> [Vec2; 3] {
        let [a, b, c] = self.triangles[t];
        [self.vertices[a], self.vertices[b], self.vertices[c]]
    }

    pub fn area(&self, t: usize) -> f64 {
        let [a, b, c] = self.corners(t);
        signed_area(a, b, c)
    }

    pub fn total_area(&self) -> f64 {
        (0..self.num_triangles()).map(|t| self.area(t)).sum()
    }

    /// Diameter (longest edge) of triangle `t`.
    pub fn diameter(&self, t: usize) -> f64 {
        let [a, b, c] = self.corners(t);
        (b - a).norm().max((c - b).norm()).max((a - c).norm())
    }

    /// Inradius of triangle `t`: area over semi-perimeter.
    pub fn inradius(&self, t: usize) -> f64 {
        let [a, b, c] = self.corners(t);
        let perimeter = (b - a).norm() + (c - b).norm() + (a - c).norm();
        2.0 * signed_area(a, b, c) / perimeter
    }

    /// Largest element diameter.
    pub fn meshsize(&self) -> f64 {
        (0..self.num_triangles())
            .map(|t| self.diameter(t))
            .fold(0.0, f64::max)
    }

    pub fn centroid(&self, t: usize) -> Vec2 {
        let [a, b, c] = self.corners(t);
        (a + b + c) / 3.0
    }

    pub fn edge_geometry(&self, e: usize) -> EdgeGeometry {
        let edge = &self.edges[e];
        let a = self.vertices[edge.vertices[0]];
        let b = self.vertices[edge.vertices[1]];
        let d = b - a;
        let length = d.norm();
        let mut n = Vec2::new(d.y, -d.x) / length;
        let opposite = self.opposite_vertex(edge.left, e);
        if n.dot(&(self.vertices[opposite] - a)) > 0.0 {
            n = -n;
        }
        EdgeGeometry {
            normal_left: n,
            normal_right: -n,
            length,
            midpoint: 0.5 * (a + b),
        }
    }

    /// Point on edge `e` at parameter `s ∈ [0, 1]` from `vertices[0]` to `vertices[1]`.
    pub fn edge_point(&self, e: usize, s: f64) -> Vec2 {
        let [a, b] = self.edges[e].vertices;
        self.vertices[a] * (1.0 - s) + self.vertices[b] * s
    }

    fn opposite_vertex(&self, t: usize, e: usize) -> usize {
        let local = self.triangle_edges[t]
            .iter()
            .position(|&x| x == e)
            .expect("edge not incident to triangle");
        self.triangles[t][local]
    }

    /// Barycentric coordinates of `x` with respect to triangle `t`.
    pub fn barycentric(&self, t: usize, x: Vec2) -> [f64; 3] {
        let [a, b, c] = self.corners(t);
        let area = signed_area(a, b, c);
        let l1 = signed_area(a, x, c) / area;
        let l2 = signed_area(a, b, x) / area;
        [1.0 - l1 - l2, l1, l2]
    }

    /// `V − E + T`; equals 1 for a mesh of a simply connected domain.
    pub fn euler_characteristic(&self) -> i64 {
        self.num_vertices() as i64 - self.num_edges() as i64 + self.num_triangles() as i64
    }

    /// Detect hanging nodes: a vertex lying strictly inside a one-sided edge.
    /// Orientation and edge multiplicity are already enforced by construction.
    pub fn check_conformity(&self) -> Result<(), MeshError> {
        let mut candidates: Vec<usize> = self
            .boundary_edges
            .iter()
            .flat_map(|&e| self.edges[e].vertices)
            .collect();
        candidates.sort_unstable();
        candidates.dedup();
        for &e in &self.boundary_edges {
            let [a, b] = self.edges[e].vertices;
            let (pa, pb) = (self.vertices[a], self.vertices[b]);
            let d = pb - pa;
            let len2 = d.norm_squared();
            for &v in &candidates {
                if v == a || v == b {
                    continue;
                }
                let q = self.vertices[v] - pa;
                let s = q.dot(&d) / len2;
                if s <= GEOMETRY_TOL || s >= 1.0 - GEOMETRY_TOL {
                    continue;
                }
                let dist = (q - d * s).norm();
                if dist <= GEOMETRY_TOL * (1.0 + len2.sqrt()) {
                    return Err(MeshError::HangingNode(v, a, b));
                }
            }
        }
        Ok(())
    }

    pub(crate) fn place_boundary_vertex(&self, p: Vec2) -> Vec2 {
        self.boundary_kind.place(p)
    }
}

/// `inf_K ρ_K / h_K` with `ρ_K` the inradius and `h_K` the diameter.
pub fn shape_regularity(mesh: &Mesh) -> f64 {
    (0..mesh.num_triangles())
        .map(|t| mesh.inradius(t) / mesh.diameter(t))
        .fold(f64::INFINITY, f64::min)
}

/// Twice-halved cross product: signed area of `(a, b, c)`.
pub fn signed_area(a: Vec2, b: Vec2, c: Vec2) -> f64 {
    0.5 * ((b.x - a.x) * (c.y - a.y) - (b.y - a.y) * (c.x - a.x))
}

/// Rotate a counter-clockwise triple so that the vertex opposite the longest
/// edge comes first.
pub(crate) fn newest_opposite_longest(vertices: &[Vec2], tri: [usize; 3]) -> [usize; 3] {
    let len = |i: usize| (vertices[tri[(i + 1) % 3]] - vertices[tri[(i + 2) % 3]]).norm();
    let mut best = 0;
    for i in 1..3 {
        if len(i) > len(best) * (1.0 + 1e-12) {
            best = i;
        }
    }
    [tri[best], tri[(best + 1) % 3], tri[(best + 2) % 3]]
}

#[cfg(test)]
mod tests {
    use super::*;

    fn single(a: Vec2, b: Vec2, c: Vec2) -> Mesh {
        Mesh::new(vec![a, b, c], vec![[0, 1, 2]], BoundaryKind::Polygon).unwrap()
    }

    #[test]
    fn equilateral_shape_regularity() {
        let m = single(
            Vec2::new(0.0, 0.0),
            Vec2::new(1.0, 0.0),
            Vec2::new(0.5, 3f64.sqrt() / 2.0),
        );
        let expected = 1.0 / (2.0 * 3f64.sqrt());
        assert!((shape_regularity(&m) - expected).abs() < 1e-15);
        assert!((shape_regularity(&m) - 0.28868).abs() < 1e-5);
    }

    #[test]
    fn right_isosceles_shape_regularity() {
        let m = single(
            Vec2::new(0.0, 0.0),
            Vec2::new(1.0, 0.0),
            Vec2::new(0.0, 1.0),
        );
        let expected = ((2.0 - 2f64.sqrt()) / 2.0) / 2f64.sqrt();
        assert!((shape_regularity(&m) - expected).abs() < 1e-15);
        assert!((shape_regularity(&m) - 0.20711).abs() < 1e-5);
    }

    #[test]
    fn flat_triangle_ratio_vanishes() {
        let mut last = f64::INFINITY;
        for k in 1..8 {
            let eps = 10f64.powi(-k);
            let m = single(
                Vec2::new(0.0, 0.0),
                Vec2::new(1.0, 0.0),
                Vec2::new(0.5, eps),
            );
            let r = shape_regularity(&m);
            assert!(r < last);
            last = r;
        }
        assert!(last < 1e-6);
    }

    #[test]
    fn rejects_clockwise_and_non_manifold() {
        let v = vec![
            Vec2::new(0.0, 0.0),
            Vec2::new(1.0, 0.0),
            Vec2::new(0.0, 1.0),
            Vec2::new(1.0, 1.0),
        ];
        assert!(matches!(
            Mesh::new(v.clone(), vec![[0, 2, 1]], BoundaryKind::Polygon),
            Err(MeshError::NonPositiveArea(0, _))
        ));
        assert!(matches!(
            Mesh::new(v.clone(), vec![[0, 1, 2], [0, 1, 3]], BoundaryKind::Polygon),
            Err(MeshError::InconsistentOrientation(0, 1))
        ));
        assert!(matches!(
            Mesh::new(v, vec![[0, 1, 7]], BoundaryKind::Polygon),
            Err(MeshError::VertexOutOfRange(0, 7, 4))
        ));
    }

    #[test]
    fn detects_hanging_node() {
        // big triangle next to two small ones splitting the shared edge
        let v = vec![
            Vec2::new(0.0, 0.0),
            Vec2::new(1.0, 0.0),
            Vec2::new(0.0, 1.0),
            Vec2::new(1.0, 1.0),
            Vec2::new(0.5, 0.5),
        ];
        let m = Mesh::new(
            v,
            vec![[0, 1, 2], [1, 3, 4], [4, 3, 2]],
            BoundaryKind::Polygon,
        )
        .unwrap();
        assert_eq!(m.check_conformity(), Err(MeshError::HangingNode(4, 1, 2)));
    }

    #[test]
    fn normals_point_outward() {
        let m = build_square_mesh(3, &SquareMeshOptions::default());
        for &e in m.interior_edges() {
            let g = m.edge_geometry(e);
            let edge = m.edge(e);
            let to_left = m.centroid(edge.left) - g.midpoint;
            let to_right = m.centroid(edge.right.unwrap()) - g.midpoint;
            assert!(g.normal_left.dot(&to_left) < 0.0);
            assert!(g.normal_right.dot(&to_right) < 0.0);
            assert_eq!(g.normal_left, -g.normal_right);
            assert!((g.normal_left.norm() - 1.0).abs() < 1e-15);
        }
    }
}
