use std::collections::{HashMap, VecDeque};

use super::{newest_opposite_longest, Mesh, MeshError};
use crate::Vec2;

/// Red refinement: every triangle is split into four similar children through
/// its edge midpoints. New boundary vertices are placed according to the
/// mesh's [`BoundaryKind`](super::BoundaryKind).
pub fn uniform_refine(mesh: &Mesh) -> Mesh {
    let nv = mesh.num_vertices();
    let mut vertices = mesh.vertices().to_vec();
    vertices.reserve(mesh.num_edges());
    for edge in mesh.edges() {
        let [a, b] = edge.vertices;
        let m = 0.5 * (vertices[a] + vertices[b]);
        vertices.push(if edge.is_interior() {
            m
        } else {
            mesh.place_boundary_vertex(m)
        });
    }

    let nt = mesh.num_triangles();
    let mut triangles = Vec::with_capacity(4 * nt);
    let mut generation = Vec::with_capacity(4 * nt);
    let mut parents = Vec::with_capacity(4 * nt);
    for (t, &[v0, v1, v2]) in mesh.triangles().iter().enumerate() {
        let [e0, e1, e2] = mesh.triangle_edges(t);
        let (m0, m1, m2) = (nv + e0, nv + e1, nv + e2);
        for child in [[v0, m2, m1], [v1, m0, m2], [v2, m1, m0], [m0, m1, m2]] {
            triangles.push(newest_opposite_longest(&vertices, child));
            generation.push(mesh.generation()[t] + 1);
            parents.push(t);
        }
    }
    Mesh::with_history(
        vertices,
        triangles,
        generation,
        parents,
        mesh.boundary_kind(),
    )
    .expect("red refinement preserves validity")
}

type EdgeKey = (usize, usize);

fn key(a: usize, b: usize) -> EdgeKey {
    (a.min(b), a.max(b))
}

/// Incident triangles of each live edge during bisection.
struct EdgeMap(HashMap<EdgeKey, [usize; 2]>);

impl EdgeMap {
    const NONE: usize = usize::MAX;

    fn add(&mut self, k: EdgeKey, t: usize) {
        let slot = self.0.entry(k).or_insert([Self::NONE; 2]);
        if slot[0] == Self::NONE {
            slot[0] = t;
        } else {
            slot[1] = t;
        }
    }

    fn remove(&mut self, k: EdgeKey, t: usize) {
        if let Some(slot) = self.0.get_mut(&k) {
            if slot[0] == t {
                slot[0] = slot[1];
                slot[1] = Self::NONE;
            } else if slot[1] == t {
                slot[1] = Self::NONE;
            }
            if slot[0] == Self::NONE {
                self.0.remove(&k);
            }
        }
    }

    fn other(&self, k: EdgeKey, t: usize) -> Option<usize> {
        let slot = self.0.get(&k)?;
        let o = if slot[0] == t { slot[1] } else { slot[0] };
        (o != Self::NONE).then_some(o)
    }
}

/// Newest-vertex bisection of the `marked` triangles, followed by the
/// closure that removes every hanging node.
///
/// A bisected triangle `[v0, v1, v2]` (newest vertex `v0`) is replaced by
/// `[m, v0, v1]` and `[m, v2, v0]`, where `m` is the midpoint of the
/// refinement edge `(v1, v2)` and becomes the newest vertex of both children.
pub fn bisect(mesh: &Mesh, marked: &[usize]) -> Result<Mesh, MeshError> {
    let nt0 = mesh.num_triangles();
    if let Some(&t) = marked.iter().find(|&&t| t >= nt0) {
        return Err(MeshError::TriangleOutOfRange(t));
    }

    let mut vertices: Vec<Vec2> = mesh.vertices().to_vec();
    let mut triangles: Vec<[usize; 3]> = mesh.triangles().to_vec();
    let mut generation: Vec<u32> = mesh.generation().to_vec();
    let mut origin: Vec<usize> = (0..nt0).collect();
    let mut alive = vec![true; nt0];
    let mut is_marked = vec![false; nt0];

    let mut edges = EdgeMap(HashMap::with_capacity(3 * nt0));
    for (t, tri) in triangles.iter().enumerate() {
        for i in 0..3 {
            edges.add(key(tri[(i + 1) % 3], tri[(i + 2) % 3]), t);
        }
    }
    let mut midpoints: HashMap<EdgeKey, usize> = HashMap::new();

    let mut queue: VecDeque<usize> = VecDeque::new();
    let mut sorted: Vec<usize> = marked.to_vec();
    sorted.sort_unstable();
    sorted.dedup();
    for t in sorted {
        is_marked[t] = true;
        queue.push_back(t);
    }

    while let Some(t) = queue.pop_front() {
        if !alive[t] {
            continue;
        }
        let [v0, v1, v2] = triangles[t];
        let hanging = [key(v1, v2), key(v2, v0), key(v0, v1)]
            .iter()
            .any(|k| midpoints.contains_key(k));
        if !(is_marked[t] || hanging) {
            continue;
        }

        let base = key(v1, v2);
        let m = match midpoints.get(&base) {
            Some(&m) => m,
            None => {
                let p = 0.5 * (vertices[v1] + vertices[v2]);
                let neighbor = edges.other(base, t);
                vertices.push(match neighbor {
                    Some(_) => p,
                    None => mesh.place_boundary_vertex(p),
                });
                let m = vertices.len() - 1;
                midpoints.insert(base, m);
                if let Some(n) = neighbor {
                    queue.push_back(n);
                }
                m
            }
        };

        alive[t] = false;
        for k in [base, key(v2, v0), key(v0, v1)] {
            edges.remove(k, t);
        }
        for child in [[m, v0, v1], [m, v2, v0]] {
            let c = triangles.len();
            triangles.push(child);
            generation.push(generation[t] + 1);
            origin.push(origin[t]);
            alive.push(true);
            is_marked.push(false);
            for i in 0..3 {
                edges.add(key(child[(i + 1) % 3], child[(i + 2) % 3]), c);
            }
            queue.push_back(c);
        }
    }

    let keep: Vec<usize> = (0..triangles.len()).filter(|&t| alive[t]).collect();
    Mesh::with_history(
        vertices,
        keep.iter().map(|&t| triangles[t]).collect(),
        keep.iter().map(|&t| generation[t]).collect(),
        keep.iter().map(|&t| origin[t]).collect(),
        mesh.boundary_kind(),
    )
}
