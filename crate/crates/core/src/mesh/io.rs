//! Plain-text mesh format:
//!
//! ```text
//! nv nt nb
//! x y                 (nv lines)
//! v0 v1 v2 newest     (nt lines)
//! a b                 (nb boundary edges)
//! ```
//!
//! The `newest` column repeats `v0`; it is kept so the file is readable by
//! tools that do not know the newest-vertex-first convention.

use std::io::{BufRead, Write};

use super::{BoundaryKind, Mesh, MeshError};
use crate::Vec2;

pub fn write_mesh<W: Write>(mesh: &Mesh, mut out: W) -> std::io::Result<()> {
    writeln!(
        out,
        "{} {} {}",
        mesh.num_vertices(),
        mesh.num_triangles(),
        mesh.boundary_edges().len()
    )?;
    for v in mesh.vertices() {
        writeln!(out, "{:.17e} {:.17e}", v.x, v.y)?;
    }
    for t in mesh.triangles() {
        writeln!(out, "{} {} {} {}", t[0], t[1], t[2], t[0])?;
    }
    for &e in mesh.boundary_edges() {
        let [a, b] = mesh.edge(e).vertices;
        writeln!(out, "{a} {b}")?;
    }
    Ok(())
}

pub fn read_mesh<R: BufRead>(input: R, boundary_kind: BoundaryKind) -> Result<Mesh, MeshError> {
    let mut tokens = Vec::new();
    for line in input.lines() {
        let line = line.map_err(|e| MeshError::Parse(e.to_string()))?;
        tokens.extend(line.split_whitespace().map(str::to_owned));
    }
    let mut it = tokens.into_iter();
    let mut next = |what: &str| -> Result<String, MeshError> {
        it.next()
            .ok_or_else(|| MeshError::Parse(format!("unexpected end of input reading {what}")))
    };
    fn int(s: String) -> Result<usize, MeshError> {
        s.parse()
            .map_err(|_| MeshError::Parse(format!("expected integer, got {s:?}")))
    }
    fn float(s: String) -> Result<f64, MeshError> {
        s.parse()
            .map_err(|_| MeshError::Parse(format!("expected number, got {s:?}")))
    }

    let nv = int(next("header")?)?;
    let nt = int(next("header")?)?;
    let nb = int(next("header")?)?;
    let mut vertices = Vec::with_capacity(nv);
    for _ in 0..nv {
        let x = float(next("vertex")?)?;
        let y = float(next("vertex")?)?;
        vertices.push(Vec2::new(x, y));
    }
    let mut triangles = Vec::with_capacity(nt);
    for t in 0..nt {
        let tri = [
            int(next("triangle")?)?,
            int(next("triangle")?)?,
            int(next("triangle")?)?,
        ];
        let newest = int(next("triangle")?)?;
        let k = tri.iter().position(|&v| v == newest).ok_or_else(|| {
            MeshError::Parse(format!("triangle {t}: newest vertex {newest} not a corner"))
        })?;
        triangles.push([tri[k], tri[(k + 1) % 3], tri[(k + 2) % 3]]);
    }
    for _ in 0..nb {
        int(next("boundary edge")?)?;
        int(next("boundary edge")?)?;
    }
    let mesh = Mesh::new(vertices, triangles, boundary_kind)?;
    if mesh.boundary_edges().len() != nb {
        return Err(MeshError::Parse(format!(
            "header declares {nb} boundary edges, mesh has {}",
            mesh.boundary_edges().len()
        )));
    }
    Ok(mesh)
}
