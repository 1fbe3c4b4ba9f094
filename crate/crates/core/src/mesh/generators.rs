use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{newest_opposite_longest, uniform_refine, BoundaryKind, Mesh};
use crate::Vec2;

/// Structured mesh of the unit disk: a central square of four triangles, a
/// ring of twelve triangles reaching the circle, then `levels` uniform
/// refinements with boundary vertices projected onto the circle.
pub fn build_disk_mesh(levels: usize) -> Mesh {
    let mut vertices = vec![Vec2::zeros()];
    for k in 0..4 {
        let a = 0.5 * PI * k as f64;
        vertices.push(0.5 * Vec2::new(a.cos(), a.sin()));
    }
    for j in 0..8 {
        let a = 0.25 * PI * j as f64;
        vertices.push(Vec2::new(a.cos(), a.sin()));
    }
    let corner = |k: usize| 1 + k % 4;
    let rim = |j: usize| 5 + j % 8;

    let mut triangles = Vec::with_capacity(16);
    for k in 0..4 {
        triangles.push([0, corner(k), corner(k + 1)]);
    }
    for k in 0..4 {
        let (c0, c1) = (corner(k), corner(k + 1));
        let (b0, b1, b2) = (rim(2 * k), rim(2 * k + 1), rim(2 * k + 2));
        triangles.push([c0, b0, b1]);
        triangles.push([c0, b1, c1]);
        triangles.push([c1, b1, b2]);
    }
    let triangles = triangles
        .into_iter()
        .map(|t| newest_opposite_longest(&vertices, t))
        .collect();

    let mut mesh = Mesh::new(vertices, triangles, BoundaryKind::UnitCircle)
        .expect("coarse disk mesh is valid");
    for _ in 0..levels {
        mesh = uniform_refine(&mesh);
    }
    mesh
}

/// Options for [`build_square_mesh`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SquareMeshOptions {
    /// Interior vertex perturbation radius as a fraction of the cell width,
    /// clamped to `[0, 0.2]`. Zero gives the structured criss-cross mesh.
    pub jitter: f64,
    pub seed: u64,
}

impl Default for SquareMeshOptions {
    fn default() -> Self {
        SquareMeshOptions {
            jitter: 0.1,
            seed: 0,
        }
    }
}

impl SquareMeshOptions {
    pub fn structured() -> Self {
        SquareMeshOptions {
            jitter: 0.0,
            seed: 0,
        }
    }
}

/// Criss-cross triangulation of `[-1, 1]²` on an `n × n` grid: every cell is
/// split into four triangles through its center, giving `4n²` triangles.
/// Interior vertices are perturbed by a seeded random offset.
pub fn build_square_mesh(n: usize, options: &SquareMeshOptions) -> Mesh {
    assert!(n >= 1, "square mesh needs at least one cell per side");
    let h = 2.0 / n as f64;
    let radius = options.jitter.clamp(0.0, 0.2) * h;
    let mut rng = ChaCha8Rng::seed_from_u64(options.seed);
    let mut offset = |interior: bool| -> Vec2 {
        if radius == 0.0 || !interior {
            return Vec2::zeros();
        }
        let r = radius * rng.gen::<f64>().sqrt();
        let a = 2.0 * PI * rng.gen::<f64>();
        Vec2::new(r * a.cos(), r * a.sin())
    };

    let grid = |i: usize, j: usize| i + j * (n + 1);
    let center = |i: usize, j: usize| (n + 1) * (n + 1) + i + j * n;
    let mut vertices = Vec::with_capacity((n + 1) * (n + 1) + n * n);
    for j in 0..=n {
        for i in 0..=n {
            let p = Vec2::new(-1.0 + h * i as f64, -1.0 + h * j as f64);
            let interior = i > 0 && i < n && j > 0 && j < n;
            vertices.push(p + offset(interior));
        }
    }
    for j in 0..n {
        for i in 0..n {
            let p = Vec2::new(-1.0 + h * (i as f64 + 0.5), -1.0 + h * (j as f64 + 0.5));
            vertices.push(p + offset(true));
        }
    }

    let mut triangles = Vec::with_capacity(4 * n * n);
    for j in 0..n {
        for i in 0..n {
            let c = center(i, j);
            let (p00, p10, p11, p01) = (
                grid(i, j),
                grid(i + 1, j),
                grid(i + 1, j + 1),
                grid(i, j + 1),
            );
            triangles.push([c, p00, p10]);
            triangles.push([c, p10, p11]);
            triangles.push([c, p11, p01]);
            triangles.push([c, p01, p00]);
        }
    }
    Mesh::new(vertices, triangles, BoundaryKind::Polygon).expect("square mesh is valid")
}
