//! Adaptive P1–P3 finite elements for first-order variational problems,
//! together with the machinery to build and monitor Noether-type
//! conservation laws of their discrete minimizers.
//!
//! The crate is organized bottom-up:
//!
//! - [`mesh`]: conforming triangulations, uniform and newest-vertex refinement
//! - [`quadrature`]: Gauss rules on the reference triangle and edge
//! - [`fespace`]: continuous Lagrange spaces, interpolation, projection, norms
//! - [`lagrangian`]: Lagrangians `L(x, u, ∇u)` and the p-Laplacian benchmarks
//! - [`solver`]: sparse assembly, conjugate gradients and damped Newton
//! - [`noether`]: symmetries, Noether fluxes, the discrete conserved quantity
//!   and the conservation-violation estimator
//! - [`adapt`]: the SOLVE → ESTIMATE → MARK → REFINE loop
//! - [`cli`]: experiment drivers and the property verification suite

pub mod adapt;
pub mod cli;
pub mod fespace;
pub mod lagrangian;
pub mod mesh;
pub mod noether;
pub mod quadrature;
pub mod solver;

use nalgebra::{Matrix2, Vector2};

/// A point or vector in the plane.
pub type Vec2 = Vector2<f64>;
/// A 2×2 matrix (Jacobians, Hessians).
pub type Mat2 = Matrix2<f64>;

/// Crate-wide error.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error(transparent)]
    Mesh(#[from] mesh::MeshError),
    #[error(transparent)]
    Quadrature(#[from] quadrature::QuadratureError),
    #[error(transparent)]
    Space(#[from] fespace::SpaceError),
    #[error(transparent)]
    Model(#[from] lagrangian::ModelError),
    #[error(transparent)]
    Solver(#[from] solver::SolverError),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
