use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::fespace::FunctionSpace;
use crate::lagrangian::{
    Constant, DiskSolution, DiskSource, FnField, PLaplacian, Polynomial, ScalarField,
};
use crate::mesh::{build_disk_mesh, build_square_mesh, SquareMeshOptions};
use crate::solver::{assemble_residual, newton_solve, NewtonConfig};

fn laplace(f: f64) -> PLaplacian {
    PLaplacian::new(2.0, Arc::new(Constant(f))).unwrap()
}

fn random_point(rng: &mut ChaCha8Rng, r: f64) -> Vec2 {
    Vec2::new(rng.gen_range(-r..r), rng.gen_range(-r..r))
}

#[test]
fn characteristic_examples() {
    let x = Vec2::new(0.3, -0.7);
    assert_eq!(
        characteristic(&TranslationUSymmetry, x, 2.0, Vec2::new(5.0, 1.0)),
        1.0
    );
    let g = Vec2::new(1.5, -2.0);
    let q = characteristic(&RotationSymmetry, x, 0.0, g);
    assert!((q - (x.y * g.x - x.x * g.y)).abs() < 1e-15);
    let q = characteristic(
        &RotationSymmetry,
        Vec2::new(1.0, 0.0),
        0.0,
        Vec2::new(0.0, 1.0),
    );
    assert_eq!(q, -1.0);
}

#[test]
fn symmetry_jacobians_match_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let syms: [&dyn Symmetry; 2] = [&RotationSymmetry, &TranslationUSymmetry];
    for sym in syms {
        for _ in 0..20 {
            let x = random_point(&mut rng, 1.0);
            let h = 1e-6;
            let j = sym.xi_jacobian(x, 0.0);
            for c in 0..2 {
                let mut e = Vec2::zeros();
                e[c] = h;
                let col = (sym.xi(x + e, 0.0) - sym.xi(x - e, 0.0)) / (2.0 * h);
                assert!((col - j.column(c)).norm() <= 1e-6 * (1.0 + j.norm()));
            }
        }
    }
}

#[test]
fn flux_examples() {
    let m = laplace(0.0);
    let c = flux_c(
        &m,
        &RotationSymmetry,
        Vec2::new(0.4, 0.1),
        3.0,
        Vec2::zeros(),
    )
    .unwrap();
    assert_eq!(c, Vec2::zeros());
    let c = flux_c(
        &m,
        &RotationSymmetry,
        Vec2::new(1.0, 0.0),
        0.0,
        Vec2::new(1.0, 0.0),
    )
    .unwrap();
    assert!((c - Vec2::new(0.0, 0.5)).norm() < 1e-15);

    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..50 {
        let x = random_point(&mut rng, 2.0);
        let (u, g) = (x.x * x.x, Vec2::new(2.0 * x.x, 0.0));
        let c = flux_c(&m, &RotationSymmetry, x, u, g).unwrap();
        let expected = Vec2::new(2.0 * x.x * x.x * x.y, 2.0 * x.x.powi(3));
        assert!((c - expected).norm() < 1e-13 * (1.0 + expected.norm()));
        assert!((c - flux_c_rotation_laplace(x, u, g, 0.0)).norm() < 1e-13 * (1.0 + c.norm()));
    }
}

#[test]
fn closed_form_rotation_flux() {
    let c = flux_c_rotation_laplace(Vec2::new(1.0, 0.0), 0.0, Vec2::new(1.0, 0.0), 0.0);
    assert_eq!(c, Vec2::new(0.0, 0.5));
    let x = Vec2::new(0.3, 0.8);
    let c = flux_c_rotation_laplace(x, 2.0, Vec2::zeros(), 0.5);
    assert_eq!(c, Vec2::new(x.y, -x.x));

    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..100 {
        let x = random_point(&mut rng, 1.0);
        let u = rng.gen_range(-2.0..2.0);
        let g = random_point(&mut rng, 3.0);
        let f = rng.gen_range(-5.0..5.0);
        let generic = flux_c(&laplace(f), &RotationSymmetry, x, u, g).unwrap();
        let closed = flux_c_rotation_laplace(x, u, g, f);
        assert!((generic - closed).norm() <= 1e-13, "{generic} vs {closed}");
    }
}

#[test]
fn identity_for_square_of_first_coordinate() {
    let u = Polynomial::new(vec![(2, 0, 1.0)]);
    let (div, q_el) =
        conservation_residual(&laplace(0.0), &RotationSymmetry, &u, Vec2::new(1.0, 1.0)).unwrap();
    assert!((div - 4.0).abs() < 1e-8, "{div}");
    assert!((q_el + 4.0).abs() < 1e-12, "{q_el}");
    assert!((div - IDENTITY_SIGN * q_el).abs() < 1e-8);

    let zero = Constant(0.0);
    let (div, q_el) =
        conservation_residual(&laplace(0.0), &RotationSymmetry, &zero, Vec2::new(0.2, 0.4))
            .unwrap();
    assert_eq!((div, q_el), (0.0, 0.0));
}

#[test]
fn benchmark_solution_conserves() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    for p in [2.0, 3.0, 4.0] {
        let m = PLaplacian::new(p, Arc::new(DiskSource { p })).unwrap();
        for _ in 0..20 {
            let r = rng.gen_range(0.1..0.9);
            let a = rng.gen_range(0.0..std::f64::consts::TAU);
            let x = Vec2::new(r * a.cos(), r * a.sin());
            let (div, q_el) =
                conservation_residual(&m, &RotationSymmetry, &DiskSolution, x).unwrap();
            assert!(div.abs() <= 1e-6, "p={p} x={x:?} div={div}");
            assert!(q_el.abs() <= 1e-9);
        }
    }
}

#[test]
fn identity_holds_for_random_polynomials() {
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    let radial = Arc::new(Polynomial::new(vec![(0, 0, 1.0), (2, 0, 0.5), (0, 2, 0.5)]));
    for p in [2.0, 3.0] {
        let rotation = PLaplacian::new(p, radial.clone()).unwrap();
        let translation = PLaplacian::new(p, Arc::new(Constant(0.0))).unwrap();
        let cases: [(&PLaplacian, &dyn Symmetry); 2] = [
            (&rotation, &RotationSymmetry),
            (&translation, &TranslationUSymmetry),
        ];
        for _ in 0..5 {
            let u = Polynomial::dense(3, || rng.gen_range(-1.0..1.0));
            for (m, sym) in cases {
                let x = random_point(&mut rng, 0.8);
                let (div, q_el) = conservation_residual(m, sym, &u, x).unwrap();
                let scale = div.abs().max(q_el.abs()).max(1e-3);
                assert!(
                    (div - IDENTITY_SIGN * q_el).abs() <= 1e-6 * scale,
                    "{} p={p}: {div} vs {q_el}",
                    sym.name()
                );
                let pv = PointValue {
                    value: u.value(x),
                    gradient: u.gradient(x),
                    hessian: u.hessian(x),
                };
                let analytic = flux_divergence(m, sym, x, &pv).unwrap();
                assert!((analytic - div).abs() <= 1e-6 * scale);
            }
        }
    }
}

#[test]
fn zero_state_has_zero_quantity() {
    let space = Arc::new(FunctionSpace::new(Arc::new(build_disk_mesh(2)), 2).unwrap());
    let u = FEFunction::zero(space);
    let syms: [&dyn Symmetry; 2] = [&RotationSymmetry, &TranslationUSymmetry];
    for sym in syms {
        let n = discrete_noether(&laplace(0.0), sym, &u, &NoetherOptions::default()).unwrap();
        assert_eq!(n, 0.0);
        let report = estimator(
            &laplace(0.0),
            sym,
            &u,
            &NoetherOptions::default(),
            Aggregation::Broken,
        )
        .unwrap();
        assert_eq!(report.e_total, 0.0);
        let w = weak_law_residual(
            u.space().mesh(),
            &vec![0; u.space().mesh().num_triangles()],
            &laplace(0.0),
            sym,
            &Broken(&u),
            &NoetherOptions::default(),
        )
        .unwrap();
        assert_eq!(w, 0.0);
    }
}

#[test]
fn translation_quantity_is_residual_against_projected_one() {
    let mut rng = ChaCha8Rng::seed_from_u64(29);
    let mesh = Arc::new(build_square_mesh(4, &SquareMeshOptions::default()));
    for k in 1..=3 {
        let space = Arc::new(FunctionSpace::new(mesh.clone(), k).unwrap());
        let mut u = FEFunction::zero(space.clone());
        let c: Vec<f64> = (0..space.dim()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        u.set_coefficients(&c);
        let model = laplace(1.5);
        let n = discrete_noether(
            &model,
            &TranslationUSymmetry,
            &u,
            &NoetherOptions::default(),
        )
        .unwrap();
        let one = space.l2_project(|_| 1.0).unwrap().coefficients();
        let r = assemble_residual(&model, &u).unwrap();
        let tested: f64 = r.iter().zip(&one).map(|(a, b)| a * b).sum();
        assert!(
            (n - tested).abs() <= 1e-12 * (1.0 + tested.abs()),
            "k={k}: {n} vs {tested}"
        );
    }
}

#[test]
fn rotation_quantity_vanishes_at_discrete_minimizer() {
    let space = Arc::new(FunctionSpace::new(Arc::new(build_disk_mesh(3)), 1).unwrap());
    let model = PLaplacian::new(3.0, Arc::new(DiskSource { p: 3.0 })).unwrap();
    let res = newton_solve(&model, &NewtonConfig::default(), FEFunction::zero(space)).unwrap();
    let n = discrete_noether(
        &model,
        &RotationSymmetry,
        &res.solution,
        &NoetherOptions::default(),
    )
    .unwrap();
    assert!(n.abs() <= 1e-8, "{n}");
}

#[test]
fn broken_rotation_law_matches_discrete_quantity() {
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    let mesh = Arc::new(build_disk_mesh(2));
    let space = Arc::new(FunctionSpace::new(mesh.clone(), 2).unwrap());
    let c: Vec<f64> = (0..space.dim()).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let u = FEFunction::from_coefficients(space, &c);
    let model = PLaplacian::new(3.0, Arc::new(DiskSource { p: 3.0 })).unwrap();
    let pieces: Vec<usize> = (0..mesh.num_triangles()).collect();
    for gradient in [GradientConvention::Explicit, GradientConvention::Total] {
        let opts = NoetherOptions {
            gradient,
            quadrature_degree: Some(12),
            ..Default::default()
        };
        let n = discrete_noether(&model, &RotationSymmetry, &u, &opts).unwrap();
        let w = weak_law_residual(
            &mesh,
            &pieces,
            &model,
            &RotationSymmetry,
            &Broken(&u),
            &opts,
        )
        .unwrap();
        assert!(
            (n - w).abs() <= 1e-10 * (1.0 + n.abs()),
            "{gradient:?}: {n} vs {w}"
        );
    }
}

#[test]
fn kink_interface_law() {
    let mesh = build_square_mesh(2, &SquareMeshOptions::structured());
    let pieces: Vec<usize> = (0..mesh.num_triangles())
        .map(|t| usize::from(mesh.centroid(t).x > 0.0))
        .collect();
    let field = |piece: usize, _: usize, x: Vec2| {
        let s = if piece == 0 { -1.0 } else { 1.0 };
        PointValue {
            value: s * x.x,
            gradient: Vec2::new(s, 0.0),
            hessian: Mat2::zeros(),
        }
    };
    let r = weak_law_residual(
        &mesh,
        &pieces,
        &laplace(0.0),
        &TranslationUSymmetry,
        &field,
        &NoetherOptions::default(),
    )
    .unwrap();
    assert!((r + 4.0).abs() <= 1e-10, "{r}");
}

#[test]
fn smooth_minimizer_satisfies_weak_law() {
    let mesh = build_disk_mesh(3);
    let model = PLaplacian::new(3.0, Arc::new(DiskSource { p: 3.0 })).unwrap();
    let r = weak_law_residual(
        &mesh,
        &vec![0; mesh.num_triangles()],
        &model,
        &RotationSymmetry,
        &Smooth(&DiskSolution),
        &NoetherOptions::default(),
    )
    .unwrap();
    assert!(r.abs() <= 1e-8, "{r}");
}

#[test]
fn element_divergence_matches_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(37);
    let mesh = Arc::new(build_square_mesh(3, &SquareMeshOptions::default()));
    let space = Arc::new(FunctionSpace::new(mesh.clone(), 1).unwrap());
    let c: Vec<f64> = (0..space.dim()).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let u = FEFunction::from_coefficients(space, &c);
    let model = PLaplacian::new(2.0, Arc::new(crate::lagrangian::GaussianSource)).unwrap();
    for t in 0..mesh.num_triangles() {
        let bary = [0.2, 0.5, 0.3];
        let pv = u.eval(t, bary);
        let x0: Vec2 = mesh.corners(t).iter().zip(bary).map(|(v, b)| v * b).sum();
        let (v0, g0) = (pv.value, pv.gradient);
        let linear = FnField::new(move |y: Vec2| v0 + g0.dot(&(y - x0)), move |_| g0);
        let fd = flux_divergence_fd(&model, &RotationSymmetry, &Linear(linear), x0, 1e-4).unwrap();
        let analytic = flux_divergence(&model, &RotationSymmetry, x0, &pv).unwrap();
        assert!(
            (fd - analytic).abs() <= 1e-6 * (1.0 + analytic.abs()),
            "{fd} vs {analytic}"
        );
    }
}

struct Linear<F: ScalarField>(F);

impl<F: ScalarField> ScalarField for Linear<F> {
    fn value(&self, x: Vec2) -> f64 {
        self.0.value(x)
    }
    fn gradient(&self, x: Vec2) -> Vec2 {
        self.0.gradient(x)
    }
}

impl<F: ScalarField> SmoothField for Linear<F> {
    fn hessian(&self, _: Vec2) -> Mat2 {
        Mat2::zeros()
    }
}

#[test]
fn literal_total_is_sum_of_indicators() {
    let mut rng = ChaCha8Rng::seed_from_u64(41);
    let space = Arc::new(FunctionSpace::new(Arc::new(build_disk_mesh(2)), 2).unwrap());
    let c: Vec<f64> = (0..space.dim()).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let u = FEFunction::from_coefficients(space, &c);
    let model = laplace(1.0);
    let r = estimator(
        &model,
        &RotationSymmetry,
        &u,
        &NoetherOptions::default(),
        Aggregation::Literal,
    )
    .unwrap();
    let sum: f64 = r.element_indicators.iter().chain(&r.edge_indicators).sum();
    assert!((r.e_total - sum).abs() <= 1e-12 * sum);
    assert_eq!(
        r.edge_indicators.len(),
        u.space().mesh().interior_edges().len()
    );

    let json: serde_json::Value = serde_json::from_str(&r.to_json()).unwrap();
    let keys: Vec<&str> = json
        .as_object()
        .unwrap()
        .keys()
        .map(|k| k.as_str())
        .collect();
    assert_eq!(keys.len(), 4);
    for k in ["N", "E", "elements", "edges"] {
        assert!(keys.contains(&k));
    }
}

#[test]
fn combined_indicators_split_edges() {
    let mesh = build_square_mesh(1, &SquareMeshOptions::structured());
    let elements = vec![0.0; mesh.num_triangles()];
    let edges = vec![1.0; mesh.interior_edges().len()];
    let combined = combine_indicators(&mesh, &elements, &edges, Aggregation::Literal);
    // Four triangles around the centre, each with two interior edges.
    assert_eq!(combined, vec![1.0; 4]);
}
