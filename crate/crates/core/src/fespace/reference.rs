use nalgebra::DMatrix;

use crate::{Mat2, Vec2};

/// Values, reference gradients and reference Hessians of all shape
/// functions at one point.
#[derive(Debug, Clone)]
pub struct BasisValues {
    pub values: Vec<f64>,
    pub gradients: Vec<Vec2>,
    pub hessians: Vec<Mat2>,
}

/// Lagrange P_k element on the reference triangle with vertices
/// `(0,0), (1,0), (0,1)`.
///
/// Node order: the three vertices, then `k − 1` nodes on each edge (edge `i`
/// runs from vertex `i+1` to vertex `i+2`), then the interior node for `k = 3`.
#[derive(Debug, Clone)]
pub struct ReferenceElement {
    degree: usize,
    nodes: Vec<Vec2>,
    exponents: Vec<(i32, i32)>,
    /// Column `i` holds the monomial coefficients of shape function `i`.
    coefficients: DMatrix<f64>,
}

impl ReferenceElement {
    pub fn new(degree: usize) -> Self {
        assert!(
            (1..=3).contains(&degree),
            "Lagrange degree must be 1, 2 or 3"
        );
        let corners = [
            Vec2::new(0.0, 0.0),
            Vec2::new(1.0, 0.0),
            Vec2::new(0.0, 1.0),
        ];
        let mut nodes = corners.to_vec();
        for i in 0..3 {
            let a = corners[(i + 1) % 3];
            let b = corners[(i + 2) % 3];
            for j in 1..degree {
                let s = j as f64 / degree as f64;
                nodes.push(a * (1.0 - s) + b * s);
            }
        }
        if degree == 3 {
            nodes.push(Vec2::new(1.0 / 3.0, 1.0 / 3.0));
        }

        let mut exponents = Vec::new();
        for total in 0..=degree as i32 {
            for b in 0..=total {
                exponents.push((total - b, b));
            }
        }
        let n = nodes.len();
        debug_assert_eq!(n, exponents.len());
        let vandermonde = DMatrix::from_fn(n, n, |i, j| {
            let (a, b) = exponents[j];
            nodes[i].x.powi(a) * nodes[i].y.powi(b)
        });
        let coefficients = vandermonde
            .try_inverse()
            .expect("Lagrange nodes are unisolvent");
        ReferenceElement {
            degree,
            nodes,
            exponents,
            coefficients,
        }
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn num_basis(&self) -> usize {
        self.nodes.len()
    }

    pub fn nodes(&self) -> &[Vec2] {
        &self.nodes
    }

    pub fn tabulate(&self, xi: Vec2) -> BasisValues {
        let m = self.exponents.len();
        let mut mono = vec![0.0; m];
        let mut dmono = vec![Vec2::zeros(); m];
        let mut hmono = vec![Mat2::zeros(); m];
        let pw = |t: f64, e: i32| if e < 0 { 0.0 } else { t.powi(e) };
        for (j, &(a, b)) in self.exponents.iter().enumerate() {
            let (af, bf) = (a as f64, b as f64);
            let (x, y) = (xi.x, xi.y);
            mono[j] = pw(x, a) * pw(y, b);
            dmono[j] = Vec2::new(af * pw(x, a - 1) * pw(y, b), bf * pw(x, a) * pw(y, b - 1));
            let hxy = af * bf * pw(x, a - 1) * pw(y, b - 1);
            hmono[j] = Mat2::new(
                af * (af - 1.0) * pw(x, a - 2) * pw(y, b),
                hxy,
                hxy,
                bf * (bf - 1.0) * pw(x, a) * pw(y, b - 2),
            );
        }
        let n = self.num_basis();
        let mut out = BasisValues {
            values: vec![0.0; n],
            gradients: vec![Vec2::zeros(); n],
            hessians: vec![Mat2::zeros(); n],
        };
        for i in 0..n {
            for j in 0..m {
                let c = self.coefficients[(j, i)];
                out.values[i] += c * mono[j];
                out.gradients[i] += dmono[j] * c;
                out.hessians[i] += hmono[j] * c;
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nodal_duality() {
        for k in 1..=3 {
            let r = ReferenceElement::new(k);
            assert_eq!(r.num_basis(), (k + 1) * (k + 2) / 2);
            for (j, &node) in r.nodes().iter().enumerate() {
                let b = r.tabulate(node);
                for (i, v) in b.values.iter().enumerate() {
                    let expected = if i == j { 1.0 } else { 0.0 };
                    assert!((v - expected).abs() < 1e-12, "k={k} i={i} j={j}: {v}");
                }
            }
        }
    }

    #[test]
    fn derivatives_sum_to_zero() {
        let xi = Vec2::new(0.21, 0.37);
        for k in 1..=3 {
            let b = ReferenceElement::new(k).tabulate(xi);
            let g: Vec2 = b.gradients.iter().sum();
            let h: Mat2 = b.hessians.iter().sum();
            assert!(g.norm() < 1e-12);
            assert!(h.norm() < 1e-11);
        }
    }
}
