//! Mass and stiffness assembly for quadratic triangular elements.
//!
//! Every product of shape functions (or of their gradients) is a polynomial
//! in the barycentric coordinates, integrated exactly with
//! ∫ λ1^a λ2^b λ3^c = 2·Area·a!b!c!/(a+b+c+2)!.

use nalgebra::DVector;
use nalgebra_sparse::{CooMatrix, CsrMatrix};

use crate::geometry::NodeSet;

/// Global finite-element matrices over a node set.
#[derive(Debug, Clone)]
pub struct FemMatrices {
    /// A_K: Gram matrix of the nodal basis.
    pub mass: CsrMatrix<f64>,
    /// B_K: Gram matrix of the basis gradients.
    pub stiffness: CsrMatrix<f64>,
    /// Diagonal of D_K: 1 on the first N (data) nodes.
    pub data_indicator: DVector<f64>,
}

/// Sparse polynomial in (λ1, λ2, λ3): list of (coefficient, exponents).
type Poly = Vec<(f64, [u32; 3])>;

fn factorial(n: u32) -> f64 {
    (1..=n).map(f64::from).product()
}

/// ∫ λ^e over a triangle, divided by twice its area.
fn monomial_integral(e: [u32; 3]) -> f64 {
    factorial(e[0]) * factorial(e[1]) * factorial(e[2]) / factorial(e[0] + e[1] + e[2] + 2)
}

fn integrate_product(p: &Poly, q: &Poly) -> f64 {
    let mut acc = 0.0;
    for (cp, ep) in p {
        for (cq, eq) in q {
            acc += cp * cq * monomial_integral([ep[0] + eq[0], ep[1] + eq[1], ep[2] + eq[2]]);
        }
    }
    acc
}

fn unit(m: usize) -> [u32; 3] {
    let mut e = [0; 3];
    e[m] = 1;
    e
}

fn shape_polys() -> [Poly; 6] {
    let vertex = |i: usize| -> Poly {
        let mut sq = [0; 3];
        sq[i] = 2;
        vec![(2.0, sq), (-1.0, unit(i))]
    };
    let mid = |j: usize, k: usize| -> Poly {
        let mut e = [0; 3];
        e[j] = 1;
        e[k] = 1;
        vec![(4.0, e)]
    };
    [vertex(0), vertex(1), vertex(2), mid(1, 2), mid(2, 0), mid(0, 1)]
}

fn derivative(p: &Poly, m: usize) -> Poly {
    p.iter()
        .filter(|(_, e)| e[m] > 0)
        .map(|(c, e)| {
            let mut d = *e;
            d[m] -= 1;
            (c * f64::from(e[m]), d)
        })
        .collect()
}

/// Reference tables, scaled by 1/(2·Area).
struct ReferenceIntegrals {
    mass: [[f64; 6]; 6],
    /// grad[i][j][m][n] = ∫ (∂φ_i/∂λ_m)(∂φ_j/∂λ_n) / (2·Area)
    grad: [[[[f64; 3]; 3]; 6]; 6],
}

fn reference_integrals() -> ReferenceIntegrals {
    let phi = shape_polys();
    let dphi: Vec<[Poly; 3]> = phi
        .iter()
        .map(|p| [derivative(p, 0), derivative(p, 1), derivative(p, 2)])
        .collect();
    let mut mass = [[0.0; 6]; 6];
    let mut grad = [[[[0.0; 3]; 3]; 6]; 6];
    for i in 0..6 {
        for j in 0..6 {
            mass[i][j] = integrate_product(&phi[i], &phi[j]);
            for m in 0..3 {
                for n in 0..3 {
                    grad[i][j][m][n] = integrate_product(&dphi[i][m], &dphi[j][n]);
                }
            }
        }
    }
    ReferenceIntegrals { mass, grad }
}

/// Local 6×6 mass and stiffness matrices for the triangle with vertices
/// `p` (counter-clockwise).
pub fn element_matrices(p: [crate::geometry::Point2; 3]) -> ([[f64; 6]; 6], [[f64; 6]; 6]) {
    element_matrices_with(&reference_integrals(), p)
}

fn element_matrices_with(
    refs: &ReferenceIntegrals,
    p: [crate::geometry::Point2; 3],
) -> ([[f64; 6]; 6], [[f64; 6]; 6]) {
    let twice_area = (p[1].x - p[0].x) * (p[2].y - p[0].y) - (p[1].y - p[0].y) * (p[2].x - p[0].x);
    // ∇λ_m = (y_{m+1} - y_{m+2}, x_{m+2} - x_{m+1}) / (2·Area)
    let mut g = [[0.0; 2]; 3];
    for m in 0..3 {
        let (a, b) = (p[(m + 1) % 3], p[(m + 2) % 3]);
        g[m] = [(a.y - b.y) / twice_area, (b.x - a.x) / twice_area];
    }
    let mut gram = [[0.0; 3]; 3];
    for m in 0..3 {
        for n in 0..3 {
            gram[m][n] = g[m][0] * g[n][0] + g[m][1] * g[n][1];
        }
    }
    let mut mass = [[0.0; 6]; 6];
    let mut stiff = [[0.0; 6]; 6];
    for i in 0..6 {
        for j in 0..6 {
            mass[i][j] = twice_area * refs.mass[i][j];
            let mut s = 0.0;
            for m in 0..3 {
                for n in 0..3 {
                    s += gram[m][n] * refs.grad[i][j][m][n];
                }
            }
            stiff[i][j] = twice_area * s;
        }
    }
    (mass, stiff)
}

/// Assembles A_K, B_K and D_K element by element.
pub fn assemble_matrices(nodes: &NodeSet) -> FemMatrices {
    let k = nodes.len();
    let refs = reference_integrals();
    let mut mass = CooMatrix::new(k, k);
    let mut stiff = CooMatrix::new(k, k);
    for local in nodes.triangle_nodes() {
        let p = [nodes.nodes()[local[0]], nodes.nodes()[local[1]], nodes.nodes()[local[2]]];
        let (me, se) = element_matrices_with(&refs, p);
        for i in 0..6 {
            for j in 0..6 {
                mass.push(local[i], local[j], me[i][j]);
                stiff.push(local[i], local[j], se[i][j]);
            }
        }
    }
    let mut data_indicator = DVector::zeros(k);
    data_indicator.rows_mut(0, nodes.data_node_count()).fill(1.0);
    FemMatrices {
        mass: CsrMatrix::from(&mass),
        stiffness: CsrMatrix::from(&stiff),
        data_indicator,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Point2;

    #[test]
    fn reference_mass_pattern() {
        // classical P2 mass matrix: Area/180 · [6, -1, 0, -4, 32, 16]
        let (m, _) = element_matrices([Point2::new(0.0, 0.0), Point2::new(1.0, 0.0), Point2::new(0.0, 1.0)]);
        let area = 0.5;
        let s = area / 180.0;
        for i in 0..3 {
            assert!((m[i][i] - 6.0 * s).abs() < 1e-15);
            assert!((m[i][i] - 1.0 / 60.0).abs() < 1e-15);
            for j in 0..3 {
                if i != j {
                    assert!((m[i][j] + s).abs() < 1e-15);
                }
            }
            assert!((m[i][3 + i] + 4.0 * s).abs() < 1e-15);
            assert!(m[i][3 + (i + 1) % 3].abs() < 1e-15);
        }
        for i in 3..6 {
            assert!((m[i][i] - 4.0 / 45.0).abs() < 1e-15);
            for j in 3..6 {
                if i != j {
                    assert!((m[i][j] - 16.0 * s).abs() < 1e-15);
                }
            }
        }
    }

    #[test]
    fn element_stiffness_annihilates_constants() {
        let (_, k) = element_matrices([Point2::new(0.3, -0.2), Point2::new(2.0, 0.4), Point2::new(0.7, 1.9)]);
        for row in &k {
            assert!(row.iter().sum::<f64>().abs() < 1e-13);
        }
        for i in 0..6 {
            for j in 0..6 {
                assert!((k[i][j] - k[j][i]).abs() < 1e-14);
            }
        }
    }

    /// Collapsed-square Gauss rule (4×4 points), exact for degree ≤ 6 on
    /// the reference triangle; returns (ξ, η, weight) with weights summing
    /// to 1/2.
    fn duffy_rule() -> Vec<(f64, f64, f64)> {
        let a = (3.0 / 7.0 - 2.0 / 7.0 * (6.0f64 / 5.0).sqrt()).sqrt();
        let b = (3.0 / 7.0 + 2.0 / 7.0 * (6.0f64 / 5.0).sqrt()).sqrt();
        let wa = (18.0 + 30.0f64.sqrt()) / 36.0;
        let wb = (18.0 - 30.0f64.sqrt()) / 36.0;
        let g = [(-b, wb), (-a, wa), (a, wa), (b, wb)];
        let mut out = Vec::new();
        for &(u, wu) in &g {
            for &(v, wv) in &g {
                let (u, v) = ((u + 1.0) / 2.0, (v + 1.0) / 2.0);
                out.push((u, v * (1.0 - u), wu * wv / 4.0 * (1.0 - u)));
            }
        }
        out
    }

    fn quadrature_oracle(p: [Point2; 3]) -> ([[f64; 6]; 6], [[f64; 6]; 6]) {
        let (j11, j12) = (p[1].x - p[0].x, p[2].x - p[0].x);
        let (j21, j22) = (p[1].y - p[0].y, p[2].y - p[0].y);
        let det = j11 * j22 - j12 * j21;
        let mut m = [[0.0; 6]; 6];
        let mut k = [[0.0; 6]; 6];
        for (xi, eta, w) in duffy_rule() {
            let s = crate::geometry::reference_shape([1.0 - xi - eta, xi, eta]);
            // physical gradient: J^{-T} ∇_(ξ,η)
            let grad: Vec<[f64; 2]> = s
                .gradients
                .iter()
                .map(|g| [(j22 * g[0] - j21 * g[1]) / det, (-j12 * g[0] + j11 * g[1]) / det])
                .collect();
            for i in 0..6 {
                for jj in 0..6 {
                    m[i][jj] += w * det.abs() * s.values[i] * s.values[jj];
                    k[i][jj] += w * det.abs() * (grad[i][0] * grad[jj][0] + grad[i][1] * grad[jj][1]);
                }
            }
        }
        (m, k)
    }

    #[test]
    fn element_matrices_match_quadrature_oracle() {
        let tris = [
            [Point2::new(0.0, 0.0), Point2::new(1.0, 0.0), Point2::new(0.0, 1.0)],
            [Point2::new(0.3, -0.2), Point2::new(2.0, 0.4), Point2::new(0.7, 1.9)],
            [Point2::new(-1.0, 0.0), Point2::new(1.0, 0.001), Point2::new(0.0, 0.05)],
        ];
        for p in tris {
            let (m, k) = element_matrices(p);
            let (mo, ko) = quadrature_oracle(p);
            for i in 0..6 {
                for j in 0..6 {
                    assert!((m[i][j] - mo[i][j]).abs() < 1e-12, "mass {i},{j}");
                    assert!((k[i][j] - ko[i][j]).abs() < 1e-12 * (1.0 + ko[i][j].abs()), "stiffness {i},{j}");
                }
            }
        }
    }

    #[test]
    fn midpoint_diagonal_is_eight_area_over_45() {
        let p = [Point2::new(0.3, -0.2), Point2::new(2.0, 0.4), Point2::new(0.7, 1.9)];
        let area = 0.5 * ((p[1].x - p[0].x) * (p[2].y - p[0].y) - (p[2].x - p[0].x) * (p[1].y - p[0].y));
        let (m, _) = element_matrices(p);
        for i in 0..3 {
            assert!((m[i][i] - area / 30.0).abs() < 1e-14);
            assert!((m[3 + i][3 + i] - 8.0 * area / 45.0).abs() < 1e-14);
        }
    }

    #[test]
    fn global_assembly_matches_oracle_on_eight_triangles() {
        let space = crate::testutil::grid_space(3);
        let nodes = space.nodes();
        assert_eq!(nodes.mesh().triangles().len(), 8);
        let k = nodes.len();
        let mut mo = nalgebra::DMatrix::<f64>::zeros(k, k);
        let mut ko = nalgebra::DMatrix::<f64>::zeros(k, k);
        for local in nodes.triangle_nodes() {
            let p = [nodes.nodes()[local[0]], nodes.nodes()[local[1]], nodes.nodes()[local[2]]];
            let (me, ke) = quadrature_oracle(p);
            for i in 0..6 {
                for j in 0..6 {
                    mo[(local[i], local[j])] += me[i][j];
                    ko[(local[i], local[j])] += ke[i][j];
                }
            }
        }
        let m = crate::fem::to_dense(&space.matrices().mass);
        let s = crate::fem::to_dense(&space.matrices().stiffness);
        assert!((&m - &mo).amax() < 1e-12);
        assert!((&s - &ko).amax() < 1e-12);
        let ones = nalgebra::DVector::from_element(k, 1.0);
        assert!((ones.dot(&(&m * &ones)) - 1.0).abs() < 1e-10);
        assert!((&s * &ones).norm() <= 1e-10 * s.norm().max(1.0));
        assert!((&m - m.transpose()).amax() < 1e-15);
        let data: f64 = space.matrices().data_indicator.sum();
        assert_eq!(data as usize, nodes.data_node_count());
    }

    #[test]
    fn mass_is_positive_definite_and_stiffness_semidefinite() {
        let space = crate::testutil::random_space(12, 3);
        let m = crate::fem::to_dense(&space.matrices().mass);
        let s = crate::fem::to_dense(&space.matrices().stiffness);
        assert!(m.clone().symmetric_eigen().eigenvalues.min() > 0.0);
        let smin = s.clone().symmetric_eigen().eigenvalues.min();
        assert!(smin > -1e-12 * s.norm());
        assert!((nalgebra::DVector::from_element(space.dim(), 1.0).dot(&(&m * nalgebra::DVector::from_element(space.dim(), 1.0))) - 1.0).abs() < 1e-10);
    }
}
