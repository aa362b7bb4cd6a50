/// Values and reference-coordinate gradients of the six quadratic shape
/// functions at one point.
///
/// Local order: vertices 1, 2, 3, then the midpoints opposite vertex 1, 2, 3.
/// Gradients are taken with respect to the reference coordinates
/// (ξ, η) = (λ2, λ3).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShapeEval {
    pub values: [f64; 6],
    pub gradients: [[f64; 2]; 6],
}

/// Evaluates the P2 shape functions at barycentric coordinates `lambda`.
pub fn reference_shape(lambda: [f64; 3]) -> ShapeEval {
    let [l1, l2, l3] = lambda;
    let values = [
        l1 * (2.0 * l1 - 1.0),
        l2 * (2.0 * l2 - 1.0),
        l3 * (2.0 * l3 - 1.0),
        4.0 * l2 * l3,
        4.0 * l3 * l1,
        4.0 * l1 * l2,
    ];
    // partial derivatives with respect to (l1, l2, l3)
    let d: [[f64; 3]; 6] = [
        [4.0 * l1 - 1.0, 0.0, 0.0],
        [0.0, 4.0 * l2 - 1.0, 0.0],
        [0.0, 0.0, 4.0 * l3 - 1.0],
        [0.0, 4.0 * l3, 4.0 * l2],
        [4.0 * l3, 0.0, 4.0 * l1],
        [4.0 * l2, 4.0 * l1, 0.0],
    ];
    let mut gradients = [[0.0; 2]; 6];
    for (g, di) in gradients.iter_mut().zip(d.iter()) {
        *g = [di[1] - di[0], di[2] - di[0]];
    }
    ShapeEval { values, gradients }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const LOCAL_NODES: [[f64; 3]; 6] = [
        [1.0, 0.0, 0.0],
        [0.0, 1.0, 0.0],
        [0.0, 0.0, 1.0],
        [0.0, 0.5, 0.5],
        [0.5, 0.0, 0.5],
        [0.5, 0.5, 0.0],
    ];

    #[test]
    fn lagrange_property() {
        for (i, node) in LOCAL_NODES.iter().enumerate() {
            let s = reference_shape(*node);
            for j in 0..6 {
                let expected = if i == j { 1.0 } else { 0.0 };
                assert_eq!(s.values[j], expected, "shape {j} at node {i}");
            }
        }
    }

    #[test]
    fn centroid_values() {
        let third = 1.0 / 3.0;
        let s = reference_shape([third, third, third]);
        for v in &s.values[..3] {
            assert!((v + 1.0 / 9.0).abs() < 1e-15);
        }
        for v in &s.values[3..] {
            assert!((v - 4.0 / 9.0).abs() < 1e-15);
        }
        assert!((s.values.iter().sum::<f64>() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn gradients_match_finite_differences() {
        let (xi, eta) = (0.2, 0.3);
        let h = 1e-6;
        let at = |x: f64, y: f64| reference_shape([1.0 - x - y, x, y]).values;
        let s = reference_shape([1.0 - xi - eta, xi, eta]);
        let (xp, xm) = (at(xi + h, eta), at(xi - h, eta));
        let (yp, ym) = (at(xi, eta + h), at(xi, eta - h));
        for k in 0..6 {
            assert!((s.gradients[k][0] - (xp[k] - xm[k]) / (2.0 * h)).abs() < 1e-8);
            assert!((s.gradients[k][1] - (yp[k] - ym[k]) / (2.0 * h)).abs() < 1e-8);
        }
    }

    proptest! {
        #[test]
        fn partition_of_unity(a in 0.0f64..1.0, b in 0.0f64..1.0) {
            let (l2, l3) = if a + b > 1.0 { (1.0 - a, 1.0 - b) } else { (a, b) };
            let s = reference_shape([1.0 - l2 - l3, l2, l3]);
            prop_assert!((s.values.iter().sum::<f64>() - 1.0).abs() <= 1e-14);
            let gx: f64 = s.gradients.iter().map(|g| g[0]).sum();
            let gy: f64 = s.gradients.iter().map(|g| g[1]).sum();
            prop_assert!(gx.abs() <= 1e-13 && gy.abs() <= 1e-13);
        }
    }
}
