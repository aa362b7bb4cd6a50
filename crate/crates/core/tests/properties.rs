//! Randomized invariants across module boundaries.

use std::collections::HashSet;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

use surfcast::fem::{smooth, to_dense, FemSpace};
use surfcast::forecast::{fit_var, information_criterion, max_neighbours, var_forecast, IcVariant};
use surfcast::fpca::{fit_factor_model, SurfaceSeries};
use surfcast::geometry::{build_nodal_points, clip_to_domain, delaunay_triangulate, DomainPolygon, Point2};

fn points() -> impl Strategy<Value = Vec<Point2>> {
    prop::collection::vec((0.0f64..10.0, 0.0f64..10.0), 4..40).prop_map(|v| {
        // quantize so that duplicates are detectable and removed
        let mut seen = HashSet::new();
        v.into_iter()
            .map(|(x, y)| ((x * 1e3).round() / 1e3, (y * 1e3).round() / 1e3))
            .filter(|&(x, y)| seen.insert(((x * 1e3) as i64, (y * 1e3) as i64)))
            .map(|(x, y)| Point2::new(x, y))
            .collect()
    })
}

fn collinear(p: &[Point2]) -> bool {
    p.iter().skip(2).all(|c| {
        let (a, b) = (p[0], p[1]);
        ((b.x - a.x) * (c.y - a.y) - (c.x - a.x) * (b.y - a.y)).abs() < 1e-9
    })
}

/// Relative in-circle determinant for a counter-clockwise triangle.
fn incircle(a: Point2, b: Point2, c: Point2, d: Point2) -> f64 {
    let r = |p: Point2| (p.x - d.x, p.y - d.y);
    let (ax, ay) = r(a);
    let (bx, by) = r(b);
    let (cx, cy) = r(c);
    let det = (ax * ax + ay * ay) * (bx * cy - by * cx) - (bx * bx + by * by) * (ax * cy - ay * cx)
        + (cx * cx + cy * cy) * (ax * by - ay * bx);
    let scale = [a, b, c]
        .iter()
        .map(|p| (p.x - d.x).abs().max((p.y - d.y).abs()))
        .fold(1.0f64, f64::max);
    det / scale.powi(4)
}

fn space(pts: &[Point2]) -> Arc<FemSpace> {
    FemSpace::new(build_nodal_points(&delaunay_triangulate(pts).unwrap(), pts).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn delaunay_circumcircles_are_empty(pts in points()) {
        prop_assume!(pts.len() >= 3 && !collinear(&pts));
        let mesh = delaunay_triangulate(&pts).unwrap();
        let v = mesh.vertices();
        let mut area = 0.0;
        for tri in mesh.triangles() {
            let (a, b, c) = (v[tri[0]], v[tri[1]], v[tri[2]]);
            let orient = (b.x - a.x) * (c.y - a.y) - (c.x - a.x) * (b.y - a.y);
            prop_assert!(orient > 0.0);
            area += orient / 2.0;
            for (i, &d) in v.iter().enumerate() {
                if !tri.contains(&i) {
                    prop_assert!(incircle(a, b, c, d) <= 1e-9);
                }
            }
        }
        // the triangulation covers the convex hull
        let hull = surfcast::geometry::convex_hull(&pts);
        prop_assert!((area - surfcast::geometry::signed_area(&hull).abs()).abs() <= 1e-9 * area.max(1.0));
    }

    #[test]
    fn node_count_is_vertices_plus_edges(pts in points()) {
        prop_assume!(pts.len() >= 3 && !collinear(&pts));
        let mesh = delaunay_triangulate(&pts).unwrap();
        let mut edges = HashSet::new();
        for t in mesh.triangles() {
            for (a, b) in [(t[0], t[1]), (t[1], t[2]), (t[2], t[0])] {
                edges.insert((a.min(b), a.max(b)));
            }
        }
        let nodes = build_nodal_points(&mesh, &pts).unwrap();
        prop_assert_eq!(nodes.len(), mesh.vertices().len() + edges.len());
    }

    #[test]
    fn clipping_is_idempotent(pts in points(), cut in 2.0f64..8.0) {
        prop_assume!(pts.len() >= 3 && !collinear(&pts));
        let mesh = delaunay_triangulate(&pts).unwrap();
        let domain = DomainPolygon::new(
            vec![Point2::new(-1.0, -1.0), Point2::new(11.0, -1.0), Point2::new(11.0, cut), Point2::new(-1.0, cut)],
            vec![],
        ).unwrap();
        if let Ok(once) = clip_to_domain(&mesh, &domain, &[]) {
            let twice = clip_to_domain(&once, &domain, &[]).unwrap();
            prop_assert_eq!(once, twice);
        }
    }

    #[test]
    fn smoothing_residual_vanishes_as_lambda_shrinks(
        jitter in prop::collection::vec((-0.3f64..0.3, -0.3f64..0.3), 16),
        seed in 0u64..1000,
    ) {
        // 4x4 grid with jittered interior: no hull slivers
        let pts: Vec<Point2> = jitter
            .iter()
            .enumerate()
            .map(|(k, (dx, dy))| {
                let (i, j) = (k % 4, k / 4);
                let s = if (1..3).contains(&i) && (1..3).contains(&j) { 1.0 } else { 0.0 };
                Point2::new(i as f64 + s * dx, j as f64 + s * dy)
            })
            .collect();
        let sp = space(&pts);
        let z: Vec<f64> = (0..sp.data_nodes()).map(|i| ((i as u64 * 7919 + seed) % 97) as f64).collect();
        let fit = smooth(&z, &sp, 1e-10).unwrap();
        let res = fit.surface.data_values().iter().zip(&z).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        prop_assert!(res <= 1e-6 * 97.0, "residual {}", res);
    }

    #[test]
    fn fpca_scores_are_uncorrelated(seed in 0u64..500, t in 8usize..40) {
        use rand::SeedableRng;
        use rand_distr::{Distribution, StandardNormal};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let pts: Vec<Point2> = [(0.0, 0.0), (1.0, 0.0), (0.0, 1.0), (1.0, 1.0), (0.3, 0.6), (0.7, 0.4)]
            .iter().map(|&(x, y)| Point2::new(x, y)).collect();
        let sp = space(&pts);
        let raw = DMatrix::from_fn(t, sp.dim(), |_, _| Distribution::<f64>::sample(&StandardNormal, &mut rng));
        let series = SurfaceSeries::unlabelled(&sp, raw).unwrap();
        let l = 3.min(t - 1);
        let model = fit_factor_model(&series, l).unwrap();
        let cov = model.scores.transpose() * &model.scores / t as f64;
        for i in 0..l {
            prop_assert!((cov[(i, i)] - model.eigenvalues[i]).abs() <= 1e-8 * model.eigenvalues[0]);
            for j in 0..l {
                if i != j {
                    prop_assert!(cov[(i, j)].abs() <= 1e-8 * model.eigenvalues[0]);
                }
            }
        }
        prop_assert!(model.eigenvalues.windows(2).all(|w| w[0] >= w[1]));
        let a = to_dense(&sp.matrices().mass);
        for (i, f) in model.loadings.iter().enumerate() {
            for (j, g) in model.loadings.iter().enumerate() {
                let ip = (f.coefficients().transpose() * &a * g.coefficients())[0];
                let want = if i == j { 1.0 } else { 0.0 };
                prop_assert!((ip - want).abs() <= 1e-9);
            }
        }
    }

    #[test]
    fn var_covariance_is_psd_and_forecast_is_affine(seed in 0u64..500, p in 1usize..3) {
        use rand::SeedableRng;
        use rand_distr::{Distribution, StandardNormal};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let x = DMatrix::from_fn(60, 2, |_, _| Distribution::<f64>::sample(&StandardNormal, &mut rng));
        let model = fit_var(&x, p).unwrap();
        let s = &model.residual_covariance;
        prop_assert!((s - s.transpose()).amax() <= 1e-12);
        prop_assert!(s.clone().symmetric_eigen().eigenvalues.min() >= -1e-12);
        let u = DMatrix::from_fn(p, 2, |_, _| Distribution::<f64>::sample(&StandardNormal, &mut rng));
        let v = DMatrix::from_fn(p, 2, |_, _| Distribution::<f64>::sample(&StandardNormal, &mut rng));
        let fu = var_forecast(&model, &u).unwrap();
        let fv = var_forecast(&model, &v).unwrap();
        let fs = var_forecast(&model, &(&u + &v)).unwrap();
        // the intercept enters once
        let expect: DVector<f64> = &fu + &fv - &model.intercept;
        prop_assert!((fs - expect).amax() <= 1e-10);
    }

    #[test]
    fn ic_choice_attains_grid_minimum(seed in 0u64..500) {
        use rand::SeedableRng;
        use rand_distr::{Distribution, StandardNormal};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let scores = DMatrix::from_fn(80, 4, |_, c| {
            Distribution::<f64>::sample(&StandardNormal, &mut rng) * (4 - c) as f64
        });
        let spectrum = [16.0, 9.0, 4.0, 1.0, 0.5];
        for v in IcVariant::ALL {
            let r = information_criterion(&spectrum, &scores, &[1, 2, 3, 4], &[1, 2, 3], v).unwrap();
            let best = r.table.iter().filter_map(|e| e.score).fold(f64::INFINITY, f64::min);
            let chosen = r.table.iter().find(|e| (e.factors, e.lags) == (r.factors, r.lags)).unwrap();
            prop_assert_eq!(chosen.score, Some(best));
            let first = r.table.iter().find(|e| e.score == Some(best)).unwrap();
            prop_assert_eq!((first.factors, first.lags), (r.factors, r.lags));
        }
    }

    #[test]
    fn neighbour_cap_is_floor_of_four_fifths_power(t in 1usize..100_000) {
        let k = max_neighbours(t) as u128;
        let t4 = (t as u128).pow(4);
        prop_assert!(k.pow(5) <= t4 && (k + 1).pow(5) > t4);
    }
}
