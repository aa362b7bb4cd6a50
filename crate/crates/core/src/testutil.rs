//! Fixtures shared by unit tests.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::fem::FemSpace;
use crate::geometry::{build_nodal_points, delaunay_triangulate, Point2};

/// `n × n` grid of stations on the unit square, all of them data nodes.
pub fn grid_space(n: usize) -> Arc<FemSpace> {
    let mut pts = Vec::new();
    for i in 0..n {
        for j in 0..n {
            pts.push(Point2::new(i as f64 / (n - 1) as f64, j as f64 / (n - 1) as f64));
        }
    }
    space_from(&pts, &pts)
}

/// Unit-square corners plus `extra` random interior stations.
pub fn random_space(extra: usize, seed: u64) -> Arc<FemSpace> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pts = vec![
        Point2::new(0.0, 0.0),
        Point2::new(1.0, 0.0),
        Point2::new(1.0, 1.0),
        Point2::new(0.0, 1.0),
    ];
    for _ in 0..extra {
        pts.push(Point2::new(rng.random_range(0.05..0.95), rng.random_range(0.05..0.95)));
    }
    space_from(&pts, &pts)
}

pub fn space_from(vertices: &[Point2], stations: &[Point2]) -> Arc<FemSpace> {
    let mesh = delaunay_triangulate(vertices).unwrap();
    FemSpace::new(build_nodal_points(&mesh, stations).unwrap())
}
