//! Bowyer–Watson incremental Delaunay triangulation.
//!
//! Points are inserted one at a time into an enclosing super-triangle. The
//! cavity of each insertion is grown breadth-first from the containing
//! triangle and repaired until it is star-shaped around the new point. After
//! all insertions the super-triangle is removed, reflex notches on the
//! boundary are filled until the boundary is the convex hull, and a final
//! Lawson flip pass restores the empty-circumcircle property everywhere.

use std::collections::{HashMap, HashSet};

use super::predicates::{in_circumcircle, is_ccw, orient_with_bound, ORIENT_EPS};
use super::{Point2, TriangleMesh};
use crate::error::{Error, Result};

/// Delaunay triangulation of the convex hull of `points`.
///
/// Vertex indices of the result are the input indices.
pub fn delaunay_triangulate(points: &[Point2]) -> Result<TriangleMesh> {
    validate_input(points)?;
    let n = points.len();
    let mut tri = Triangulation::with_super_triangle(points);
    for i in 0..n {
        tri.insert(i)?;
    }
    tri.remove_super_triangle(n);
    tri.fill_hull_notches();
    tri.legalize();
    let triangles: Vec<[usize; 3]> = tri.alive().collect();
    TriangleMesh::new(points.to_vec(), triangles)
}

fn validate_input(points: &[Point2]) -> Result<()> {
    if points.len() < 3 {
        return Err(Error::DegenerateInput(format!(
            "need at least 3 points, got {}",
            points.len()
        )));
    }
    if let Some(i) = points.iter().position(|p| !p.is_finite()) {
        return Err(Error::DegenerateInput(format!("point {i} is not finite")));
    }
    let (min, max) = bounding_box(points);
    let extent = (max.x - min.x).max(max.y - min.y);
    let mut order: Vec<usize> = (0..points.len()).collect();
    order.sort_by(|&a, &b| {
        points[a]
            .x
            .total_cmp(&points[b].x)
            .then(points[a].y.total_cmp(&points[b].y))
    });
    // duplicates within 1e-12 of the extent; neighbours in x-order are not
    // enough, so scan forward while x stays within the tolerance
    let tol = 1e-12 * extent.max(f64::MIN_POSITIVE);
    for (k, &i) in order.iter().enumerate() {
        for &j in &order[k + 1..] {
            if points[j].x - points[i].x > tol {
                break;
            }
            if points[i].distance(&points[j]) <= tol {
                return Err(Error::DegenerateInput(format!(
                    "points {} and {} coincide",
                    i.min(j),
                    i.max(j)
                )));
            }
        }
    }
    let a = points[0];
    let b = points
        .iter()
        .copied()
        .max_by(|p, q| a.distance(p).total_cmp(&a.distance(q)))
        .unwrap();
    let collinear = points.iter().all(|&c| {
        let (det, bound) = orient_with_bound(a, b, c);
        det.abs() <= 1e-12 * bound.max(a.distance(&b).powi(2))
    });
    if collinear {
        return Err(Error::DegenerateInput("all points are collinear".into()));
    }
    Ok(())
}

fn bounding_box(points: &[Point2]) -> (Point2, Point2) {
    let mut min = Point2::new(f64::INFINITY, f64::INFINITY);
    let mut max = Point2::new(f64::NEG_INFINITY, f64::NEG_INFINITY);
    for p in points {
        min.x = min.x.min(p.x);
        min.y = min.y.min(p.y);
        max.x = max.x.max(p.x);
        max.y = max.y.max(p.y);
    }
    (min, max)
}

struct Triangulation {
    pts: Vec<Point2>,
    tris: Vec<Option<[usize; 3]>>,
    /// directed edge (a, b) -> triangle whose counter-clockwise boundary contains a -> b
    edges: HashMap<(usize, usize), usize>,
}

impl Triangulation {
    fn with_super_triangle(points: &[Point2]) -> Self {
        let (min, max) = bounding_box(points);
        let cx = 0.5 * (min.x + max.x);
        let cy = 0.5 * (min.y + max.y);
        let d = (max.x - min.x).max(max.y - min.y).max(f64::MIN_POSITIVE);
        let mut pts = points.to_vec();
        pts.push(Point2::new(cx - 20.0 * d, cy - 10.0 * d));
        pts.push(Point2::new(cx + 20.0 * d, cy - 10.0 * d));
        pts.push(Point2::new(cx, cy + 20.0 * d));
        let n = points.len();
        let mut t = Triangulation {
            pts,
            tris: Vec::new(),
            edges: HashMap::new(),
        };
        t.add([n, n + 1, n + 2]);
        t
    }

    fn add(&mut self, t: [usize; 3]) -> usize {
        let id = self.tris.len();
        self.tris.push(Some(t));
        for k in 0..3 {
            self.edges.insert((t[k], t[(k + 1) % 3]), id);
        }
        id
    }

    fn kill(&mut self, id: usize) {
        if let Some(t) = self.tris[id].take() {
            for k in 0..3 {
                let e = (t[k], t[(k + 1) % 3]);
                if self.edges.get(&e) == Some(&id) {
                    self.edges.remove(&e);
                }
            }
        }
    }

    fn alive(&self) -> impl Iterator<Item = [usize; 3]> + '_ {
        self.tris.iter().flatten().copied()
    }

    fn neighbour(&self, a: usize, b: usize) -> Option<usize> {
        self.edges.get(&(b, a)).copied()
    }

    fn contains(&self, t: [usize; 3], p: Point2) -> bool {
        (0..3).all(|k| {
            let (det, bound) = orient_with_bound(self.pts[t[k]], self.pts[t[(k + 1) % 3]], p);
            det >= -ORIENT_EPS * bound
        })
    }

    fn locate(&self, p: Point2) -> Option<usize> {
        self.tris
            .iter()
            .enumerate()
            .find_map(|(id, t)| t.filter(|&t| self.contains(t, p)).map(|_| id))
    }

    fn insert(&mut self, pi: usize) -> Result<()> {
        let p = self.pts[pi];
        let start = self
            .locate(p)
            .ok_or_else(|| Error::DegenerateInput(format!("point {pi} could not be located")))?;

        let mut bad: HashSet<usize> = HashSet::from([start]);
        let mut stack = vec![start];
        while let Some(id) = stack.pop() {
            let t = self.tris[id].unwrap();
            for k in 0..3 {
                if let Some(nb) = self.neighbour(t[k], t[(k + 1) % 3]) {
                    if bad.contains(&nb) {
                        continue;
                    }
                    let u = self.tris[nb].unwrap();
                    if in_circumcircle(self.pts[u[0]], self.pts[u[1]], self.pts[u[2]], p) {
                        bad.insert(nb);
                        stack.push(nb);
                    }
                }
            }
        }

        // grow the cavity until every boundary edge sees p on its left
        let boundary = loop {
            let mut boundary = Vec::new();
            let mut grow = None;
            let mut ids: Vec<usize> = bad.iter().copied().collect();
            ids.sort_unstable();
            'outer: for &id in &ids {
                let t = self.tris[id].unwrap();
                for k in 0..3 {
                    let (a, b) = (t[k], t[(k + 1) % 3]);
                    let nb = self.neighbour(a, b);
                    if nb.is_some_and(|nb| bad.contains(&nb)) {
                        continue;
                    }
                    if !is_ccw(self.pts[a], self.pts[b], p) {
                        match nb {
                            Some(nb) => {
                                grow = Some(nb);
                                break 'outer;
                            }
                            None => {
                                return Err(Error::DegenerateInput(format!(
                                    "point {pi} falls on the enclosing boundary"
                                )))
                            }
                        }
                    }
                    boundary.push((a, b));
                }
            }
            match grow {
                Some(nb) => {
                    bad.insert(nb);
                }
                None => break boundary,
            }
        };

        let on_boundary: HashSet<usize> = boundary.iter().map(|&(a, _)| a).collect();
        let engulfed = bad
            .iter()
            .flat_map(|&id| self.tris[id].unwrap())
            .any(|v| !on_boundary.contains(&v));
        if engulfed {
            return Err(Error::DegenerateInput(format!(
                "numerically degenerate configuration while inserting point {pi}"
            )));
        }

        let mut ids: Vec<usize> = bad.into_iter().collect();
        ids.sort_unstable();
        for id in ids {
            self.kill(id);
        }
        for (a, b) in boundary {
            self.add([a, b, pi]);
        }
        Ok(())
    }

    fn remove_super_triangle(&mut self, n: usize) {
        for id in 0..self.tris.len() {
            if let Some(t) = self.tris[id] {
                if t.iter().any(|&v| v >= n) {
                    self.kill(id);
                }
            }
        }
        self.pts.truncate(n);
    }

    fn boundary_edges(&self) -> Vec<(usize, usize)> {
        let mut out: Vec<(usize, usize)> = self
            .edges
            .keys()
            .filter(|&&(a, b)| !self.edges.contains_key(&(b, a)))
            .copied()
            .collect();
        out.sort_unstable();
        out
    }

    /// Fills reflex boundary vertices until the boundary is convex.
    fn fill_hull_notches(&mut self) {
        loop {
            let boundary = self.boundary_edges();
            let mut outgoing: HashMap<usize, Vec<usize>> = HashMap::new();
            for &(a, b) in &boundary {
                outgoing.entry(a).or_default().push(b);
            }
            let mut filled = false;
            'search: for &(a, b) in &boundary {
                for &c in outgoing.get(&b).map(Vec::as_slice).unwrap_or(&[]) {
                    if c == a {
                        continue;
                    }
                    let (pa, pb, pc) = (self.pts[a], self.pts[b], self.pts[c]);
                    // reflex at b means (a, c, b) is a counter-clockwise notch
                    if !is_ccw(pa, pc, pb) {
                        continue;
                    }
                    let blocked = self.pts.iter().enumerate().any(|(v, &q)| {
                        v != a && v != b && v != c && self.contains([a, c, b], q)
                    });
                    if blocked {
                        continue;
                    }
                    self.add([a, c, b]);
                    filled = true;
                    break 'search;
                }
            }
            if !filled {
                break;
            }
        }
    }

    /// Lawson flips until no interior edge is locally non-Delaunay.
    fn legalize(&mut self) {
        let max_passes = 4 * self.tris.len() + 16;
        for _ in 0..max_passes {
            let mut flipped = false;
            for id in 0..self.tris.len() {
                let Some(t) = self.tris[id] else { continue };
                for k in 0..3 {
                    let (a, b, c) = (t[k], t[(k + 1) % 3], t[(k + 2) % 3]);
                    let Some(nb) = self.neighbour(a, b) else { continue };
                    let u = self.tris[nb].unwrap();
                    let d = u.iter().copied().find(|&v| v != a && v != b).unwrap();
                    let (pa, pb, pc, pd) = (self.pts[a], self.pts[b], self.pts[c], self.pts[d]);
                    if !in_circumcircle(pa, pb, pc, pd) {
                        continue;
                    }
                    if !is_ccw(pa, pd, pc) || !is_ccw(pd, pb, pc) {
                        continue;
                    }
                    self.kill(id);
                    self.kill(nb);
                    self.add([a, d, c]);
                    self.add([d, b, c]);
                    flipped = true;
                    break;
                }
            }
            if !flipped {
                break;
            }
        }
    }
}
