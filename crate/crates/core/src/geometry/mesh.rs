use std::collections::{HashMap, HashSet};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::predicates::{orient, orient_with_bound};
use super::{DomainPolygon, Point2};
use crate::error::{Error, Result};

/// A conforming triangulation with counter-clockwise triangles.
#[derive(Debug, Clone, PartialEq)]
pub struct TriangleMesh {
    vertices: Vec<Point2>,
    triangles: Vec<[usize; 3]>,
    boundary_edges: Vec<[usize; 2]>,
}

#[derive(Serialize, Deserialize)]
struct MeshFile {
    vertices: Vec<Point2>,
    triangles: Vec<[usize; 3]>,
    #[serde(default)]
    boundary: Vec<Point2>,
}

impl TriangleMesh {
    /// Validates the triangle set and derives the boundary edges.
    pub fn new(vertices: Vec<Point2>, triangles: Vec<[usize; 3]>) -> Result<Self> {
        if triangles.is_empty() {
            return Err(Error::InvalidMesh("no triangles".into()));
        }
        if let Some(i) = vertices.iter().position(|p| !p.is_finite()) {
            return Err(Error::InvalidMesh(format!("vertex {i} is not finite")));
        }
        let mut used = vec![false; vertices.len()];
        let mut directed: HashSet<(usize, usize)> = HashSet::with_capacity(3 * triangles.len());
        for (ti, t) in triangles.iter().enumerate() {
            if t.iter().any(|&v| v >= vertices.len()) {
                return Err(Error::InvalidMesh(format!("triangle {ti} references a missing vertex")));
            }
            let (det, bound) = orient_with_bound(vertices[t[0]], vertices[t[1]], vertices[t[2]]);
            if det <= 1e-14 * bound {
                return Err(Error::InvalidMesh(format!(
                    "triangle {ti} is not counter-clockwise with positive area"
                )));
            }
            for k in 0..3 {
                used[t[k]] = true;
                if !directed.insert((t[k], t[(k + 1) % 3])) {
                    return Err(Error::InvalidMesh(format!(
                        "edge ({}, {}) is used twice with the same orientation",
                        t[k],
                        t[(k + 1) % 3]
                    )));
                }
            }
        }
        if let Some(v) = used.iter().position(|u| !u) {
            return Err(Error::InvalidMesh(format!("vertex {v} belongs to no triangle")));
        }
        let mut boundary_edges: Vec<[usize; 2]> = Vec::new();
        for t in &triangles {
            for k in 0..3 {
                let (a, b) = (t[k], t[(k + 1) % 3]);
                if !directed.contains(&(b, a)) {
                    boundary_edges.push([a, b]);
                }
            }
        }
        check_hanging_vertices(&vertices, &directed)?;
        Ok(Self {
            vertices,
            triangles,
            boundary_edges,
        })
    }

    pub fn vertices(&self) -> &[Point2] {
        &self.vertices
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    pub fn boundary_edges(&self) -> &[[usize; 2]] {
        &self.boundary_edges
    }

    pub fn triangle_area(&self, t: usize) -> f64 {
        let [a, b, c] = self.triangles[t];
        0.5 * orient(self.vertices[a], self.vertices[b], self.vertices[c])
    }

    pub fn area(&self) -> f64 {
        (0..self.triangles.len()).map(|t| self.triangle_area(t)).sum()
    }

    pub fn centroid(&self, t: usize) -> Point2 {
        let [a, b, c] = self.triangles[t];
        let (a, b, c) = (self.vertices[a], self.vertices[b], self.vertices[c]);
        Point2::new((a.x + b.x + c.x) / 3.0, (a.y + b.y + c.y) / 3.0)
    }

    /// Unique undirected edges `(min, max)`, sorted.
    pub fn unique_edges(&self) -> Vec<(usize, usize)> {
        let mut edges: Vec<(usize, usize)> = self
            .triangles
            .iter()
            .flat_map(|t| (0..3).map(move |k| (t[k].min(t[(k + 1) % 3]), t[k].max(t[(k + 1) % 3]))))
            .collect();
        edges.sort_unstable();
        edges.dedup();
        edges
    }

    /// Boundary edges chained into closed loops of vertex indices.
    pub fn boundary_loops(&self) -> Vec<Vec<usize>> {
        let mut next: HashMap<usize, Vec<usize>> = HashMap::new();
        for &[a, b] in &self.boundary_edges {
            next.entry(a).or_default().push(b);
        }
        let mut visited: HashSet<(usize, usize)> = HashSet::new();
        let mut loops = Vec::new();
        for &[a, b] in &self.boundary_edges {
            if visited.contains(&(a, b)) {
                continue;
            }
            let mut ring = vec![a];
            let (mut u, mut v) = (a, b);
            while visited.insert((u, v)) {
                if v == a {
                    break;
                }
                ring.push(v);
                let w = next[&v].iter().copied().find(|&w| !visited.contains(&(v, w)));
                match w {
                    Some(w) => {
                        u = v;
                        v = w;
                    }
                    None => break,
                }
            }
            loops.push(ring);
        }
        loops
    }

    /// Connected components of the triangle adjacency graph, as per-vertex
    /// component labels.
    pub fn vertex_components(&self) -> Vec<usize> {
        let n = self.vertices.len();
        let mut parent: Vec<usize> = (0..n).collect();
        fn find(parent: &mut [usize], mut x: usize) -> usize {
            while parent[x] != x {
                parent[x] = parent[parent[x]];
                x = parent[x];
            }
            x
        }
        for t in &self.triangles {
            for k in 1..3 {
                let (ra, rb) = (find(&mut parent, t[0]), find(&mut parent, t[k]));
                if ra != rb {
                    parent[ra.max(rb)] = ra.min(rb);
                }
            }
        }
        (0..n).map(|v| find(&mut parent, v)).collect()
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: MeshFile = serde_json::from_str(text)?;
        Self::new(file.vertices, file.triangles)
    }

    /// Serializes as `{"vertices", "triangles", "boundary"}`; `boundary`
    /// lists the coordinates of the boundary loops in traversal order.
    pub fn to_json(&self) -> Result<String> {
        let boundary = self
            .boundary_loops()
            .into_iter()
            .flatten()
            .map(|v| self.vertices[v])
            .collect();
        Ok(serde_json::to_string(&MeshFile {
            vertices: self.vertices.clone(),
            triangles: self.triangles.clone(),
            boundary,
        })?)
    }

    pub fn read(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }
}

fn check_hanging_vertices(vertices: &[Point2], directed: &HashSet<(usize, usize)>) -> Result<()> {
    let mut edges: Vec<(usize, usize)> = directed.iter().map(|&(a, b)| (a.min(b), a.max(b))).collect();
    edges.sort_unstable();
    edges.dedup();
    let mut order: Vec<usize> = (0..vertices.len()).collect();
    order.sort_by(|&a, &b| vertices[a].x.total_cmp(&vertices[b].x));
    let xs: Vec<f64> = order.iter().map(|&v| vertices[v].x).collect();
    for &(a, b) in &edges {
        let (pa, pb) = (vertices[a], vertices[b]);
        let (lo, hi) = (pa.x.min(pb.x), pa.x.max(pb.x));
        let start = xs.partition_point(|&x| x < lo);
        for &v in &order[start..] {
            let p = vertices[v];
            if p.x > hi {
                break;
            }
            if v == a || v == b || p.y < pa.y.min(pb.y) || p.y > pa.y.max(pb.y) {
                continue;
            }
            let (det, bound) = orient_with_bound(pa, pb, p);
            let len2 = (pb.x - pa.x).powi(2) + (pb.y - pa.y).powi(2);
            if det.abs() <= 1e-12 * bound.max(len2) {
                return Err(Error::InvalidMesh(format!(
                    "vertex {v} lies on edge ({a}, {b}) without splitting it"
                )));
            }
        }
    }
    Ok(())
}

/// Removes triangles whose centroid lies outside `domain`, plus the listed
/// manual exclusions, then drops unreferenced vertices (order-preserving
/// reindexing).
pub fn clip_to_domain(
    mesh: &TriangleMesh,
    domain: &DomainPolygon,
    manual_exclusions: &[usize],
) -> Result<TriangleMesh> {
    let excluded: HashSet<usize> = manual_exclusions.iter().copied().collect();
    let kept: Vec<[usize; 3]> = (0..mesh.triangles.len())
        .filter(|t| !excluded.contains(t) && domain.contains(mesh.centroid(*t)))
        .map(|t| mesh.triangles[t])
        .collect();
    if kept.is_empty() {
        return Err(Error::EmptyMesh);
    }
    let mut remap = vec![usize::MAX; mesh.vertices.len()];
    for t in &kept {
        for &v in t {
            remap[v] = 0;
        }
    }
    let mut vertices = Vec::new();
    for (v, slot) in remap.iter_mut().enumerate() {
        if *slot == 0 {
            *slot = vertices.len();
            vertices.push(mesh.vertices[v]);
        }
    }
    let triangles = kept.iter().map(|t| [remap[t[0]], remap[t[1]], remap[t[2]]]).collect();
    TriangleMesh::new(vertices, triangles)
}
