use std::collections::HashMap;

use super::{Point2, TriangleMesh};
use crate::error::{Error, Result};

/// Absolute tolerance for matching stations to mesh vertices.
pub const STATION_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NodeKind {
    Vertex,
    EdgeMidpoint,
}

/// Quadratic nodal points of a mesh: stations first, then the remaining
/// vertices, then one midpoint per unique edge.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeSet {
    nodes: Vec<Point2>,
    data_node_count: usize,
    node_kind: Vec<NodeKind>,
    /// per triangle: 3 vertex nodes, then the midpoints opposite vertex 1, 2, 3
    triangle_to_local_nodes: Vec<[usize; 6]>,
    mesh: TriangleMesh,
}

impl NodeSet {
    /// Number of nodal points K.
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> &[Point2] {
        &self.nodes
    }

    /// Number of data (station) nodes N; they occupy indices `0..N`.
    pub fn data_node_count(&self) -> usize {
        self.data_node_count
    }

    pub fn node_kind(&self) -> &[NodeKind] {
        &self.node_kind
    }

    pub fn triangle_nodes(&self) -> &[[usize; 6]] {
        &self.triangle_to_local_nodes
    }

    pub fn mesh(&self) -> &TriangleMesh {
        &self.mesh
    }

    pub fn stations(&self) -> &[Point2] {
        &self.nodes[..self.data_node_count]
    }
}

/// Builds the P2 node set for `mesh`, numbering `stations` first.
pub fn build_nodal_points(mesh: &TriangleMesh, stations: &[Point2]) -> Result<NodeSet> {
    let vertices = mesh.vertices();
    let mut vertex_node = vec![usize::MAX; vertices.len()];
    let mut nodes = Vec::with_capacity(vertices.len() * 4);
    let mut node_kind = Vec::with_capacity(vertices.len() * 4);

    for (i, s) in stations.iter().enumerate() {
        let hit = vertices
            .iter()
            .enumerate()
            .filter(|(_, v)| (v.x - s.x).abs() <= STATION_TOLERANCE && (v.y - s.y).abs() <= STATION_TOLERANCE)
            .min_by(|a, b| a.1.distance(s).total_cmp(&b.1.distance(s)))
            .map(|(v, _)| v);
        let v = hit.ok_or(Error::StationNotOnMesh { index: i, x: s.x, y: s.y })?;
        if vertex_node[v] != usize::MAX {
            return Err(Error::DegenerateInput(format!(
                "stations {} and {i} map to the same mesh vertex",
                vertex_node[v]
            )));
        }
        vertex_node[v] = nodes.len();
        nodes.push(vertices[v]);
        node_kind.push(NodeKind::Vertex);
    }
    let data_node_count = nodes.len();
    for (v, slot) in vertex_node.iter_mut().enumerate() {
        if *slot == usize::MAX {
            *slot = nodes.len();
            nodes.push(vertices[v]);
            node_kind.push(NodeKind::Vertex);
        }
    }

    let mut midpoint: HashMap<(usize, usize), usize> = HashMap::new();
    let mut triangle_to_local_nodes = Vec::with_capacity(mesh.triangles().len());
    for t in mesh.triangles() {
        let mut local = [0usize; 6];
        for k in 0..3 {
            local[k] = vertex_node[t[k]];
        }
        for k in 0..3 {
            // midpoint opposite local vertex k
            let (a, b) = (t[(k + 1) % 3], t[(k + 2) % 3]);
            let key = (a.min(b), a.max(b));
            let id = *midpoint.entry(key).or_insert_with(|| {
                nodes.push(vertices[a].midpoint(&vertices[b]));
                node_kind.push(NodeKind::EdgeMidpoint);
                nodes.len() - 1
            });
            local[3 + k] = id;
        }
        triangle_to_local_nodes.push(local);
    }

    Ok(NodeSet {
        nodes,
        data_node_count,
        node_kind,
        triangle_to_local_nodes,
        mesh: mesh.clone(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_triangles() -> TriangleMesh {
        TriangleMesh::new(
            vec![
                Point2::new(0.0, 0.0),
                Point2::new(1.0, 0.0),
                Point2::new(1.0, 1.0),
                Point2::new(0.0, 1.0),
            ],
            vec![[0, 1, 2], [0, 2, 3]],
        )
        .unwrap()
    }

    #[test]
    fn single_triangle_has_six_nodes() {
        let mesh = TriangleMesh::new(
            vec![Point2::new(0.0, 0.0), Point2::new(1.0, 0.0), Point2::new(0.0, 1.0)],
            vec![[0, 1, 2]],
        )
        .unwrap();
        let nodes = build_nodal_points(&mesh, mesh.vertices()).unwrap();
        assert_eq!(nodes.len(), 6);
        assert_eq!(nodes.data_node_count(), 3);
        // midpoint opposite vertex 0 sits on edge (1, 2)
        let local = nodes.triangle_nodes()[0];
        assert_eq!(nodes.nodes()[local[3]], Point2::new(0.5, 0.5));
        assert_eq!(nodes.nodes()[local[5]], Point2::new(0.5, 0.0));
    }

    #[test]
    fn shared_edge_counted_once() {
        let mesh = two_triangles();
        let nodes = build_nodal_points(&mesh, mesh.vertices()).unwrap();
        assert_eq!(mesh.unique_edges().len(), 5);
        assert_eq!(nodes.len(), 4 + 5);
        let midpoints = nodes.node_kind().iter().filter(|k| **k == NodeKind::EdgeMidpoint).count();
        assert_eq!(midpoints, 5);
    }

    #[test]
    fn stations_numbered_first_in_input_order() {
        let mesh = two_triangles();
        let stations = [Point2::new(1.0, 1.0), Point2::new(0.0, 0.0)];
        let nodes = build_nodal_points(&mesh, &stations).unwrap();
        assert_eq!(nodes.data_node_count(), 2);
        assert_eq!(nodes.nodes()[0], stations[0]);
        assert_eq!(nodes.nodes()[1], stations[1]);
        assert_eq!(nodes.nodes()[2], Point2::new(1.0, 0.0));
        assert_eq!(nodes.triangle_nodes()[0][0], 1);
        assert_eq!(nodes.triangle_nodes()[0][2], 0);
    }

    #[test]
    fn station_off_mesh_is_rejected() {
        let mesh = two_triangles();
        let err = build_nodal_points(&mesh, &[Point2::new(10.0, 10.0)]).unwrap_err();
        assert!(matches!(err, Error::StationNotOnMesh { index: 0, .. }));
    }
}
