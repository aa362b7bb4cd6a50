use std::sync::{Arc, OnceLock};

use nalgebra::{DMatrix, DVector};

use super::assembly::{assemble_matrices, FemMatrices};
use crate::error::{Error, Result};
use crate::geometry::predicates::barycentric;
use crate::geometry::{reference_shape, NodeSet, Point2};

/// Triangles whose barycentric coordinates are all above `-LOCATE_TOL` are
/// treated as containing the query point.
const LOCATE_TOL: f64 = 1e-9;

/// A quadratic finite-element space: nodes plus assembled matrices.
///
/// Shared by every [`Surface`] defined on it.
#[derive(Debug)]
pub struct FemSpace {
    nodes: NodeSet,
    matrices: FemMatrices,
    mass_dense: OnceLock<DMatrix<f64>>,
    mass_roots: OnceLock<std::result::Result<(DMatrix<f64>, DMatrix<f64>), ()>>,
}

impl FemSpace {
    pub fn new(nodes: NodeSet) -> Arc<Self> {
        let matrices = assemble_matrices(&nodes);
        Arc::new(Self {
            nodes,
            matrices,
            mass_dense: OnceLock::new(),
            mass_roots: OnceLock::new(),
        })
    }

    pub fn nodes(&self) -> &NodeSet {
        &self.nodes
    }

    pub fn matrices(&self) -> &FemMatrices {
        &self.matrices
    }

    /// Number of nodal coefficients K.
    pub fn dim(&self) -> usize {
        self.nodes.len()
    }

    /// Number of data nodes N.
    pub fn data_nodes(&self) -> usize {
        self.nodes.data_node_count()
    }

    pub fn area(&self) -> f64 {
        self.nodes.mesh().area()
    }

    pub fn mass_dense(&self) -> &DMatrix<f64> {
        self.mass_dense.get_or_init(|| to_dense(&self.matrices.mass))
    }

    /// (A^{1/2}, A^{-1/2}) from one symmetric eigendecomposition of A_K.
    pub fn mass_roots(&self) -> Result<(&DMatrix<f64>, &DMatrix<f64>)> {
        let roots = self.mass_roots.get_or_init(|| {
            let eig = self.mass_dense().clone().symmetric_eigen();
            let max = eig.eigenvalues.max();
            if eig.eigenvalues.iter().any(|&v| v <= 1e-14 * max) {
                return Err(());
            }
            let q = &eig.eigenvectors;
            let sqrt = DVector::from_iterator(eig.eigenvalues.len(), eig.eigenvalues.iter().map(|v| v.sqrt()));
            let root = q * DMatrix::from_diagonal(&sqrt) * q.transpose();
            let inv_root = q * DMatrix::from_diagonal(&sqrt.map(|s| 1.0 / s)) * q.transpose();
            Ok((root, inv_root))
        });
        match roots {
            Ok((r, ir)) => Ok((r, ir)),
            Err(()) => Err(Error::NotPositiveDefinite),
        }
    }

    pub fn same_as(self: &Arc<Self>, other: &Arc<Self>) -> bool {
        Arc::ptr_eq(self, other) || self.nodes == other.nodes
    }

    /// fᵀ A_K g on raw coefficient vectors.
    pub fn mass_inner(&self, f: &DVector<f64>, g: &DVector<f64>) -> f64 {
        let ag = &self.matrices.mass * g;
        f.dot(&ag)
    }

    /// Locates `p` and returns (triangle index, barycentric coordinates).
    pub fn locate(&self, p: Point2) -> Result<(usize, [f64; 3])> {
        let nodes = self.nodes.nodes();
        let mut best: Option<(usize, [f64; 3], f64)> = None;
        for (t, local) in self.nodes.triangle_nodes().iter().enumerate() {
            let bary = barycentric(nodes[local[0]], nodes[local[1]], nodes[local[2]], p);
            let worst = bary.iter().copied().fold(f64::INFINITY, f64::min);
            if worst >= 0.0 {
                return Ok((t, bary));
            }
            if worst >= -LOCATE_TOL && best.is_none_or(|b| worst > b.2) {
                best = Some((t, bary, worst));
            }
        }
        best.map(|(t, b, _)| (t, b))
            .ok_or(Error::PointOutsideDomain { x: p.x, y: p.y })
    }
}

pub(crate) fn to_dense(m: &nalgebra_sparse::CsrMatrix<f64>) -> DMatrix<f64> {
    let mut d = DMatrix::zeros(m.nrows(), m.ncols());
    for (i, j, v) in m.triplet_iter() {
        d[(i, j)] += *v;
    }
    d
}

/// A function on the domain, stored as K nodal coefficients.
#[derive(Debug, Clone)]
pub struct Surface {
    coefficients: DVector<f64>,
    space: Arc<FemSpace>,
}

impl Surface {
    pub fn new(space: &Arc<FemSpace>, coefficients: DVector<f64>) -> Result<Self> {
        if coefficients.len() != space.dim() {
            return Err(Error::InvalidArgument(format!(
                "surface needs {} coefficients, got {}",
                space.dim(),
                coefficients.len()
            )));
        }
        if coefficients.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidArgument("surface coefficients must be finite".into()));
        }
        Ok(Self {
            coefficients,
            space: Arc::clone(space),
        })
    }

    pub fn zeros(space: &Arc<FemSpace>) -> Self {
        Self {
            coefficients: DVector::zeros(space.dim()),
            space: Arc::clone(space),
        }
    }

    pub fn constant(space: &Arc<FemSpace>, value: f64) -> Self {
        Self {
            coefficients: DVector::from_element(space.dim(), value),
            space: Arc::clone(space),
        }
    }

    /// Nodal interpolant of `f`.
    pub fn from_fn(space: &Arc<FemSpace>, f: impl Fn(Point2) -> f64) -> Self {
        let coefficients = DVector::from_iterator(space.dim(), space.nodes().nodes().iter().map(|&p| f(p)));
        Self {
            coefficients,
            space: Arc::clone(space),
        }
    }

    pub fn coefficients(&self) -> &DVector<f64> {
        &self.coefficients
    }

    pub fn into_coefficients(self) -> DVector<f64> {
        self.coefficients
    }

    pub fn space(&self) -> &Arc<FemSpace> {
        &self.space
    }

    /// Values at the N data nodes.
    pub fn data_values(&self) -> &[f64] {
        &self.coefficients.as_slice()[..self.space.data_nodes()]
    }

    pub fn check_same_space(&self, other: &Surface) -> Result<()> {
        if self.space.same_as(&other.space) {
            Ok(())
        } else {
            Err(Error::MeshMismatch)
        }
    }
}

/// Evaluates the piecewise-quadratic expansion of `surface` at `point`.
pub fn evaluate_surface(surface: &Surface, point: Point2) -> Result<f64> {
    let space = surface.space();
    let (t, bary) = space.locate(point)?;
    let local = space.nodes().triangle_nodes()[t];
    let shape = reference_shape(bary);
    Ok(local
        .iter()
        .zip(shape.values.iter())
        .map(|(&k, &v)| surface.coefficients[k] * v)
        .sum())
}

/// L² inner product ⟨f, g⟩ = fᵀ A_K g.
pub fn inner_product(f: &Surface, g: &Surface) -> Result<f64> {
    f.check_same_space(g)?;
    Ok(f.space.mass_inner(&f.coefficients, &g.coefficients))
}
