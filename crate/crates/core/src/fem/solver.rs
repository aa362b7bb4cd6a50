//! Factorized saddle-point system
//!
//! ```text
//! [ -D   λB ] [X]   [-X*]
//! [ λB   λA ] [Z] = [ 0 ]
//! ```

use faer::linalg::solvers::Solve;
use faer::sparse::{SparseColMat, Triplet};
use nalgebra::{DMatrix, DVector, Dyn, LU};

use super::assembly::FemMatrices;
use crate::error::{Error, Result};

/// Largest K handled with a dense factorization under [`SolverKind::Auto`].
pub const DENSE_LIMIT: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SolverKind {
    #[default]
    Auto,
    Dense,
    Sparse,
}

enum Factor {
    Dense(LU<f64, Dyn, Dyn>),
    Sparse(faer::sparse::linalg::solvers::Lu<usize, f64>),
}

pub struct SaddlePointSystem {
    k: usize,
    factor: Factor,
}

impl std::fmt::Debug for SaddlePointSystem {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let kind = match self.factor {
            Factor::Dense(_) => "dense",
            Factor::Sparse(_) => "sparse",
        };
        f.debug_struct("SaddlePointSystem").field("k", &self.k).field("factor", &kind).finish()
    }
}

/// Nonzero entries (row, col, value) of the 2K×2K block matrix.
pub fn block_entries(matrices: &FemMatrices, lambda: f64) -> Vec<(usize, usize, f64)> {
    let k = matrices.data_indicator.len();
    let mut out = Vec::with_capacity(2 * matrices.stiffness.nnz() + matrices.mass.nnz() + k);
    for (i, &d) in matrices.data_indicator.iter().enumerate() {
        if d != 0.0 {
            out.push((i, i, -d));
        }
    }
    for (i, j, &v) in matrices.stiffness.triplet_iter() {
        out.push((i, k + j, lambda * v));
        out.push((k + i, j, lambda * v));
    }
    for (i, j, &v) in matrices.mass.triplet_iter() {
        out.push((k + i, k + j, lambda * v));
    }
    out
}

/// The block matrix formed explicitly (for small systems and oracles).
pub fn dense_block_matrix(matrices: &FemMatrices, lambda: f64) -> DMatrix<f64> {
    let k = matrices.data_indicator.len();
    let mut m = DMatrix::zeros(2 * k, 2 * k);
    for (i, j, v) in block_entries(matrices, lambda) {
        m[(i, j)] += v;
    }
    m
}

impl SaddlePointSystem {
    pub fn new(matrices: &FemMatrices, lambda: f64, kind: SolverKind) -> Result<Self> {
        if !(lambda > 0.0 && lambda.is_finite()) {
            return Err(Error::InvalidArgument(format!("lambda must be positive, got {lambda}")));
        }
        let k = matrices.data_indicator.len();
        let dense = match kind {
            SolverKind::Auto => k <= DENSE_LIMIT,
            SolverKind::Dense => true,
            SolverKind::Sparse => false,
        };
        let factor = if dense {
            let m = dense_block_matrix(matrices, lambda);
            let lu = m.lu();
            if lu.u().diagonal().iter().any(|v| *v == 0.0 || !v.is_finite()) {
                return Err(Error::SingularSystem(format!("zero pivot at lambda = {lambda}")));
            }
            Factor::Dense(lu)
        } else {
            let triplets: Vec<Triplet<usize, usize, f64>> = block_entries(matrices, lambda)
                .into_iter()
                .map(|(i, j, v)| Triplet::new(i, j, v))
                .collect();
            let m = SparseColMat::<usize, f64>::try_new_from_triplets(2 * k, 2 * k, &triplets)
                .map_err(|e| Error::SingularSystem(format!("{e:?}")))?;
            let lu = m.sp_lu().map_err(|e| Error::SingularSystem(format!("{e:?}")))?;
            Factor::Sparse(lu)
        };
        Ok(Self { k, factor })
    }

    pub fn dim(&self) -> usize {
        self.k
    }

    /// Solves for several right-hand sides (columns of length 2K).
    pub fn solve_many(&self, rhs: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        let sol = match &self.factor {
            Factor::Dense(lu) => lu
                .solve(rhs)
                .ok_or_else(|| Error::SingularSystem("dense LU solve failed".into()))?,
            Factor::Sparse(lu) => {
                let b = faer::Mat::<f64>::from_fn(rhs.nrows(), rhs.ncols(), |i, j| rhs[(i, j)]);
                let x = lu.solve(&b);
                DMatrix::from_fn(rhs.nrows(), rhs.ncols(), |i, j| x[(i, j)])
            }
        };
        if sol.iter().any(|v| !v.is_finite()) {
            return Err(Error::SingularSystem("non-finite solution".into()));
        }
        Ok(sol)
    }

    /// Solves for (X̃, Z) given the observation vector padded to length K.
    pub fn solve_padded(&self, padded: &DVector<f64>) -> Result<(DVector<f64>, DVector<f64>)> {
        let k = self.k;
        let mut rhs = DMatrix::zeros(2 * k, 1);
        for i in 0..k {
            rhs[(i, 0)] = -padded[i];
        }
        let sol = self.solve_many(&rhs)?;
        let x = DVector::from_iterator(k, sol.view((0, 0), (k, 1)).iter().copied());
        let z = DVector::from_iterator(k, sol.view((k, 0), (k, 1)).iter().copied());
        Ok((x, z))
    }
}
