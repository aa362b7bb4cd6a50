//! Quadratic finite elements: assembly, penalized smoothing, GCV,
//! evaluation and inner products.

mod assembly;
mod smoothing;
mod solver;
mod space;

pub use assembly::{assemble_matrices, element_matrices, FemMatrices};
pub use smoothing::{
    gcv_from_smoother, gcv_score, gcv_table, log_grid, select_lambda, select_lambda_series, smooth, smooth_series,
    GcvPooling, GridScore, LambdaSelection, Smoother, SmootherSolution, DEFAULT_GRID,
};
pub use solver::{block_entries, dense_block_matrix, SaddlePointSystem, SolverKind, DENSE_LIMIT};
pub use space::{evaluate_surface, inner_product, FemSpace, Surface};

/// Dense copy of a sparse matrix.
pub fn to_dense(m: &nalgebra_sparse::CsrMatrix<f64>) -> nalgebra::DMatrix<f64> {
    space::to_dense(m)
}
