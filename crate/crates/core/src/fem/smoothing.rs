//! Penalized finite-element smoothing and GCV selection of λ.

use std::collections::HashSet;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use super::solver::{SaddlePointSystem, SolverKind};
use super::space::{FemSpace, Surface};
use crate::error::{Error, Result};

/// Default smoothing-parameter grid: 25 log-spaced points in [1e-4, 1e2].
pub const DEFAULT_GRID: (f64, f64, usize) = (1e-4, 1e2, 25);

/// Result of one penalized fit.
#[derive(Debug, Clone)]
pub struct SmootherSolution {
    pub surface: Surface,
    /// Multiplier block Z_K of the saddle-point system.
    pub auxiliary: DVector<f64>,
    pub lambda: f64,
}

/// A factorized smoother for one λ, reusable across days.
#[derive(Debug)]
pub struct Smoother {
    space: Arc<FemSpace>,
    lambda: f64,
    system: SaddlePointSystem,
}

impl Smoother {
    pub fn new(space: &Arc<FemSpace>, lambda: f64) -> Result<Self> {
        Self::with_solver(space, lambda, SolverKind::Auto)
    }

    pub fn with_solver(space: &Arc<FemSpace>, lambda: f64, kind: SolverKind) -> Result<Self> {
        check_data_coverage(space)?;
        let system = SaddlePointSystem::new(space.matrices(), lambda, kind)?;
        Ok(Self {
            space: Arc::clone(space),
            lambda,
            system,
        })
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn smooth(&self, observations: &[f64]) -> Result<SmootherSolution> {
        let n = self.space.data_nodes();
        if observations.len() != n {
            return Err(Error::InvalidArgument(format!(
                "expected {n} observations, got {}",
                observations.len()
            )));
        }
        if observations.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("observations must be finite".into()));
        }
        let mut padded = DVector::zeros(self.space.dim());
        padded.rows_mut(0, n).copy_from_slice(observations);
        let (x, z) = self.system.solve_padded(&padded)?;
        Ok(SmootherSolution {
            surface: Surface::new(&self.space, x)?,
            auxiliary: z,
            lambda: self.lambda,
        })
    }

    /// S_N: the N×N block of the smoother mapping data to fitted data-node
    /// values, from N unit right-hand sides.
    pub fn data_smoother_matrix(&self) -> Result<DMatrix<f64>> {
        let n = self.space.data_nodes();
        let k = self.space.dim();
        let mut rhs = DMatrix::zeros(2 * k, n);
        for i in 0..n {
            rhs[(i, i)] = -1.0;
        }
        let sol = self.system.solve_many(&rhs)?;
        Ok(sol.view((0, 0), (n, n)).into_owned())
    }
}

/// Every connected piece of the mesh needs a data node, otherwise the
/// penalty leaves a free constant there and the system is singular.
fn check_data_coverage(space: &FemSpace) -> Result<()> {
    let mesh = space.nodes().mesh();
    let labels = mesh.vertex_components();
    let all: HashSet<usize> = labels.iter().copied().collect();
    let mut covered = HashSet::new();
    for p in space.nodes().stations() {
        if let Some(v) = mesh.vertices().iter().position(|q| q == p) {
            covered.insert(labels[v]);
        }
    }
    if covered.len() < all.len() {
        return Err(Error::SingularSystem(format!(
            "{} of {} mesh components contain no data node",
            all.len() - covered.len(),
            all.len()
        )));
    }
    Ok(())
}

/// Solves the penalized problem for one set of station observations.
pub fn smooth(observations: &[f64], space: &Arc<FemSpace>, lambda: f64) -> Result<SmootherSolution> {
    Smoother::new(space, lambda)?.smooth(observations)
}

/// GCV(λ) = ‖X* - S_N X*‖² / (N (1 - tr(S_N)/N)²) given S_N.
pub fn gcv_from_smoother(s_n: &DMatrix<f64>, observations: &[f64], lambda: f64) -> Result<f64> {
    let n = observations.len();
    let trace = s_n.trace();
    let slack = 1.0 - trace / n as f64;
    if slack <= 1e-10 {
        return Err(Error::DegenerateGcv { lambda, trace, n });
    }
    let y = DVector::from_column_slice(observations);
    let resid = &y - s_n * &y;
    Ok(resid.norm_squared() / (n as f64 * slack * slack))
}

pub fn gcv_score(observations: &[f64], space: &Arc<FemSpace>, lambda: f64) -> Result<f64> {
    let n = space.data_nodes();
    if observations.len() != n {
        return Err(Error::InvalidArgument(format!(
            "expected {n} observations, got {}",
            observations.len()
        )));
    }
    let s_n = Smoother::new(space, lambda)?.data_smoother_matrix()?;
    gcv_from_smoother(&s_n, observations, lambda)
}

/// `count` log-spaced values from `min` to `max` inclusive.
pub fn log_grid(min: f64, max: f64, count: usize) -> Result<Vec<f64>> {
    if !(min > 0.0 && max >= min && count >= 1) {
        return Err(Error::InvalidArgument(format!(
            "invalid lambda grid ({min}, {max}, {count})"
        )));
    }
    if count == 1 {
        return Ok(vec![min]);
    }
    let (a, b) = (min.log10(), max.log10());
    Ok((0..count)
        .map(|i| match i {
            0 => min,
            i if i == count - 1 => max,
            i => 10f64.powf(a + (b - a) * i as f64 / (count - 1) as f64),
        })
        .collect())
}

/// How per-day GCV curves are combined for a series.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum GcvPooling {
    /// One λ minimizing the mean GCV over all days.
    #[default]
    Mean,
    /// One λ per day.
    PerDay,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridScore {
    pub lambda: f64,
    /// `None` where GCV was degenerate.
    pub score: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LambdaSelection {
    pub lambda: f64,
    pub scores: Vec<GridScore>,
}

/// Argmin over the grid, ties toward the smaller λ; degenerate points are
/// skipped.
fn argmin(scores: &[GridScore]) -> Result<f64> {
    scores
        .iter()
        .filter_map(|g| g.score.map(|s| (g.lambda, s)))
        .min_by(|a, b| a.1.total_cmp(&b.1).then(a.0.total_cmp(&b.0)))
        .map(|(l, _)| l)
        .ok_or(Error::AllPointsDegenerate)
}

fn check_grid(grid: &[f64]) -> Result<()> {
    if grid.is_empty() || grid.iter().any(|&l| !(l > 0.0 && l.is_finite())) {
        return Err(Error::InvalidArgument("lambda grid must be non-empty and positive".into()));
    }
    Ok(())
}

/// Grid search for λ on one day of observations.
pub fn select_lambda(observations: &[f64], space: &Arc<FemSpace>, grid: &[f64]) -> Result<LambdaSelection> {
    check_grid(grid)?;
    let scores: Vec<GridScore> = grid
        .par_iter()
        .map(|&lambda| GridScore {
            lambda,
            score: gcv_score(observations, space, lambda).ok(),
        })
        .collect();
    Ok(LambdaSelection {
        lambda: argmin(&scores)?,
        scores,
    })
}

/// Per-λ GCV for every day of a T×N observation matrix.
pub fn gcv_table(observations: &DMatrix<f64>, space: &Arc<FemSpace>, grid: &[f64]) -> Result<Vec<Vec<Option<f64>>>> {
    check_grid(grid)?;
    if observations.ncols() != space.data_nodes() {
        return Err(Error::InvalidArgument(format!(
            "expected {} observation columns, got {}",
            space.data_nodes(),
            observations.ncols()
        )));
    }
    grid.par_iter()
        .map(|&lambda| {
            let s_n = match Smoother::new(space, lambda).and_then(|s| s.data_smoother_matrix()) {
                Ok(s) => s,
                Err(Error::SingularSystem(_)) => return Ok(vec![None; observations.nrows()]),
                Err(e) => return Err(e),
            };
            Ok(observations
                .row_iter()
                .map(|row| {
                    let obs: Vec<f64> = row.iter().copied().collect();
                    gcv_from_smoother(&s_n, &obs, lambda).ok()
                })
                .collect())
        })
        .collect()
}

/// λ selection for a whole series; returns the pooled selection and the
/// λ used for each day.
pub fn select_lambda_series(
    observations: &DMatrix<f64>,
    space: &Arc<FemSpace>,
    grid: &[f64],
    pooling: GcvPooling,
) -> Result<(LambdaSelection, Vec<f64>)> {
    let table = gcv_table(observations, space, grid)?;
    let pooled: Vec<GridScore> = grid
        .iter()
        .zip(&table)
        .map(|(&lambda, days)| {
            let vals: Option<Vec<f64>> = days.iter().copied().collect();
            GridScore {
                lambda,
                score: vals.map(|v| v.iter().sum::<f64>() / v.len().max(1) as f64),
            }
        })
        .collect();
    let selection = LambdaSelection {
        lambda: argmin(&pooled)?,
        scores: pooled,
    };
    let per_day = match pooling {
        GcvPooling::Mean => vec![selection.lambda; observations.nrows()],
        GcvPooling::PerDay => (0..observations.nrows())
            .map(|t| {
                let day: Vec<GridScore> = grid
                    .iter()
                    .zip(&table)
                    .map(|(&lambda, days)| GridScore { lambda, score: days[t] })
                    .collect();
                argmin(&day)
            })
            .collect::<Result<_>>()?,
    };
    Ok((selection, per_day))
}

/// Smooths each row of a T×N observation matrix with its own λ, sharing
/// factorizations between days with equal λ. Returns a T×K coefficient
/// matrix.
pub fn smooth_series(observations: &DMatrix<f64>, space: &Arc<FemSpace>, lambdas: &[f64]) -> Result<DMatrix<f64>> {
    if lambdas.len() != observations.nrows() {
        return Err(Error::InvalidArgument("one lambda per day is required".into()));
    }
    let mut distinct: Vec<f64> = lambdas.to_vec();
    distinct.sort_by(f64::total_cmp);
    distinct.dedup();
    let mut out = DMatrix::zeros(observations.nrows(), space.dim());
    for lambda in distinct {
        let smoother = Smoother::new(space, lambda)?;
        for t in (0..observations.nrows()).filter(|&t| lambdas[t] == lambda) {
            let obs: Vec<f64> = observations.row(t).iter().copied().collect();
            let sol = smoother.smooth(&obs)?;
            out.row_mut(t).copy_from(&sol.surface.coefficients().transpose());
        }
    }
    Ok(out)
}
