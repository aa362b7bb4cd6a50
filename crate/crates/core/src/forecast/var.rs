use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Least-squares VAR(p) with intercept on an L-dimensional score series.
#[derive(Debug, Clone, PartialEq)]
pub struct VarModel {
    pub order: usize,
    /// A_1..A_p, each L×L; row i holds equation i.
    pub coefficients: Vec<DMatrix<f64>>,
    pub intercept: DVector<f64>,
    /// Residual covariance with divisor max(T - p - Lp - 1, 1).
    pub residual_covariance: DMatrix<f64>,
}

impl VarModel {
    pub fn dim(&self) -> usize {
        self.intercept.len()
    }
}

/// Rows `t - 1, ..., t - p` of `scores` stacked into one regressor row
/// (with a leading 1).
fn regressor_row(scores: &DMatrix<f64>, t: usize, p: usize, out: &mut [f64]) {
    let l = scores.ncols();
    out[0] = 1.0;
    for j in 1..=p {
        for m in 0..l {
            out[1 + (j - 1) * l + m] = scores[(t - j, m)];
        }
    }
}

/// Regresses x_t on (1, x_{t-1}, ..., x_{t-p}) for t = p..T-1.
pub fn fit_var(scores: &DMatrix<f64>, p: usize) -> Result<VarModel> {
    let (t_len, l) = scores.shape();
    if p == 0 || l == 0 {
        return Err(Error::InvalidArgument("VAR needs p >= 1 and L >= 1".into()));
    }
    let width = 1 + l * p;
    if t_len <= p || t_len - p < width {
        return Err(Error::RankDeficientRegressors {
            p,
            factors: l,
            rows: t_len.saturating_sub(p),
        });
    }
    let n = t_len - p;
    let mut x = DMatrix::zeros(n, width);
    let mut row = vec![0.0; width];
    for (r, t) in (p..t_len).enumerate() {
        regressor_row(scores, t, p, &mut row);
        for (c, v) in row.iter().enumerate() {
            x[(r, c)] = *v;
        }
    }
    let y = scores.rows(p, n).into_owned();

    // column scaling makes the rank test invariant to score magnitudes
    let scale: Vec<f64> = x.column_iter().map(|c| c.norm()).collect();
    if scale.iter().any(|&s| s == 0.0) {
        return Err(Error::RankDeficientRegressors { p, factors: l, rows: n });
    }
    let mut xs = x.clone();
    for (c, s) in scale.iter().enumerate() {
        xs.column_mut(c).scale_mut(1.0 / s);
    }
    let svd = xs.svd(true, true);
    let smax = svd.singular_values.max();
    let smin = svd.singular_values.min();
    if !(smin > 1e-10 * smax) {
        return Err(Error::RankDeficientRegressors { p, factors: l, rows: n });
    }
    let mut beta = svd
        .solve(&y, 0.0)
        .map_err(|_| Error::RankDeficientRegressors { p, factors: l, rows: n })?;
    for (c, s) in scale.iter().enumerate() {
        beta.row_mut(c).scale_mut(1.0 / s);
    }

    let resid = &y - &x * &beta;
    let dof = (n as isize - width as isize).max(1) as f64;
    let residual_covariance = resid.transpose() * &resid / dof;
    let intercept = beta.row(0).transpose();
    let coefficients = (0..p)
        .map(|j| beta.rows(1 + j * l, l).transpose())
        .collect();
    Ok(VarModel {
        order: p,
        coefficients,
        intercept,
        residual_covariance,
    })
}

/// One-step forecast Â_1 x_T + ... + Â_p x_{T-p+1} + ĉ from the last `p`
/// rows of `recent`.
pub fn var_forecast(model: &VarModel, recent: &DMatrix<f64>) -> Result<DVector<f64>> {
    let p = model.order;
    let t = recent.nrows();
    if t < p {
        return Err(Error::InsufficientHistory { needed: p, available: t });
    }
    if recent.ncols() != model.dim() {
        return Err(Error::InvalidArgument(format!(
            "history has {} columns, model has {}",
            recent.ncols(),
            model.dim()
        )));
    }
    let mut out = model.intercept.clone();
    for (j, a) in model.coefficients.iter().enumerate() {
        out += a * recent.row(t - 1 - j).transpose();
    }
    Ok(out)
}

/// Iterated multi-step forecasts for horizons 1..=h.
pub fn var_forecast_horizon(model: &VarModel, recent: &DMatrix<f64>, h: usize) -> Result<Vec<DVector<f64>>> {
    let mut hist = recent.clone();
    let mut out = Vec::with_capacity(h);
    for _ in 0..h {
        let next = var_forecast(model, &hist)?;
        let t = hist.nrows();
        hist = hist.insert_row(t, 0.0);
        hist.row_mut(t).copy_from(&next.transpose());
        out.push(next);
    }
    Ok(out)
}
