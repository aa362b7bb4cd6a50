use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::var::fit_var;
use crate::error::{Error, Result};

/// Grid points whose L-th eigenvalue is below this fraction of the
/// largest are skipped.
pub const IC_TOLERANCE: f64 = 1e-10;

/// Joint (L, p) order-selection criteria.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum IcVariant {
    #[serde(rename = "anh")]
    Anh,
    #[serde(rename = "os-bic")]
    OsBic,
    #[serde(rename = "os-hq")]
    OsHq,
}

impl IcVariant {
    pub const ALL: [IcVariant; 3] = [IcVariant::Anh, IcVariant::OsBic, IcVariant::OsHq];

    /// Criterion value from the residual-covariance trace, the discarded
    /// eigenvalue mass and the sample size.
    pub fn score(self, trace: f64, tail: f64, t: usize, l: usize, p: usize) -> f64 {
        let tf = t as f64;
        let pl = (p * l) as f64;
        match self {
            IcVariant::Anh => (tf + pl) / (tf - pl) * trace + tail,
            IcVariant::OsBic => (trace + tail).ln() + pl * l as f64 * tf.ln() / tf,
            IcVariant::OsHq => (trace + tail).ln() + pl * l as f64 * 2.0 * tf.ln().ln() / tf,
        }
    }
}

impl fmt::Display for IcVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            IcVariant::Anh => "anh",
            IcVariant::OsBic => "os-bic",
            IcVariant::OsHq => "os-hq",
        })
    }
}

impl FromStr for IcVariant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "anh" => Ok(IcVariant::Anh),
            "os-bic" | "osbic" | "bic" => Ok(IcVariant::OsBic),
            "os-hq" | "oshq" | "hq" => Ok(IcVariant::OsHq),
            other => Err(Error::InvalidArgument(format!("unknown information criterion `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IcEntry {
    pub factors: usize,
    pub lags: usize,
    /// `None` where the VAR could not be fitted.
    pub score: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IcResult {
    pub factors: usize,
    pub lags: usize,
    pub variant: IcVariant,
    pub table: Vec<IcEntry>,
}

/// Evaluates `variant` over the (L, p) grid and returns the minimizer,
/// ties toward the smaller (L, p).
///
/// `spectrum` holds every eigenvalue of the covariance operator; `scores`
/// must have at least max(L) columns.
pub fn information_criterion(
    spectrum: &[f64],
    scores: &DMatrix<f64>,
    factor_grid: &[usize],
    lag_grid: &[usize],
    variant: IcVariant,
) -> Result<IcResult> {
    if factor_grid.is_empty() || lag_grid.is_empty() {
        return Err(Error::InvalidArgument("empty (L, p) grid".into()));
    }
    let t = scores.nrows();
    let top = spectrum.first().copied().unwrap_or(0.0);
    let mut grid = Vec::new();
    for &l in factor_grid {
        for &p in lag_grid {
            grid.push((l, p));
        }
    }
    grid.sort_unstable();
    grid.dedup();
    let table: Vec<IcEntry> = grid
        .par_iter()
        .map(|&(l, p)| {
            // components at rounding level carry no signal but would still
            // enter the regression after column scaling
            let score = (l >= 1
                && l <= scores.ncols()
                && l <= spectrum.len()
                && spectrum[l - 1] > IC_TOLERANCE * top
                && p * l < t)
                .then(|| {
                    let model = fit_var(&scores.columns(0, l).into_owned(), p).ok()?;
                    let trace = model.residual_covariance.trace();
                    let tail: f64 = spectrum[l..].iter().sum();
                    let s = variant.score(trace, tail.max(0.0), t, l, p);
                    s.is_finite().then_some(s)
                })
                .flatten();
            IcEntry { factors: l, lags: p, score }
        })
        .collect();
    let best = table
        .iter()
        .filter_map(|e| e.score.map(|s| (s, e.factors, e.lags)))
        .min_by(|a, b| a.0.total_cmp(&b.0).then((a.1, a.2).cmp(&(b.1, b.2))))
        .ok_or(Error::GridInfeasible)?;
    Ok(IcResult {
        factors: best.1,
        lags: best.2,
        variant,
        table,
    })
}
