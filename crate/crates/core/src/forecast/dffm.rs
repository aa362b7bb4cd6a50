use std::fmt;
use std::str::FromStr;

use nalgebra::DVector;

use super::ic::{information_criterion, IcVariant, IC_TOLERANCE};
use super::knn::{knn_forecast, max_neighbours, select_knn_params, KnnConfig, KnnGrid, Weighting};
use super::var::{fit_var, var_forecast};
use crate::error::{Error, Result};
use crate::fem::Surface;
use crate::fpca::{fit_factor_model, FactorModel, SurfaceSeries};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DffmMethod {
    Var,
    Knn,
}

impl fmt::Display for DffmMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DffmMethod::Var => "var",
            DffmMethod::Knn => "knn",
        })
    }
}

impl FromStr for DffmMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "var" => Ok(DffmMethod::Var),
            "knn" => Ok(DffmMethod::Knn),
            other => Err(Error::InvalidArgument(format!("unknown factor forecaster `{other}`"))),
        }
    }
}

/// How the number of factors L and the lag depth p are chosen.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum OrderSelection {
    Ic(IcVariant),
    Fixed { factors: usize, lags: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct KnnOptions {
    /// Fixed K; cross-validated over 1..=floor(T^{4/5}) when `None`.
    pub neighbours: Option<usize>,
    pub q: f64,
    pub weighting: Weighting,
    pub holdout: f64,
    /// Cross-validate (K, p, L) jointly instead of taking (L, p) from the
    /// order selection.
    pub auto: bool,
}

impl Default for KnnOptions {
    fn default() -> Self {
        Self {
            neighbours: None,
            q: 2.0,
            weighting: Weighting::Equal,
            holdout: 0.2,
            auto: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DffmOptions {
    pub max_factors: usize,
    pub max_lags: usize,
    pub knn: KnnOptions,
}

impl Default for DffmOptions {
    fn default() -> Self {
        Self {
            max_factors: 10,
            max_lags: 6,
            knn: KnnOptions::default(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct DffmForecast {
    pub surface: Surface,
    /// L (0 when the series has no centered variation).
    pub factors: usize,
    pub lags: usize,
    pub neighbours: Option<usize>,
    pub scores: DVector<f64>,
}

fn is_degenerate(model: &FactorModel) -> bool {
    let scale = model.mean.coefficients().amax().powi(2).max(1.0);
    model.spectrum.first().is_none_or(|&top| top <= 1e-14 * scale)
}

/// Components whose eigenvalue is clearly above rounding level.
fn usable_components(model: &FactorModel) -> usize {
    let top = model.spectrum.first().copied().unwrap_or(0.0);
    model
        .eigenvalues
        .iter()
        .take_while(|&&v| v > IC_TOLERANCE * top)
        .count()
        .max(1)
}

fn chosen_orders(model: &FactorModel, selection: OrderSelection, options: &DffmOptions) -> Result<(usize, usize)> {
    match selection {
        OrderSelection::Fixed { factors, lags } => {
            if factors == 0 || factors > model.components() {
                return Err(Error::TooManyComponents {
                    requested: factors,
                    max: model.components(),
                });
            }
            if lags == 0 {
                return Err(Error::InvalidArgument("lag depth must be at least 1".into()));
            }
            Ok((factors, lags))
        }
        OrderSelection::Ic(variant) => {
            let factor_grid: Vec<usize> = (1..=usable_components(model)).collect();
            let lag_grid: Vec<usize> = (1..=options.max_lags).collect();
            let ic = information_criterion(&model.spectrum, &model.scores, &factor_grid, &lag_grid, variant)?;
            Ok((ic.factors, ic.lags))
        }
    }
}

/// One-step-ahead surface forecast μ̂ + Σ_l x̂_{l,T+1|T} ψ̂_l.
pub fn dffm_forecast(
    series: &SurfaceSeries,
    method: DffmMethod,
    selection: OrderSelection,
    options: &DffmOptions,
) -> Result<DffmForecast> {
    let t = series.len();
    let lmax = options.max_factors.min(t).min(series.space().dim());
    if lmax == 0 || options.max_lags == 0 {
        return Err(Error::InvalidArgument("factor and lag limits must be at least 1".into()));
    }
    let count = match selection {
        OrderSelection::Fixed { factors, .. } => lmax.max(factors.min(t.min(series.space().dim()))),
        OrderSelection::Ic(_) => lmax,
    };
    let model = fit_factor_model(series, count)?;
    if is_degenerate(&model) {
        return Ok(DffmForecast {
            surface: model.mean.clone(),
            factors: 0,
            lags: 0,
            neighbours: None,
            scores: DVector::zeros(0),
        });
    }

    let (factors, lags, neighbours, scores) = match method {
        DffmMethod::Var => {
            let (l, p) = chosen_orders(&model, selection, options)?;
            let scores = model.scores.columns(0, l).into_owned();
            let var = fit_var(&scores, p)?;
            (l, p, None, var_forecast(&var, &scores)?)
        }
        DffmMethod::Knn => {
            let knn = &options.knn;
            let cap = max_neighbours(t);
            let (l, p, k) = if knn.auto {
                let grid = KnnGrid {
                    neighbours: knn.neighbours.map_or_else(|| (1..=cap).collect(), |k| vec![k]),
                    lags: (1..=options.max_lags).collect(),
                    factors: (1..=usable_components(&model)).collect(),
                };
                let sel = select_knn_params(&model.scores, &grid, knn.holdout, knn.q, knn.weighting)?;
                (sel.config.factors, sel.config.lags, sel.config.neighbours)
            } else {
                let (l, p) = chosen_orders(&model, selection, options)?;
                let k = match knn.neighbours {
                    Some(k) => k,
                    None => {
                        let grid = KnnGrid {
                            neighbours: (1..=cap).collect(),
                            lags: vec![p],
                            factors: vec![l],
                        };
                        select_knn_params(&model.scores, &grid, knn.holdout, knn.q, knn.weighting)?
                            .config
                            .neighbours
                    }
                };
                (l, p, k)
            };
            if k > cap {
                return Err(Error::InvalidArgument(format!(
                    "K = {k} exceeds floor(T^(4/5)) = {cap}"
                )));
            }
            let config = KnnConfig {
                neighbours: k,
                lags: p,
                factors: l,
                q: knn.q,
                weighting: knn.weighting,
            };
            (l, p, Some(k), knn_forecast(&model.scores, &config)?)
        }
    };
    let coeffs: Vec<f64> = scores.iter().copied().collect();
    Ok(DffmForecast {
        surface: model.reconstruct(&coeffs),
        factors,
        lags,
        neighbours,
        scores,
    })
}
