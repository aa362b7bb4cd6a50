//! Factor-score forecasting (VAR, KNN), order selection, surface
//! forecasts and benchmark predictors.

mod benchmarks;
mod dffm;
mod far;
mod ic;
mod knn;
mod var;

pub use benchmarks::{mean_forecast, naive_forecast};
pub use dffm::{dffm_forecast, DffmForecast, DffmMethod, DffmOptions, KnnOptions, OrderSelection};
pub use far::{far_forecast, far_truncation, fit_far, FarModel, FarTruncation, FAR_TOLERANCE};
pub use ic::{information_criterion, IcEntry, IcResult, IcVariant, IC_TOLERANCE};
pub use knn::{
    knn_forecast, max_neighbours, neighbour_weights, select_knn_params, KnnConfig, KnnCvEntry, KnnGrid,
    KnnSelection, Weighting,
};
pub use var::{fit_var, var_forecast, var_forecast_horizon, VarModel};
