use crate::error::{Error, Result};
use crate::fem::Surface;
use crate::fpca::{sample_mean, SurfaceSeries};

/// Sample mean of the series.
pub fn mean_forecast(series: &SurfaceSeries) -> Result<Surface> {
    if series.is_empty() {
        return Err(Error::InsufficientHistory { needed: 1, available: 0 });
    }
    Ok(sample_mean(series))
}

/// Last surface of the series.
pub fn naive_forecast(series: &SurfaceSeries) -> Result<Surface> {
    series
        .last()
        .ok_or(Error::InsufficientHistory { needed: 1, available: 0 })
}
