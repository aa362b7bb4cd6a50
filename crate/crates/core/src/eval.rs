//! Rolling-origin forecast evaluation and exceedance detection.

use std::fmt;
use std::io::Write;
use std::path::Path;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::fem::Surface;
use crate::forecast::{
    dffm_forecast, far_forecast, far_truncation, fit_far, mean_forecast, naive_forecast, DffmMethod, DffmOptions,
    FarTruncation, IcVariant, OrderSelection,
};
use crate::fpca::SurfaceSeries;

/// (1/N) Σ_i (actual(s_i) - predicted(s_i))² over the data nodes.
pub fn surface_mse(actual: &Surface, predicted: &Surface) -> Result<f64> {
    actual.check_same_space(predicted)?;
    let a = actual.data_values();
    let p = predicted.data_values();
    if a.is_empty() {
        return Err(Error::InvalidArgument("no data nodes".into()));
    }
    Ok(a.iter().zip(p).map(|(x, y)| (x - y).powi(2)).sum::<f64>() / a.len() as f64)
}

/// ∫ (actual - predicted)² over the domain.
pub fn integrated_squared_error(actual: &Surface, predicted: &Surface) -> Result<f64> {
    actual.check_same_space(predicted)?;
    let d = actual.coefficients() - predicted.coefficients();
    Ok(actual.space().mass_inner(&d, &d).max(0.0))
}

#[derive(Debug, Clone, PartialEq)]
pub enum ForecastMethod {
    Dffm {
        method: DffmMethod,
        selection: OrderSelection,
        options: DffmOptions,
    },
    Far(FarTruncation),
    Mean,
    Naive,
}

impl ForecastMethod {
    pub fn dffm_var(variant: IcVariant) -> Self {
        ForecastMethod::Dffm {
            method: DffmMethod::Var,
            selection: OrderSelection::Ic(variant),
            options: DffmOptions::default(),
        }
    }

    pub fn dffm_knn(variant: IcVariant) -> Self {
        ForecastMethod::Dffm {
            method: DffmMethod::Knn,
            selection: OrderSelection::Ic(variant),
            options: DffmOptions::default(),
        }
    }

    pub fn forecast(&self, series: &SurfaceSeries) -> Result<Surface> {
        match self {
            ForecastMethod::Dffm {
                method,
                selection,
                options,
            } => Ok(dffm_forecast(series, *method, *selection, options)?.surface),
            ForecastMethod::Far(rule) => {
                let l = far_truncation(series, *rule)?;
                let model = fit_far(series, l)?;
                far_forecast(&model, &series.last().expect("non-empty"), &model.mean)
            }
            ForecastMethod::Mean => mean_forecast(series),
            ForecastMethod::Naive => naive_forecast(series),
        }
    }
}

impl fmt::Display for ForecastMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ForecastMethod::Dffm { method, .. } => write!(f, "dffm-{method}"),
            ForecastMethod::Far(_) => f.write_str("far"),
            ForecastMethod::Mean => f.write_str("mean"),
            ForecastMethod::Naive => f.write_str("naive"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvaluationPlan {
    /// T0: surfaces in the first training window.
    pub initial: usize,
    /// H: number of forecast origins.
    pub origins: usize,
    pub methods: Vec<ForecastMethod>,
    pub retain_forecasts: bool,
}

impl EvaluationPlan {
    fn validate(&self, t: usize) -> Result<()> {
        if self.origins == 0 || self.initial == 0 {
            return Err(Error::InvalidArgument("T0 and H must be at least 1".into()));
        }
        if self.initial + self.origins > t {
            return Err(Error::InsufficientHistory {
                needed: self.initial + self.origins,
                available: t,
            });
        }
        if self.methods.is_empty() {
            return Err(Error::InvalidArgument("no forecast methods".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MethodSummary {
    pub method: String,
    pub mean: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub min: f64,
    pub max: f64,
    pub missing: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Failure {
    pub origin: usize,
    pub method: String,
    pub message: String,
}

#[derive(Debug, Clone)]
pub struct ForecastReport {
    pub methods: Vec<String>,
    /// mse[origin][method]; `None` marks a failed fit.
    pub mse: Vec<Vec<Option<f64>>>,
    pub summaries: Vec<MethodSummary>,
    pub failures: Vec<Failure>,
    /// forecasts[origin][method] when retained.
    pub forecasts: Option<Vec<Vec<Option<Surface>>>>,
}

/// Quantile with linear interpolation between order statistics
/// (h = (n - 1)·p).
pub fn quantile(sorted: &[f64], p: f64) -> f64 {
    let n = sorted.len();
    if n == 0 {
        return f64::NAN;
    }
    let h = (n - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(n - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

pub fn summarize(method: &str, values: &[Option<f64>]) -> MethodSummary {
    let mut v: Vec<f64> = values.iter().flatten().copied().collect();
    v.sort_by(f64::total_cmp);
    let nan = f64::NAN;
    MethodSummary {
        method: method.to_string(),
        mean: if v.is_empty() { nan } else { v.iter().sum::<f64>() / v.len() as f64 },
        q1: quantile(&v, 0.25),
        median: quantile(&v, 0.5),
        q3: quantile(&v, 0.75),
        min: v.first().copied().unwrap_or(nan),
        max: v.last().copied().unwrap_or(nan),
        missing: values.len() - v.len(),
    }
}

/// Re-fits every method on surfaces 0..T0+j and scores its forecast of
/// surface T0+j, for j = 0..H-1.
pub fn rolling_evaluate(series: &SurfaceSeries, plan: &EvaluationPlan) -> Result<ForecastReport> {
    plan.validate(series.len())?;
    let methods: Vec<String> = plan.methods.iter().map(|m| m.to_string()).collect();
    type Cell = (Option<f64>, Option<Surface>, Option<String>);
    let rows: Vec<Vec<Cell>> = (0..plan.origins)
        .into_par_iter()
        .map(|j| {
            let train = series.slice(0..plan.initial + j);
            let actual = series.surface(plan.initial + j);
            plan.methods
                .iter()
                .map(|m| match m.forecast(&train).and_then(|f| Ok((surface_mse(&actual, &f)?, f))) {
                    Ok((mse, f)) => (Some(mse), plan.retain_forecasts.then_some(f), None),
                    Err(e) => (None, None, Some(format!("{}: {e}", e.kind()))),
                })
                .collect()
        })
        .collect();

    let mut mse = Vec::with_capacity(plan.origins);
    let mut failures = Vec::new();
    let mut forecasts = plan.retain_forecasts.then(Vec::new);
    for (j, row) in rows.into_iter().enumerate() {
        let mut mrow = Vec::with_capacity(row.len());
        let mut frow = Vec::with_capacity(row.len());
        for (i, (m, f, err)) in row.into_iter().enumerate() {
            if let Some(message) = err {
                log::warn!("{} failed at origin {j}: {message}", methods[i]);
                failures.push(Failure {
                    origin: j,
                    method: methods[i].clone(),
                    message,
                });
            }
            mrow.push(m);
            frow.push(f);
        }
        mse.push(mrow);
        if let Some(fs) = forecasts.as_mut() {
            fs.push(frow);
        }
    }
    let summaries = methods
        .iter()
        .enumerate()
        .map(|(i, name)| {
            let col: Vec<Option<f64>> = mse.iter().map(|r| r[i]).collect();
            summarize(name, &col)
        })
        .collect();
    Ok(ForecastReport {
        methods,
        mse,
        summaries,
        failures,
        forecasts,
    })
}

fn fmt_value(v: Option<f64>) -> String {
    match v {
        Some(x) if x.is_finite() => format!("{x}"),
        _ => "NA".into(),
    }
}

impl ForecastReport {
    pub fn summary(&self, method: &str) -> Option<&MethodSummary> {
        self.summaries.iter().find(|s| s.method == method)
    }

    /// origin, method, mse (NA where the fit failed).
    pub fn write_long(&self, path: &Path) -> Result<()> {
        let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
        writeln!(w, "origin,method,mse")?;
        for (j, row) in self.mse.iter().enumerate() {
            for (name, v) in self.methods.iter().zip(row) {
                writeln!(w, "{j},{name},{}", fmt_value(*v))?;
            }
        }
        w.flush()?;
        Ok(())
    }

    pub fn write_summary(&self, path: &Path) -> Result<()> {
        let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
        writeln!(w, "method,mean,q1,median,q3,min,max")?;
        for s in &self.summaries {
            writeln!(
                w,
                "{},{},{},{},{},{},{}",
                s.method,
                fmt_value(Some(s.mean)),
                fmt_value(Some(s.q1)),
                fmt_value(Some(s.median)),
                fmt_value(Some(s.q3)),
                fmt_value(Some(s.min)),
                fmt_value(Some(s.max))
            )?;
        }
        w.flush()?;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExceedanceEvent {
    pub label: String,
    /// Data node of the maximum.
    pub node: usize,
    pub value: f64,
    pub above: Vec<usize>,
}

/// One event per time step whose maximum over the data nodes exceeds
/// `threshold` (first node wins ties).
pub fn exceedance_events(series: &SurfaceSeries, threshold: f64) -> Result<Vec<ExceedanceEvent>> {
    if !threshold.is_finite() {
        return Err(Error::InvalidArgument("threshold must be finite".into()));
    }
    let n = series.space().data_nodes();
    let mut out = Vec::new();
    for t in 0..series.len() {
        let row = series.coefficients().row(t);
        let mut node = 0;
        for i in 1..n {
            if row[i] > row[node] {
                node = i;
            }
        }
        if n > 0 && row[node] > threshold {
            out.push(ExceedanceEvent {
                label: series.labels()[t].clone(),
                node,
                value: row[node],
                above: (0..n).filter(|&i| row[i] > threshold).collect(),
            });
        }
    }
    Ok(out)
}

/// date, node, value.
pub fn write_events(events: &[ExceedanceEvent], path: &Path) -> Result<()> {
    let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(w, "date,node,value")?;
    for e in events {
        writeln!(w, "{},{},{}", e.label, e.node, e.value)?;
    }
    w.flush()?;
    Ok(())
}
