use std::io::Write;
use std::path::Path;

use super::artifacts::{self as art, node_ids};
use super::config::PipelineConfig;
use super::ingest::{ingest, CompletePanel};
use crate::error::{Error, Result};
use crate::eval::{exceedance_events, rolling_evaluate, write_events, EvaluationPlan, ForecastMethod};
use crate::fem::{log_grid, select_lambda_series, smooth_series, FemSpace, GcvPooling};
use crate::forecast::dffm_forecast;
use crate::fpca::{fit_factor_model, SurfaceSeries};
use crate::geometry::{build_nodal_points, clip_to_domain, delaunay_triangulate, DomainPolygon};
use crate::synth::generate;

fn output_dir(cfg: &PipelineConfig) -> Result<&Path> {
    let dir = cfg.data.output.as_path();
    std::fs::create_dir_all(dir)?;
    Ok(dir)
}

pub fn run_ingest(cfg: &PipelineConfig) -> Result<CompletePanel> {
    let panel = ingest(&cfg.data.stations, &cfg.data.measurements)?.complete(cfg.data.missing)?;
    art::write_panel(output_dir(cfg)?, &panel)?;
    log::info!("ingested {} days at {} stations", panel.dates.len(), panel.station_ids.len());
    Ok(panel)
}

fn lambda_grid(cfg: &PipelineConfig) -> Result<Vec<f64>> {
    let g = cfg.smoothing.lambda_grid;
    log_grid(g.min, g.max, g.count)
}

pub fn run_gcv(cfg: &PipelineConfig) -> Result<f64> {
    let dir = output_dir(cfg)?;
    let (space, _) = art::load_space(dir)?;
    let panel = art::read_panel(dir)?;
    let (sel, _) = select_lambda_series(&panel.values, &space, &lambda_grid(cfg)?, GcvPooling::Mean)?;
    art::write_gcv(&dir.join(art::GCV), &sel.scores)?;
    Ok(sel.lambda)
}

pub fn run_smooth(cfg: &PipelineConfig) -> Result<SurfaceSeries> {
    let dir = output_dir(cfg)?;
    let panel = art::read_panel(dir)?;
    let mut mesh = delaunay_triangulate(&panel.stations)?;
    if let Some(domain) = &cfg.data.domain {
        mesh = clip_to_domain(&mesh, &DomainPolygon::read(domain)?, &cfg.data.exclude_triangles)?;
    } else if !cfg.data.exclude_triangles.is_empty() {
        return Err(Error::InvalidArgument("exclude_triangles requires a domain polygon".into()));
    }
    let space = FemSpace::new(build_nodal_points(&mesh, &panel.stations)?);
    let ids = node_ids(&space, &panel.station_ids);
    mesh.write(&dir.join(art::MESH))?;
    art::write_nodes(&dir.join(art::NODES), &space, &ids)?;

    let lambdas = match cfg.smoothing.lambda {
        super::config::LambdaSetting::Value(v) => vec![v; panel.dates.len()],
        super::config::LambdaSetting::Auto => {
            let (sel, per_day) =
                select_lambda_series(&panel.values, &space, &lambda_grid(cfg)?, cfg.smoothing.gcv_pooling.into())?;
            art::write_gcv(&dir.join(art::GCV), &sel.scores)?;
            log::info!("GCV selected lambda = {}", sel.lambda);
            per_day
        }
    };
    art::write_lambdas(&dir.join(art::LAMBDA), &panel.dates, &lambdas)?;
    let coeffs = smooth_series(&panel.values, &space, &lambdas)?;
    let series = SurfaceSeries::new(&space, coeffs, panel.dates.clone())?;
    art::write_series(dir, &series, &ids)?;
    Ok(series)
}

fn load_series(dir: &Path) -> Result<(SurfaceSeries, Vec<String>)> {
    let (space, ids) = art::load_space(dir)?;
    Ok((art::read_series(dir, &space, &ids)?, ids))
}

pub fn run_decompose(cfg: &PipelineConfig) -> Result<usize> {
    let dir = output_dir(cfg)?;
    let (series, ids) = load_series(dir)?;
    let count = cfg.decompose.components.min(series.len()).min(series.space().dim());
    let model = fit_factor_model(&series, count)?;
    art::write_factor_model(dir, &model, &ids, series.labels())?;
    Ok(count)
}

pub fn run_forecast(cfg: &PipelineConfig) -> Result<()> {
    let dir = output_dir(cfg)?;
    let (series, ids) = load_series(dir)?;
    let method = cfg.forecast.build(cfg.forecast.method)?;
    let surface = match &method {
        ForecastMethod::Dffm {
            method: m,
            selection,
            options,
        } => {
            let f = dffm_forecast(&series, *m, *selection, options)?;
            log::info!(
                "{method}: L = {}, p = {}{}",
                f.factors,
                f.lags,
                f.neighbours.map_or(String::new(), |k| format!(", K = {k}"))
            );
            f.surface
        }
        _ => method.forecast(&series)?,
    };
    art::write_surface(&dir.join(art::FORECAST), &surface, &ids)
}

pub fn run_evaluate(cfg: &PipelineConfig) -> Result<()> {
    let dir = output_dir(cfg)?;
    let (series, _) = load_series(dir)?;
    let t = series.len();
    let initial = cfg.evaluate.initial.unwrap_or(2 * t / 3);
    let origins = cfg.evaluate.origins.unwrap_or(t.saturating_sub(initial));
    let methods = cfg
        .evaluate
        .methods
        .iter()
        .map(|&m| cfg.forecast.build(m))
        .collect::<Result<Vec<_>>>()?;
    let plan = EvaluationPlan {
        initial,
        origins,
        methods,
        retain_forecasts: false,
    };
    let report = rolling_evaluate(&series, &plan)?;
    report.write_long(&dir.join(art::MSE_LONG))?;
    report.write_summary(&dir.join(art::MSE_SUMMARY))?;
    let events = exceedance_events(&series, cfg.evaluate.threshold)?;
    write_events(&events, &dir.join(art::EVENTS))?;
    for s in &report.summaries {
        log::info!("{}: mean MSE {} ({} missing)", s.method, s.mean, s.missing);
    }
    Ok(())
}

/// Writes stations.csv and measurements.csv for a synthetic panel.
pub fn run_synth(cfg: &PipelineConfig) -> Result<()> {
    let dir = output_dir(cfg)?;
    let data = generate(&cfg.synth, cfg.seed)?;
    let mut w = std::io::BufWriter::new(std::fs::File::create(dir.join("stations.csv"))?);
    writeln!(w, "station_id,x,y")?;
    for (id, p) in data.station_ids.iter().zip(&data.stations) {
        writeln!(w, "{id},{},{}", p.x, p.y)?;
    }
    w.flush()?;
    let mut w = std::io::BufWriter::new(std::fs::File::create(dir.join("measurements.csv"))?);
    writeln!(w, "date,station_id,value")?;
    for (t, date) in data.dates.iter().enumerate() {
        for (i, id) in data.station_ids.iter().enumerate() {
            writeln!(w, "{date},{id},{}", data.observations[(t, i)])?;
        }
    }
    w.flush()?;
    Ok(())
}
