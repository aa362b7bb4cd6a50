//! On-disk artifacts exchanged between subcommands.

use std::path::Path;
use std::sync::Arc;

use nalgebra::DMatrix;

use super::ingest::CompletePanel;
use crate::error::{Error, Result};
use crate::fem::{FemSpace, GridScore, Surface};
use crate::fpca::{explained_variance, FactorModel, SurfaceSeries};
use crate::geometry::{build_nodal_points, NodeKind, Point2, TriangleMesh};

pub const STATIONS_USED: &str = "stations_used.csv";
pub const PANEL: &str = "panel.csv";
pub const MESH: &str = "mesh.json";
pub const NODES: &str = "nodes.csv";
pub const SURFACES: &str = "surfaces.csv";
pub const TIMES: &str = "times.csv";
pub const LAMBDA: &str = "lambda.csv";
pub const GCV: &str = "gcv.csv";
pub const MEAN: &str = "mean.csv";
pub const LOADINGS: &str = "loadings.csv";
pub const SCORES: &str = "scores.csv";
pub const EIGENVALUES: &str = "eigenvalues.csv";
pub const FORECAST: &str = "forecast.csv";
pub const MSE_LONG: &str = "mse_long.csv";
pub const MSE_SUMMARY: &str = "mse_summary.csv";
pub const EVENTS: &str = "events.csv";

fn schema(path: &Path, message: impl Into<String>) -> Error {
    Error::SchemaError {
        file: path.display().to_string(),
        message: message.into(),
    }
}

fn writer(path: &Path) -> Result<csv::Writer<std::fs::File>> {
    Ok(csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_path(path)?)
}

fn open(path: &Path) -> Result<csv::Reader<std::fs::File>> {
    if !path.exists() {
        return Err(schema(path, "missing artifact; run the upstream subcommand first"));
    }
    Ok(csv::Reader::from_path(path)?)
}

fn num(path: &Path, text: &str) -> Result<f64> {
    text.trim()
        .parse()
        .map_err(|_| schema(path, format!("`{text}` is not a number")))
}

fn fmt(v: f64) -> String {
    if v.is_finite() {
        v.to_string()
    } else {
        "NA".into()
    }
}

/// Station ids for the data nodes, then `v<index>` for other vertices and
/// `m<index>` for edge midpoints.
pub fn node_ids(space: &FemSpace, station_ids: &[String]) -> Vec<String> {
    let nodes = space.nodes();
    (0..nodes.len())
        .map(|j| {
            if j < nodes.data_node_count() {
                station_ids[j].clone()
            } else {
                match nodes.node_kind()[j] {
                    NodeKind::Vertex => format!("v{j}"),
                    NodeKind::EdgeMidpoint => format!("m{j}"),
                }
            }
        })
        .collect()
}

pub fn write_panel(dir: &Path, panel: &CompletePanel) -> Result<()> {
    let mut w = writer(&dir.join(STATIONS_USED))?;
    w.write_record(["station_id", "x", "y"])?;
    for (id, p) in panel.station_ids.iter().zip(&panel.stations) {
        w.write_record([id.clone(), fmt(p.x), fmt(p.y)])?;
    }
    w.flush()?;
    let mut w = writer(&dir.join(PANEL))?;
    let mut header = vec!["date".to_string()];
    header.extend(panel.station_ids.iter().cloned());
    w.write_record(&header)?;
    for (t, date) in panel.dates.iter().enumerate() {
        let mut row = vec![date.clone()];
        row.extend(panel.values.row(t).iter().map(|&v| fmt(v)));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_panel(dir: &Path) -> Result<CompletePanel> {
    let path = dir.join(STATIONS_USED);
    let mut station_ids = Vec::new();
    let mut stations = Vec::new();
    for rec in open(&path)?.records() {
        let rec = rec?;
        station_ids.push(rec[0].to_string());
        stations.push(Point2::new(num(&path, &rec[1])?, num(&path, &rec[2])?));
    }
    let path = dir.join(PANEL);
    let mut rdr = open(&path)?;
    let header: Vec<String> = rdr.headers()?.iter().skip(1).map(str::to_string).collect();
    if header != station_ids {
        return Err(schema(&path, format!("columns do not match {STATIONS_USED}")));
    }
    let mut dates = Vec::new();
    let mut values = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        dates.push(rec[0].to_string());
        for v in rec.iter().skip(1) {
            values.push(num(&path, v)?);
        }
    }
    let n = station_ids.len();
    Ok(CompletePanel {
        station_ids,
        stations,
        values: DMatrix::from_row_slice(dates.len(), n, &values),
        dates,
    })
}

/// Rebuilds the finite-element space from mesh.json and the station list.
pub fn load_space(dir: &Path) -> Result<(Arc<FemSpace>, Vec<String>)> {
    let path = dir.join(MESH);
    if !path.exists() {
        return Err(schema(&path, "missing artifact; run `smooth` first"));
    }
    let mesh = TriangleMesh::read(&path)?;
    let panel = read_panel(dir)?;
    let space = FemSpace::new(build_nodal_points(&mesh, &panel.stations)?);
    let ids = node_ids(&space, &panel.station_ids);
    Ok((space, ids))
}

pub fn write_nodes(path: &Path, space: &FemSpace, ids: &[String]) -> Result<()> {
    let nodes = space.nodes();
    let mut w = writer(path)?;
    w.write_record(["node_id", "x", "y", "kind"])?;
    for (j, (id, p)) in ids.iter().zip(nodes.nodes()).enumerate() {
        let kind = if j < nodes.data_node_count() {
            "station"
        } else if nodes.node_kind()[j] == NodeKind::Vertex {
            "vertex"
        } else {
            "midpoint"
        };
        w.write_record([id.clone(), fmt(p.x), fmt(p.y), kind.into()])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_series(dir: &Path, series: &SurfaceSeries, ids: &[String]) -> Result<()> {
    let mut w = writer(&dir.join(SURFACES))?;
    w.write_record(ids)?;
    for row in series.coefficients().row_iter() {
        w.write_record(row.iter().map(|&v| fmt(v)))?;
    }
    w.flush()?;
    let mut w = writer(&dir.join(TIMES))?;
    w.write_record(["date"])?;
    for label in series.labels() {
        w.write_record([label])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_series(dir: &Path, space: &Arc<FemSpace>, ids: &[String]) -> Result<SurfaceSeries> {
    let path = dir.join(SURFACES);
    let mut rdr = open(&path)?;
    let header: Vec<&str> = rdr.headers()?.iter().collect();
    if header != ids {
        return Err(schema(&path, "node ids do not match the mesh"));
    }
    let k = ids.len();
    let mut values = Vec::new();
    let mut rows = 0;
    for rec in rdr.records() {
        let rec = rec?;
        for v in rec.iter() {
            values.push(num(&path, v)?);
        }
        rows += 1;
    }
    let path = dir.join(TIMES);
    let labels: Vec<String> = open(&path)?
        .records()
        .map(|r| Ok(r?[0].to_string()))
        .collect::<Result<_>>()?;
    if labels.len() != rows {
        return Err(schema(&path, format!("{} labels for {rows} surfaces", labels.len())));
    }
    SurfaceSeries::new(space, DMatrix::from_row_slice(rows, k, &values), labels)
}

pub fn write_lambdas(path: &Path, labels: &[String], lambdas: &[f64]) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(["date", "lambda"])?;
    for (d, l) in labels.iter().zip(lambdas) {
        w.write_record([d.clone(), fmt(*l)])?;
    }
    w.flush()?;
    Ok(())
}

/// lambda, mean GCV over days (NA where degenerate).
pub fn write_gcv(path: &Path, scores: &[GridScore]) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(["lambda", "gcv"])?;
    for g in scores {
        w.write_record([fmt(g.lambda), g.score.map_or("NA".into(), fmt)])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_factor_model(dir: &Path, model: &FactorModel, ids: &[String], labels: &[String]) -> Result<()> {
    let l = model.components();
    let mut w = writer(&dir.join(MEAN))?;
    w.write_record(["node_id", "value"])?;
    for (id, v) in ids.iter().zip(model.mean.coefficients().iter()) {
        w.write_record([id.clone(), fmt(*v)])?;
    }
    w.flush()?;

    let mut w = writer(&dir.join(LOADINGS))?;
    let mut header = vec!["node_id".to_string()];
    header.extend((1..=l).map(|i| format!("psi{i}")));
    w.write_record(&header)?;
    for (j, id) in ids.iter().enumerate() {
        let mut row = vec![id.clone()];
        row.extend(model.loadings.iter().map(|psi| fmt(psi.coefficients()[j])));
        w.write_record(&row)?;
    }
    w.flush()?;

    let mut w = writer(&dir.join(SCORES))?;
    let mut header = vec!["date".to_string()];
    header.extend((1..=l).map(|i| format!("x{i}")));
    w.write_record(&header)?;
    for (t, label) in labels.iter().enumerate() {
        let mut row = vec![label.clone()];
        row.extend(model.scores.row(t).iter().map(|&v| fmt(v)));
        w.write_record(&row)?;
    }
    w.flush()?;

    let mut w = writer(&dir.join(EIGENVALUES))?;
    w.write_record(["component", "eigenvalue", "explained"])?;
    for (i, v) in model.eigenvalues.iter().enumerate() {
        w.write_record([(i + 1).to_string(), fmt(*v), fmt(explained_variance(model, i + 1)?)])?;
    }
    w.flush()?;
    Ok(())
}

/// node_id, x, y, value.
pub fn write_surface(path: &Path, surface: &Surface, ids: &[String]) -> Result<()> {
    let nodes = surface.space().nodes().nodes();
    let mut w = writer(path)?;
    w.write_record(["node_id", "x", "y", "value"])?;
    for ((id, p), v) in ids.iter().zip(nodes).zip(surface.coefficients().iter()) {
        w.write_record([id.clone(), fmt(p.x), fmt(p.y), fmt(*v)])?;
    }
    w.flush()?;
    Ok(())
}
