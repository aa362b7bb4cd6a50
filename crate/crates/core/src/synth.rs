//! Synthetic surface series: a rank-L factor model with VAR(1) factors on
//! a Delaunay mesh over the unit square.

use std::f64::consts::PI;
use std::sync::Arc;

use chrono::{Days, NaiveDate};
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fem::{FemSpace, Surface};
use crate::fpca::SurfaceSeries;
use crate::geometry::{build_nodal_points, delaunay_triangulate, Point2, TriangleMesh};

/// (a, b) frequencies of the loading shapes cos(aπx)·cos(bπy).
const SHAPES: [(f64, f64); 6] = [(1.0, 0.0), (0.0, 1.0), (1.0, 1.0), (2.0, 0.0), (0.0, 2.0), (2.0, 1.0)];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    /// Stations including the four corners of the unit square.
    pub stations: usize,
    pub days: usize,
    /// Per-factor AR(1) coefficients; the number of factors is their count.
    pub ar: Vec<f64>,
    pub innovation_sd: Vec<f64>,
    /// Idiosyncratic noise added independently at every node.
    pub noise_sd: f64,
    pub mean_level: f64,
    pub mean_slope: f64,
    pub start_date: String,
    pub burn_in: usize,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            stations: 30,
            days: 300,
            ar: vec![0.6, 0.6],
            innovation_sd: vec![8.0, 5.0],
            noise_sd: 2.0,
            mean_level: 60.0,
            mean_slope: 10.0,
            start_date: "2011-01-01".into(),
            burn_in: 100,
        }
    }
}

impl SynthConfig {
    fn validate(&self) -> Result<()> {
        let l = self.ar.len();
        if l == 0 || l > SHAPES.len() {
            return Err(Error::InvalidArgument(format!(
                "synthetic factor count must be 1..={}, got {l}",
                SHAPES.len()
            )));
        }
        if self.innovation_sd.len() != l {
            return Err(Error::InvalidArgument("one innovation sd per factor is required".into()));
        }
        if self.ar.iter().any(|a| !(a.abs() < 1.0)) {
            return Err(Error::InvalidArgument("AR coefficients must lie in (-1, 1)".into()));
        }
        if self.stations < 5 || self.days < 2 {
            return Err(Error::InvalidArgument("need at least 5 stations and 2 days".into()));
        }
        if !(self.noise_sd >= 0.0) || self.innovation_sd.iter().any(|s| !(*s >= 0.0)) {
            return Err(Error::InvalidArgument("standard deviations must be non-negative".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct SyntheticData {
    pub station_ids: Vec<String>,
    pub stations: Vec<Point2>,
    pub dates: Vec<String>,
    pub mesh: TriangleMesh,
    pub space: Arc<FemSpace>,
    pub mean: Surface,
    pub loadings: Vec<Surface>,
    /// T×L planted factors.
    pub factors: DMatrix<f64>,
    /// μ + Σ x_l ψ_l + noise at every node.
    pub series: SurfaceSeries,
    /// The series at the N data nodes (T×N).
    pub observations: DMatrix<f64>,
}

fn station_layout(n: usize, rng: &mut ChaCha8Rng) -> Vec<Point2> {
    let mut pts = vec![
        Point2::new(0.0, 0.0),
        Point2::new(1.0, 0.0),
        Point2::new(1.0, 1.0),
        Point2::new(0.0, 1.0),
    ];
    // rejection keeps stations apart so the mesh has no slivers
    let min_gap = 0.5 / (n as f64).sqrt();
    let mut tries = 0;
    while pts.len() < n {
        let p = Point2::new(rng.random_range(0.03..0.97), rng.random_range(0.03..0.97));
        tries += 1;
        if tries > 10_000 || pts.iter().all(|q| q.distance(&p) >= min_gap) {
            pts.push(p);
        }
    }
    pts
}

/// Shapes orthonormalized under the mass matrix, in order.
fn orthonormal_loadings(space: &Arc<FemSpace>, count: usize) -> Vec<Surface> {
    let mut out: Vec<Surface> = Vec::with_capacity(count);
    for &(a, b) in SHAPES.iter().take(count) {
        let mut c = Surface::from_fn(space, |p| (a * PI * p.x).cos() * (b * PI * p.y).cos()).into_coefficients();
        for q in &out {
            let ip = space.mass_inner(&c, q.coefficients());
            c.axpy(-ip, q.coefficients(), 1.0);
        }
        let n = space.mass_inner(&c, &c).sqrt();
        out.push(Surface::new(space, c / n).expect("finite loading"));
    }
    out
}

pub fn generate(config: &SynthConfig, seed: u64) -> Result<SyntheticData> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let stations = station_layout(config.stations, &mut rng);
    let mesh = delaunay_triangulate(&stations)?;
    let space = FemSpace::new(build_nodal_points(&mesh, &stations)?);
    let l = config.ar.len();
    let loadings = orthonormal_loadings(&space, l);
    let mean = Surface::from_fn(&space, |p| config.mean_level + config.mean_slope * (p.x - p.y));

    let t = config.days;
    let mut state = vec![0.0; l];
    let mut factors = DMatrix::zeros(t, l);
    for step in 0..config.burn_in + t {
        for j in 0..l {
            let e: f64 = StandardNormal.sample(&mut rng);
            state[j] = config.ar[j] * state[j] + config.innovation_sd[j] * e;
        }
        if step >= config.burn_in {
            for j in 0..l {
                factors[(step - config.burn_in, j)] = state[j];
            }
        }
    }

    let k = space.dim();
    let mut coeffs = DMatrix::zeros(t, k);
    for r in 0..t {
        for c in 0..k {
            let mut v = mean.coefficients()[c];
            for j in 0..l {
                v += factors[(r, j)] * loadings[j].coefficients()[c];
            }
            let e: f64 = StandardNormal.sample(&mut rng);
            coeffs[(r, c)] = v + config.noise_sd * e;
        }
    }
    let start = NaiveDate::parse_from_str(&config.start_date, "%Y-%m-%d")
        .map_err(|e| Error::InvalidArgument(format!("bad start date `{}`: {e}", config.start_date)))?;
    let dates: Vec<String> = (0..t)
        .map(|d| {
            start
                .checked_add_days(Days::new(d as u64))
                .map(|x| x.format("%Y-%m-%d").to_string())
                .ok_or_else(|| Error::InvalidArgument("date overflow".into()))
        })
        .collect::<Result<_>>()?;
    let n = space.data_nodes();
    let observations = coeffs.columns(0, n).into_owned();
    let series = SurfaceSeries::new(&space, coeffs, dates.clone())?;
    let width = (config.stations as f64).log10().floor() as usize + 1;
    let station_ids = (1..=config.stations).map(|i| format!("S{i:0width$}")).collect();
    Ok(SyntheticData {
        station_ids,
        stations,
        dates,
        mesh,
        space,
        mean,
        loadings,
        factors,
        series,
        observations,
    })
}
