use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const MIN_DISTANCE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Weighting {
    #[default]
    Equal,
    InverseDistance,
}

impl fmt::Display for Weighting {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Weighting::Equal => "equal",
            Weighting::InverseDistance => "inverse-distance",
        })
    }
}

impl FromStr for Weighting {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "equal" => Ok(Weighting::Equal),
            "inverse-distance" | "inverse" => Ok(Weighting::InverseDistance),
            other => Err(Error::InvalidArgument(format!("unknown weighting `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KnnConfig {
    pub neighbours: usize,
    pub lags: usize,
    pub factors: usize,
    /// Minkowski exponent; `f64::INFINITY` gives the Chebyshev distance.
    pub q: f64,
    pub weighting: Weighting,
}

impl KnnConfig {
    fn validate(&self, scores: &DMatrix<f64>) -> Result<()> {
        if self.neighbours == 0 || self.lags == 0 || self.factors == 0 {
            return Err(Error::InvalidArgument("K, p and L must all be at least 1".into()));
        }
        if !(self.q >= 1.0) {
            return Err(Error::InvalidArgument(format!("Minkowski exponent must be >= 1, got {}", self.q)));
        }
        if self.factors > scores.ncols() {
            return Err(Error::TooManyComponents {
                requested: self.factors,
                max: scores.ncols(),
            });
        }
        Ok(())
    }
}

/// floor(T^{4/5}).
pub fn max_neighbours(t: usize) -> usize {
    ((t as f64).powf(0.8) + 1e-9).floor() as usize
}

/// Minkowski-q distance between the lag windows ending at rows `a` and `b`.
fn window_distance(scores: &DMatrix<f64>, a: usize, b: usize, lags: usize, factors: usize, q: f64) -> f64 {
    let mut acc = 0.0f64;
    for j in 0..lags {
        for l in 0..factors {
            let d = (scores[(a - j, l)] - scores[(b - j, l)]).abs();
            if q.is_infinite() {
                acc = acc.max(d);
            } else if q == 2.0 {
                acc += d * d;
            } else if q == 1.0 {
                acc += d;
            } else {
                acc += d.powf(q);
            }
        }
    }
    if q.is_infinite() || q == 1.0 {
        acc
    } else if q == 2.0 {
        acc.sqrt()
    } else {
        acc.powf(1.0 / q)
    }
}

/// Candidate windows ending at rows p-1..T-2 sorted by distance to the
/// window ending at T-1 (ties toward the earlier row).
fn sorted_neighbours(scores: &DMatrix<f64>, lags: usize, factors: usize, q: f64) -> Vec<(f64, usize)> {
    let t = scores.nrows();
    let query = t - 1;
    let mut d: Vec<(f64, usize)> = (lags - 1..t - 1)
        .map(|c| (window_distance(scores, query, c, lags, factors, q), c))
        .collect();
    d.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    d
}

/// Normalized weights for the first `k` sorted neighbours.
pub fn neighbour_weights(distances: &[f64], weighting: Weighting) -> Vec<f64> {
    let raw: Vec<f64> = match weighting {
        Weighting::Equal => vec![1.0; distances.len()],
        Weighting::InverseDistance => distances.iter().map(|d| 1.0 / d.max(MIN_DISTANCE)).collect(),
    };
    let total: f64 = raw.iter().sum();
    raw.into_iter().map(|w| w / total).collect()
}

fn combine(scores: &DMatrix<f64>, neighbours: &[(f64, usize)], weighting: Weighting, width: usize) -> DVector<f64> {
    let d: Vec<f64> = neighbours.iter().map(|n| n.0).collect();
    let w = neighbour_weights(&d, weighting);
    let mut out = DVector::zeros(width);
    for (wi, &(_, c)) in w.iter().zip(neighbours) {
        for l in 0..width {
            out[l] += wi * scores[(c + 1, l)];
        }
    }
    out
}

/// Weighted average of the successors of the K windows nearest to the
/// most recent one. Returns an L-vector.
pub fn knn_forecast(scores: &DMatrix<f64>, config: &KnnConfig) -> Result<DVector<f64>> {
    config.validate(scores)?;
    let t = scores.nrows();
    let needed = config.lags + config.neighbours;
    if t < needed {
        return Err(Error::InsufficientHistory { needed, available: t });
    }
    let sorted = sorted_neighbours(scores, config.lags, config.factors, config.q);
    Ok(combine(
        scores,
        &sorted[..config.neighbours],
        config.weighting,
        config.factors,
    ))
}

#[derive(Debug, Clone, PartialEq)]
pub struct KnnGrid {
    pub neighbours: Vec<usize>,
    pub lags: Vec<usize>,
    pub factors: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct KnnCvEntry {
    pub neighbours: usize,
    pub lags: usize,
    pub factors: usize,
    pub error: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct KnnSelection {
    pub config: KnnConfig,
    pub cv_error: f64,
    pub table: Vec<KnnCvEntry>,
}

fn holdout_len(t: usize, fraction: f64) -> usize {
    ((fraction * t as f64) - 1e-9).ceil().max(1.0) as usize
}

/// Rolling-origin CV over the last ⌈holdout·T⌉ rows. Errors are squared
/// distances between forecast and realised full score vectors, with
/// components beyond L forecast as zero.
pub fn select_knn_params(
    scores: &DMatrix<f64>,
    grid: &KnnGrid,
    holdout: f64,
    q: f64,
    weighting: Weighting,
) -> Result<KnnSelection> {
    if grid.neighbours.is_empty() || grid.lags.is_empty() || grid.factors.is_empty() {
        return Err(Error::InvalidArgument("empty KNN grid".into()));
    }
    if !(holdout > 0.0 && holdout < 1.0) {
        return Err(Error::InvalidArgument(format!("holdout fraction must be in (0, 1), got {holdout}")));
    }
    if !(q >= 1.0) {
        return Err(Error::InvalidArgument(format!("Minkowski exponent must be >= 1, got {q}")));
    }
    let t = scores.nrows();
    let width = scores.ncols();
    let cap = max_neighbours(t);
    let mut ks: Vec<usize> = grid.neighbours.iter().copied().filter(|&k| k >= 1 && k <= cap).collect();
    ks.sort_unstable();
    ks.dedup();
    let mut pl: Vec<(usize, usize)> = Vec::new();
    for &p in &grid.lags {
        for &l in &grid.factors {
            if p >= 1 && l >= 1 && l <= width {
                pl.push((p, l));
            }
        }
    }
    pl.sort_unstable();
    pl.dedup();
    let h = holdout_len(t, holdout).min(t.saturating_sub(1));

    // one sorted neighbour list per (p, L, origin), reused for every K
    let rows: Vec<Vec<KnnCvEntry>> = pl
        .par_iter()
        .map(|&(p, l)| {
            let mut sums = vec![0.0; ks.len()];
            let mut ok = vec![h > 0; ks.len()];
            for target in t - h..t {
                let hist = scores.rows(0, target).into_owned();
                if hist.nrows() < p + 1 {
                    ok.iter_mut().for_each(|o| *o = false);
                    break;
                }
                let sorted = sorted_neighbours(&hist, p, l, q);
                let truth = scores.row(target);
                for (i, &k) in ks.iter().enumerate() {
                    if !ok[i] {
                        continue;
                    }
                    if sorted.len() < k {
                        ok[i] = false;
                        continue;
                    }
                    let f = combine(&hist, &sorted[..k], weighting, l);
                    let mut e = 0.0;
                    for c in 0..width {
                        let fc = if c < l { f[c] } else { 0.0 };
                        e += (fc - truth[c]).powi(2);
                    }
                    sums[i] += e;
                }
            }
            ks.iter()
                .enumerate()
                .map(|(i, &k)| KnnCvEntry {
                    neighbours: k,
                    lags: p,
                    factors: l,
                    error: ok[i].then(|| sums[i] / h as f64),
                })
                .collect()
        })
        .collect();
    let mut table: Vec<KnnCvEntry> = rows.into_iter().flatten().collect();
    table.sort_by_key(|e| (e.neighbours, e.lags, e.factors));
    let best = table
        .iter()
        .filter_map(|e| e.error.map(|s| (s, e)))
        .min_by(|a, b| {
            a.0.total_cmp(&b.0)
                .then((a.1.neighbours, a.1.lags, a.1.factors).cmp(&(b.1.neighbours, b.1.lags, b.1.factors)))
        })
        .ok_or(Error::InsufficientHistory {
            needed: grid.lags.iter().min().copied().unwrap_or(1) + ks.first().copied().unwrap_or(1) + h,
            available: t,
        })?;
    Ok(KnnSelection {
        config: KnnConfig {
            neighbours: best.1.neighbours,
            lags: best.1.lags,
            factors: best.1.factors,
            q,
            weighting,
        },
        cv_error: best.0,
        table,
    })
}
