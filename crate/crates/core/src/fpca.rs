//! Functional principal components of a surface series.
//!
//! All function-space operations are carried out on nodal coefficients,
//! with the mass matrix A_K as the metric: ⟨f, g⟩ = fᵀ A_K g.

use std::ops::Range;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};
use crate::fem::{FemSpace, Surface};

/// T surfaces on one finite-element space (row t = coefficients of X_t).
#[derive(Debug, Clone)]
pub struct SurfaceSeries {
    coefficients: DMatrix<f64>,
    space: Arc<FemSpace>,
    labels: Vec<String>,
}

impl SurfaceSeries {
    pub fn new(space: &Arc<FemSpace>, coefficients: DMatrix<f64>, labels: Vec<String>) -> Result<Self> {
        if coefficients.ncols() != space.dim() {
            return Err(Error::InvalidArgument(format!(
                "series has {} columns, space has {} nodes",
                coefficients.ncols(),
                space.dim()
            )));
        }
        if labels.len() != coefficients.nrows() {
            return Err(Error::InvalidArgument(format!(
                "{} labels for {} surfaces",
                labels.len(),
                coefficients.nrows()
            )));
        }
        if coefficients.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("series contains non-finite values".into()));
        }
        Ok(Self {
            coefficients,
            space: Arc::clone(space),
            labels,
        })
    }

    /// Series labelled `0..T`.
    pub fn unlabelled(space: &Arc<FemSpace>, coefficients: DMatrix<f64>) -> Result<Self> {
        let labels = (0..coefficients.nrows()).map(|t| t.to_string()).collect();
        Self::new(space, coefficients, labels)
    }

    pub fn from_surfaces(surfaces: &[Surface]) -> Result<Self> {
        let first = surfaces
            .first()
            .ok_or_else(|| Error::InvalidArgument("empty surface list".into()))?;
        for s in surfaces {
            first.check_same_space(s)?;
        }
        let k = first.space().dim();
        let m = DMatrix::from_fn(surfaces.len(), k, |t, j| surfaces[t].coefficients()[j]);
        Self::unlabelled(first.space(), m)
    }

    pub fn len(&self) -> usize {
        self.coefficients.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.coefficients.nrows() == 0
    }

    pub fn coefficients(&self) -> &DMatrix<f64> {
        &self.coefficients
    }

    pub fn space(&self) -> &Arc<FemSpace> {
        &self.space
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn surface(&self, t: usize) -> Surface {
        Surface::new(&self.space, self.coefficients.row(t).transpose()).expect("row has K finite values")
    }

    pub fn last(&self) -> Option<Surface> {
        (!self.is_empty()).then(|| self.surface(self.len() - 1))
    }

    /// Sub-series over a time range.
    pub fn slice(&self, range: Range<usize>) -> SurfaceSeries {
        SurfaceSeries {
            coefficients: self.coefficients.rows(range.start, range.len()).into_owned(),
            space: Arc::clone(&self.space),
            labels: self.labels[range].to_vec(),
        }
    }

    pub fn push(&mut self, surface: &Surface, label: impl Into<String>) -> Result<()> {
        if !self.space.same_as(surface.space()) {
            return Err(Error::MeshMismatch);
        }
        let t = self.len();
        let k = self.space.dim();
        let mut m = std::mem::replace(&mut self.coefficients, DMatrix::zeros(0, 0)).insert_row(t, 0.0);
        m.row_mut(t).copy_from(&surface.coefficients().transpose());
        debug_assert_eq!(m.ncols(), k);
        self.coefficients = m;
        self.labels.push(label.into());
        Ok(())
    }
}

/// Coefficient-wise average of the series.
pub fn sample_mean(series: &SurfaceSeries) -> Surface {
    let t = series.len().max(1) as f64;
    let mean = series.coefficients.row_sum().transpose() / t;
    Surface::new(series.space(), mean).expect("mean of finite values is finite")
}

fn centered(series: &SurfaceSeries, mean: &Surface) -> Result<DMatrix<f64>> {
    if !series.space.same_as(mean.space()) {
        return Err(Error::MeshMismatch);
    }
    let mut c = series.coefficients.clone();
    for mut row in c.row_iter_mut() {
        row -= mean.coefficients().transpose();
    }
    Ok(c)
}

/// Coefficient matrix M = (1/T) Σ c_t c_tᵀ of the sample covariance kernel
/// ĉ(s, r) = φ(s)ᵀ M φ(r).
pub fn covariance_operator(series: &SurfaceSeries, mean: &Surface) -> Result<DMatrix<f64>> {
    let c = centered(series, mean)?;
    Ok(c.transpose() * &c / series.len() as f64)
}

/// Fixes the sign of an A-normalized loading: ⟨v, 1⟩ ≥ 0, or the
/// largest-magnitude coefficient positive when ⟨v, 1⟩ vanishes.
fn orient_loading(v: &mut DVector<f64>, mass_row_sums: &DVector<f64>, area: f64) {
    let ip = v.dot(mass_row_sums);
    let flip = if ip.abs() > 1e-10 * area.sqrt() {
        ip < 0.0
    } else {
        let mut best = 0;
        for i in 1..v.len() {
            if v[i].abs() > v[best].abs() {
                best = i;
            }
        }
        v[best] < 0.0
    };
    if flip {
        v.neg_mut();
    }
}

fn sorted_eigen(sym: DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let eig = SymmetricEigen::new(sym);
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]).then(a.cmp(&b)));
    let values = order.iter().map(|&i| eig.eigenvalues[i].max(0.0)).collect();
    let vectors = DMatrix::from_fn(eig.eigenvectors.nrows(), order.len(), |r, c| eig.eigenvectors[(r, order[c])]);
    (values, vectors)
}

fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

/// Full decomposition: (all eigenvalues, A-orthonormal eigenvector columns).
fn full_eigendecomposition(m: &DMatrix<f64>, space: &Arc<FemSpace>) -> Result<(Vec<f64>, DMatrix<f64>)> {
    let (root, inv_root) = space.mass_roots()?;
    let sym = symmetrize(&(root * m * root));
    let (values, u) = sorted_eigen(sym);
    Ok((values, inv_root * u))
}

/// Solves M A v = λ v with vᵀ A v = 1 and returns the top `count` pairs.
pub fn eigendecompose(m: &DMatrix<f64>, space: &Arc<FemSpace>, count: usize) -> Result<(Vec<f64>, Vec<Surface>)> {
    let k = space.dim();
    if m.nrows() != k || m.ncols() != k {
        return Err(Error::InvalidArgument(format!("operator must be {k}×{k}")));
    }
    if count == 0 || count > k {
        return Err(Error::TooManyComponents { requested: count, max: k });
    }
    let (values, vectors) = full_eigendecomposition(m, space)?;
    let row_sums = space.matrices().mass.clone() * DVector::from_element(k, 1.0);
    let loadings = (0..count)
        .map(|l| {
            let mut v = vectors.column(l).into_owned();
            orient_loading(&mut v, &row_sums, space.area());
            Surface::new(space, v)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((values[..count].to_vec(), loadings))
}

/// x̂_{l,t} = ⟨X_t - μ̂, ψ̂_l⟩ as a T×L matrix.
pub fn factor_scores(series: &SurfaceSeries, mean: &Surface, loadings: &[Surface]) -> Result<DMatrix<f64>> {
    for l in loadings {
        if !series.space.same_as(l.space()) {
            return Err(Error::MeshMismatch);
        }
    }
    let c = centered(series, mean)?;
    let ac = &series.space.matrices().mass * c.transpose(); // K×T
    let mut scores = DMatrix::zeros(series.len(), loadings.len());
    for (l, psi) in loadings.iter().enumerate() {
        for t in 0..series.len() {
            scores[(t, l)] = ac.column(t).dot(psi.coefficients());
        }
    }
    Ok(scores)
}

/// Fitted latent structure: mean, loadings, eigenvalues and scores.
#[derive(Debug, Clone)]
pub struct FactorModel {
    pub mean: Surface,
    pub loadings: Vec<Surface>,
    pub eigenvalues: Vec<f64>,
    pub scores: DMatrix<f64>,
    /// Sum of all eigenvalues of the covariance operator.
    pub total_variance: f64,
    /// Every eigenvalue of the covariance operator, non-increasing.
    pub spectrum: Vec<f64>,
}

impl FactorModel {
    pub fn components(&self) -> usize {
        self.loadings.len()
    }

    /// μ̂ + Σ_l x_l ψ̂_l for a score vector of length ≤ L.
    pub fn reconstruct(&self, scores: &[f64]) -> Surface {
        let mut c = self.mean.coefficients().clone();
        for (x, psi) in scores.iter().zip(&self.loadings) {
            c.axpy(*x, psi.coefficients(), 1.0);
        }
        Surface::new(self.mean.space(), c).expect("finite reconstruction")
    }
}

/// Fits `count` components. When T < K the eigenproblem is solved on the
/// T×T Gram matrix C A Cᵀ / T, which has the same nonzero spectrum.
pub fn fit_factor_model(series: &SurfaceSeries, count: usize) -> Result<FactorModel> {
    let t = series.len();
    let k = series.space.dim();
    if t < 2 {
        return Err(Error::InsufficientHistory { needed: 2, available: t });
    }
    let max = t.min(k);
    if count == 0 || count > max {
        return Err(Error::TooManyComponents { requested: count, max });
    }
    let space = series.space();
    let mean = sample_mean(series);
    let c = centered(series, &mean)?;
    let row_sums = &space.matrices().mass * DVector::from_element(k, 1.0);

    let dual = if t < k {
        let ac = &space.matrices().mass * c.transpose(); // K×T
        let gram = symmetrize(&(&c * &ac / t as f64));
        let (values, w) = sorted_eigen(gram);
        let top = values[0];
        if top > 0.0 && values[..count].iter().all(|&v| v > 1e-10 * top) {
            let vectors: Vec<DVector<f64>> = (0..count)
                .map(|l| c.transpose() * w.column(l) / (t as f64 * values[l]).sqrt())
                .collect();
            Some((values, vectors))
        } else {
            None
        }
    } else {
        None
    };

    let (spectrum, vectors) = match dual {
        Some(found) => found,
        None => {
            let m = c.transpose() * &c / t as f64;
            let (values, v) = full_eigendecomposition(&m, space)?;
            let vectors = (0..count).map(|l| v.column(l).into_owned()).collect();
            (values, vectors)
        }
    };

    let loadings = vectors
        .into_iter()
        .map(|mut v| {
            orient_loading(&mut v, &row_sums, space.area());
            Surface::new(space, v)
        })
        .collect::<Result<Vec<_>>>()?;
    let scores = factor_scores(series, &mean, &loadings)?;
    let total_variance = spectrum.iter().sum();
    Ok(FactorModel {
        mean,
        loadings,
        eigenvalues: spectrum[..count].to_vec(),
        scores,
        total_variance,
        spectrum,
    })
}

/// Share of total variance carried by the first `l` components.
pub fn explained_variance(model: &FactorModel, l: usize) -> Result<f64> {
    if l == 0 || l > model.components() {
        return Err(Error::TooManyComponents {
            requested: l,
            max: model.components(),
        });
    }
    if model.total_variance <= 0.0 {
        return Ok(1.0);
    }
    Ok((model.eigenvalues[..l].iter().sum::<f64>() / model.total_variance).clamp(0.0, 1.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fem::inner_product;
    use crate::geometry::Point2;
    use crate::testutil::{grid_space, random_space};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn a_orthonormal(space: &Arc<FemSpace>, fs: &[&dyn Fn(Point2) -> f64]) -> Vec<Surface> {
        let mut out: Vec<Surface> = Vec::new();
        for f in fs {
            let mut c = Surface::from_fn(space, f).into_coefficients();
            for q in &out {
                let ip = space.mass_inner(&c, q.coefficients());
                c.axpy(-ip, q.coefficients(), 1.0);
            }
            let n = space.mass_inner(&c, &c).sqrt();
            out.push(Surface::new(space, c / n).unwrap());
        }
        out
    }

    fn rng_matrix(rows: usize, cols: usize, seed: u64) -> DMatrix<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        DMatrix::from_fn(rows, cols, |_, _| StandardNormal.sample(&mut rng))
    }

    /// Centered T×L scores with exactly orthogonal columns of variance `vars`.
    fn planted_scores(t: usize, vars: &[f64], seed: u64) -> DMatrix<f64> {
        let mut x = rng_matrix(t, vars.len(), seed);
        for mut col in x.column_iter_mut() {
            let m = col.mean();
            col.add_scalar_mut(-m);
        }
        let mut aug = DMatrix::from_element(t, vars.len() + 1, 1.0);
        aug.columns_mut(1, vars.len()).copy_from(&x);
        let q = aug.qr().q();
        DMatrix::from_fn(t, vars.len(), |r, c| q[(r, c + 1)] * (vars[c] * t as f64).sqrt())
    }

    fn rank_two_series(space: &Arc<FemSpace>, t: usize, seed: u64) -> (SurfaceSeries, Vec<Surface>, DMatrix<f64>, Surface) {
        let fa = |p: Point2| (std::f64::consts::PI * p.x).cos();
        let fb = |p: Point2| p.y * p.y - p.x;
        let psi = a_orthonormal(space, &[&fa, &fb]);
        let scores = planted_scores(t, &[4.0, 1.0], seed);
        let mu = Surface::from_fn(space, |p| 10.0 + p.x);
        let coeffs = DMatrix::from_fn(t, space.dim(), |r, k| {
            mu.coefficients()[k] + scores[(r, 0)] * psi[0].coefficients()[k] + scores[(r, 1)] * psi[1].coefficients()[k]
        });
        (SurfaceSeries::unlabelled(space, coeffs).unwrap(), psi, scores, mu)
    }

    fn fem_dist(a: &Surface, b: &Surface) -> f64 {
        let d = a.coefficients() - b.coefficients();
        a.space().mass_inner(&d, &d).sqrt()
    }

    #[test]
    fn mean_cases() {
        let space = grid_space(3);
        let c = Surface::constant(&space, 2.5);
        let s = SurfaceSeries::from_surfaces(&[c.clone(), c.clone(), c.clone()]).unwrap();
        assert!((sample_mean(&s).coefficients() - c.coefficients()).amax() < 1e-15);

        let u = Surface::from_fn(&space, |p| p.x - 3.0 * p.y);
        let neg = Surface::new(&space, -u.coefficients()).unwrap();
        assert_eq!(sample_mean(&SurfaceSeries::from_surfaces(&[u, neg]).unwrap()).coefficients().amax(), 0.0);

        let m = rng_matrix(5, space.dim(), 1);
        let s = SurfaceSeries::unlabelled(&space, m.clone()).unwrap();
        let mean = sample_mean(&s);
        for k in 0..space.dim() {
            let mut acc = 0.0;
            for t in 0..5 {
                acc += m[(t, k)];
            }
            assert!((mean.coefficients()[k] - acc / 5.0).abs() < 1e-14);
        }
    }

    #[test]
    fn covariance_cases() {
        let space = grid_space(3);
        let k = space.dim();
        let s = SurfaceSeries::unlabelled(&space, DMatrix::from_element(4, k, 1.5)).unwrap();
        assert_eq!(covariance_operator(&s, &sample_mean(&s)).unwrap().amax(), 0.0);

        let m = rng_matrix(6, k, 2);
        let s = SurfaceSeries::unlabelled(&space, m.clone()).unwrap();
        let mean = sample_mean(&s);
        let cov = covariance_operator(&s, &mean).unwrap();
        for i in 0..k {
            for j in 0..k {
                let mut acc = 0.0;
                for t in 0..6 {
                    acc += (m[(t, i)] - mean.coefficients()[i]) * (m[(t, j)] - mean.coefficients()[j]);
                }
                assert!((cov[(i, j)] - acc / 6.0).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn rank_one_recovery() {
        let space = random_space(10, 3);
        let psi = a_orthonormal(&space, &[&|p: Point2| 1.0 + p.x * p.y])[0].clone();
        let a = [1.0, -2.0, 0.5, 3.0, -1.5, 0.25];
        let abar = a.iter().sum::<f64>() / a.len() as f64;
        let var = a.iter().map(|v| (v - abar).powi(2)).sum::<f64>() / a.len() as f64;
        let coeffs = DMatrix::from_fn(a.len(), space.dim(), |t, k| a[t] * psi.coefficients()[k]);
        let s = SurfaceSeries::unlabelled(&space, coeffs).unwrap();
        let mean = sample_mean(&s);
        let cov = covariance_operator(&s, &mean).unwrap();
        let outer = psi.coefficients() * psi.coefficients().transpose() * var;
        assert!((&cov - outer).amax() < 1e-12);

        let (vals, vecs) = eigendecompose(&cov, &space, 1).unwrap();
        assert!((vals[0] - var).abs() < 1e-10 * var);
        // ⟨ψ, 1⟩ > 0 so the sign convention returns +ψ
        assert!(fem_dist(&vecs[0], &psi) < 1e-8);

        let scores = factor_scores(&s, &mean, &vecs).unwrap();
        for t in 0..a.len() {
            assert!((scores[(t, 0)] - (a[t] - abar)).abs() < 1e-10);
        }
        let model = fit_factor_model(&s, 1).unwrap();
        assert!((explained_variance(&model, 1).unwrap() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn zero_operator_has_zero_spectrum() {
        let space = grid_space(3);
        let (vals, vecs) = eigendecompose(&DMatrix::zeros(space.dim(), space.dim()), &space, 3).unwrap();
        assert!(vals.iter().all(|&v| v.abs() < 1e-14));
        assert_eq!(vecs.len(), 3);
        assert!(matches!(
            eigendecompose(&DMatrix::zeros(space.dim(), space.dim()), &space, space.dim() + 1),
            Err(Error::TooManyComponents { .. })
        ));
    }

    #[test]
    fn matches_dense_generalized_oracle() {
        let space = random_space(0, 1); // unit square, two triangles
        let k = space.dim();
        assert_eq!(k, 9);
        let r = rng_matrix(k, k, 5);
        let m = &r * r.transpose();
        let (vals, vecs) = eigendecompose(&m, &space, k).unwrap();
        // oracle: Cholesky A = LLᵀ, eig(Lᵀ M L), v = L⁻ᵀ u
        let a = space.mass_dense().clone();
        let l = a.clone().cholesky().unwrap().l();
        let eig = SymmetricEigen::new(l.transpose() * &m * &l);
        let mut ev: Vec<f64> = eig.eigenvalues.iter().copied().collect();
        ev.sort_by(|x, y| y.total_cmp(x));
        for (a, b) in vals.iter().zip(&ev) {
            assert!((a - b).abs() < 1e-9 * ev[0]);
        }
        for (i, v) in vecs.iter().enumerate() {
            let c = v.coefficients();
            // M A v = λ v and vᵀ A v = 1
            assert!((&m * &a * c - c * vals[i]).amax() < 1e-8 * ev[0]);
            assert!((c.dot(&(&a * c)) - 1.0).abs() < 1e-10);
            for w in &vecs[..i] {
                assert!(inner_product(v, w).unwrap().abs() < 1e-10);
            }
        }
    }

    #[test]
    fn planted_rank_two_is_recovered() {
        let space = random_space(12, 4);
        let (s, psi, scores, _) = rank_two_series(&space, 300, 7);
        let model = fit_factor_model(&s, 2).unwrap();
        for l in 0..2 {
            let d = fem_dist(&model.loadings[l], &psi[l]);
            let neg = Surface::new(&space, -psi[l].coefficients()).unwrap();
            assert!(d.min(fem_dist(&model.loadings[l], &neg)) < 1e-6);
        }
        assert!((model.eigenvalues[0] - 4.0).abs() < 1e-8 * 4.0);
        assert!((model.eigenvalues[1] - 1.0).abs() < 1e-8);
        let cov = model.scores.transpose() * &model.scores / 300.0;
        for i in 0..2 {
            for j in 0..2 {
                let want = if i == j { model.eigenvalues[i] } else { 0.0 };
                assert!((cov[(i, j)] - want).abs() < 1e-8 * model.eigenvalues[0]);
            }
            assert!(model.scores.column(i).sum().abs() < 1e-8 * 300.0 * 2.0);
            let planted = scores.column(i);
            let got = model.scores.column(i);
            assert!((got - planted).amax().min((got + planted).amax()) < 1e-6);
        }
        assert!((explained_variance(&model, 2).unwrap() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn primal_and_dual_routes_agree() {
        let space = random_space(12, 4);
        let k = space.dim();
        let m = rng_matrix(8, k, 9);
        let s = SurfaceSeries::unlabelled(&space, m).unwrap();
        assert!(s.len() < k);
        let dual = fit_factor_model(&s, 3).unwrap();
        let cov = covariance_operator(&s, &sample_mean(&s)).unwrap();
        let (vals, vecs) = eigendecompose(&cov, &space, 3).unwrap();
        for l in 0..3 {
            assert!((dual.eigenvalues[l] - vals[l]).abs() < 1e-10 * vals[0]);
            assert!(fem_dist(&dual.loadings[l], &vecs[l]) < 1e-8);
        }
        let trace: f64 = (&cov * space.mass_dense()).trace();
        assert!((dual.total_variance - trace).abs() < 1e-10 * trace);
    }

    #[test]
    fn full_rank_reconstruction() {
        let space = grid_space(3);
        let k = space.dim();
        let s = SurfaceSeries::unlabelled(&space, rng_matrix(30, k, 3)).unwrap();
        let model = fit_factor_model(&s, k).unwrap();
        for t in 0..30 {
            let scores: Vec<f64> = model.scores.row(t).iter().copied().collect();
            let r = model.reconstruct(&scores);
            assert!((r.coefficients() - s.surface(t).coefficients()).amax() < 1e-8);
        }
        for i in 0..k {
            for j in 0..k {
                let ip = inner_product(&model.loadings[i], &model.loadings[j]).unwrap();
                assert!((ip - if i == j { 1.0 } else { 0.0 }).abs() < 1e-10);
            }
        }
        assert!(model.eigenvalues.windows(2).all(|w| w[0] >= w[1]));
        let centred = s.slice(0..30);
        let zero = factor_scores(
            &SurfaceSeries::unlabelled(&space, DMatrix::from_fn(3, k, |_, j| model.mean.coefficients()[j])).unwrap(),
            &model.mean,
            &model.loadings,
        )
        .unwrap();
        assert!(zero.amax() < 1e-12);
        assert_eq!(centred.len(), 30);
    }

    #[test]
    fn low_rank_is_best_among_random_systems() {
        let space = random_space(6, 2);
        let k = space.dim();
        let s = SurfaceSeries::unlabelled(&space, rng_matrix(20, k, 4)).unwrap();
        let model = fit_factor_model(&s, 3).unwrap();
        let c = centered(&s, &model.mean).unwrap();
        let a = space.mass_dense();
        let err = |basis: &[DVector<f64>]| -> f64 {
            let mut total = 0.0;
            for t in 0..20 {
                let row = c.row(t).transpose();
                let mut r = row.clone();
                for b in basis {
                    r.axpy(-row.dot(&(a * b)), b, 1.0);
                }
                total += r.dot(&(a * &r));
            }
            total
        };
        for l in 1..=3 {
            let own: Vec<DVector<f64>> = model.loadings[..l].iter().map(|v| v.coefficients().clone()).collect();
            let best = err(&own);
            let mut rng = ChaCha8Rng::seed_from_u64(l as u64);
            for _ in 0..50 {
                let fs: Vec<DVector<f64>> = (0..l)
                    .map(|_| DVector::from_fn(k, |_, _| rng.random_range(-1.0..1.0)))
                    .collect();
                // A-orthonormalize
                let mut basis: Vec<DVector<f64>> = Vec::new();
                for mut f in fs {
                    for q in &basis {
                        let ip = f.dot(&(a * q));
                        f.axpy(-ip, q, 1.0);
                    }
                    let n = f.dot(&(a * &f)).sqrt();
                    basis.push(f / n);
                }
                assert!(best <= err(&basis) * (1.0 + 1e-12));
            }
        }
    }

    #[test]
    fn decomposition_is_bit_identical() {
        let space = random_space(10, 6);
        let s = SurfaceSeries::unlabelled(&space, rng_matrix(25, space.dim(), 8)).unwrap();
        let cov = covariance_operator(&s, &sample_mean(&s)).unwrap();
        let (v1, f1) = eigendecompose(&cov, &space, 4).unwrap();
        let (v2, f2) = eigendecompose(&cov, &space, 4).unwrap();
        assert_eq!(v1, v2);
        for (a, b) in f1.iter().zip(&f2) {
            assert_eq!(a.coefficients(), b.coefficients());
        }
        for f in &f1 {
            let ones = DVector::from_element(space.dim(), 1.0);
            assert!(space.mass_inner(f.coefficients(), &ones) >= -1e-10);
        }
    }

    #[test]
    fn series_validation() {
        let space = grid_space(3);
        assert!(SurfaceSeries::unlabelled(&space, DMatrix::zeros(2, 3)).is_err());
        let s = SurfaceSeries::unlabelled(&space, DMatrix::zeros(1, space.dim())).unwrap();
        assert!(matches!(fit_factor_model(&s, 1), Err(Error::InsufficientHistory { .. })));
        let mut s = s;
        s.push(&Surface::constant(&space, 1.0), "x").unwrap();
        assert_eq!(s.len(), 2);
        assert_eq!(s.labels()[1], "x");
        assert!(s.push(&Surface::zeros(&grid_space(4)), "y").is_err());
    }
}
