use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::fem::Surface;
use crate::fpca::{explained_variance, fit_factor_model, SurfaceSeries};

/// Eigenvalues below this fraction of the largest are not inverted.
pub const FAR_TOLERANCE: f64 = 1e-10;

/// How many eigenfunctions the FAR(1) operator is truncated to.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FarTruncation {
    Fixed(usize),
    /// Smallest L explaining at least this share of the variance.
    Explained(f64),
}

impl Default for FarTruncation {
    fn default() -> Self {
        FarTruncation::Explained(0.9)
    }
}

#[derive(Debug, Clone)]
pub struct FarModel {
    pub truncation: usize,
    pub eigenvalues: Vec<f64>,
    pub eigenfunctions: Vec<Surface>,
    /// R[k][l] = (1/(T-1)) ξ_l⁻¹ Σ_t ⟨X_t, φ_l⟩⟨X_{t+1}, φ_k⟩ on centered data.
    pub operator: DMatrix<f64>,
    pub mean: Surface,
}

pub fn fit_far(series: &SurfaceSeries, truncation: usize) -> Result<FarModel> {
    let t = series.len();
    if truncation == 0 {
        return Err(Error::InvalidArgument("FAR truncation must be at least 1".into()));
    }
    let model = fit_factor_model(series, truncation)?;
    let top = model.spectrum.first().copied().unwrap_or(0.0);
    for (l, &xi) in model.eigenvalues.iter().enumerate() {
        if !(xi > FAR_TOLERANCE * top) || top <= 0.0 {
            return Err(Error::TruncationTooLarge {
                index: l + 1,
                value: xi,
                tolerance: FAR_TOLERANCE * top,
            });
        }
    }
    let b = &model.scores;
    let mut r = DMatrix::zeros(truncation, truncation);
    for k in 0..truncation {
        for l in 0..truncation {
            let mut acc = 0.0;
            for s in 0..t - 1 {
                acc += b[(s, l)] * b[(s + 1, k)];
            }
            r[(k, l)] = acc / ((t - 1) as f64 * model.eigenvalues[l]);
        }
    }
    Ok(FarModel {
        truncation,
        eigenvalues: model.eigenvalues,
        eigenfunctions: model.loadings,
        operator: r,
        mean: model.mean,
    })
}

/// Resolves a truncation rule on `series`; `Explained` is capped at the
/// last component that passes the inversion guard.
pub fn far_truncation(series: &SurfaceSeries, rule: FarTruncation) -> Result<usize> {
    match rule {
        FarTruncation::Fixed(l) => Ok(l),
        FarTruncation::Explained(share) => {
            let max = series.len().min(series.space().dim());
            let count = max.min(20);
            let model = fit_factor_model(series, count)?;
            let top = model.spectrum.first().copied().unwrap_or(0.0);
            let usable = model.eigenvalues.iter().take_while(|&&v| v > FAR_TOLERANCE * top).count().max(1);
            for l in 1..=usable {
                if explained_variance(&model, l)? >= share {
                    return Ok(l);
                }
            }
            Ok(usable)
        }
    }
}

/// ρ̂(X_T - μ̂) + μ̂.
pub fn far_forecast(model: &FarModel, last: &Surface, mean: &Surface) -> Result<Surface> {
    last.check_same_space(mean)?;
    for phi in &model.eigenfunctions {
        last.check_same_space(phi)?;
    }
    let space = last.space();
    let centered = last.coefficients() - mean.coefficients();
    let proj = DVector::from_iterator(
        model.truncation,
        model
            .eigenfunctions
            .iter()
            .map(|phi| space.mass_inner(&centered, phi.coefficients())),
    );
    let next = &model.operator * proj;
    let mut c = mean.coefficients().clone();
    for (x, phi) in next.iter().zip(&model.eigenfunctions) {
        c.axpy(*x, phi.coefficients(), 1.0);
    }
    Surface::new(space, c)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fem::inner_product;
    use crate::testutil::random_space;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn rank_k_series(space: &std::sync::Arc<crate::fem::FemSpace>, scores: &DMatrix<f64>) -> (SurfaceSeries, Vec<Surface>) {
        let base = [
            Surface::constant(space, 1.0),
            Surface::from_fn(space, |p| p.x - 0.5),
            Surface::from_fn(space, |p| p.y * p.y),
        ];
        let mut psi: Vec<Surface> = Vec::new();
        for f in base.iter().take(scores.ncols()) {
            let mut c = f.coefficients().clone();
            for q in &psi {
                let ip = space.mass_inner(&c, q.coefficients());
                c.axpy(-ip, q.coefficients(), 1.0);
            }
            let n = space.mass_inner(&c, &c).sqrt();
            psi.push(Surface::new(space, c / n).unwrap());
        }
        let coeffs = DMatrix::from_fn(scores.nrows(), space.dim(), |t, k| {
            (0..scores.ncols()).map(|l| scores[(t, l)] * psi[l].coefficients()[k]).sum::<f64>()
        });
        (SurfaceSeries::unlabelled(space, coeffs).unwrap(), psi)
    }

    #[test]
    fn white_noise_operator_is_small() {
        let space = random_space(6, 2);
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let coeffs = DMatrix::from_fn(2000, space.dim(), |_, _| StandardNormal.sample(&mut rng));
        let s = SurfaceSeries::unlabelled(&space, coeffs).unwrap();
        let m = fit_far(&s, 3).unwrap();
        assert!(m.operator.amax() <= 0.1);
    }

    #[test]
    fn alternating_rank_one_matches_closed_form() {
        let space = random_space(4, 3);
        let t = 50;
        let c: f64 = -1.0;
        let a: Vec<f64> = (0..t).map(|i| 2.0 * c.powi(i as i32)).collect();
        let (s, _) = rank_k_series(&space, &DMatrix::from_column_slice(t, 1, &a));
        let m = fit_far(&s, 1).unwrap();
        let head: f64 = a[..t - 1].iter().map(|v| v * v).sum();
        let all: f64 = a.iter().map(|v| v * v).sum();
        let want = c * (t as f64 / (t - 1) as f64) * head / all;
        assert!((m.operator[(0, 0)] - want).abs() < 1e-10);
    }

    #[test]
    fn geometric_rank_one_matches_centered_ratio() {
        let space = random_space(4, 3);
        let t = 40;
        let a: Vec<f64> = (0..t).map(|i| 3.0 * 0.9f64.powi(i as i32)).collect();
        let (s, _) = rank_k_series(&space, &DMatrix::from_column_slice(t, 1, &a));
        let m = fit_far(&s, 1).unwrap();
        let mean = a.iter().sum::<f64>() / t as f64;
        let b: Vec<f64> = a.iter().map(|v| v - mean).collect();
        let lag: f64 = (0..t - 1).map(|i| b[i] * b[i + 1]).sum();
        let xi = b.iter().map(|v| v * v).sum::<f64>() / t as f64;
        assert!((m.operator[(0, 0)] - lag / ((t - 1) as f64 * xi)).abs() < 1e-10);
    }

    #[test]
    fn rank_two_operator_is_recovered() {
        let space = random_space(8, 5);
        let rho = nalgebra::dmatrix![0.6, 0.2; -0.3, 0.4];
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let t = 2000;
        let mut x = DMatrix::zeros(t, 2);
        let sd = [2.0, 1.0];
        for r in 1..t {
            let prev = x.row(r - 1).transpose();
            let next = &rho * prev;
            for l in 0..2 {
                let e: f64 = StandardNormal.sample(&mut rng);
                x[(r, l)] = next[l] + sd[l] * e;
            }
        }
        let (s, psi) = rank_k_series(&space, &x);
        let m = fit_far(&s, 2).unwrap();
        // express R in the planted basis: Q[l][j] = ⟨φ̂_j, ψ_l⟩
        let q = DMatrix::from_fn(2, 2, |l, j| inner_product(&m.eigenfunctions[j], &psi[l]).unwrap());
        let r = &q * &m.operator * q.transpose();
        assert!((r - rho).amax() < 0.05);
    }

    #[test]
    fn rank_deficient_input_is_guarded() {
        let space = random_space(6, 7);
        let a: Vec<f64> = (0..30).map(|i| (i as f64 * 0.7).sin()).collect();
        let (s, _) = rank_k_series(&space, &DMatrix::from_column_slice(30, 1, &a));
        assert!(matches!(fit_far(&s, 2), Err(Error::TruncationTooLarge { index: 2, .. })));
        let flat = SurfaceSeries::unlabelled(&space, DMatrix::from_element(10, space.dim(), 1.0)).unwrap();
        assert!(matches!(fit_far(&flat, 1), Err(Error::TruncationTooLarge { index: 1, .. })));
    }

    #[test]
    fn forecast_identities() {
        let space = random_space(6, 8);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let x = DMatrix::from_fn(40, 2, |_, _| StandardNormal.sample(&mut rng));
        let (s, _) = rank_k_series(&space, &x);
        let mut m = fit_far(&s, 2).unwrap();
        let last = s.last().unwrap();
        let mean = m.mean.clone();

        m.operator = DMatrix::zeros(2, 2);
        let f = far_forecast(&m, &last, &mean).unwrap();
        assert!((f.coefficients() - mean.coefficients()).amax() < 1e-12);

        m.operator = DMatrix::identity(2, 2);
        let f = far_forecast(&m, &last, &mean).unwrap();
        // the series is rank 2, so the projection reproduces the last surface
        assert!((f.coefficients() - last.coefficients()).amax() < 1e-9);

        m.operator = nalgebra::dmatrix![0.5, 1.0; 0.0, -2.0];
        let f = far_forecast(&m, &last, &mean).unwrap();
        let d = last.coefficients() - mean.coefficients();
        let b: Vec<f64> = m.eigenfunctions.iter().map(|p| space.mass_inner(&d, p.coefficients())).collect();
        let s0 = 0.5 * b[0] + b[1];
        let s1 = -2.0 * b[1];
        let want = mean.coefficients() + m.eigenfunctions[0].coefficients() * s0 + m.eigenfunctions[1].coefficients() * s1;
        assert!((f.coefficients() - want).amax() < 1e-12);
    }

    #[test]
    fn explained_rule_picks_smallest_sufficient_l() {
        let space = random_space(6, 9);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let x = DMatrix::from_fn(200, 3, |_, l| {
            let e: f64 = StandardNormal.sample(&mut rng);
            e * [3.0, 1.0, 0.3][l]
        });
        let (s, _) = rank_k_series(&space, &x);
        assert_eq!(far_truncation(&s, FarTruncation::Explained(0.8)).unwrap(), 1);
        assert_eq!(far_truncation(&s, FarTruncation::Explained(0.95)).unwrap(), 2);
        assert_eq!(far_truncation(&s, FarTruncation::Fixed(3)).unwrap(), 3);
    }
}
