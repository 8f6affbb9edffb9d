//! Exact kernel ridge regression through the product kernel, random Fourier
//! features, and k-fold cross validation of the kernel hyperparameters.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use ndarray::Array2;
use num_complex::Complex64;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{dense_factors, FeatureSpec};
use crate::linalg::{solve_hermitian, NormalEquations};

/// Largest training set `krr_fit` accepts by default.
pub const DEFAULT_KRR_MAX_SAMPLES: usize = 20_000;

/// Per-dimension dense feature vectors for every row.
fn dense_rows(x: &Array2<f64>, spec: &FeatureSpec) -> Result<Vec<Vec<Vec<Complex64>>>> {
    x.rows()
        .into_iter()
        .map(|row| {
            Ok(dense_factors(&row.to_vec(), spec)?
                .into_iter()
                .map(|b| b.entries)
                .collect())
        })
        .collect()
}

fn kernel_from_dense(a: &[Vec<Complex64>], b: &[Vec<Complex64>]) -> Complex64 {
    a.iter()
        .zip(b)
        .map(|(u, v)| u.iter().zip(v).map(|(p, q)| p.conj() * q).sum::<Complex64>())
        .product()
}

/// `k(x, x') = prod_d <v_d(x_d), v_d(x'_d)>`, conjugating the first argument.
pub fn product_kernel(x: &[f64], x_prime: &[f64], spec: &FeatureSpec) -> Result<Complex64> {
    if x.len() != x_prime.len() {
        return Err(Error::DimensionMismatch {
            expected: x.len(),
            got: x_prime.len(),
        });
    }
    let a = dense_factors(x, spec)?;
    let b = dense_factors(x_prime, spec)?;
    Ok(a.iter()
        .zip(&b)
        .map(|(u, v)| u.entries.iter().zip(&v.entries).map(|(p, q)| p.conj() * q).sum::<Complex64>())
        .product())
}

/// Kernel matrix `K[i, j] = k(a_i, b_j)`.
pub fn kernel_matrix(a: &Array2<f64>, b: &Array2<f64>, spec: &FeatureSpec) -> Result<DMatrix<Complex64>> {
    let fa = dense_rows(a, spec)?;
    let fb = dense_rows(b, spec)?;
    Ok(DMatrix::from_fn(fa.len(), fb.len(), |i, j| kernel_from_dense(&fa[i], &fb[j])))
}

/// Dual solution `alpha = (K + N lambda I)^-1 y`.
#[derive(Debug, Clone, PartialEq)]
pub struct DualModel {
    pub alpha: Vec<Complex64>,
    pub x_train: Array2<f64>,
    pub spec: FeatureSpec,
    pub lambda: f64,
}

pub fn krr_fit(x: &Array2<f64>, y: &[f64], lambda: f64, spec: &FeatureSpec) -> Result<DualModel> {
    krr_fit_capped(x, y, lambda, spec, DEFAULT_KRR_MAX_SAMPLES)
}

pub fn krr_fit_capped(
    x: &Array2<f64>,
    y: &[f64],
    lambda: f64,
    spec: &FeatureSpec,
    max_samples: usize,
) -> Result<DualModel> {
    let n = x.nrows();
    if n != y.len() {
        return Err(Error::DimensionMismatch { expected: n, got: y.len() });
    }
    if n == 0 {
        return Err(Error::Data("kernel ridge regression on an empty set".into()));
    }
    if n > max_samples {
        return Err(Error::CapExceeded {
            size: (n as u128) * (n as u128),
            cap: max_samples * max_samples,
        });
    }
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(Error::InvalidConfig(format!("lambda must be finite and >= 0, got {lambda}")));
    }
    let mut system = kernel_matrix(x, x, spec)?;
    for i in 0..n {
        system[(i, i)] += Complex64::new(n as f64 * lambda, 0.0);
    }
    let rhs = DVector::from_iterator(n, y.iter().map(|&v| Complex64::new(v, 0.0)));
    let (alpha, _) = solve_hermitian(&system, &rhs, lambda == 0.0)?;
    // normwise backward error of the solve
    let residual = (&system * &alpha - &rhs).norm();
    let scale = system.norm() * alpha.norm() + rhs.norm();
    if !(residual <= 1e-10 * scale.max(f64::MIN_POSITIVE)) {
        return Err(Error::Numerical(format!("dual solve backward error {:e} too large", residual / scale)));
    }
    Ok(DualModel {
        alpha: alpha.iter().copied().collect(),
        x_train: x.clone(),
        spec: spec.clone(),
        lambda,
    })
}

/// `Re(sum_n alpha_n k(x*, x_n))`.
pub fn krr_predict(model: &DualModel, x: &Array2<f64>) -> Result<Vec<f64>> {
    let k = kernel_matrix(x, &model.x_train, &model.spec)?;
    let alpha = DVector::from_column_slice(&model.alpha);
    Ok((k * alpha).iter().map(|v| v.re).collect())
}

/// Primal ridge regression on the explicit tensor-product features,
/// `min (1/N) sum |<z(x_n), w> - y_n|^2 + lambda ||w||^2`.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseRidge {
    pub weights: Vec<Complex64>,
    pub spec: FeatureSpec,
}

fn explicit_features(x: &Array2<f64>, spec: &FeatureSpec) -> Result<Vec<Vec<Complex64>>> {
    dense_rows(x, spec)?
        .into_iter()
        .map(|dims| {
            let refs: Vec<&[Complex64]> = dims.iter().map(Vec::as_slice).collect();
            crate::features::kron_fastest_first(&refs, crate::features::DEFAULT_DENSE_CAP)
        })
        .collect()
}

pub fn dense_ridge_fit(x: &Array2<f64>, y: &[f64], lambda: f64, spec: &FeatureSpec) -> Result<DenseRidge> {
    let rows = explicit_features(x, spec)?;
    let dim = rows.first().map_or(0, Vec::len);
    let mut normal = NormalEquations::new(dim);
    for (row, &t) in rows.iter().zip(y) {
        let conj: Vec<Complex64> = row.iter().map(|v| v.conj()).collect();
        normal.push(&conj, Complex64::new(t, 0.0));
    }
    let (mut m, b) = normal.finish(1.0 / rows.len().max(1) as f64);
    for i in 0..dim {
        m[(i, i)] += Complex64::new(lambda, 0.0);
    }
    let (w, _) = solve_hermitian(&m, &b, lambda == 0.0)?;
    Ok(DenseRidge {
        weights: w.iter().copied().collect(),
        spec: spec.clone(),
    })
}

pub fn dense_ridge_predict(model: &DenseRidge, x: &Array2<f64>) -> Result<Vec<f64>> {
    Ok(explicit_features(x, &model.spec)?
        .iter()
        .map(|z| z.iter().zip(&model.weights).map(|(a, w)| a.conj() * w).sum::<Complex64>().re)
        .collect())
}

/// Random cosine features `sqrt(2/P) cos(omega^T x + b)` for the Gaussian
/// kernel `exp(-|x - x'|^2 / (2 l^2))`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RffMap {
    /// `P x D`, row-major.
    pub omega: Vec<f64>,
    pub offsets: Vec<f64>,
    pub dims: usize,
    pub lengthscale: f64,
}

impl RffMap {
    pub fn new(dims: usize, num_features: usize, lengthscale: f64, seed: u64) -> Result<Self> {
        if num_features == 0 {
            return Err(Error::InvalidConfig("random feature count must be at least 1".into()));
        }
        if !(lengthscale > 0.0 && lengthscale.is_finite()) {
            return Err(Error::InvalidConfig(format!("lengthscale must be > 0, got {lengthscale}")));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let normal = Normal::new(0.0, 1.0 / lengthscale).expect("valid normal");
        let omega = (0..num_features * dims).map(|_| normal.sample(&mut rng)).collect();
        let offsets = (0..num_features).map(|_| rng.random_range(0.0..2.0 * PI)).collect();
        Ok(RffMap {
            omega,
            offsets,
            dims,
            lengthscale,
        })
    }

    pub fn num_features(&self) -> usize {
        self.offsets.len()
    }

    pub fn transform(&self, x: &Array2<f64>) -> Result<Array2<f64>> {
        if x.ncols() != self.dims {
            return Err(Error::DimensionMismatch {
                expected: self.dims,
                got: x.ncols(),
            });
        }
        let p = self.num_features();
        let scale = (2.0 / p as f64).sqrt();
        Ok(Array2::from_shape_fn((x.nrows(), p), |(n, j)| {
            let w = &self.omega[j * self.dims..(j + 1) * self.dims];
            let phase: f64 = w.iter().zip(x.row(n)).map(|(a, b)| a * b).sum::<f64>() + self.offsets[j];
            scale * phase.cos()
        }))
    }
}

pub fn rff_features(x: &Array2<f64>, num_features: usize, lengthscale: f64, seed: u64) -> Result<Array2<f64>> {
    RffMap::new(x.ncols(), num_features, lengthscale, seed)?.transform(x)
}

#[derive(Debug, Clone, PartialEq)]
pub struct RffModel {
    pub map: RffMap,
    pub weights: Vec<f64>,
}

/// Ridge regression on random Fourier features with the same `1/N` loss
/// scaling as the tensor models.
pub fn rff_fit(
    x: &Array2<f64>,
    y: &[f64],
    num_features: usize,
    lengthscale: f64,
    lambda: f64,
    seed: u64,
) -> Result<RffModel> {
    let map = RffMap::new(x.ncols(), num_features, lengthscale, seed)?;
    let z = map.transform(x)?;
    let mut normal = NormalEquations::new(num_features);
    let mut row = vec![Complex64::default(); num_features];
    for (zr, &t) in z.rows().into_iter().zip(y) {
        row.iter_mut().zip(zr).for_each(|(r, v)| *r = Complex64::new(*v, 0.0));
        normal.push(&row, Complex64::new(t, 0.0));
    }
    let (mut m, b) = normal.finish(1.0 / x.nrows().max(1) as f64);
    for i in 0..num_features {
        m[(i, i)] += Complex64::new(lambda, 0.0);
    }
    let (w, _) = solve_hermitian(&m, &b, lambda == 0.0)?;
    Ok(RffModel {
        map,
        weights: w.iter().map(|v| v.re).collect(),
    })
}

pub fn rff_predict(model: &RffModel, x: &Array2<f64>) -> Result<Vec<f64>> {
    let z = model.map.transform(x)?;
    Ok(z.rows()
        .into_iter()
        .map(|r| r.iter().zip(&model.weights).map(|(a, b)| a * b).sum())
        .collect())
}

/// Fold label for every index: a seeded permutation dealt round-robin.
pub fn kfold_assignment(n: usize, folds: usize, seed: u64) -> Result<Vec<usize>> {
    if folds < 2 || folds > n {
        return Err(Error::InvalidConfig(format!("cannot make {folds} folds from {n} samples")));
    }
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut fold = vec![0; n];
    for (i, &idx) in perm.iter().enumerate() {
        fold[idx] = i % folds;
    }
    Ok(fold)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvScore {
    pub lambda: f64,
    pub period: f64,
    pub mse: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvResult {
    pub lambda: f64,
    pub period: f64,
    pub scores: Vec<CvScore>,
}

fn select_rows(x: &Array2<f64>, idx: &[usize]) -> Array2<f64> {
    x.select(ndarray::Axis(0), idx)
}

/// Grid search over `(lambda, period)` minimizing mean validation MSE of
/// kernel ridge regression. Ties go to the larger `lambda`, then the larger
/// period.
pub fn cross_validate(
    x: &Array2<f64>,
    y: &[f64],
    spec: &FeatureSpec,
    lambda_grid: &[f64],
    period_grid: &[f64],
    folds: usize,
    seed: u64,
) -> Result<CvResult> {
    if lambda_grid.is_empty() || period_grid.is_empty() {
        return Err(Error::InvalidConfig("cross validation grids must be non-empty".into()));
    }
    let assignment = kfold_assignment(x.nrows(), folds, seed)?;
    let parts: Vec<(Vec<usize>, Vec<usize>)> = (0..folds)
        .map(|f| {
            let (held, kept): (Vec<usize>, Vec<usize>) = (0..x.nrows()).partition(|&i| assignment[i] == f);
            (kept, held)
        })
        .collect();
    let mut scores = Vec::with_capacity(lambda_grid.len() * period_grid.len());
    for &period in period_grid {
        let spec_l = spec.with_period(period)?;
        for &lambda in lambda_grid {
            let mut total = 0.0;
            for (train, held) in &parts {
                let ytr: Vec<f64> = train.iter().map(|&i| y[i]).collect();
                let model = krr_fit(&select_rows(x, train), &ytr, lambda, &spec_l)?;
                let pred = krr_predict(&model, &select_rows(x, held))?;
                total += held.iter().zip(&pred).map(|(&i, p)| (y[i] - p).powi(2)).sum::<f64>() / held.len() as f64;
            }
            scores.push(CvScore {
                lambda,
                period,
                mse: total / folds as f64,
            });
        }
    }
    let best = scores
        .iter()
        .filter(|s| s.mse.is_finite())
        .min_by(|a, b| {
            a.mse
                .total_cmp(&b.mse)
                .then(b.lambda.total_cmp(&a.lambda))
                .then(b.period.total_cmp(&a.period))
        })
        .ok_or_else(|| Error::Numerical("every cross validation score is non-finite".into()))?;
    Ok(CvResult {
        lambda: best.lambda,
        period: best.period,
        scores: scores.clone(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::{reconstruct_kron, Quantization};

    fn random_x(n: usize, d: usize, seed: u64) -> Array2<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Array2::from_shape_fn((n, d), |_| rng.random::<f64>())
    }

    #[test]
    fn kernel_self_similarity_and_polynomial_case() {
        let spec = FeatureSpec::fourier(vec![4, 8], Quantization::Dense, 1.0).unwrap();
        let k = product_kernel(&[0.3, 0.9], &[0.3, 0.9], &spec).unwrap();
        assert!((k - Complex64::new(32.0, 0.0)).norm() < 1e-12);
        let poly = FeatureSpec::polynomial(vec![2], Quantization::Dense).unwrap();
        let k = product_kernel(&[0.5], &[-0.4], &poly).unwrap();
        assert!((k - Complex64::new(1.0 - 0.2, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn kernel_matches_explicit_features() {
        let spec = FeatureSpec::fourier(vec![8, 8], Quantization::Dense, 1.3).unwrap();
        let (a, b) = ([0.21, 0.77], [0.64, 0.05]);
        let za = reconstruct_kron(&dense_factors(&a, &spec).unwrap()).unwrap();
        let zb = reconstruct_kron(&dense_factors(&b, &spec).unwrap()).unwrap();
        let want: Complex64 = za.iter().zip(&zb).map(|(p, q)| p.conj() * q).sum();
        let got = product_kernel(&a, &b, &spec).unwrap();
        assert!((got - want).norm() <= 1e-12 * want.norm());
    }

    #[test]
    fn kernel_matrix_is_hermitian_psd() {
        let spec = FeatureSpec::fourier(vec![4, 4, 4], Quantization::Dense, 1.0).unwrap();
        let x = random_x(30, 3, 1);
        let k = kernel_matrix(&x, &x, &spec).unwrap();
        assert!((&k - k.adjoint()).norm() <= 1e-12 * k.norm());
        let trace: f64 = (0..30).map(|i| k[(i, i)].re).sum();
        let eig = k.symmetric_eigenvalues();
        assert!(eig.iter().all(|&v| v >= -1e-10 * trace));
    }

    #[test]
    fn single_point_and_shrinkage() {
        let spec = FeatureSpec::fourier(vec![4], Quantization::Dense, 1.0).unwrap();
        let x = Array2::from_elem((1, 1), 0.4);
        let m = krr_fit(&x, &[2.0], 0.5, &spec).unwrap();
        assert!((m.alpha[0] - Complex64::new(2.0 / (4.0 + 0.5), 0.0)).norm() < 1e-14);
        let pred = krr_predict(&m, &x).unwrap();
        assert!((pred[0] - 4.0 * 2.0 / 4.5).abs() < 1e-13);

        let x = random_x(12, 1, 2);
        let y: Vec<f64> = (0..12).map(|i| i as f64).collect();
        let a1 = krr_fit(&x, &y, 1.0, &spec).unwrap();
        let a2 = krr_fit(&x, &y, 1e3, &spec).unwrap();
        let norm = |m: &DualModel| m.alpha.iter().map(|v| v.norm_sqr()).sum::<f64>();
        assert!(norm(&a2) < norm(&a1));
        assert!(a2.alpha.iter().all(|v| v.norm() < 1e-2));
    }

    #[test]
    fn interpolates_as_lambda_vanishes() {
        let spec = FeatureSpec::fourier(vec![16], Quantization::Dense, 1.0).unwrap();
        let x = Array2::from_shape_vec((6, 1), vec![0.05, 0.2, 0.4, 0.55, 0.7, 0.9]).unwrap();
        let y = vec![1.0, -0.5, 0.3, 2.0, 0.0, -1.0];
        let m = krr_fit(&x, &y, 1e-12, &spec).unwrap();
        let pred = krr_predict(&m, &x).unwrap();
        for (p, t) in pred.iter().zip(&y) {
            assert!((p - t).abs() < 1e-6);
        }
    }

    #[test]
    fn primal_and_dual_agree() {
        let spec = FeatureSpec::fourier(vec![4, 4], Quantization::Dense, 1.0).unwrap();
        let x = random_x(50, 2, 7);
        let y: Vec<f64> = x.rows().into_iter().map(|r| (4.0 * r[0]).sin() + r[1] * r[1]).collect();
        let xt = random_x(20, 2, 8);
        let dual = krr_predict(&krr_fit(&x, &y, 1e-3, &spec).unwrap(), &xt).unwrap();
        let primal = dense_ridge_predict(&dense_ridge_fit(&x, &y, 1e-3, &spec).unwrap(), &xt).unwrap();
        for (a, b) in dual.iter().zip(&primal) {
            assert!((a - b).abs() < 1e-8, "{a} vs {b}");
        }
    }

    #[test]
    fn sample_guard() {
        let spec = FeatureSpec::fourier(vec![2], Quantization::Dense, 1.0).unwrap();
        let x = random_x(5, 1, 1);
        assert!(matches!(
            krr_fit_capped(&x, &[0.0; 5], 1.0, &spec, 4),
            Err(Error::CapExceeded { .. })
        ));
    }

    #[test]
    fn rff_properties() {
        let mut x = random_x(4, 2, 3);
        x.column_mut(1).fill(0.5);
        let single = Array2::from_elem((4, 1), 0.5);
        let z = rff_features(&single, 16, 0.7, 1).unwrap();
        for j in 0..16 {
            assert!(z.column(j).iter().all(|&v| v == z[(0, j)]));
        }
        assert!(rff_features(&x, 0, 1.0, 1).is_err());
        assert_eq!(rff_features(&x, 8, 1.0, 9).unwrap(), rff_features(&x, 8, 1.0, 9).unwrap());
    }

    #[test]
    fn rff_approaches_gaussian_kernel() {
        let x = Array2::from_shape_vec((2, 2), vec![0.1, 0.4, 0.5, 0.2]).unwrap();
        let ell = 0.6;
        let z = rff_features(&x, 10_000, ell, 11).unwrap();
        let approx: f64 = z.row(0).iter().zip(z.row(1)).map(|(a, b)| a * b).sum();
        let d2 = 0.4f64.powi(2) + 0.2f64.powi(2);
        let exact = (-d2 / (2.0 * ell * ell)).exp();
        assert!((approx - exact).abs() < 0.05, "{approx} vs {exact}");
    }

    #[test]
    fn folds_partition_indices() {
        let f = kfold_assignment(10, 3, 4).unwrap();
        let counts: Vec<usize> = (0..3).map(|k| f.iter().filter(|&&v| v == k).count()).collect();
        assert_eq!(counts.iter().sum::<usize>(), 10);
        assert!(counts.iter().all(|&c| c == 3 || c == 4));
        assert_eq!(f, kfold_assignment(10, 3, 4).unwrap());
        assert!(kfold_assignment(2, 3, 0).is_err());
    }

    #[test]
    fn cv_grid_handling() {
        let spec = FeatureSpec::fourier(vec![4], Quantization::Dense, 1.0).unwrap();
        let x = random_x(12, 1, 5);
        let y: Vec<f64> = x.column(0).iter().map(|v| v.sin()).collect();
        let r = cross_validate(&x, &y, &spec, &[1e-3], &[2.0], 3, 0).unwrap();
        assert_eq!((r.lambda, r.period), (1e-3, 2.0));
        assert_eq!(r.scores.len(), 1);
        assert!(matches!(
            cross_validate(&x, &y, &spec, &[], &[1.0], 3, 0),
            Err(Error::InvalidConfig(_))
        ));
        assert!(cross_validate(&x, &y, &spec, &[1.0], &[], 3, 0).is_err());
    }

    #[test]
    fn cv_recovers_planted_period() {
        let truth = 1.0;
        let spec = FeatureSpec::fourier(vec![8], Quantization::Dense, truth).unwrap();
        let mut hits = 0;
        for seed in 0..10 {
            let mut rng = ChaCha8Rng::seed_from_u64(100 + seed);
            let w: Vec<Complex64> = (0..8).map(|_| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))).collect();
            let x = random_x(60, 1, 200 + seed);
            let noise = Normal::new(0.0, 0.05).unwrap();
            let y: Vec<f64> = x
                .rows()
                .into_iter()
                .map(|r| {
                    let z = &dense_factors(r.as_slice().unwrap(), &spec).unwrap()[0].entries;
                    z.iter().zip(&w).map(|(a, b)| a.conj() * b).sum::<Complex64>().re + noise.sample(&mut rng)
                })
                .collect();
            let r = cross_validate(&x, &y, &spec, &[1e-6], &[truth, 10.0 * truth], 3, seed).unwrap();
            hits += usize::from(r.period == truth);
        }
        assert!(hits >= 9, "{hits}/10");
    }
}
