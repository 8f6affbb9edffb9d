//! Alternating least squares for CPD-constrained kernel machines under
//! squared loss with the exact `lambda ||w||^2` penalty.
//!
//! Each factor update solves the convex subproblem
//!
//! ```text
//! ((1/N) A^H A + lambda (G_{!=p} (x) I_{n_p})) vec(W_p) = (1/N) A^H y
//! ```
//!
//! where row `n` of `A` is `conj(s_p(x_n)) (x) zeta_n`, `zeta_n[r]` is the
//! product of the other modes' projections, and `G_{!=p}` is the Hadamard
//! product of the other factors' Gram matrices. `vec(W_p)` is indexed
//! `r * n_p + q`, matching the factor storage.

use std::io::Write;
use std::time::Instant;

use nalgebra::DVector;
use ndarray::Array2;
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::features::{feature_blocks, FactorBlock, FeatureSpec};
use crate::linalg::{solve_hermitian, NormalEquations};
use crate::tensors::{cpd_norm_sq, cpd_response, gram, norm_sq_from_grams, project_mode, CpdWeights};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub rank: usize,
    pub lambda: f64,
    /// Budget in full sweeps over all modes.
    pub max_epochs: usize,
    /// Stop once an epoch lowers the objective by less than this fraction.
    pub rel_tol: f64,
    pub seed: u64,
    pub init_scale: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            rank: 4,
            lambda: 1e-6,
            max_epochs: 50,
            rel_tol: 0.0,
            seed: 0,
            init_scale: 1.0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.rank == 0 {
            return Err(Error::InvalidConfig("rank must be at least 1".into()));
        }
        if self.max_epochs == 0 {
            return Err(Error::InvalidConfig("max_epochs must be at least 1".into()));
        }
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(Error::InvalidConfig(format!("lambda must be finite and >= 0, got {}", self.lambda)));
        }
        if !(self.rel_tol >= 0.0) {
            return Err(Error::InvalidConfig(format!("rel_tol must be >= 0, got {}", self.rel_tol)));
        }
        if !(self.init_scale > 0.0 && self.init_scale.is_finite()) {
            return Err(Error::InvalidConfig(format!("init_scale must be > 0, got {}", self.init_scale)));
        }
        Ok(())
    }
}

/// One factor update.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UpdateRecord {
    pub epoch: usize,
    pub mode: usize,
    pub objective: f64,
    /// Seconds since training started.
    pub timestamp: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub initial_objective: f64,
    /// Objective after every factor update.
    pub objective_history: Vec<f64>,
    pub updates: Vec<UpdateRecord>,
    pub epoch_count: usize,
    pub final_objective: f64,
    pub wall_time: f64,
    /// Real part of the model response on every training row after the
    /// final sweep.
    pub fitted_values: Vec<f64>,
    pub max_fitted_imag: f64,
}

impl TrainReport {
    pub fn update_count(&self) -> usize {
        self.objective_history.len()
    }

    /// One JSON object per factor update.
    pub fn write_jsonl<W: Write>(&self, mut out: W) -> Result<()> {
        for u in &self.updates {
            serde_json::to_writer(&mut out, u)?;
            out.write_all(b"\n")?;
        }
        Ok(())
    }

    /// Largest relative increase between consecutive objective values
    /// (initial objective included); non-positive for a monotone run.
    pub fn worst_relative_increase(&self) -> f64 {
        std::iter::once(&self.initial_objective)
            .chain(&self.objective_history)
            .collect::<Vec<_>>()
            .windows(2)
            .map(|w| (w[1] - w[0]) / w[0].abs().max(f64::MIN_POSITIVE))
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

/// i.i.d. complex Gaussian factors (`E|z|^2 = 1`) scaled by
/// `init_scale / sqrt(R n_p)`.
pub fn init_factors(mode_dims: &[usize], rank: usize, seed: u64, init_scale: f64) -> Result<CpdWeights> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let part = Normal::new(0.0, std::f64::consts::FRAC_1_SQRT_2).expect("valid normal");
    let scales: Vec<f64> = mode_dims.iter().map(|&n| init_scale / ((rank * n) as f64).sqrt()).collect();
    CpdWeights::from_fn(mode_dims.to_vec(), rank, |p, _, _| {
        let re = part.sample(&mut rng);
        let im = part.sample(&mut rng);
        Complex64::new(re, im) * scales[p]
    })
}

fn feature_rows(x: &Array2<f64>, spec: &FeatureSpec) -> Result<Vec<Vec<FactorBlock>>> {
    x.rows()
        .into_iter()
        .map(|row| feature_blocks(&row.to_vec(), spec))
        .collect()
}

/// `(1/N) sum_n |f(x_n) - y_n|^2 + lambda ||w||^2`, with the complex
/// response `f` and the exact full-tensor norm.
pub fn objective(weights: &CpdWeights, dataset: &Dataset, spec: &FeatureSpec, lambda: f64) -> Result<f64> {
    let rows = feature_rows(&dataset.x, spec)?;
    let mut fit = 0.0;
    for (blocks, &y) in rows.iter().zip(&dataset.y) {
        fit += (cpd_response(weights, blocks)? - y).norm_sqr();
    }
    Ok(fit / dataset.len().max(1) as f64 + lambda * cpd_norm_sq(weights))
}

/// Training state: feature blocks for every sample plus cached per-mode
/// projections and Gram matrices of the current weights.
#[derive(Debug, Clone)]
pub struct AlsWorkspace {
    samples: usize,
    rank: usize,
    mode_dims: Vec<usize>,
    offsets: Vec<usize>,
    stride: usize,
    /// Sample-major: sample `n`, mode `p`, entry `q` at `n * stride + offsets[p] + q`.
    blocks: Vec<Complex64>,
    y: Vec<Complex64>,
    /// `proj[(n * P + p) * R + r] = <s_p(x_n), W_p[:, r]>`.
    proj: Vec<Complex64>,
    grams: Vec<Vec<Complex64>>,
}

impl AlsWorkspace {
    pub fn new(dataset: &Dataset, spec: &FeatureSpec, weights: &CpdWeights) -> Result<Self> {
        Self::from_blocks(&feature_rows(&dataset.x, spec)?, &dataset.y, weights)
    }

    pub fn from_blocks(rows: &[Vec<FactorBlock>], y: &[f64], weights: &CpdWeights) -> Result<Self> {
        let y: Vec<Complex64> = y.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        Self::from_blocks_complex(rows, &y, weights)
    }

    /// Workspace for complex-valued targets.
    pub fn from_blocks_complex(rows: &[Vec<FactorBlock>], y: &[Complex64], weights: &CpdWeights) -> Result<Self> {
        if rows.len() != y.len() {
            return Err(Error::DimensionMismatch {
                expected: rows.len(),
                got: y.len(),
            });
        }
        if rows.is_empty() {
            return Err(Error::Data("cannot train on an empty dataset".into()));
        }
        let mode_dims = weights.mode_dims().to_vec();
        let mut offsets = Vec::with_capacity(mode_dims.len());
        let mut stride = 0;
        for &n in &mode_dims {
            offsets.push(stride);
            stride += n;
        }
        let mut blocks = Vec::with_capacity(rows.len() * stride);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != mode_dims.len() || row.iter().zip(&mode_dims).any(|(b, &n)| b.len() != n) {
                return Err(Error::ShapeMismatch(format!(
                    "sample {i} blocks do not match mode sizes {mode_dims:?}"
                )));
            }
            for b in row {
                blocks.extend_from_slice(&b.entries);
            }
        }
        let modes = mode_dims.len();
        let rank = weights.rank();
        let mut ws = AlsWorkspace {
            samples: rows.len(),
            rank,
            mode_dims,
            offsets,
            stride,
            blocks,
            y: y.to_vec(),
            proj: vec![Complex64::default(); rows.len() * modes * rank],
            grams: Vec::with_capacity(modes),
        };
        for p in 0..modes {
            ws.refresh_mode(weights, p);
            ws.grams.push(gram(weights.factor(p), ws.mode_dims[p], rank));
        }
        Ok(ws)
    }

    pub fn samples(&self) -> usize {
        self.samples
    }

    fn modes(&self) -> usize {
        self.mode_dims.len()
    }

    fn block(&self, n: usize, p: usize) -> &[Complex64] {
        let start = n * self.stride + self.offsets[p];
        &self.blocks[start..start + self.mode_dims[p]]
    }

    fn refresh_mode(&mut self, weights: &CpdWeights, p: usize) {
        let (modes, rank) = (self.modes(), self.rank);
        let mut out = vec![Complex64::default(); rank];
        for n in 0..self.samples {
            let start = n * self.stride + self.offsets[p];
            let block = &self.blocks[start..start + self.mode_dims[p]];
            project_mode(weights, p, block, &mut out, &mut ());
            let at = (n * modes + p) * rank;
            self.proj[at..at + rank].copy_from_slice(&out);
        }
    }

    /// `zeta[r] = prod_{p' != p} proj[n, p', r]`.
    fn others_product(&self, n: usize, p: usize, zeta: &mut [Complex64]) {
        let (modes, rank) = (self.modes(), self.rank);
        zeta.fill(Complex64::new(1.0, 0.0));
        for q in (0..modes).filter(|&q| q != p) {
            let at = (n * modes + q) * rank;
            for (z, v) in zeta.iter_mut().zip(&self.proj[at..at + rank]) {
                *z *= v;
            }
        }
    }

    /// Complex responses `f(x_n)` of the cached model.
    pub fn responses(&self) -> Vec<Complex64> {
        let (modes, rank) = (self.modes(), self.rank);
        (0..self.samples)
            .map(|n| {
                let base = n * modes * rank;
                (0..rank)
                    .map(|r| (0..modes).map(|p| self.proj[base + p * rank + r]).product::<Complex64>())
                    .sum()
            })
            .collect()
    }

    pub fn objective(&self, lambda: f64) -> f64 {
        let fit: f64 = self
            .responses()
            .iter()
            .zip(&self.y)
            .map(|(f, y)| (f - y).norm_sqr())
            .sum::<f64>()
            / self.samples as f64;
        fit + lambda * norm_sq_from_grams(&self.grams, self.rank)
    }

    /// Solves the subproblem for factor `p` exactly and refreshes the caches.
    pub fn update_factor(&mut self, weights: &mut CpdWeights, p: usize, lambda: f64) -> Result<()> {
        let (n_p, rank) = (self.mode_dims[p], self.rank);
        let dim = n_p * rank;
        let mut normal = NormalEquations::new(dim);
        let mut zeta = vec![Complex64::default(); rank];
        let mut row = vec![Complex64::default(); dim];
        for n in 0..self.samples {
            self.others_product(n, p, &mut zeta);
            let block = self.block(n, p);
            for (r, z) in zeta.iter().enumerate() {
                for (q, s) in block.iter().enumerate() {
                    row[r * n_p + q] = s.conj() * z;
                }
            }
            normal.push(&row, self.y[n]);
        }
        let (mut system, rhs) = normal.finish(1.0 / self.samples as f64);
        if lambda > 0.0 {
            let mut others = vec![Complex64::new(1.0, 0.0); rank * rank];
            for (q, g) in self.grams.iter().enumerate() {
                if q != p {
                    others.iter_mut().zip(g).for_each(|(h, v)| *h *= v);
                }
            }
            for r in 0..rank {
                for s in 0..rank {
                    let h = others[r * rank + s] * lambda;
                    for q in 0..n_p {
                        system[(r * n_p + q, s * n_p + q)] += h;
                    }
                }
            }
        }
        let (solution, method) = solve_hermitian(&system, &rhs, lambda == 0.0)
            .map_err(|e| Error::Numerical(format!("mode {p} update: {e}")))?;
        log::trace!("mode {p}: solved {dim}x{dim} system via {method:?}");
        let factor: Vec<Complex64> = solution.iter().copied().collect();
        weights.set_factor(p, factor)?;
        self.refresh_mode(weights, p);
        self.grams[p] = gram(weights.factor(p), n_p, rank);
        Ok(())
    }

    /// Equalizes column norms across modes for every rank index. The tensor
    /// itself, and therefore the objective, is unchanged.
    pub fn rebalance(&mut self, weights: &mut CpdWeights) {
        let (modes, rank) = (self.modes(), self.rank);
        for r in 0..rank {
            let norms: Vec<f64> = (0..modes)
                .map(|p| weights.column(p, r).iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt())
                .collect();
            if norms.iter().any(|&v| v == 0.0 || !v.is_finite()) {
                continue;
            }
            let log_mean = norms.iter().map(|v| v.ln()).sum::<f64>() / modes as f64;
            let target = log_mean.exp();
            for (p, &norm) in norms.iter().enumerate() {
                let scale = target / norm;
                let n = self.mode_dims[p];
                weights.factor_mut(p)[r * n..(r + 1) * n].iter_mut().for_each(|v| *v *= scale);
                for sample in 0..self.samples {
                    self.proj[(sample * modes + p) * rank + r] *= scale;
                }
                let g = &mut self.grams[p];
                for s in 0..rank {
                    g[r * rank + s] *= scale;
                    g[s * rank + r] *= scale;
                }
            }
        }
    }
}

/// Trains a CPD model by ALS sweeps in ascending mode order.
pub fn als_train(dataset: &Dataset, spec: &FeatureSpec, config: &TrainConfig) -> Result<(CpdWeights, TrainReport)> {
    config.validate()?;
    let mut weights = init_factors(&spec.mode_dims(), config.rank, config.seed, config.init_scale)?;
    let report = als_train_from(dataset, spec, config, &mut weights)?;
    Ok((weights, report))
}

/// ALS starting from caller-provided weights.
pub fn als_train_from(
    dataset: &Dataset,
    spec: &FeatureSpec,
    config: &TrainConfig,
    weights: &mut CpdWeights,
) -> Result<TrainReport> {
    config.validate()?;
    if weights.mode_dims() != spec.mode_dims().as_slice() {
        return Err(Error::ShapeMismatch("initial weights do not match the feature spec".into()));
    }
    let start = Instant::now();
    let mut ws = AlsWorkspace::new(dataset, spec, weights)?;
    let initial_objective = ws.objective(config.lambda);
    let mut history = Vec::with_capacity(config.max_epochs * weights.num_modes());
    let mut updates = Vec::with_capacity(history.capacity());
    let mut previous = initial_objective;
    let mut epochs = 0;
    for epoch in 0..config.max_epochs {
        for p in 0..weights.num_modes() {
            ws.update_factor(weights, p, config.lambda)?;
            let value = ws.objective(config.lambda);
            if !value.is_finite() {
                return Err(Error::Numerical(format!("objective became {value} at epoch {epoch}, mode {p}")));
            }
            history.push(value);
            updates.push(UpdateRecord {
                epoch,
                mode: p,
                objective: value,
                timestamp: start.elapsed().as_secs_f64(),
            });
        }
        ws.rebalance(weights);
        epochs = epoch + 1;
        let current = *history.last().expect("at least one mode");
        log::debug!("epoch {epoch}: objective {current:.6e}");
        if previous > 0.0 && (previous - current) / previous < config.rel_tol {
            break;
        }
        previous = current;
    }
    let responses = ws.responses();
    let final_objective = *history.last().unwrap_or(&initial_objective);
    Ok(TrainReport {
        initial_objective,
        objective_history: history,
        updates,
        epoch_count: epochs,
        final_objective,
        wall_time: start.elapsed().as_secs_f64(),
        fitted_values: responses.iter().map(|f| f.re).collect(),
        max_fitted_imag: responses.iter().map(|f| f.im.abs()).fold(0.0, f64::max),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub values: Vec<f64>,
    /// Largest `|Im f(x)|` seen; a health check for real-valued targets.
    pub max_imag: f64,
}

/// Real part of the model response for every row of `x`.
pub fn predict(weights: &CpdWeights, x: &Array2<f64>, spec: &FeatureSpec) -> Result<Prediction> {
    if weights.mode_dims() != spec.mode_dims().as_slice() {
        return Err(Error::ShapeMismatch("weights do not match the feature spec".into()));
    }
    let mut values = Vec::with_capacity(x.nrows());
    let mut max_imag = 0.0f64;
    for row in x.rows() {
        let blocks = feature_blocks(&row.to_vec(), spec)?;
        let f = cpd_response(weights, &blocks)?;
        values.push(f.re);
        max_imag = max_imag.max(f.im.abs());
    }
    Ok(Prediction { values, max_imag })
}

/// Ridge solution for a single dense factor, used to cross-check ALS.
pub fn dense_ridge(rows: &[Vec<Complex64>], y: &[f64], lambda: f64) -> Result<DVector<Complex64>> {
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
    Ok(solve_hermitian(&m, &b, lambda == 0.0)?.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::Quantization;
    use crate::tensors::cpd_reconstruct;
    use rand::Rng;

    fn dataset_1d(n: usize, seed: u64, f: impl Fn(f64) -> f64) -> Dataset {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let xs: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
        let y = xs.iter().map(|&x| f(x)).collect();
        Dataset::new(Array2::from_shape_vec((n, 1), xs).unwrap(), y, "test").unwrap()
    }

    #[test]
    fn init_is_deterministic_and_scaled() {
        let a = init_factors(&[2, 2, 3], 3, 9, 1.0).unwrap();
        let b = init_factors(&[2, 2, 3], 3, 9, 1.0).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, init_factors(&[2, 2, 3], 3, 10, 1.0).unwrap());
        let zero = init_factors(&[2, 2], 2, 1, 0.0).unwrap();
        assert!(zero.factors().iter().flatten().all(|v| *v == Complex64::default()));
    }

    #[test]
    fn zero_model_objective_is_mean_square() {
        let spec = FeatureSpec::fourier(vec![4], Quantization::Base(2), 1.0).unwrap();
        let d = dataset_1d(20, 1, |x| 3.0 * x - 1.0);
        let w = init_factors(&spec.mode_dims(), 2, 0, 0.0).unwrap();
        let want = d.y.iter().map(|v| v * v).sum::<f64>() / 20.0;
        assert!((objective(&w, &d, &spec, 0.5).unwrap() - want).abs() < 1e-15);
        let p = predict(&w, &d.x, &spec).unwrap();
        assert!(p.values.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn single_dense_factor_is_ridge() {
        let spec = FeatureSpec::fourier(vec![6], Quantization::Dense, 1.0).unwrap();
        let d = dataset_1d(40, 3, |x| (2.0 * std::f64::consts::PI * x).sin() + 0.3);
        let config = TrainConfig {
            rank: 1,
            lambda: 1e-3,
            max_epochs: 1,
            ..TrainConfig::default()
        };
        let (w, _) = als_train(&d, &spec, &config).unwrap();
        let rows: Vec<Vec<Complex64>> = d
            .x
            .rows()
            .into_iter()
            .map(|r| feature_blocks(r.as_slice().unwrap(), &spec).unwrap()[0].entries.clone())
            .collect();
        let ridge = dense_ridge(&rows, &d.y, 1e-3).unwrap();
        let got = cpd_reconstruct(&w).unwrap();
        for (a, b) in got.iter().zip(ridge.iter()) {
            assert!((a - b).norm() < 1e-9, "{a} vs {b}");
        }
    }

    #[test]
    fn objective_decreases_every_update() {
        let spec = FeatureSpec::fourier(vec![8, 4], Quantization::Base(2), 1.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let n = 60;
        let xs: Vec<f64> = (0..2 * n).map(|_| rng.random::<f64>()).collect();
        let x = Array2::from_shape_vec((n, 2), xs).unwrap();
        let y = x.rows().into_iter().map(|r| (3.0 * r[0]).sin() * r[1] + 0.1).collect();
        let d = Dataset::new(x, y, "t").unwrap();
        let config = TrainConfig {
            rank: 3,
            lambda: 1e-4,
            max_epochs: 10,
            ..TrainConfig::default()
        };
        let (w, report) = als_train(&d, &spec, &config).unwrap();
        assert_eq!(report.objective_history.len(), 10 * 5);
        assert!(report.worst_relative_increase() <= 1e-9);
        let direct = objective(&w, &d, &spec, 1e-4).unwrap();
        assert!((direct - report.final_objective).abs() <= 1e-10 * direct);
        let pred = predict(&w, &d.x, &spec).unwrap();
        for (a, b) in pred.values.iter().zip(&report.fitted_values) {
            assert!((a - b).abs() < 1e-10);
        }
        let column_major = d.x.t().as_standard_layout().into_owned().reversed_axes();
        assert!(column_major.as_slice().is_none());
        assert_eq!(predict(&w, &column_major, &spec).unwrap(), pred);
    }

    #[test]
    fn rel_tol_stops_early_and_zero_epochs_rejected() {
        let spec = FeatureSpec::fourier(vec![4], Quantization::Base(2), 1.0).unwrap();
        let d = dataset_1d(30, 2, |x| x);
        let config = TrainConfig {
            rank: 1,
            max_epochs: 200,
            rel_tol: 1e-3,
            ..TrainConfig::default()
        };
        let (_, report) = als_train(&d, &spec, &config).unwrap();
        assert!(report.epoch_count < 200);
        let bad = TrainConfig {
            max_epochs: 0,
            ..config
        };
        assert!(matches!(als_train(&d, &spec, &bad), Err(Error::InvalidConfig(_))));
    }

    #[test]
    fn rebalance_keeps_the_tensor() {
        let spec = FeatureSpec::fourier(vec![8], Quantization::Base(2), 1.0).unwrap();
        let d = dataset_1d(10, 4, |x| x);
        let mut w = init_factors(&spec.mode_dims(), 2, 3, 1.0).unwrap();
        w.factor_mut(0).iter_mut().for_each(|v| *v *= 1e6);
        let before = cpd_reconstruct(&w).unwrap();
        let mut ws = AlsWorkspace::new(&d, &spec, &w).unwrap();
        let obj = ws.objective(0.1);
        ws.rebalance(&mut w);
        let after = cpd_reconstruct(&w).unwrap();
        for (a, b) in before.iter().zip(&after) {
            assert!((a - b).norm() <= 1e-12 * a.norm().max(1e-300));
        }
        assert!((ws.objective(0.1) - obj).abs() <= 1e-12 * obj);
        let norms: Vec<f64> = (0..3).map(|p| w.column(p, 0).iter().map(|v| v.norm_sqr()).sum::<f64>()).collect();
        assert!((norms[0] / norms[2] - 1.0).abs() < 1e-9);
    }

    #[test]
    fn report_jsonl() {
        let spec = FeatureSpec::fourier(vec![4], Quantization::Base(2), 1.0).unwrap();
        let d = dataset_1d(12, 2, |x| x);
        let config = TrainConfig {
            rank: 1,
            max_epochs: 2,
            ..TrainConfig::default()
        };
        let (_, report) = als_train(&d, &spec, &config).unwrap();
        let mut out = Vec::new();
        report.write_jsonl(&mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 4);
        let rec: UpdateRecord = serde_json::from_str(lines[3]).unwrap();
        assert_eq!((rec.epoch, rec.mode), (1, 1));
    }
}
