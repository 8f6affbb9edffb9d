//! End-to-end pipelines shared by the command-line tool and the acceptance
//! suite: training with held-out evaluation, the matched-budget comparison of
//! tensor models against kernel baselines, and spectrum recovery on a
//! synthetic multi-tone signal.

use std::collections::BTreeMap;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::baselines::{
    cross_validate, dense_ridge_fit, kfold_assignment, krr_fit, krr_predict, rff_fit, rff_predict, CvResult,
};
use crate::config::{DataConfig, Method, RunConfig, SyntheticSource};
use crate::data::{
    load_csv, metrics, spectrum_extract, split, synth_signal, top_bins, Dataset, Metrics, Scaler, SpectrumBin,
    TargetScaler,
};
use crate::error::{Error, Result};
use crate::features::{FeatureSpec, Quantization};
use crate::solver::{als_train, predict, TrainConfig, TrainReport};
use crate::synthetic::{airline_like, yacht_like};
use crate::tensors::{compression_ratio, cpd_reconstruct, CpdWeights};

/// Default row count of the airline-shaped synthetic table.
pub const DEFAULT_AIRLINE_SAMPLES: usize = 100_000;

/// Loads the configured CSV file, or generates the configured synthetic table.
pub fn load_dataset(cfg: &DataConfig) -> Result<Dataset> {
    if let Some(path) = &cfg.path {
        let table = load_csv(path, cfg.target.as_deref())?;
        if table.y.is_none() {
            return Err(Error::InvalidConfig("data.target must name the target column".into()));
        }
        return Dataset::from_table(table, path.display().to_string());
    }
    match cfg.synthetic {
        Some(SyntheticSource::Yacht) => yacht_like(cfg.synthetic_seed),
        Some(SyntheticSource::Airline) => {
            airline_like(cfg.samples.unwrap_or(DEFAULT_AIRLINE_SAMPLES), cfg.synthetic_seed)
        }
        None => Err(Error::InvalidConfig("set data.path or data.synthetic".into())),
    }
}

/// Scaled train/test split with (optionally) standardized targets.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub train: Dataset,
    pub test: Dataset,
    pub scaler: Scaler,
    pub target: TargetScaler,
}

pub fn prepare(dataset: &Dataset, cfg: &DataConfig, split_seed: u64) -> Result<Prepared> {
    let parts = split(dataset, cfg.train_fraction, split_seed)?;
    let target = if cfg.standardize_target {
        TargetScaler::fit(&parts.train.y)
    } else {
        TargetScaler::identity()
    };
    let scaler = parts.train.scaler.clone().expect("split always fits a scaler");
    Ok(Prepared {
        train: parts.train.with_targets(target.transform(&parts.train.y)),
        test: parts.test.with_targets(target.transform(&parts.test.y)),
        scaler,
        target,
    })
}

/// Everything needed to map raw inputs to model outputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scaling {
    pub features: FeatureSpec,
    pub input: Scaler,
    pub target: TargetScaler,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub weights: CpdWeights,
    pub report: TrainReport,
    pub scaling: Scaling,
    /// Metrics in (standardized) target units.
    pub train_metrics: Metrics,
    pub test_metrics: Metrics,
    pub max_test_imag: f64,
}

pub fn run_train(cfg: &RunConfig) -> Result<TrainOutcome> {
    let dataset = load_dataset(&cfg.data)?;
    train_on(&dataset, cfg)
}

pub fn train_on(dataset: &Dataset, cfg: &RunConfig) -> Result<TrainOutcome> {
    if dataset.dims() != cfg.features.dims() {
        return Err(Error::Data(format!(
            "data has {} input columns but the feature spec has {} dimensions",
            dataset.dims(),
            cfg.features.dims()
        )));
    }
    let prep = prepare(dataset, &cfg.data, cfg.data.split_seed)?;
    let (weights, report) = als_train(&prep.train, &cfg.features, &cfg.train)?;
    let mean = prep.train.mean_target();
    let train_metrics = metrics(&prep.train.y, &report.fitted_values, mean)?;
    let test_pred = predict(&weights, &prep.test.x, &cfg.features)?;
    let test_metrics = metrics(&prep.test.y, &test_pred.values, mean)?;
    Ok(TrainOutcome {
        weights,
        report,
        scaling: Scaling {
            features: cfg.features.clone(),
            input: prep.scaler,
            target: prep.target,
        },
        train_metrics,
        test_metrics,
        max_test_imag: test_pred.max_imag,
    })
}

/// Predictions in original target units for unscaled inputs.
pub fn predict_raw(weights: &CpdWeights, scaling: &Scaling, x: &Array2<f64>) -> Result<Vec<f64>> {
    let scaled = scaling.input.transform(x)?;
    let pred = predict(weights, &scaled, &scaling.features)?;
    Ok(scaling.target.inverse(&pred.values))
}

/// Parameter count `R sum_d M_d` of a rank-`R` CPD over unquantized modes.
pub fn tkm_params(spec: &FeatureSpec, rank: usize) -> usize {
    rank * spec.basis_sizes().iter().sum::<usize>()
}

/// Parameter count `Q R sum_d K_d` of a rank-`R` CPD over quantized modes.
pub fn qtkm_params(spec: &FeatureSpec, rank: usize) -> usize {
    rank * spec.mode_dims().iter().sum::<usize>()
}

/// Largest quantized rank whose parameter count does not exceed that of the
/// unquantized model at `tkm_rank`: `floor(R sum M_d / (Q sum K_d))`.
pub fn matched_qtkm_rank(spec: &FeatureSpec, tkm_rank: usize) -> Result<usize> {
    let Quantization::Base(_) = spec.quantization() else {
        return Err(Error::InvalidSpec("budget matching needs a quantized spec".into()));
    };
    let rank = tkm_params(spec, tkm_rank) / qtkm_params(spec, 1);
    if rank == 0 {
        return Err(Error::InvalidConfig(format!(
            "TKM rank {tkm_rank} leaves no budget for a quantized model"
        )));
    }
    Ok(rank)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkRow {
    pub method: Method,
    /// Rank of the non-quantized model that set this budget.
    pub tkm_rank: usize,
    /// Rank actually trained (tensor methods only).
    pub rank: Option<usize>,
    /// Basis functions per input dimension.
    pub basis_size: usize,
    /// Realized parameter count.
    pub params: usize,
    pub mse_mean: f64,
    pub mse_sd: f64,
    /// Per-seed test MSE (standardized units) of the successful runs.
    pub mse_runs: Vec<f64>,
    pub failures: Vec<String>,
}

/// Hyperparameters used on one split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedSetup {
    pub seed: u64,
    pub lambda: f64,
    pub period: f64,
    pub rff_lengthscale: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkReport {
    pub rows: Vec<BenchmarkRow>,
    pub setups: Vec<SeedSetup>,
}

fn mean_sd(v: &[f64]) -> (f64, f64) {
    if v.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let sd = if v.len() > 1 {
        (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    } else {
        0.0
    };
    (mean, sd)
}

fn test_mse(truth: &[f64], pred: &[f64]) -> f64 {
    truth.iter().zip(pred).map(|(t, p)| (t - p).powi(2)).sum::<f64>() / truth.len() as f64
}

/// Lengthscale minimizing k-fold validation MSE of random-feature ridge.
fn cv_rff_lengthscale(
    train: &Dataset,
    grid: &[f64],
    num_features: usize,
    lambda: f64,
    folds: usize,
    seed: u64,
) -> Result<f64> {
    let assignment = kfold_assignment(train.len(), folds, seed)?;
    let mut best: Option<(f64, f64)> = None;
    for &ell in grid {
        let mut total = 0.0;
        for f in 0..folds {
            let (held, kept): (Vec<usize>, Vec<usize>) = (0..train.len()).partition(|&i| assignment[i] == f);
            let fit = train.select(&kept);
            let val = train.select(&held);
            let model = rff_fit(&fit.x, &fit.y, num_features, ell, lambda, seed)?;
            total += test_mse(&val.y, &rff_predict(&model, &val.x)?);
        }
        let score = total / folds as f64;
        if best.is_none_or(|(s, l)| score < s || (score == s && ell > l)) {
            best = Some((score, ell));
        }
    }
    best.map(|(_, l)| l)
        .ok_or_else(|| Error::InvalidConfig("benchmark.rff_lengthscale_grid must not be empty".into()))
}

/// Trains every configured method at every matched budget for every seed.
/// Individual failures are recorded in the rows and do not stop the run.
pub fn run_benchmark(cfg: &RunConfig, dataset: &Dataset) -> Result<BenchmarkReport> {
    let bench = &cfg.benchmark;
    if bench.seeds.is_empty() {
        return Err(Error::InvalidConfig("benchmark.seeds must not be empty".into()));
    }
    let quantized = &cfg.features;
    let basis = *quantized.basis_sizes().first().unwrap_or(&0);
    let budgets: Vec<(usize, usize)> = bench
        .tkm_ranks
        .iter()
        .map(|&r| Ok((r, matched_qtkm_rank(quantized, r)?)))
        .collect::<Result<_>>()?;
    let max_budget = budgets.iter().map(|&(r, _)| tkm_params(quantized, r)).max().unwrap_or(1);

    // (method, budget index) -> (mse per seed, failures)
    let mut results: BTreeMap<(usize, usize), (Vec<f64>, Vec<String>)> = BTreeMap::new();
    let mut setups = Vec::with_capacity(bench.seeds.len());
    for &seed in &bench.seeds {
        let prep = prepare(dataset, &cfg.data, seed)?;
        let (lambda, period) = if bench.cross_validate {
            let cv: CvResult = cross_validate(
                &prep.train.x,
                &prep.train.y,
                &quantized.to_dense(),
                &cfg.cv.lambda_grid,
                &cfg.cv.period_grid,
                cfg.cv.folds,
                cfg.cv.seed,
            )?;
            (cv.lambda, cv.period)
        } else {
            (cfg.train.lambda, quantized.period())
        };
        let spec_q = quantized.with_period(period)?;
        let spec_d = spec_q.to_dense();
        let rff_lengthscale = if bench.methods.contains(&Method::Rff) {
            cv_rff_lengthscale(&prep.train, &bench.rff_lengthscale_grid, max_budget, lambda, cfg.cv.folds, seed).ok()
        } else {
            None
        };
        log::info!("seed {seed}: lambda {lambda:e}, period {period}, rff lengthscale {rff_lengthscale:?}");
        setups.push(SeedSetup {
            seed,
            lambda,
            period,
            rff_lengthscale,
        });
        let krr_mse = if bench.methods.contains(&Method::Krr) {
            Some(
                krr_fit(&prep.train.x, &prep.train.y, lambda, &spec_d)
                    .and_then(|m| krr_predict(&m, &prep.test.x))
                    .map(|p| test_mse(&prep.test.y, &p)),
            )
        } else {
            None
        };
        for (mi, &method) in bench.methods.iter().enumerate() {
            for (bi, &(tkm_rank, q_rank)) in budgets.iter().enumerate() {
                let train_cfg = |rank| TrainConfig {
                    rank,
                    lambda,
                    seed: cfg.train.seed.wrapping_add(seed),
                    ..cfg.train.clone()
                };
                let outcome = match method {
                    Method::Tkm => als_train(&prep.train, &spec_d, &train_cfg(tkm_rank))
                        .and_then(|(w, _)| predict(&w, &prep.test.x, &spec_d))
                        .map(|p| test_mse(&prep.test.y, &p.values)),
                    Method::Qtkm => als_train(&prep.train, &spec_q, &train_cfg(q_rank))
                        .and_then(|(w, _)| predict(&w, &prep.test.x, &spec_q))
                        .map(|p| test_mse(&prep.test.y, &p.values)),
                    Method::Rff => match rff_lengthscale {
                        Some(ell) => rff_fit(
                            &prep.train.x,
                            &prep.train.y,
                            tkm_params(quantized, tkm_rank),
                            ell,
                            lambda,
                            seed,
                        )
                        .and_then(|m| rff_predict(&m, &prep.test.x))
                        .map(|p| test_mse(&prep.test.y, &p)),
                        None => Err(Error::Numerical("no usable random-feature lengthscale".into())),
                    },
                    Method::Krr => match &krr_mse {
                        Some(Ok(v)) => Ok(*v),
                        Some(Err(e)) => Err(Error::Numerical(e.to_string())),
                        None => unreachable!("computed when requested"),
                    },
                };
                let entry = results.entry((mi, bi)).or_default();
                match outcome {
                    Ok(mse) if mse.is_finite() => entry.0.push(mse),
                    Ok(mse) => entry.1.push(format!("seed {seed}: non-finite test MSE {mse}")),
                    Err(e) => entry.1.push(format!("seed {seed}: {e}")),
                }
            }
        }
    }
    let rows = results
        .into_iter()
        .map(|((mi, bi), (runs, failures))| {
            let method = bench.methods[mi];
            let (tkm_rank, q_rank) = budgets[bi];
            let (rank, params) = match method {
                Method::Tkm => (Some(tkm_rank), tkm_params(quantized, tkm_rank)),
                Method::Qtkm => (Some(q_rank), qtkm_params(quantized, q_rank)),
                Method::Rff => (None, tkm_params(quantized, tkm_rank)),
                Method::Krr => {
                    let n_train = (cfg.data.train_fraction * dataset.len() as f64).round() as usize;
                    (None, n_train)
                }
            };
            let (mse_mean, mse_sd) = mean_sd(&runs);
            BenchmarkRow {
                method,
                tkm_rank,
                rank,
                basis_size: basis,
                params,
                mse_mean,
                mse_sd,
                mse_runs: runs,
                failures,
            }
        })
        .collect();
    Ok(BenchmarkReport { rows, setups })
}

/// CSV table with one row per (method, budget).
pub fn write_benchmark_csv<W: std::io::Write>(rows: &[BenchmarkRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["method", "tkm_rank", "rank", "M", "P", "mse_mean", "mse_sd", "runs", "failures"])?;
    for r in rows {
        w.write_record([
            r.method.to_string(),
            r.tkm_rank.to_string(),
            r.rank.map_or(String::new(), |v| v.to_string()),
            r.basis_size.to_string(),
            r.params.to_string(),
            r.mse_mean.to_string(),
            r.mse_sd.to_string(),
            r.mse_runs.len().to_string(),
            r.failures.len().to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumRow {
    pub rank: usize,
    pub params: usize,
    pub compression_ratio: f64,
    /// `||w_dense - w_cpd|| / ||w_dense||` against the unregularized dense fit.
    pub rel_weight_error: f64,
    pub test_smae: Option<f64>,
    pub top_frequencies: Vec<f64>,
    /// Whether the strongest planted tone is among the top bins.
    pub strongest_peak_hit: bool,
    pub final_objective: f64,
    pub epochs: usize,
    pub monotone: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumReport {
    pub basis_size: usize,
    pub dense_test_smae: Option<f64>,
    pub rows: Vec<SpectrumRow>,
}

#[derive(Debug, Clone)]
pub struct SpectrumOutcome {
    pub report: SpectrumReport,
    pub dense_bins: Vec<SpectrumBin>,
    /// One spectrum per configured rank.
    pub bins: Vec<Vec<SpectrumBin>>,
}

/// Fits unregularized quantized Fourier models of increasing rank to a
/// synthetic multi-tone signal and compares their coefficient vectors with
/// the dense least-squares solution.
pub fn run_spectrum(cfg: &RunConfig) -> Result<SpectrumOutcome> {
    let s = &cfg.spectrum;
    let spec = &cfg.features;
    if spec.dims() != 1 || spec.kind() != crate::features::FeatureKind::Fourier || !spec.is_quantized() {
        return Err(Error::InvalidSpec("spectrum runs need a one-dimensional quantized Fourier spec".into()));
    }
    let signal = synth_signal(s.samples, &s.peaks, s.noise_sd, s.seed)?;
    let parts = split(&signal.dataset, s.train_fraction, s.seed)?;
    // the signal already lives on [0, 1]; keep the raw abscissa
    let train = signal.dataset.select(&parts.train_indices);
    let test = signal.dataset.select(&parts.test_indices);
    let mean = train.mean_target();

    let dense_spec = spec.to_dense();
    let dense = dense_ridge_fit(&train.x, &train.y, 0.0, &dense_spec)?;
    let dense_pred = crate::baselines::dense_ridge_predict(&dense, &test.x)?;
    let dense_test_smae = metrics(&test.y, &dense_pred, mean)?.smae;
    let dense_norm = dense.weights.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
    let dense_weights = CpdWeights::new(vec![dense.weights.len()], 1, vec![dense.weights.clone()])?;
    let dense_bins = spectrum_extract(&dense_weights, &dense_spec)?;

    let strongest = s
        .peaks
        .iter()
        .max_by(|a, b| a.amplitude.abs().total_cmp(&b.amplitude.abs()))
        .map(|p| p.frequency as f64);
    let features = spec.feature_len();
    let mut rows = Vec::with_capacity(s.ranks.len());
    let mut all_bins = Vec::with_capacity(s.ranks.len());
    for &rank in &s.ranks {
        let train_cfg = TrainConfig {
            rank,
            lambda: 0.0,
            max_epochs: s.max_epochs,
            ..cfg.train.clone()
        };
        let (weights, report) = als_train(&train, spec, &train_cfg)?;
        let full = cpd_reconstruct(&weights)?;
        let err = full
            .iter()
            .zip(&dense.weights)
            .map(|(a, b)| (a - b).norm_sqr())
            .sum::<f64>()
            .sqrt()
            / dense_norm;
        let pred = predict(&weights, &test.x, spec)?;
        let bins = spectrum_extract(&weights, spec)?;
        let top: Vec<f64> = top_bins(&bins, s.top_k).into_iter().map(|i| bins[i].frequency).collect();
        let hit = strongest.is_some_and(|f| top.iter().any(|t| (t.abs() - f.abs()).abs() < 1e-9));
        let params = weights.param_count();
        log::info!("spectrum rank {rank}: relative weight error {err:.4}, top {top:?}");
        rows.push(SpectrumRow {
            rank,
            params,
            compression_ratio: compression_ratio(features, params as u128),
            rel_weight_error: err,
            test_smae: metrics(&test.y, &pred.values, mean)?.smae,
            top_frequencies: top,
            strongest_peak_hit: hit,
            final_objective: report.final_objective,
            epochs: report.epoch_count,
            monotone: report.worst_relative_increase() <= 1e-9,
        });
        all_bins.push(bins);
    }
    Ok(SpectrumOutcome {
        report: SpectrumReport {
            basis_size: spec.basis_sizes()[0],
            dense_test_smae,
            rows,
        },
        dense_bins,
        bins: all_bins,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn budget_matching() {
        let spec = FeatureSpec::fourier(vec![16; 6], Quantization::Base(2), 1.0).unwrap();
        assert_eq!(tkm_params(&spec, 2), 192);
        assert_eq!(qtkm_params(&spec, 1), 48);
        assert_eq!(matched_qtkm_rank(&spec, 2).unwrap(), 4);
        assert_eq!(matched_qtkm_rank(&spec, 1).unwrap(), 2);
        for r in 1..=6 {
            let q = matched_qtkm_rank(&spec, r).unwrap();
            assert!(qtkm_params(&spec, q) <= tkm_params(&spec, r));
            assert!(qtkm_params(&spec, q + 1) > tkm_params(&spec, r));
        }
        let odd = FeatureSpec::fourier(vec![8, 8], Quantization::Base(2), 1.0).unwrap();
        // 16 / 12 rounds down
        assert_eq!(matched_qtkm_rank(&odd, 1).unwrap(), 1);
        assert!(matched_qtkm_rank(&spec.to_dense(), 1).is_err());
    }

    fn small_config() -> RunConfig {
        RunConfig::from_toml_str(
            r#"
[features]
kind = "fourier"
M = [4, 4]
Q = 2
L = 2.0

[train]
rank = 2
lambda = 1e-4
max_epochs = 5

[data]
synthetic = "airline"
samples = 200

[benchmark]
seeds = [0, 1]
tkm_ranks = [1, 2]
cross_validate = false
rff_lengthscale_grid = [0.5]
"#,
        )
        .unwrap()
    }

    #[test]
    fn benchmark_row_count_and_budgets() {
        let mut cfg = small_config();
        cfg.features = FeatureSpec::fourier(vec![4; 8], Quantization::Base(2), 2.0).unwrap();
        let data = load_dataset(&cfg.data).unwrap();
        let report = run_benchmark(&cfg, &data).unwrap();
        assert_eq!(report.rows.len(), 4 * 2);
        assert_eq!(report.setups.len(), 2);
        for row in &report.rows {
            assert!(row.failures.is_empty(), "{:?}", row.failures);
            assert_eq!(row.mse_runs.len(), 2);
            if row.method == Method::Qtkm {
                assert!(row.params <= tkm_params(&cfg.features, row.tkm_rank));
            }
        }
    }

    #[test]
    fn train_pipeline_is_deterministic() {
        let mut cfg = small_config();
        cfg.features = FeatureSpec::fourier(vec![4; 8], Quantization::Base(2), 2.0).unwrap();
        let a = run_train(&cfg).unwrap();
        let b = run_train(&cfg).unwrap();
        assert_eq!(a.weights, b.weights);
        assert_eq!(a.report.objective_history, b.report.objective_history);
        assert!(a.test_metrics.mse.is_finite());
        let mismatched = small_config();
        assert!(matches!(run_train(&mismatched), Err(Error::Data(_))));
    }
}
