//! Dataset ingestion, unit-box scaling, splits, metrics and the synthetic
//! multi-tone signal used for spectrum recovery.

use std::collections::HashSet;
use std::f64::consts::PI;
use std::io::Write;
use std::path::Path;

use ndarray::{Array2, Axis};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{FeatureKind, FeatureSpec, DEFAULT_DENSE_CAP};
use crate::tensors::{cpd_reconstruct_capped, CpdWeights};

/// Numeric table read from a CSV file, target split off.
#[derive(Debug, Clone, PartialEq)]
pub struct RawTable {
    pub feature_names: Vec<String>,
    pub x: Array2<f64>,
    pub y: Option<Vec<f64>>,
}

/// Reads a numeric CSV with a header row. Every column other than `target`
/// becomes a feature; when `target` is `None` all columns are features.
pub fn load_csv(path: impl AsRef<Path>, target: Option<&str>) -> Result<RawTable> {
    let path = path.as_ref();
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_path(path)?;
    let headers: Vec<String> = reader.headers()?.iter().map(str::to_owned).collect();
    if headers.is_empty() || headers.iter().all(String::is_empty) {
        return Err(Error::Data(format!("{} is empty", path.display())));
    }
    let target_idx = match target {
        Some(name) => Some(
            headers
                .iter()
                .position(|h| h == name)
                .ok_or_else(|| Error::Data(format!("target column {name:?} not found in {}", path.display())))?,
        ),
        None => None,
    };
    let feature_names: Vec<String> = headers
        .iter()
        .enumerate()
        .filter(|(i, _)| Some(*i) != target_idx)
        .map(|(_, h)| h.clone())
        .collect();
    let mut values = Vec::new();
    let mut y = Vec::new();
    let mut rows = 0;
    for (row, record) in reader.records().enumerate() {
        let record = record?;
        if record.len() != headers.len() {
            return Err(Error::Parse {
                row: row + 1,
                column: String::new(),
                message: format!("expected {} fields, found {}", headers.len(), record.len()),
            });
        }
        for (i, cell) in record.iter().enumerate() {
            let v: f64 = cell.parse().map_err(|_| Error::Parse {
                row: row + 1,
                column: headers[i].clone(),
                message: format!("{cell:?} is not a number"),
            })?;
            if !v.is_finite() {
                return Err(Error::Parse {
                    row: row + 1,
                    column: headers[i].clone(),
                    message: format!("{cell:?} is not finite"),
                });
            }
            if Some(i) == target_idx {
                y.push(v);
            } else {
                values.push(v);
            }
        }
        rows += 1;
    }
    if rows == 0 {
        return Err(Error::Data(format!("{} has no data rows", path.display())));
    }
    let x = Array2::from_shape_vec((rows, feature_names.len()), values)
        .map_err(|e| Error::Data(format!("bad table shape: {e}")))?;
    Ok(RawTable {
        feature_names,
        x,
        y: target_idx.map(|_| y),
    })
}

/// Per-column min-max map onto `[0, 1]`, fitted on training rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scaler {
    pub min: Vec<f64>,
    pub max: Vec<f64>,
}

impl Scaler {
    pub fn fit(x: &Array2<f64>) -> Self {
        let min = x
            .axis_iter(Axis(1))
            .map(|c| c.iter().cloned().fold(f64::INFINITY, f64::min))
            .collect();
        let max = x
            .axis_iter(Axis(1))
            .map(|c| c.iter().cloned().fold(f64::NEG_INFINITY, f64::max))
            .collect();
        Scaler { min, max }
    }

    /// Constant columns map to zero.
    pub fn transform(&self, x: &Array2<f64>) -> Result<Array2<f64>> {
        if x.ncols() != self.min.len() {
            return Err(Error::DimensionMismatch {
                expected: self.min.len(),
                got: x.ncols(),
            });
        }
        let mut out = x.clone();
        for (j, mut col) in out.axis_iter_mut(Axis(1)).enumerate() {
            let (lo, range) = (self.min[j], self.max[j] - self.min[j]);
            col.mapv_inplace(|v| if range > 0.0 { (v - lo) / range } else { 0.0 });
        }
        Ok(out)
    }
}

/// Zero-mean unit-variance map for targets, fitted on training targets.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TargetScaler {
    pub mean: f64,
    pub sd: f64,
}

impl TargetScaler {
    pub fn fit(y: &[f64]) -> Self {
        let n = y.len().max(1) as f64;
        let mean = y.iter().sum::<f64>() / n;
        let var = y.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        let sd = if var > 0.0 { var.sqrt() } else { 1.0 };
        TargetScaler { mean, sd }
    }

    pub fn identity() -> Self {
        TargetScaler { mean: 0.0, sd: 1.0 }
    }

    pub fn transform(&self, y: &[f64]) -> Vec<f64> {
        y.iter().map(|v| (v - self.mean) / self.sd).collect()
    }

    pub fn inverse(&self, y: &[f64]) -> Vec<f64> {
        y.iter().map(|v| v * self.sd + self.mean).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub x: Array2<f64>,
    pub y: Vec<f64>,
    pub scaler: Option<Scaler>,
    pub provenance: String,
}

impl Dataset {
    pub fn new(x: Array2<f64>, y: Vec<f64>, provenance: impl Into<String>) -> Result<Self> {
        if x.nrows() != y.len() {
            return Err(Error::DimensionMismatch {
                expected: x.nrows(),
                got: y.len(),
            });
        }
        if x.iter().chain(&y).any(|v| !v.is_finite()) {
            return Err(Error::Data("dataset contains NaN or infinite values".into()));
        }
        Ok(Dataset {
            x,
            y,
            scaler: None,
            provenance: provenance.into(),
        })
    }

    pub fn from_table(table: RawTable, provenance: impl Into<String>) -> Result<Self> {
        let y = table
            .y
            .ok_or_else(|| Error::Data("table has no target column".into()))?;
        Self::new(table.x, y, provenance)
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    pub fn dims(&self) -> usize {
        self.x.ncols()
    }

    pub fn row(&self, n: usize) -> Vec<f64> {
        self.x.row(n).to_vec()
    }

    pub fn select(&self, indices: &[usize]) -> Dataset {
        Dataset {
            x: self.x.select(Axis(0), indices),
            y: indices.iter().map(|&i| self.y[i]).collect(),
            scaler: self.scaler.clone(),
            provenance: self.provenance.clone(),
        }
    }

    pub fn with_targets(&self, y: Vec<f64>) -> Dataset {
        Dataset { y, ..self.clone() }
    }

    pub fn mean_target(&self) -> f64 {
        self.y.iter().sum::<f64>() / self.len().max(1) as f64
    }
}

#[derive(Debug, Clone)]
pub struct TrainTestSplit {
    pub train: Dataset,
    pub test: Dataset,
    pub train_indices: Vec<usize>,
    pub test_indices: Vec<usize>,
}

/// Uniform random split. The scaler is fitted on the training rows and
/// applied to both parts.
pub fn split(dataset: &Dataset, train_fraction: f64, seed: u64) -> Result<TrainTestSplit> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(Error::InvalidConfig(format!(
            "train fraction must lie in (0, 1), got {train_fraction}"
        )));
    }
    let n = dataset.len();
    let n_train = (train_fraction * n as f64).round() as usize;
    if n_train == 0 || n_train == n {
        return Err(Error::Data(format!(
            "a {train_fraction} split of {n} rows leaves one side empty"
        )));
    }
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let train_indices = perm[..n_train].to_vec();
    let test_indices = perm[n_train..].to_vec();
    let mut train = dataset.select(&train_indices);
    let mut test = dataset.select(&test_indices);
    let scaler = Scaler::fit(&train.x);
    train.x = scaler.transform(&train.x)?;
    test.x = scaler.transform(&test.x)?;
    train.scaler = Some(scaler.clone());
    test.scaler = Some(scaler);
    let tag = format!("{} (split seed {seed})", dataset.provenance);
    train.provenance = tag.clone();
    test.provenance = tag;
    Ok(TrainTestSplit {
        train,
        test,
        train_indices,
        test_indices,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub mse: f64,
    pub mae: f64,
    /// MAE relative to the MAE of predicting the training mean; `None` when
    /// that reference MAE is zero.
    pub smae: Option<f64>,
}

pub fn metrics(y_true: &[f64], y_pred: &[f64], y_train_mean: f64) -> Result<Metrics> {
    if y_true.len() != y_pred.len() {
        return Err(Error::DimensionMismatch {
            expected: y_true.len(),
            got: y_pred.len(),
        });
    }
    if y_true.is_empty() {
        return Err(Error::Data("metrics of an empty set".into()));
    }
    let n = y_true.len() as f64;
    let mse = y_true.iter().zip(y_pred).map(|(t, p)| (t - p).powi(2)).sum::<f64>() / n;
    let mae = y_true.iter().zip(y_pred).map(|(t, p)| (t - p).abs()).sum::<f64>() / n;
    let reference = y_true.iter().map(|t| (t - y_train_mean).abs()).sum::<f64>() / n;
    let smae = (reference > 0.0).then(|| mae / reference);
    Ok(Metrics { mse, mae, smae })
}

/// One cosine component `a cos(2 pi f x + phi)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Peak {
    pub frequency: i64,
    pub amplitude: f64,
    pub phase: f64,
}

#[derive(Debug, Clone)]
pub struct SynthSignal {
    pub dataset: Dataset,
    pub peaks: Vec<Peak>,
    pub noise_sd: f64,
}

impl SynthSignal {
    /// Noise-free value at `x`.
    pub fn clean(&self, x: f64) -> f64 {
        clean_signal(&self.peaks, x)
    }
}

fn clean_signal(peaks: &[Peak], x: f64) -> f64 {
    peaks
        .iter()
        .map(|p| p.amplitude * (2.0 * PI * p.frequency as f64 * x + p.phase).cos())
        .sum()
}

/// Sum of cosines sampled at uniform random points of `[0, 1]`, plus Gaussian
/// noise.
pub fn synth_signal(num_samples: usize, peaks: &[Peak], noise_sd: f64, seed: u64) -> Result<SynthSignal> {
    let mut seen = HashSet::new();
    for p in peaks {
        if !seen.insert(p.frequency) {
            return Err(Error::InvalidConfig(format!("duplicate frequency {}", p.frequency)));
        }
    }
    if !(noise_sd >= 0.0) {
        return Err(Error::InvalidConfig(format!("noise sd must be non-negative, got {noise_sd}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let xs: Vec<f64> = (0..num_samples).map(|_| rng.random::<f64>()).collect();
    let noise = Normal::new(0.0, noise_sd).map_err(|e| Error::InvalidConfig(e.to_string()))?;
    let y: Vec<f64> = xs
        .iter()
        .map(|&x| clean_signal(peaks, x) + if noise_sd > 0.0 { noise.sample(&mut rng) } else { 0.0 })
        .collect();
    let x = Array2::from_shape_vec((num_samples, 1), xs).expect("column vector shape");
    Ok(SynthSignal {
        dataset: Dataset::new(x, y, format!("synthetic signal (seed {seed})"))?,
        peaks: peaks.to_vec(),
        noise_sd,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectrumBin {
    pub index: usize,
    pub frequency: f64,
    pub magnitude: f64,
}

/// Magnitudes of the full coefficient vector of a one-dimensional Fourier
/// model, paired with each entry's frequency.
pub fn spectrum_extract(weights: &CpdWeights, spec: &FeatureSpec) -> Result<Vec<SpectrumBin>> {
    if spec.kind() != FeatureKind::Fourier || spec.dims() != 1 {
        return Err(Error::InvalidSpec("spectra need a one-dimensional Fourier model".into()));
    }
    if weights.mode_dims() != spec.mode_dims().as_slice() {
        return Err(Error::ShapeMismatch("weights do not match the feature spec".into()));
    }
    let coefficients = cpd_reconstruct_capped(weights, DEFAULT_DENSE_CAP)?;
    Ok(coefficients
        .iter()
        .enumerate()
        .map(|(m, c)| SpectrumBin {
            index: m,
            frequency: spec.frequency(0, m),
            magnitude: c.norm(),
        })
        .collect())
}

/// Bin indices ordered by decreasing magnitude (ties by index).
pub fn top_bins(bins: &[SpectrumBin], k: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..bins.len()).collect();
    order.sort_by(|&a, &b| bins[b].magnitude.total_cmp(&bins[a].magnitude).then(a.cmp(&b)));
    order.truncate(k);
    order
}

/// Two-column `frequency,magnitude` CSV.
pub fn write_spectrum_csv<W: Write>(bins: &[SpectrumBin], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["frequency", "magnitude"])?;
    for b in bins {
        w.write_record([b.frequency.to_string(), b.magnitude.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::Quantization;
    use num_complex::Complex64;

    fn write_tmp(content: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(content.as_bytes()).unwrap();
        f
    }

    #[test]
    fn csv_loading() {
        let f = write_tmp("a,b,y\n1,2,3\n4,5,6\n4,5,6\n");
        let t = load_csv(f.path(), Some("y")).unwrap();
        assert_eq!(t.feature_names, vec!["a", "b"]);
        assert_eq!(t.x, ndarray::array![[1.0, 2.0], [4.0, 5.0], [4.0, 5.0]]);
        assert_eq!(t.y, Some(vec![3.0, 6.0, 6.0]));

        assert!(matches!(load_csv(f.path(), Some("target")), Err(Error::Data(_))));

        let bad = write_tmp("a,y\n1,2\nfoo,3\n");
        match load_csv(bad.path(), Some("y")) {
            Err(Error::Parse { row, column, .. }) => assert_eq!((row, column.as_str()), (2, "a")),
            other => panic!("unexpected {other:?}"),
        }
        let empty = write_tmp("");
        assert!(load_csv(empty.path(), Some("y")).is_err());
        let header_only = write_tmp("a,y\n");
        assert!(load_csv(header_only.path(), Some("y")).is_err());
    }

    #[test]
    fn scaling_is_idempotent() {
        let x = ndarray::array![[1.0, 5.0, 2.0], [3.0, -1.0, 2.0], [2.0, 0.5, 2.0]];
        let s = Scaler::fit(&x);
        let once = s.transform(&x).unwrap();
        assert!(once.iter().all(|v| (0.0..=1.0).contains(v)));
        let twice = Scaler::fit(&once).transform(&once).unwrap();
        assert!(once.iter().zip(&twice).all(|(a, b)| (a - b).abs() <= 1e-15));
    }

    #[test]
    fn split_properties() {
        let x = Array2::from_shape_fn((10, 2), |(i, j)| (i * 3 + j) as f64);
        let d = Dataset::new(x, (0..10).map(|i| i as f64).collect(), "t").unwrap();
        let s = split(&d, 0.8, 42).unwrap();
        assert_eq!((s.train.len(), s.test.len()), (8, 2));
        let again = split(&d, 0.8, 42).unwrap();
        assert_eq!(s.train_indices, again.train_indices);
        let mut all: Vec<usize> = s.train_indices.iter().chain(&s.test_indices).copied().collect();
        all.sort();
        assert_eq!(all, (0..10).collect::<Vec<_>>());
        assert!(s.train.x.iter().all(|v| (0.0..=1.0).contains(v)));
        assert!(split(&d, 1.0, 0).is_err());
        assert!(split(&d, 0.0, 0).is_err());
    }

    #[test]
    fn split_partition_over_many_seeds() {
        for n in [2usize, 3, 7, 50] {
            let d = Dataset::new(Array2::zeros((n, 1)), vec![0.0; n], "z").unwrap();
            for seed in 0..20 {
                let s = split(&d, 0.5, seed).unwrap();
                let mut all: Vec<usize> = s.train_indices.iter().chain(&s.test_indices).copied().collect();
                all.sort();
                assert_eq!(all, (0..n).collect::<Vec<_>>());
            }
        }
    }

    #[test]
    fn metric_examples() {
        let m = metrics(&[1.0, 2.0], &[1.0, 2.0], 0.0).unwrap();
        assert_eq!((m.mse, m.smae), (0.0, Some(0.0)));
        let m = metrics(&[1.0, 3.0, 2.0], &[2.0, 2.0, 2.0], 2.0).unwrap();
        assert_eq!(m.smae, Some(1.0));
        let m = metrics(&[0.0, 2.0], &[1.0, 1.0], 1.0).unwrap();
        assert_eq!((m.mse, m.mae, m.smae), (1.0, 1.0, Some(1.0)));
        let m = metrics(&[1.0, 1.0], &[0.0, 2.0], 1.0).unwrap();
        assert_eq!(m.smae, None);
        assert!(metrics(&[1.0], &[1.0, 2.0], 0.0).is_err());
    }

    #[test]
    fn synth_signal_cases() {
        let peak = Peak {
            frequency: 3,
            amplitude: 1.0,
            phase: 0.0,
        };
        let s = synth_signal(50, &[peak], 0.0, 1).unwrap();
        for (x, y) in s.dataset.x.column(0).iter().zip(&s.dataset.y) {
            assert!((y - (2.0 * PI * 3.0 * x).cos()).abs() < 1e-15);
        }
        let noise = synth_signal(2000, &[], 0.5, 2).unwrap();
        let var = noise.dataset.y.iter().map(|v| v * v).sum::<f64>() / 2000.0;
        assert!((var - 0.25).abs() < 0.03);
        assert!(synth_signal(10, &[peak, peak], 0.0, 0).is_err());
    }

    #[test]
    fn synth_signal_energy() {
        // mean of y^2 over uniform x approaches sum a_k^2 / 2
        let peaks = [
            Peak { frequency: 5, amplitude: 1.0, phase: 0.3 },
            Peak { frequency: 17, amplitude: 0.5, phase: -1.0 },
        ];
        let s = synth_signal(20000, &peaks, 0.0, 9).unwrap();
        let energy = s.dataset.y.iter().map(|v| v * v).sum::<f64>() / 20000.0;
        assert!((energy - 0.625).abs() < 0.02, "energy {energy}");
        // midpoint-rule quadrature of the clean signal is essentially exact
        let grid = 4096;
        let quad = (0..grid)
            .map(|i| s.clean((i as f64 + 0.5) / grid as f64).powi(2))
            .sum::<f64>()
            / grid as f64;
        assert!((quad - 0.625).abs() < 1e-12);
    }

    #[test]
    fn spectrum_of_one_hot_and_zero() {
        let spec = FeatureSpec::fourier(vec![8], Quantization::Base(2), 1.0).unwrap();
        // one-hot at index 5 = digits (1, 0, 1)
        let digits = [1, 0, 1];
        let w = CpdWeights::from_fn(vec![2; 3], 1, |p, q, _| {
            Complex64::new(if q == digits[p] { 1.0 } else { 0.0 }, 0.0)
        })
        .unwrap();
        let bins = spectrum_extract(&w, &spec).unwrap();
        let nonzero: Vec<_> = bins.iter().filter(|b| b.magnitude > 0.0).collect();
        assert_eq!(nonzero.len(), 1);
        assert_eq!(nonzero[0].index, 5);
        assert_eq!(nonzero[0].frequency, 0.0);
        assert_eq!(top_bins(&bins, 1), vec![5]);

        let zero = CpdWeights::zeros(vec![2; 3], 2).unwrap();
        assert!(spectrum_extract(&zero, &spec).unwrap().iter().all(|b| b.magnitude == 0.0));

        let mut out = Vec::new();
        write_spectrum_csv(&bins[..2], &mut out).unwrap();
        assert_eq!(String::from_utf8(out).unwrap(), "frequency,magnitude\n5,0\n4,0\n");
    }
}
