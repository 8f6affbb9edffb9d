//! Run configuration read from a TOML file. Every numeric setting of a run
//! lives here; command-line flags only pick the command and paths.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::data::Peak;
use crate::error::{Error, Result};
use crate::features::FeatureSpec;
use crate::solver::TrainConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SyntheticSource {
    /// 308-row yacht-hydrodynamics-shaped table.
    Yacht,
    /// Eight-input flight-delay-shaped table.
    Airline,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataConfig {
    /// CSV file with a header row; takes precedence over `synthetic`.
    pub path: Option<PathBuf>,
    pub target: Option<String>,
    pub synthetic: Option<SyntheticSource>,
    /// Row count for synthetic sources that accept one.
    pub samples: Option<usize>,
    pub synthetic_seed: u64,
    pub train_fraction: f64,
    pub split_seed: u64,
    /// Standardize targets with the training split's mean and deviation.
    pub standardize_target: bool,
}

impl Default for DataConfig {
    fn default() -> Self {
        DataConfig {
            path: None,
            target: None,
            synthetic: None,
            samples: None,
            synthetic_seed: 0,
            train_fraction: 0.8,
            split_seed: 0,
            standardize_target: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CvConfig {
    pub lambda_grid: Vec<f64>,
    pub period_grid: Vec<f64>,
    pub folds: usize,
    pub seed: u64,
}

impl Default for CvConfig {
    fn default() -> Self {
        CvConfig {
            lambda_grid: vec![1e-8, 1e-6, 1e-4, 1e-3, 1e-2, 1e-1, 1.0],
            period_grid: vec![2.0, 4.0, 8.0, 16.0, 32.0, 64.0, 128.0],
            folds: 3,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SpectrumConfig {
    pub ranks: Vec<usize>,
    pub samples: usize,
    pub peaks: Vec<Peak>,
    pub noise_sd: f64,
    pub seed: u64,
    pub top_k: usize,
    pub max_epochs: usize,
    pub train_fraction: f64,
}

impl Default for SpectrumConfig {
    fn default() -> Self {
        SpectrumConfig {
            ranks: vec![10, 25, 50, 100],
            samples: 4096,
            peaks: default_peaks(),
            noise_sd: 0.05,
            seed: 0,
            top_k: 3,
            max_epochs: 30,
            train_fraction: 0.8,
        }
    }
}

/// Five tones of distinct amplitude spread over the band.
pub fn default_peaks() -> Vec<Peak> {
    [(37, 1.0, 0.3), (120, 0.7, 1.1), (203, 0.5, -0.4), (311, 0.35, 2.0), (64, 0.25, 0.0)]
        .into_iter()
        .map(|(frequency, amplitude, phase)| Peak {
            frequency,
            amplitude,
            phase,
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Qtkm,
    Tkm,
    Rff,
    Krr,
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Method::Qtkm => "QTKM",
            Method::Tkm => "TKM",
            Method::Rff => "RFF",
            Method::Krr => "KRR",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BenchmarkConfig {
    pub seeds: Vec<u64>,
    /// Ranks of the non-quantized model; every other method is matched to
    /// the resulting parameter budgets.
    pub tkm_ranks: Vec<usize>,
    pub methods: Vec<Method>,
    /// Choose `lambda` and the period by cross-validating kernel ridge
    /// regression on each training split; otherwise `train.lambda` and the
    /// feature period are used as given.
    pub cross_validate: bool,
    pub rff_lengthscale_grid: Vec<f64>,
}

impl Default for BenchmarkConfig {
    fn default() -> Self {
        BenchmarkConfig {
            seeds: (0..10).collect(),
            tkm_ranks: vec![1, 2, 3, 4, 5, 6],
            methods: vec![Method::Qtkm, Method::Tkm, Method::Rff, Method::Krr],
            cross_validate: true,
            rff_lengthscale_grid: vec![0.1, 0.2, 0.4, 0.8],
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PredictConfig {
    /// Weight container written by `train`.
    pub model: Option<PathBuf>,
    /// Unscaled inputs to predict on; the target column, if named in
    /// `data.target`, is used for evaluation.
    pub input: Option<PathBuf>,
    /// Scaling parameters written by `train`.
    pub scaling: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub features: FeatureSpec,
    #[serde(default)]
    pub train: TrainConfig,
    #[serde(default)]
    pub data: DataConfig,
    #[serde(default)]
    pub cv: CvConfig,
    #[serde(default)]
    pub spectrum: SpectrumConfig,
    #[serde(default)]
    pub benchmark: BenchmarkConfig,
    #[serde(default)]
    pub predict: PredictConfig,
}

impl RunConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let config: RunConfig = toml::from_str(text)?;
        config.validate()?;
        Ok(config)
    }

    /// Reads a config file; relative paths inside it are resolved against
    /// the file's directory.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::InvalidConfig(format!("cannot read {}: {e}", path.display())))?;
        let mut config = Self::from_toml_str(&text)?;
        let base = path.parent().unwrap_or_else(|| Path::new("."));
        for p in [
            &mut config.data.path,
            &mut config.predict.model,
            &mut config.predict.input,
            &mut config.predict.scaling,
        ]
        .into_iter()
        .flatten()
        {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(config)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config is always serializable")
    }

    pub fn validate(&self) -> Result<()> {
        self.train.validate()?;
        let d = &self.data;
        if !(d.train_fraction > 0.0 && d.train_fraction < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "data.train_fraction must lie in (0, 1), got {}",
                d.train_fraction
            )));
        }
        if self.cv.folds < 2 {
            return Err(Error::InvalidConfig("cv.folds must be at least 2".into()));
        }
        if self.benchmark.seeds.is_empty() {
            return Err(Error::InvalidConfig("benchmark.seeds must not be empty".into()));
        }
        if self.benchmark.tkm_ranks.contains(&0) {
            return Err(Error::InvalidConfig("benchmark.tkm_ranks must be positive".into()));
        }
        if self.spectrum.ranks.contains(&0) {
            return Err(Error::InvalidConfig("spectrum.ranks must be positive".into()));
        }
        Ok(())
    }
}
