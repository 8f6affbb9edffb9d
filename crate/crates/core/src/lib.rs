//! Quantized tensor-network kernel machines.
//!
//! Polynomial and Fourier feature maps over `D` inputs are Kronecker products
//! of per-dimension Vandermonde vectors. When every basis size is a power of
//! `Q`, each of those vectors splits exactly into `log_Q M` factors of length
//! `Q`. Constraining the weights to a CPD over these small modes gives models
//! whose response costs `O(R sum log M)` and which train by alternating least
//! squares.

pub mod baselines;
pub mod config;
pub mod data;
pub mod error;
pub mod experiments;
pub mod features;
pub mod linalg;
pub mod solver;
pub mod synthetic;
pub mod tensors;

pub use error::{Error, ErrorClass, Result};
pub use features::{FactorBlock, FeatureKind, FeatureSpec, Quantization};
pub use solver::{als_train, predict, TrainConfig, TrainReport};
pub use tensors::{CpdWeights, TtWeights, Weights};
