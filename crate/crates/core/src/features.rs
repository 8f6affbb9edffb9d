//! Pure-power polynomial and Fourier feature maps, dense and quantized.
//!
//! A dense map stores one Vandermonde-structured vector of length `M_d` per
//! input dimension. When `M_d = Q^K_d`, each of those vectors factors exactly
//! into `K_d` Kronecker factors of length `Q`, and the quantized map stores
//! those factors instead.
//!
//! Index convention: within a dimension, block `k = 1` addresses the least
//! significant base-`Q` digit of the monomial index, so that
//! `m = q_1 + q_2 Q + ... + q_K Q^(K-1)`. Across dimensions the first
//! dimension varies fastest. [`reconstruct_kron`] and every contraction in
//! [`crate::tensors`] follow this single ordering.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default bound on the length of any densely materialized vector.
pub const DEFAULT_DENSE_CAP: usize = 1 << 24;

/// Tolerance on `|x| <= 1` for polynomial inputs.
pub const POLYNOMIAL_DOMAIN_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FeatureKind {
    Polynomial,
    Fourier,
}

impl fmt::Display for FeatureKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FeatureKind::Polynomial => f.write_str("polynomial"),
            FeatureKind::Fourier => f.write_str("fourier"),
        }
    }
}

impl FromStr for FeatureKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "polynomial" | "poly" => Ok(FeatureKind::Polynomial),
            "fourier" => Ok(FeatureKind::Fourier),
            other => Err(Error::InvalidSpec(format!("unknown feature kind {other:?}"))),
        }
    }
}

/// Quantization base of a feature map. `Dense` keeps the full per-dimension
/// Vandermonde vectors.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Quantization {
    Dense,
    Base(usize),
}

impl Serialize for Quantization {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Quantization::Dense => s.serialize_str("none"),
            Quantization::Base(q) => s.serialize_u64(*q as u64),
        }
    }
}

impl<'de> Deserialize<'de> for Quantization {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Int(u64),
            Str(String),
        }
        match Raw::deserialize(d)? {
            Raw::Int(q) => Ok(Quantization::Base(q as usize)),
            Raw::Str(s) if s.eq_ignore_ascii_case("none") => Ok(Quantization::Dense),
            Raw::Str(s) => s
                .parse::<usize>()
                .map(Quantization::Base)
                .map_err(|_| serde::de::Error::custom(format!("Q must be an integer or \"none\", got {s:?}"))),
        }
    }
}

/// Serialized form of [`FeatureSpec`]; validated on conversion.
#[derive(Debug, Clone, Serialize, Deserialize)]
struct RawFeatureSpec {
    kind: FeatureKind,
    #[serde(rename = "M", deserialize_with = "one_or_many")]
    m: Vec<usize>,
    #[serde(rename = "Q")]
    q: Quantization,
    #[serde(rename = "L", default = "default_period")]
    period: f64,
    #[serde(default)]
    frequency_shift: i64,
}

/// Accepts `M = 16` as shorthand for `M = [16]`.
fn one_or_many<'de, D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Vec<usize>, D::Error> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Raw {
        One(usize),
        Many(Vec<usize>),
    }
    Ok(match Raw::deserialize(d)? {
        Raw::One(m) => vec![m],
        Raw::Many(m) => m,
    })
}

fn default_period() -> f64 {
    1.0
}

/// Declarative description of a tensor-product feature map.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawFeatureSpec", into = "RawFeatureSpec")]
pub struct FeatureSpec {
    kind: FeatureKind,
    m: Vec<usize>,
    q: Quantization,
    period: f64,
    frequency_shift: i64,
    /// `log_Q(M_d)`, found by integer division; empty for dense maps.
    k: Vec<u32>,
}

impl TryFrom<RawFeatureSpec> for FeatureSpec {
    type Error = Error;

    fn try_from(raw: RawFeatureSpec) -> Result<Self> {
        FeatureSpec::new(raw.kind, raw.m, raw.q, raw.period)
            .map(|spec| spec.with_frequency_shift(raw.frequency_shift))
    }
}

impl From<FeatureSpec> for RawFeatureSpec {
    fn from(spec: FeatureSpec) -> Self {
        RawFeatureSpec {
            kind: spec.kind,
            m: spec.m,
            q: spec.q,
            period: spec.period,
            frequency_shift: spec.frequency_shift,
        }
    }
}

/// Returns `K` with `q^K == m`, or `None` when `m` is not a positive power of `q`.
pub fn exact_log(m: usize, q: usize) -> Option<u32> {
    if q < 2 || m < q {
        return None;
    }
    let mut rest = m;
    let mut k = 0;
    while rest > 1 {
        if rest % q != 0 {
            return None;
        }
        rest /= q;
        k += 1;
    }
    Some(k)
}

impl FeatureSpec {
    pub fn new(kind: FeatureKind, m: Vec<usize>, q: Quantization, period: f64) -> Result<Self> {
        if m.is_empty() {
            return Err(Error::InvalidSpec("M must list at least one dimension".into()));
        }
        if let Some(d) = m.iter().position(|&md| md == 0) {
            return Err(Error::InvalidSpec(format!("M_{d} must be positive")));
        }
        if kind == FeatureKind::Fourier && !(period.is_finite() && period > 0.0) {
            return Err(Error::InvalidSpec(format!("period L must be positive, got {period}")));
        }
        let k = match q {
            Quantization::Dense => Vec::new(),
            Quantization::Base(base) if base < 2 => {
                return Err(Error::InvalidSpec(format!("Q must be at least 2, got {base}")));
            }
            Quantization::Base(base) => m
                .iter()
                .enumerate()
                .map(|(d, &md)| exact_log(md, base).ok_or(Error::NotAPower { dim: d + 1, m: md, q: base }))
                .collect::<Result<Vec<_>>>()?,
        };
        Ok(FeatureSpec {
            kind,
            m,
            q,
            period,
            frequency_shift: 0,
            k,
        })
    }

    pub fn polynomial(m: Vec<usize>, q: Quantization) -> Result<Self> {
        Self::new(FeatureKind::Polynomial, m, q, 1.0)
    }

    pub fn fourier(m: Vec<usize>, q: Quantization, period: f64) -> Result<Self> {
        Self::new(FeatureKind::Fourier, m, q, period)
    }

    /// Integer offset added to every Fourier frequency. Zero reproduces the
    /// phase constant `c_d = exp(2 pi j x (2 + M) / (2L))` verbatim.
    pub fn with_frequency_shift(mut self, shift: i64) -> Self {
        self.frequency_shift = shift;
        self
    }

    /// Same map with a different period.
    pub fn with_period(&self, period: f64) -> Result<Self> {
        Self::new(self.kind, self.m.clone(), self.q, period).map(|s| s.with_frequency_shift(self.frequency_shift))
    }

    /// Same basis sizes, dense (unquantized) layout.
    pub fn to_dense(&self) -> Self {
        FeatureSpec {
            q: Quantization::Dense,
            k: Vec::new(),
            ..self.clone()
        }
    }

    pub fn kind(&self) -> FeatureKind {
        self.kind
    }

    pub fn dims(&self) -> usize {
        self.m.len()
    }

    pub fn basis_sizes(&self) -> &[usize] {
        &self.m
    }

    pub fn quantization(&self) -> Quantization {
        self.q
    }

    pub fn is_quantized(&self) -> bool {
        matches!(self.q, Quantization::Base(_))
    }

    pub fn period(&self) -> f64 {
        self.period
    }

    pub fn frequency_shift(&self) -> i64 {
        self.frequency_shift
    }

    /// Per-dimension quantization depths `K_d` (empty when dense).
    pub fn depths(&self) -> &[u32] {
        &self.k
    }

    /// Length of every factor block, in model-mode order.
    pub fn mode_dims(&self) -> Vec<usize> {
        match self.q {
            Quantization::Dense => self.m.clone(),
            Quantization::Base(q) => self.k.iter().flat_map(|&k| std::iter::repeat_n(q, k as usize)).collect(),
        }
    }

    /// Length of the full tensor-product feature vector.
    pub fn feature_len(&self) -> u128 {
        self.m.iter().map(|&m| m as u128).product()
    }

    /// Frequency attached to entry `m` of dimension `d`'s Fourier vector:
    /// `((2 + M_d)/2 + shift - m) / L`.
    pub fn frequency(&self, d: usize, m: usize) -> f64 {
        ((2.0 + self.m[d] as f64) / 2.0 + self.frequency_shift as f64 - m as f64) / self.period
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("feature spec is always representable")
    }

    pub fn from_toml_str(s: &str) -> Result<Self> {
        Ok(toml::from_str(s)?)
    }
}

/// One Kronecker factor of a sample's feature vector.
#[derive(Debug, Clone, PartialEq)]
pub struct FactorBlock {
    pub entries: Vec<Complex64>,
    /// Input dimension this factor belongs to (zero-based).
    pub dim_index: usize,
    /// Quantization level, one-based; 0 marks a dense block.
    pub quant_index: usize,
}

impl FactorBlock {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// `x^e` by repeated squaring; the exponent never goes through a float.
pub fn pow_by_squaring(x: Complex64, mut e: u64) -> Complex64 {
    let mut acc = Complex64::new(1.0, 0.0);
    let mut base = x;
    while e > 0 {
        if e & 1 == 1 {
            acc *= base;
        }
        e >>= 1;
        if e > 0 {
            base = base * base;
        }
    }
    acc
}

/// Geometric ladder `[1, x, x^2, ..., x^(len-1)]`.
fn geometric(x: Complex64, len: usize) -> Vec<Complex64> {
    let mut out = Vec::with_capacity(len);
    let mut cur = Complex64::new(1.0, 0.0);
    for _ in 0..len {
        out.push(cur);
        cur *= x;
    }
    out
}

/// Vandermonde vector `[1, x, ..., x^(M-1)]`.
pub fn vandermonde(x: Complex64, m: usize) -> Vec<Complex64> {
    geometric(x, m)
}

/// Quantized Vandermonde vector: entry `q` is `x^(q Q^(k-1))`.
pub fn quantized_vandermonde_factor(x: Complex64, q: usize, k: u32) -> Vec<Complex64> {
    assert!(q >= 2 && k >= 1, "quantized factor needs Q >= 2 and k >= 1");
    let stride = (q as u64).pow(k - 1);
    geometric(pow_by_squaring(x, stride), q)
}

fn check_dims(x: &[f64], spec: &FeatureSpec) -> Result<()> {
    if x.len() != spec.dims() {
        return Err(Error::DimensionMismatch {
            expected: spec.dims(),
            got: x.len(),
        });
    }
    Ok(())
}

fn require_base(spec: &FeatureSpec) -> Result<usize> {
    match spec.q {
        Quantization::Base(q) => Ok(q),
        Quantization::Dense => Err(Error::InvalidSpec("quantized factors need a quantization base Q".into())),
    }
}

/// Quantized pure-power polynomial factors, `d`-major and `k`-minor.
pub fn polynomial_factors(x: &[f64], spec: &FeatureSpec) -> Result<Vec<FactorBlock>> {
    if spec.kind != FeatureKind::Polynomial {
        return Err(Error::InvalidSpec("polynomial_factors called with a Fourier spec".into()));
    }
    check_dims(x, spec)?;
    let q = require_base(spec)?;
    let mut blocks = Vec::with_capacity(spec.k.iter().map(|&k| k as usize).sum());
    for (d, (&xd, &kd)) in x.iter().zip(&spec.k).enumerate() {
        let xc = Complex64::new(xd, 0.0);
        for k in 1..=kd {
            blocks.push(FactorBlock {
                entries: quantized_vandermonde_factor(xc, q, k),
                dim_index: d,
                quant_index: k as usize,
            });
        }
    }
    Ok(blocks)
}

/// Phase of `c_d`: `2 pi x (2 + M + 2 shift) / (2L)`.
fn fourier_phase(x: f64, m: usize, period: f64, shift: i64) -> f64 {
    2.0 * PI * x * (2.0 + m as f64 + 2.0 * shift as f64) / (2.0 * period)
}

fn cis(theta: f64) -> Complex64 {
    Complex64::new(theta.cos(), theta.sin())
}

/// Dense Fourier vector `c_d v(exp(-2 pi j x / L))` of length `M`.
pub fn fourier_factor_dense(x: f64, m: usize, period: f64) -> Vec<Complex64> {
    fourier_factor_dense_shifted(x, m, period, 0)
}

pub fn fourier_factor_dense_shifted(x: f64, m: usize, period: f64, shift: i64) -> Vec<Complex64> {
    let c = cis(fourier_phase(x, m, period, shift));
    let base = cis(-2.0 * PI * x / period);
    geometric(base, m).into_iter().map(|v| c * v).collect()
}

/// Quantized Fourier factors `c_d^(1/K_d) s^(d,k)(exp(-2 pi j x_d / L))`.
///
/// The root of `c_d` is taken on the explicit real phase, `exp(j theta / K_d)`,
/// so the product over `k` is exactly `c_d` with no branch choice involved.
pub fn fourier_factors_quantized(x: &[f64], spec: &FeatureSpec) -> Result<Vec<FactorBlock>> {
    if spec.kind != FeatureKind::Fourier {
        return Err(Error::InvalidSpec("fourier_factors_quantized called with a polynomial spec".into()));
    }
    check_dims(x, spec)?;
    let q = require_base(spec)?;
    let mut blocks = Vec::with_capacity(spec.k.iter().map(|&k| k as usize).sum());
    for (d, ((&xd, &kd), &md)) in x.iter().zip(&spec.k).zip(&spec.m).enumerate() {
        let root = cis(fourier_phase(xd, md, spec.period, spec.frequency_shift) / kd as f64);
        let base = cis(-2.0 * PI * xd / spec.period);
        for k in 1..=kd {
            let entries = quantized_vandermonde_factor(base, q, k).into_iter().map(|v| root * v).collect();
            blocks.push(FactorBlock {
                entries,
                dim_index: d,
                quant_index: k as usize,
            });
        }
    }
    Ok(blocks)
}

/// Dense per-dimension feature vectors, one per input dimension.
pub fn dense_factors(x: &[f64], spec: &FeatureSpec) -> Result<Vec<FactorBlock>> {
    check_dims(x, spec)?;
    Ok(x.iter()
        .zip(&spec.m)
        .enumerate()
        .map(|(d, (&xd, &md))| {
            let entries = match spec.kind {
                FeatureKind::Polynomial => vandermonde(Complex64::new(xd, 0.0), md),
                FeatureKind::Fourier => fourier_factor_dense_shifted(xd, md, spec.period, spec.frequency_shift),
            };
            FactorBlock {
                entries,
                dim_index: d,
                quant_index: 0,
            }
        })
        .collect())
}

/// Rejects polynomial inputs outside `[-1 - eps, 1 + eps]`.
pub fn check_domain(x: &[f64], spec: &FeatureSpec) -> Result<()> {
    if spec.kind == FeatureKind::Polynomial {
        if let Some((column, &value)) = x
            .iter()
            .enumerate()
            .find(|(_, v)| v.abs() > 1.0 + POLYNOMIAL_DOMAIN_SLACK || v.is_nan())
        {
            return Err(Error::OutOfDomain { column, value });
        }
    }
    Ok(())
}

/// Factor blocks for one sample in model-mode order, dense or quantized as the
/// spec dictates.
pub fn feature_blocks(x: &[f64], spec: &FeatureSpec) -> Result<Vec<FactorBlock>> {
    check_domain(x, spec)?;
    match (spec.q, spec.kind) {
        (Quantization::Dense, _) => dense_factors(x, spec),
        (Quantization::Base(_), FeatureKind::Polynomial) => polynomial_factors(x, spec),
        (Quantization::Base(_), FeatureKind::Fourier) => fourier_factors_quantized(x, spec),
    }
}

/// Kronecker product of the blocks, first block fastest-varying.
pub fn reconstruct_kron(blocks: &[FactorBlock]) -> Result<Vec<Complex64>> {
    reconstruct_kron_capped(blocks, DEFAULT_DENSE_CAP)
}

pub fn reconstruct_kron_capped(blocks: &[FactorBlock], cap: usize) -> Result<Vec<Complex64>> {
    let vectors: Vec<&[Complex64]> = blocks.iter().map(|b| b.entries.as_slice()).collect();
    kron_fastest_first(&vectors, cap)
}

/// Kronecker product of plain vectors with the first vector addressing the
/// least significant digit.
pub fn kron_fastest_first(vectors: &[&[Complex64]], cap: usize) -> Result<Vec<Complex64>> {
    let size: u128 = vectors.iter().map(|v| v.len() as u128).product();
    if size > cap as u128 {
        return Err(Error::CapExceeded { size, cap });
    }
    let mut out = vec![Complex64::new(1.0, 0.0)];
    for v in vectors {
        let stride = out.len();
        let mut next = Vec::with_capacity(stride * v.len());
        for &vq in v.iter() {
            next.extend(out.iter().map(|&o| o * vq));
        }
        out = next;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    fn max_abs_diff(a: &[Complex64], b: &[Complex64]) -> f64 {
        assert_eq!(a.len(), b.len());
        a.iter().zip(b).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
    }

    #[test]
    fn vandermonde_examples() {
        assert_eq!(vandermonde(c(2.0), 4), vec![c(1.0), c(2.0), c(4.0), c(8.0)]);
        assert_eq!(vandermonde(c(0.0), 3), vec![c(1.0), c(0.0), c(0.0)]);
        assert_eq!(vandermonde(c(0.5), 3), vec![c(1.0), c(0.5), c(0.25)]);
        assert!(vandermonde(c(f64::NAN), 2)[1].re.is_nan());
    }

    #[test]
    fn quantized_factor_examples() {
        assert_eq!(quantized_vandermonde_factor(c(2.0), 2, 1), vec![c(1.0), c(2.0)]);
        assert_eq!(quantized_vandermonde_factor(c(2.0), 2, 2), vec![c(1.0), c(4.0)]);
        assert_eq!(quantized_vandermonde_factor(c(2.0), 2, 4), vec![c(1.0), c(256.0)]);
        assert_eq!(quantized_vandermonde_factor(c(2.0), 3, 2), vec![c(1.0), c(8.0), c(64.0)]);
        assert!(!quantized_vandermonde_factor(c(10.0), 2, 12)[1].re.is_finite());
    }

    #[test]
    fn polynomial_worked_example() {
        let spec = FeatureSpec::polynomial(vec![16, 8], Quantization::Base(2)).unwrap();
        let (x1, x2) = (0.7, -0.3);
        let blocks = polynomial_factors(&[x1, x2], &spec).unwrap();
        let expect = [
            (0, x1),
            (0, x1 * x1),
            (0, x1.powi(4)),
            (0, x1.powi(8)),
            (1, x2),
            (1, x2 * x2),
            (1, x2.powi(4)),
        ];
        assert_eq!(blocks.len(), expect.len());
        for (b, &(d, v)) in blocks.iter().zip(&expect) {
            assert_eq!(b.dim_index, d);
            assert_eq!(b.entries[0], c(1.0));
            assert!((b.entries[1].re - v).abs() < 1e-15);
        }
        assert_eq!(blocks[3].quant_index, 4);
    }

    #[test]
    fn polynomial_small_cases() {
        let spec = FeatureSpec::polynomial(vec![2], Quantization::Base(2)).unwrap();
        let blocks = polynomial_factors(&[0.0], &spec).unwrap();
        assert_eq!(blocks.len(), 1);
        assert_eq!(blocks[0].entries, vec![c(1.0), c(0.0)]);

        let spec = FeatureSpec::polynomial(vec![4], Quantization::Base(2)).unwrap();
        let blocks = polynomial_factors(&[0.5], &spec).unwrap();
        assert_eq!(blocks[0].entries, vec![c(1.0), c(0.5)]);
        assert_eq!(blocks[1].entries, vec![c(1.0), c(0.25)]);
        let full = reconstruct_kron(&blocks).unwrap();
        assert_eq!(full, vandermonde(c(0.5), 4));
        assert_eq!(full, vec![c(1.0), c(0.5), c(0.25), c(0.125)]);
    }

    #[test]
    fn polynomial_dimension_mismatch() {
        let spec = FeatureSpec::polynomial(vec![4, 4], Quantization::Base(2)).unwrap();
        assert!(matches!(
            polynomial_factors(&[0.1], &spec),
            Err(Error::DimensionMismatch { expected: 2, got: 1 })
        ));
    }

    #[test]
    fn fourier_dense_examples() {
        assert!(fourier_factor_dense(0.0, 4, 1.0).iter().all(|v| (v - c(1.0)).norm() < 1e-15));
        let v = fourier_factor_dense(0.5, 2, 1.0);
        assert!(max_abs_diff(&v, &[c(1.0), c(-1.0)]) < 1e-14);
    }

    #[test]
    fn fourier_dense_matches_phase_formula() {
        // entry m has phase 2 pi x ((2 + M)/(2L) - m/L)
        for &(x, m, l) in &[(0.3, 8, 1.0), (0.77, 16, 2.0), (1.0, 5, 10.0)] {
            let v = fourier_factor_dense(x, m, l);
            for (idx, e) in v.iter().enumerate() {
                let phase = 2.0 * PI * x * ((2.0 + m as f64) / (2.0 * l) - idx as f64 / l);
                assert!((e - cis(phase)).norm() < 1e-13, "x={x} m={idx}");
                assert!((e.norm() - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn fourier_dense_periodicity() {
        // (2 + M)/2 is an integer for even M, so every frequency is an integer
        // multiple of 1/L and x = L reproduces x = 0.
        let at_zero = fourier_factor_dense(0.0, 8, 2.0);
        let at_period = fourier_factor_dense(2.0, 8, 2.0);
        assert!(max_abs_diff(&at_zero, &at_period) < 1e-13);
        // Odd M gives half-integer frequencies: a sign flip instead.
        let odd = fourier_factor_dense(2.0, 3, 2.0);
        assert!(odd.iter().all(|v| (v + c(1.0)).norm() < 1e-13));
    }

    #[test]
    fn fourier_quantized_zero_input_is_all_ones() {
        let spec = FeatureSpec::fourier(vec![8, 9], Quantization::Dense, 1.0).unwrap();
        assert!(spec.depths().is_empty());
        let spec = FeatureSpec::fourier(vec![8, 16], Quantization::Base(2), 3.0).unwrap();
        for b in fourier_factors_quantized(&[0.0, 0.0], &spec).unwrap() {
            assert!(b.entries.iter().all(|v| *v == c(1.0)));
        }
    }

    #[test]
    fn fourier_quantized_reconstructs_dense() {
        let spec = FeatureSpec::fourier(vec![4], Quantization::Base(2), 2.0).unwrap();
        let blocks = fourier_factors_quantized(&[0.3], &spec).unwrap();
        assert_eq!(blocks.len(), 2);
        let full = reconstruct_kron(&blocks).unwrap();
        assert!(max_abs_diff(&full, &fourier_factor_dense(0.3, 4, 2.0)) <= 1e-13);

        let spec = FeatureSpec::fourier(vec![4, 4], Quantization::Base(2), 1.0).unwrap();
        let x = [0.21, 0.64];
        let blocks = fourier_factors_quantized(&x, &spec).unwrap();
        assert_eq!(blocks.len(), 4);
        let full = reconstruct_kron(&blocks).unwrap();
        let a = fourier_factor_dense(x[0], 4, 1.0);
        let b = fourier_factor_dense(x[1], 4, 1.0);
        let dense = kron_fastest_first(&[&a, &b], DEFAULT_DENSE_CAP).unwrap();
        assert_eq!(full.len(), 16);
        assert!(max_abs_diff(&full, &dense) <= 1e-13);
    }

    #[test]
    fn kron_convention_pins() {
        let block = |v: Vec<f64>| FactorBlock {
            entries: v.into_iter().map(c).collect(),
            dim_index: 0,
            quant_index: 1,
        };
        let full = reconstruct_kron(&[block(vec![1.0, 2.0]), block(vec![1.0, 4.0])]).unwrap();
        assert_eq!(full, vandermonde(c(2.0), 4));
        let single = block(vec![3.0, 5.0, 7.0]);
        assert_eq!(reconstruct_kron(std::slice::from_ref(&single)).unwrap(), single.entries);
        // the first block is the least significant digit: m = q1 + 2 q2
        let full = reconstruct_kron(&[block(vec![1.0, 0.0]), block(vec![1.0, 1.0])]).unwrap();
        assert_eq!(full, vec![c(1.0), c(0.0), c(1.0), c(0.0)]);
    }

    #[test]
    fn kron_cap() {
        let b = FactorBlock {
            entries: vec![c(1.0); 4],
            dim_index: 0,
            quant_index: 0,
        };
        let blocks = vec![b; 3];
        assert!(matches!(
            reconstruct_kron_capped(&blocks, 63),
            Err(Error::CapExceeded { size: 64, cap: 63 })
        ));
        assert_eq!(reconstruct_kron_capped(&blocks, 64).unwrap().len(), 64);
    }

    #[test]
    fn spec_validation() {
        assert!(matches!(
            FeatureSpec::fourier(vec![16, 12], Quantization::Base(2), 1.0),
            Err(Error::NotAPower { dim: 2, m: 12, q: 2 })
        ));
        assert!(FeatureSpec::fourier(vec![1], Quantization::Base(2), 1.0).is_err());
        assert!(FeatureSpec::fourier(vec![4], Quantization::Base(1), 1.0).is_err());
        assert!(FeatureSpec::fourier(vec![4], Quantization::Dense, 0.0).is_err());
        assert!(FeatureSpec::fourier(vec![], Quantization::Dense, 1.0).is_err());
        let spec = FeatureSpec::fourier(vec![27, 9], Quantization::Base(3), 1.0).unwrap();
        assert_eq!(spec.depths(), &[3, 2]);
        assert_eq!(spec.mode_dims(), vec![3; 5]);
        assert_eq!(spec.to_dense().mode_dims(), vec![27, 9]);
    }

    #[test]
    fn exact_log_is_integer_only() {
        assert_eq!(exact_log(4096, 2), Some(12));
        assert_eq!(exact_log(243, 3), Some(5));
        assert_eq!(exact_log(1 << 62, 4), Some(31));
        assert_eq!(exact_log(96, 2), None);
        assert_eq!(exact_log(1, 2), None);
    }

    #[test]
    fn domain_guard() {
        let spec = FeatureSpec::polynomial(vec![4], Quantization::Base(2)).unwrap();
        assert!(feature_blocks(&[1.0 + 1e-10], &spec).is_ok());
        assert!(matches!(
            feature_blocks(&[1.01], &spec),
            Err(Error::OutOfDomain { column: 0, .. })
        ));
        let spec = FeatureSpec::fourier(vec![4], Quantization::Base(2), 1.0).unwrap();
        assert!(feature_blocks(&[3.0], &spec).is_ok());
    }

    #[test]
    fn toml_round_trip() {
        let spec = FeatureSpec::fourier(vec![16, 8, 4], Quantization::Base(2), 0.1 + 0.2)
            .unwrap()
            .with_frequency_shift(-3);
        let text = spec.to_toml_string();
        assert_eq!(FeatureSpec::from_toml_str(&text).unwrap(), spec);
        let dense = FeatureSpec::polynomial(vec![5, 7], Quantization::Dense).unwrap();
        let text = dense.to_toml_string();
        assert!(text.contains("Q = \"none\""));
        assert_eq!(FeatureSpec::from_toml_str(&text).unwrap(), dense);
        let err = FeatureSpec::from_toml_str("kind = \"fourier\"\nM = [6]\nQ = 2\nL = 1.0\n");
        assert!(err.is_err());
        let scalar = FeatureSpec::from_toml_str("kind = \"fourier\"\nM = 1024\nQ = 2\n").unwrap();
        assert_eq!(scalar.basis_sizes(), &[1024]);
    }
}
