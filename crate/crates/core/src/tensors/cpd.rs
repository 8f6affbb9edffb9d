use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::features::{kron_fastest_first, FactorBlock, DEFAULT_DENSE_CAP};

/// Accumulates scalar multiply-add counts inside contractions.
///
/// The unit impl compiles away; [`OpCounter`] records every operation.
pub trait OpTally {
    fn tally(&mut self, n: u64);
}

impl OpTally for () {
    #[inline(always)]
    fn tally(&mut self, _n: u64) {}
}

#[derive(Debug, Default, Clone, Copy, PartialEq, Eq)]
pub struct OpCounter {
    pub multiply_adds: u64,
}

impl OpTally for OpCounter {
    #[inline]
    fn tally(&mut self, n: u64) {
        self.multiply_adds += n;
    }
}

/// Rank-`R` CPD weight tensor.
///
/// Factor `p` has shape `n_p x R` and is stored column-major, so column `r`
/// (the slice contracted against a feature block) is contiguous.
#[derive(Debug, Clone, PartialEq)]
pub struct CpdWeights {
    mode_dims: Vec<usize>,
    rank: usize,
    factors: Vec<Vec<Complex64>>,
}

impl CpdWeights {
    pub fn new(mode_dims: Vec<usize>, rank: usize, factors: Vec<Vec<Complex64>>) -> Result<Self> {
        if rank == 0 {
            return Err(Error::ShapeMismatch("CPD rank must be at least 1".into()));
        }
        if mode_dims.is_empty() || mode_dims.contains(&0) {
            return Err(Error::ShapeMismatch(format!("invalid CPD mode sizes {mode_dims:?}")));
        }
        if factors.len() != mode_dims.len() {
            return Err(Error::ShapeMismatch(format!(
                "{} factors for {} modes",
                factors.len(),
                mode_dims.len()
            )));
        }
        for (p, (f, &n)) in factors.iter().zip(&mode_dims).enumerate() {
            if f.len() != n * rank {
                return Err(Error::ShapeMismatch(format!(
                    "factor {p} holds {} entries, expected {n} x {rank}",
                    f.len()
                )));
            }
            if f.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
                return Err(Error::Numerical(format!("factor {p} has non-finite entries")));
            }
        }
        Ok(CpdWeights {
            mode_dims,
            rank,
            factors,
        })
    }

    pub fn zeros(mode_dims: Vec<usize>, rank: usize) -> Result<Self> {
        let factors = mode_dims.iter().map(|&n| vec![Complex64::default(); n * rank]).collect();
        Self::new(mode_dims, rank, factors)
    }

    /// Builds the tensor from `entry(p, q, r)`.
    pub fn from_fn(mode_dims: Vec<usize>, rank: usize, mut entry: impl FnMut(usize, usize, usize) -> Complex64) -> Result<Self> {
        let factors = mode_dims
            .iter()
            .enumerate()
            .map(|(p, &n)| {
                let mut f = Vec::with_capacity(n * rank);
                for r in 0..rank {
                    for q in 0..n {
                        f.push(entry(p, q, r));
                    }
                }
                f
            })
            .collect();
        Self::new(mode_dims, rank, factors)
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn num_modes(&self) -> usize {
        self.mode_dims.len()
    }

    pub fn mode_dims(&self) -> &[usize] {
        &self.mode_dims
    }

    /// Factor `p`, column-major by rank.
    pub fn factor(&self, p: usize) -> &[Complex64] {
        &self.factors[p]
    }

    pub fn factors(&self) -> &[Vec<Complex64>] {
        &self.factors
    }

    pub fn column(&self, p: usize, r: usize) -> &[Complex64] {
        let n = self.mode_dims[p];
        &self.factors[p][r * n..(r + 1) * n]
    }

    pub fn entry(&self, p: usize, q: usize, r: usize) -> Complex64 {
        self.factors[p][r * self.mode_dims[p] + q]
    }

    pub(crate) fn factor_mut(&mut self, p: usize) -> &mut [Complex64] {
        &mut self.factors[p]
    }

    /// Replaces factor `p` (column-major by rank).
    pub fn set_factor(&mut self, p: usize, factor: Vec<Complex64>) -> Result<()> {
        if factor.len() != self.mode_dims[p] * self.rank {
            return Err(Error::ShapeMismatch(format!(
                "factor {p} needs {} entries, got {}",
                self.mode_dims[p] * self.rank,
                factor.len()
            )));
        }
        self.factors[p] = factor;
        Ok(())
    }

    /// Number of stored parameters, `R sum_p n_p`.
    pub fn param_count(&self) -> usize {
        self.rank * self.mode_dims.iter().sum::<usize>()
    }

    fn check_blocks(&self, blocks: &[&[Complex64]]) -> Result<()> {
        if blocks.len() != self.mode_dims.len() {
            return Err(Error::ShapeMismatch(format!(
                "{} feature blocks for {} modes",
                blocks.len(),
                self.mode_dims.len()
            )));
        }
        for (p, (b, &n)) in blocks.iter().zip(&self.mode_dims).enumerate() {
            if b.len() != n {
                return Err(Error::ShapeMismatch(format!("block {p} has length {}, mode size is {n}", b.len())));
            }
        }
        Ok(())
    }
}

fn block_slices(blocks: &[FactorBlock]) -> Vec<&[Complex64]> {
    blocks.iter().map(|b| b.entries.as_slice()).collect()
}

/// Writes `<block, W_p[:, r]>` for every `r` into `out` (conjugating the block).
#[inline]
pub fn project_mode<T: OpTally>(weights: &CpdWeights, p: usize, block: &[Complex64], out: &mut [Complex64], tally: &mut T) {
    let n = weights.mode_dims[p];
    let factor = &weights.factors[p];
    for (r, o) in out.iter_mut().enumerate() {
        let col = &factor[r * n..(r + 1) * n];
        let mut acc = Complex64::default();
        for (s, w) in block.iter().zip(col) {
            acc += s.conj() * w;
        }
        *o = acc;
    }
    tally.tally((n * weights.rank) as u64);
}

/// Per-mode projections `<block_p, W_p[:, r]>`, `P_modes` vectors of length `R`.
pub fn cpd_projections(weights: &CpdWeights, blocks: &[FactorBlock]) -> Result<Vec<Vec<Complex64>>> {
    let slices = block_slices(blocks);
    weights.check_blocks(&slices)?;
    Ok(slices
        .iter()
        .enumerate()
        .map(|(p, b)| {
            let mut out = vec![Complex64::default(); weights.rank];
            project_mode(weights, p, b, &mut out, &mut ());
            out
        })
        .collect())
}

/// `sum_r prod_p projections[p][r]`.
pub fn response_from_projections<T: OpTally>(projections: &[Vec<Complex64>], tally: &mut T) -> Complex64 {
    let rank = projections.first().map_or(0, Vec::len);
    let mut total = Complex64::default();
    for r in 0..rank {
        let mut prod = projections[0][r];
        for proj in &projections[1..] {
            prod *= proj[r];
        }
        tally.tally(projections.len() as u64 - 1);
        if r == 0 {
            total = prod;
        } else {
            total += prod;
            tally.tally(1);
        }
    }
    total
}

fn cpd_response_slices<T: OpTally>(weights: &CpdWeights, blocks: &[&[Complex64]], tally: &mut T) -> Result<Complex64> {
    weights.check_blocks(blocks)?;
    let projections: Vec<Vec<Complex64>> = blocks
        .iter()
        .enumerate()
        .map(|(p, b)| {
            let mut out = vec![Complex64::default(); weights.rank];
            project_mode(weights, p, b, &mut out, tally);
            out
        })
        .collect();
    Ok(response_from_projections(&projections, tally))
}

/// Model response `<z(x), w>` for a CPD weight tensor, in `O(R sum_p n_p)`.
pub fn cpd_response(weights: &CpdWeights, blocks: &[FactorBlock]) -> Result<Complex64> {
    cpd_response_slices(weights, &block_slices(blocks), &mut ())
}

/// [`cpd_response`] that also reports its scalar multiply-add count.
pub fn cpd_response_counted(weights: &CpdWeights, blocks: &[FactorBlock]) -> Result<(Complex64, OpCounter)> {
    let mut counter = OpCounter::default();
    let value = cpd_response_slices(weights, &block_slices(blocks), &mut counter)?;
    Ok((value, counter))
}

/// Dense `vec` of the CPD tensor, first mode fastest-varying.
pub fn cpd_reconstruct(weights: &CpdWeights) -> Result<Vec<Complex64>> {
    cpd_reconstruct_capped(weights, DEFAULT_DENSE_CAP)
}

pub fn cpd_reconstruct_capped(weights: &CpdWeights, cap: usize) -> Result<Vec<Complex64>> {
    let mut out: Option<Vec<Complex64>> = None;
    for r in 0..weights.rank {
        let cols: Vec<&[Complex64]> = (0..weights.num_modes()).map(|p| weights.column(p, r)).collect();
        let term = kron_fastest_first(&cols, cap)?;
        match out.as_mut() {
            None => out = Some(term),
            Some(acc) => acc.iter_mut().zip(term).for_each(|(a, t)| *a += t),
        }
    }
    Ok(out.unwrap_or_default())
}

/// `W^H W` for an `n x R` column-major factor, returned row-major `R x R`.
pub fn gram(factor: &[Complex64], n: usize, rank: usize) -> Vec<Complex64> {
    assert_eq!(factor.len(), n * rank, "factor length must be n * R");
    let mut g = vec![Complex64::default(); rank * rank];
    for r in 0..rank {
        let a = &factor[r * n..(r + 1) * n];
        for s in r..rank {
            let b = &factor[s * n..(s + 1) * n];
            let v: Complex64 = a.iter().zip(b).map(|(x, y)| x.conj() * y).sum();
            g[r * rank + s] = v;
            g[s * rank + r] = v.conj();
        }
    }
    g
}

/// Gram matrices of every factor.
pub fn grams(weights: &CpdWeights) -> Vec<Vec<Complex64>> {
    (0..weights.num_modes())
        .map(|p| gram(weights.factor(p), weights.mode_dims[p], weights.rank))
        .collect()
}

/// `||vec(w)||^2 = sum_{r,r'} prod_p G_p[r, r']`, without densifying.
pub fn cpd_norm_sq(weights: &CpdWeights) -> f64 {
    norm_sq_from_grams(&grams(weights), weights.rank)
}

pub fn norm_sq_from_grams(grams: &[Vec<Complex64>], rank: usize) -> f64 {
    let mut had = vec![Complex64::new(1.0, 0.0); rank * rank];
    for g in grams {
        had.iter_mut().zip(g).for_each(|(h, v)| *h *= v);
    }
    had.iter().sum::<Complex64>().re
}
