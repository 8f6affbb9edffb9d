use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::features::FactorBlock;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ChainKind {
    /// Open chain, `r_0 = r_P = 1`.
    Train,
    /// Closed chain, `r_0 = r_P`, contracted with a trace.
    Ring,
}

/// Tensor-train or tensor-ring weights.
///
/// Core `p` has shape `r_p x n_p x r_(p+1)`, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct TtWeights {
    kind: ChainKind,
    mode_dims: Vec<usize>,
    ranks: Vec<usize>,
    cores: Vec<Vec<Complex64>>,
}

impl TtWeights {
    pub fn new(kind: ChainKind, mode_dims: Vec<usize>, ranks: Vec<usize>, cores: Vec<Vec<Complex64>>) -> Result<Self> {
        let modes = mode_dims.len();
        if modes == 0 || mode_dims.contains(&0) {
            return Err(Error::ShapeMismatch(format!("invalid mode sizes {mode_dims:?}")));
        }
        if ranks.len() != modes + 1 || ranks.contains(&0) {
            return Err(Error::ShapeMismatch(format!(
                "rank chain {ranks:?} does not fit {modes} cores"
            )));
        }
        if ranks[0] != ranks[modes] {
            return Err(Error::ShapeMismatch(format!(
                "boundary ranks differ: r_0 = {}, r_P = {}",
                ranks[0], ranks[modes]
            )));
        }
        if kind == ChainKind::Train && ranks[0] != 1 {
            return Err(Error::ShapeMismatch("a tensor train needs r_0 = r_P = 1".into()));
        }
        if cores.len() != modes {
            return Err(Error::ShapeMismatch(format!("{} cores for {modes} modes", cores.len())));
        }
        for (p, core) in cores.iter().enumerate() {
            let expected = ranks[p] * mode_dims[p] * ranks[p + 1];
            if core.len() != expected {
                return Err(Error::ShapeMismatch(format!(
                    "core {p} holds {} entries, expected {} x {} x {}",
                    core.len(),
                    ranks[p],
                    mode_dims[p],
                    ranks[p + 1]
                )));
            }
            if core.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
                return Err(Error::Numerical(format!("core {p} has non-finite entries")));
            }
        }
        Ok(TtWeights {
            kind,
            mode_dims,
            ranks,
            cores,
        })
    }

    /// Builds cores from `entry(p, left, m, right)`.
    pub fn from_fn(
        kind: ChainKind,
        mode_dims: Vec<usize>,
        ranks: Vec<usize>,
        mut entry: impl FnMut(usize, usize, usize, usize) -> Complex64,
    ) -> Result<Self> {
        if ranks.len() != mode_dims.len() + 1 {
            return Err(Error::ShapeMismatch(format!(
                "rank chain {ranks:?} does not fit {} cores",
                mode_dims.len()
            )));
        }
        let cores = mode_dims
            .iter()
            .enumerate()
            .map(|(p, &n)| {
                let mut core = Vec::with_capacity(ranks[p] * n * ranks[p + 1]);
                for a in 0..ranks[p] {
                    for m in 0..n {
                        for b in 0..ranks[p + 1] {
                            core.push(entry(p, a, m, b));
                        }
                    }
                }
                core
            })
            .collect();
        Self::new(kind, mode_dims, ranks, cores)
    }

    pub fn kind(&self) -> ChainKind {
        self.kind
    }

    pub fn mode_dims(&self) -> &[usize] {
        &self.mode_dims
    }

    pub fn ranks(&self) -> &[usize] {
        &self.ranks
    }

    pub fn num_modes(&self) -> usize {
        self.mode_dims.len()
    }

    pub fn core(&self, p: usize) -> &[Complex64] {
        &self.cores[p]
    }

    pub fn entry(&self, p: usize, left: usize, m: usize, right: usize) -> Complex64 {
        let n = self.mode_dims[p];
        let rb = self.ranks[p + 1];
        self.cores[p][(left * n + m) * rb + right]
    }

    pub fn param_count(&self) -> usize {
        self.cores.iter().map(Vec::len).sum()
    }
}

/// Model response of TT/TR weights: a left-to-right product of the per-core
/// matrices `sum_m conj(s_m) core[:, m, :]`, closed by a trace.
pub fn tt_response(weights: &TtWeights, blocks: &[FactorBlock]) -> Result<Complex64> {
    if blocks.len() != weights.num_modes() {
        return Err(Error::ShapeMismatch(format!(
            "{} feature blocks for {} cores",
            blocks.len(),
            weights.num_modes()
        )));
    }
    let r0 = weights.ranks[0];
    // running r0 x r_p product, row-major
    let mut acc = vec![Complex64::default(); r0 * r0];
    for i in 0..r0 {
        acc[i * r0 + i] = Complex64::new(1.0, 0.0);
    }
    let mut cols = r0;
    for (p, block) in blocks.iter().enumerate() {
        let n = weights.mode_dims[p];
        if block.len() != n {
            return Err(Error::ShapeMismatch(format!("block {p} has length {}, mode size is {n}", block.len())));
        }
        let (ra, rb) = (weights.ranks[p], weights.ranks[p + 1]);
        let core = &weights.cores[p];
        let mut slice = vec![Complex64::default(); ra * rb];
        for a in 0..ra {
            for (m, s) in block.entries.iter().enumerate() {
                let sc = s.conj();
                let row = &core[(a * n + m) * rb..(a * n + m + 1) * rb];
                for (dst, w) in slice[a * rb..(a + 1) * rb].iter_mut().zip(row) {
                    *dst += sc * w;
                }
            }
        }
        let mut next = vec![Complex64::default(); r0 * rb];
        for i in 0..r0 {
            for a in 0..cols {
                let v = acc[i * cols + a];
                for b in 0..rb {
                    next[i * rb + b] += v * slice[a * rb + b];
                }
            }
        }
        acc = next;
        cols = rb;
    }
    Ok((0..r0).map(|i| acc[i * r0 + i]).sum())
}
