//! Hermitian normal-equation assembly and solves.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};

/// Relative diagonal jitter tried, in order, when a Cholesky factorization fails.
pub const JITTER_LADDER: [f64; 3] = [0.0, 1e-12, 1e-10];

/// Rows are pushed in groups of this many to keep each matrix row hot.
const ROW_BLOCK: usize = 8;

/// Accumulates `A^H A` and `A^H y` one design row at a time.
///
/// Only the upper triangle is accumulated; real and imaginary parts are kept
/// in separate arrays so the inner update vectorizes.
#[derive(Debug, Clone)]
pub struct NormalEquations {
    dim: usize,
    re: Vec<f64>,
    im: Vec<f64>,
    rhs: Vec<Complex64>,
    pending_re: Vec<f64>,
    pending_im: Vec<f64>,
    pending_y: Vec<Complex64>,
}

impl NormalEquations {
    pub fn new(dim: usize) -> Self {
        NormalEquations {
            dim,
            re: vec![0.0; dim * dim],
            im: vec![0.0; dim * dim],
            rhs: vec![Complex64::default(); dim],
            pending_re: Vec::with_capacity(ROW_BLOCK * dim),
            pending_im: Vec::with_capacity(ROW_BLOCK * dim),
            pending_y: Vec::with_capacity(ROW_BLOCK),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Adds the row `a` with target `y`: `A^H A += a^H a`, `A^H y += conj(a) y`.
    pub fn push(&mut self, row: &[Complex64], y: Complex64) {
        debug_assert_eq!(row.len(), self.dim);
        self.pending_re.extend(row.iter().map(|v| v.re));
        self.pending_im.extend(row.iter().map(|v| v.im));
        self.pending_y.push(y);
        if self.pending_y.len() == ROW_BLOCK {
            self.flush();
        }
    }

    fn flush(&mut self) {
        let dim = self.dim;
        let rows = self.pending_y.len();
        for i in 0..dim {
            let m_re = &mut self.re[i * dim + i..(i + 1) * dim];
            let m_im = &mut self.im[i * dim + i..(i + 1) * dim];
            let mut rhs = Complex64::default();
            for b in 0..rows {
                let a_re = &self.pending_re[b * dim + i..(b + 1) * dim];
                let a_im = &self.pending_im[b * dim + i..(b + 1) * dim];
                let (cr, ci) = (a_re[0], a_im[0]);
                for j in 0..m_re.len() {
                    m_re[j] += cr * a_re[j] + ci * a_im[j];
                    m_im[j] += cr * a_im[j] - ci * a_re[j];
                }
                rhs += Complex64::new(cr, -ci) * self.pending_y[b];
            }
            self.rhs[i] += rhs;
        }
        self.pending_re.clear();
        self.pending_im.clear();
        self.pending_y.clear();
    }

    /// Returns `(scale A^H A, scale A^H y)` with the full Hermitian matrix.
    pub fn finish(mut self, scale: f64) -> (DMatrix<Complex64>, DVector<Complex64>) {
        if !self.pending_y.is_empty() {
            self.flush();
        }
        let dim = self.dim;
        let mut m = DMatrix::<Complex64>::zeros(dim, dim);
        for i in 0..dim {
            m[(i, i)] = Complex64::new(self.re[i * dim + i] * scale, 0.0);
            for j in i + 1..dim {
                let v = Complex64::new(self.re[i * dim + j], self.im[i * dim + j]) * scale;
                m[(i, j)] = v;
                m[(j, i)] = v.conj();
            }
        }
        let rhs = DVector::from_iterator(dim, self.rhs.iter().map(|v| v * scale));
        (m, rhs)
    }
}

/// How a Hermitian system was finally solved.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SolveMethod {
    Cholesky { jitter: f64 },
    MinimumNorm,
}

fn is_finite(m: &DMatrix<Complex64>) -> bool {
    m.iter().all(|v| v.re.is_finite() && v.im.is_finite())
}

fn relative_residual(m: &DMatrix<Complex64>, x: &DVector<Complex64>, b: &DVector<Complex64>) -> f64 {
    let bn = b.norm();
    if bn == 0.0 {
        return (m * x).norm();
    }
    (m * x - b).norm() / bn
}

/// `min L_ii^2 / max L_ii^2`, a cheap rank-deficiency probe on a Cholesky factor.
fn pivot_ratio(l: &DMatrix<Complex64>) -> f64 {
    let (lo, hi) = (0..l.nrows())
        .map(|i| l[(i, i)].norm_sqr())
        .fold((f64::INFINITY, 0.0f64), |(lo, hi), v| (lo.min(v), hi.max(v)));
    if hi == 0.0 {
        0.0
    } else {
        lo / hi
    }
}

/// Minimum-norm solution of `m x = b` through the SVD pseudo-inverse.
pub fn min_norm_solve(m: &DMatrix<Complex64>, b: &DVector<Complex64>) -> Result<DVector<Complex64>> {
    let dim = m.nrows();
    let svd = m.clone().svd(true, true);
    let smax = svd.singular_values.iter().cloned().fold(0.0, f64::max);
    let eps = smax * dim as f64 * f64::EPSILON;
    svd.solve(b, eps).map_err(|e| Error::Numerical(format!("SVD solve failed: {e}")))
}

/// Solves the Hermitian positive (semi)definite system `m x = b`.
///
/// Cholesky is tried with the jitter ladder (relative to the mean diagonal).
/// When `allow_min_norm` is set (unregularized problems), a factorization that
/// fails or leaves a residual above `1e-8` falls back to the minimum-norm
/// least-squares solution instead of erroring.
pub fn solve_hermitian(
    m: &DMatrix<Complex64>,
    b: &DVector<Complex64>,
    allow_min_norm: bool,
) -> Result<(DVector<Complex64>, SolveMethod)> {
    if !is_finite(m) || b.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
        return Err(Error::Numerical("normal equations contain non-finite entries".into()));
    }
    let dim = m.nrows();
    let mean_diag = (0..dim).map(|i| m[(i, i)].re.abs()).sum::<f64>() / dim.max(1) as f64;
    let ladder: &[f64] = if allow_min_norm { &JITTER_LADDER[..1] } else { &JITTER_LADDER };
    for &jitter in ladder {
        let mut shifted = m.clone();
        if jitter > 0.0 {
            for i in 0..dim {
                shifted[(i, i)] += Complex64::new(jitter * mean_diag, 0.0);
            }
        }
        if let Some(chol) = shifted.cholesky() {
            if allow_min_norm && pivot_ratio(chol.l_dirty()) < 1e-13 {
                break;
            }
            let x = chol.solve(b);
            if x.iter().all(|v| v.re.is_finite() && v.im.is_finite())
                && (!allow_min_norm || relative_residual(m, &x, b) <= 1e-8)
            {
                return Ok((x, SolveMethod::Cholesky { jitter }));
            }
        }
    }
    if allow_min_norm {
        let x = min_norm_solve(m, b)?;
        return Ok((x, SolveMethod::MinimumNorm));
    }
    Err(Error::Numerical(format!(
        "Cholesky failed on a {dim}x{dim} system after jitter up to {:e}",
        JITTER_LADDER[JITTER_LADDER.len() - 1]
    )))
}
