//! Dense complex linear algebra for the precoding solvers.
//!
//! Everything here is sized for the downlink problem (`U <= 16` users,
//! `B <= 256` antennas), so storage is plain row-major `Vec<Complex64>` and
//! the kernels are straightforward triple loops. Inputs are validated at
//! module boundaries; no NaN checks happen inside the kernels.

use num_complex::Complex64;

use crate::{Error, Result};

/// Complex column vector.
pub type CVec = Vec<Complex64>;

/// Dense complex matrix, row-major storage.
#[derive(Debug, Clone, PartialEq)]
pub struct CMat {
    rows: usize,
    cols: usize,
    data: Vec<Complex64>,
}

impl CMat {
    /// Creates a matrix from row-major data. `data.len()` must equal
    /// `rows * cols`.
    pub fn new(rows: usize, cols: usize, data: Vec<Complex64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::DimensionMismatch(format!(
                "{}x{} matrix needs {} entries, got {}",
                rows,
                cols,
                rows * cols,
                data.len()
            )));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![Complex64::ZERO; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = Complex64::ONE;
        }
        m
    }

    /// Builds a matrix entry by entry from a closure over (row, col).
    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> Complex64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn data(&self) -> &[Complex64] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[Complex64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    /// Conjugate transpose.
    pub fn hermitian_transpose(&self) -> CMat {
        CMat::from_fn(self.cols, self.rows, |i, j| self[(j, i)].conj())
    }

    /// Frobenius norm.
    pub fn fro_norm(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Matrix product `self * other`.
    pub fn matmul(&self, other: &CMat) -> Result<CMat> {
        if self.cols != other.rows {
            return Err(Error::DimensionMismatch(format!(
                "matmul: {}x{} * {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let mut out = CMat::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                for j in 0..other.cols {
                    out[(i, j)] += a * other[(k, j)];
                }
            }
        }
        Ok(out)
    }

    /// Maximum absolute entry difference against another matrix of the same
    /// shape. Panics on shape mismatch (test/diagnostic helper).
    pub fn max_abs_diff(&self, other: &CMat) -> f64 {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }
}

impl std::ops::Index<(usize, usize)> for CMat {
    type Output = Complex64;
    fn index(&self, (i, j): (usize, usize)) -> &Complex64 {
        &self.data[i * self.cols + j]
    }
}

impl std::ops::IndexMut<(usize, usize)> for CMat {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut Complex64 {
        &mut self.data[i * self.cols + j]
    }
}

/// `M * v`.
pub fn matvec(m: &CMat, v: &[Complex64]) -> Result<CVec> {
    if m.cols != v.len() {
        return Err(Error::DimensionMismatch(format!(
            "matvec: {}x{} matrix with length-{} vector",
            m.rows,
            m.cols,
            v.len()
        )));
    }
    let mut out = vec![Complex64::ZERO; m.rows];
    for i in 0..m.rows {
        let row = m.row(i);
        let mut acc = Complex64::ZERO;
        for j in 0..m.cols {
            acc += row[j] * v[j];
        }
        out[i] = acc;
    }
    Ok(out)
}

/// `M^H * v` without materializing the transpose.
pub fn hermitian_matvec(m: &CMat, v: &[Complex64]) -> Result<CVec> {
    if m.rows != v.len() {
        return Err(Error::DimensionMismatch(format!(
            "hermitian_matvec: {}x{} matrix with length-{} vector",
            m.rows,
            m.cols,
            v.len()
        )));
    }
    let mut out = vec![Complex64::ZERO; m.cols];
    for i in 0..m.rows {
        let row = m.row(i);
        let vi = v[i];
        for j in 0..m.cols {
            out[j] += row[j].conj() * vi;
        }
    }
    Ok(out)
}

/// Gram matrix `M^H M`. The result is Hermitian positive semidefinite.
pub fn hermitian_gram(m: &CMat) -> CMat {
    let mut out = CMat::zeros(m.cols, m.cols);
    for k in 0..m.rows {
        let row = m.row(k);
        for i in 0..m.cols {
            let a = row[i].conj();
            for j in i..m.cols {
                out[(i, j)] += a * row[j];
            }
        }
    }
    // fill the strictly lower triangle from the upper one
    for i in 0..m.cols {
        for j in 0..i {
            out[(i, j)] = out[(j, i)].conj();
        }
    }
    out
}

/// Cholesky factorization of a Hermitian positive definite matrix,
/// `S = L L^H` with `L` lower triangular.
#[derive(Debug, Clone)]
pub struct CholeskyFactor {
    n: usize,
    l: Vec<Complex64>, // row-major lower triangle, full n x n storage
}

impl CholeskyFactor {
    pub fn new(s: &CMat) -> Result<Self> {
        if s.rows != s.cols {
            return Err(Error::DimensionMismatch(format!(
                "cholesky: matrix is {}x{}",
                s.rows, s.cols
            )));
        }
        let n = s.rows;
        // relative pivot floor: a pivot this far below the diagonal scale is
        // numerically singular, not positive definite
        let scale = (0..n).map(|i| s[(i, i)].re.abs()).fold(0.0, f64::max);
        let floor = 1e-12 * scale;
        let mut l = vec![Complex64::ZERO; n * n];
        for i in 0..n {
            for j in 0..=i {
                let mut sum = s[(i, j)];
                for k in 0..j {
                    sum -= l[i * n + k] * l[j * n + k].conj();
                }
                if i == j {
                    let pivot = sum.re;
                    if pivot <= floor || !pivot.is_finite() {
                        return Err(Error::NotPositiveDefinite { index: i, pivot });
                    }
                    l[i * n + i] = Complex64::new(pivot.sqrt(), 0.0);
                } else {
                    l[i * n + j] = sum / l[j * n + j];
                }
            }
        }
        Ok(Self { n, l })
    }

    /// Solves `S x = b` by forward/back substitution on the factor.
    pub fn solve(&self, b: &[Complex64]) -> Result<CVec> {
        if b.len() != self.n {
            return Err(Error::DimensionMismatch(format!(
                "cholesky solve: system is {}x{}, rhs has length {}",
                self.n,
                self.n,
                b.len()
            )));
        }
        let n = self.n;
        // L y = b
        let mut y = b.to_vec();
        for i in 0..n {
            for k in 0..i {
                let lik = self.l[i * n + k];
                y[i] = y[i] - lik * y[k];
            }
            y[i] /= self.l[i * n + i];
        }
        // L^H x = y
        for i in (0..n).rev() {
            for k in i + 1..n {
                let lki = self.l[k * n + i].conj();
                y[i] = y[i] - lki * y[k];
            }
            y[i] /= self.l[i * n + i];
        }
        Ok(y)
    }
}

/// Solves `S x = b` for Hermitian positive definite `S`.
pub fn cholesky_solve(s: &CMat, b: &[Complex64]) -> Result<CVec> {
    CholeskyFactor::new(s)?.solve(b)
}

/// Result of the power-iteration spectral norm estimate.
#[derive(Debug, Clone, Copy)]
pub struct SpectralNorm {
    /// Rayleigh-quotient estimate of the largest eigenvalue.
    pub value: f64,
    /// False when `max_iter` was exhausted before reaching `tol`.
    pub converged: bool,
    pub iterations: usize,
}

pub const SPECTRAL_TOL: f64 = 1e-6;
pub const SPECTRAL_MAX_ITER: usize = 500;

/// Largest eigenvalue of a Hermitian positive semidefinite matrix by power
/// iteration.
///
/// Starts from an all-ones vector with a small index-dependent perturbation
/// so that runs are reproducible and the start vector is never orthogonal to
/// the dominant eigenvector by symmetry. Convergence is declared when the
/// relative change of the Rayleigh quotient drops below `tol`.
pub fn spectral_norm(s: &CMat, tol: f64, max_iter: usize) -> Result<SpectralNorm> {
    if s.rows != s.cols {
        return Err(Error::DimensionMismatch(format!(
            "spectral_norm: matrix is {}x{}",
            s.rows, s.cols
        )));
    }
    if tol <= 0.0 {
        return Err(Error::InvalidParams("spectral_norm: tol must be > 0".into()));
    }
    let n = s.rows;
    let mut v: CVec = (0..n)
        .map(|i| Complex64::new(1.0 + 1e-3 * (i as f64 + 1.0) / n as f64, 0.0))
        .collect();
    normalize(&mut v);
    let mut lambda = 0.0_f64;
    for it in 1..=max_iter {
        let w = matvec(s, &v)?;
        let next = v
            .iter()
            .zip(&w)
            .map(|(a, b)| (a.conj() * b).re)
            .sum::<f64>();
        let wnorm = norm2(&w);
        if wnorm == 0.0 {
            // S v = 0: the matrix annihilates the start vector; for PSD S
            // with this strictly positive start, S itself is zero.
            return Ok(SpectralNorm {
                value: 0.0,
                converged: true,
                iterations: it,
            });
        }
        let rel = (next - lambda).abs() / next.abs().max(f64::MIN_POSITIVE);
        v = w;
        normalize(&mut v);
        lambda = next;
        if rel <= tol {
            return Ok(SpectralNorm {
                value: lambda,
                converged: true,
                iterations: it,
            });
        }
    }
    Ok(SpectralNorm {
        value: lambda,
        converged: false,
        iterations: max_iter,
    })
}

pub fn norm2(v: &[Complex64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

pub fn norm2_sqr(v: &[Complex64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum()
}

/// Inner product `a^H b`.
pub fn dot_h(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

fn normalize(v: &mut [Complex64]) {
    let n = norm2(v);
    if n > 0.0 {
        for z in v.iter_mut() {
            *z /= n;
        }
    }
}
