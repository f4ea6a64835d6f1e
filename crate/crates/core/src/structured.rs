//! Circulant and BCCB matrices in first-row form, plus the orthogonal
//! projection of a dense matrix onto the BCCB subspace.
//!
//! A BCCB matrix on an `H x W` grid has entry
//! `B[i][j] = b[offset(i, j)]`, where `offset(i, j)` is the flat index of the
//! circular 2D displacement from token `i` to token `j`. The shift matrices
//! `B_k` (first row `e_k`) are pairwise orthogonal with `<B_k, B_k> = N`, so
//! projecting `A` onto their span reduces to averaging `A` over each of the
//! `N` offset classes.

use crate::error::{Error, Result};
use crate::rng::SplitMix64;
use crate::tensor::GridShape;

/// Largest `N` for which an `N x N` dense matrix is built without an explicit override.
pub const DENSE_LIMIT: usize = 4096;

/// Whether dense `N x N` paths may exceed [`DENSE_LIMIT`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SizeGuard {
    #[default]
    Enforce,
    AllowLarge,
}

impl SizeGuard {
    pub fn from_flag(allow_large: bool) -> Self {
        if allow_large {
            SizeGuard::AllowLarge
        } else {
            SizeGuard::Enforce
        }
    }

    pub fn check(self, n: usize) -> Result<()> {
        if self == SizeGuard::Enforce && n > DENSE_LIMIT {
            return Err(Error::TooLarge {
                n,
                limit: DENSE_LIMIT,
            });
        }
        Ok(())
    }
}

/// Row-major real matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::shape(format!(
                "matrix data has {} entries, expected {rows}x{cols}",
                data.len()
            )));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.set(i, i, 1.0);
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.data[r * self.cols + c] = v;
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn frobenius_sqr(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum()
    }

    /// Frobenius inner product.
    pub fn inner(&self, other: &DenseMatrix) -> f64 {
        self.data.iter().zip(&other.data).map(|(a, b)| a * b).sum()
    }

    pub fn matvec(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.cols {
            return Err(Error::shape(format!(
                "vector has {} entries, matrix has {} columns",
                x.len(),
                self.cols
            )));
        }
        Ok(self
            .data
            .chunks_exact(self.cols)
            .map(|row| row.iter().zip(x).map(|(a, b)| a * b).sum())
            .collect())
    }

    pub fn matmul(&self, rhs: &DenseMatrix) -> Result<DenseMatrix> {
        if self.cols != rhs.rows {
            return Err(Error::shape(format!(
                "cannot multiply {}x{} by {}x{}",
                self.rows, self.cols, rhs.rows, rhs.cols
            )));
        }
        let mut out = DenseMatrix::zeros(self.rows, rhs.cols);
        for r in 0..self.rows {
            let dst = &mut out.data[r * rhs.cols..(r + 1) * rhs.cols];
            for (k, &a) in self.row(r).iter().enumerate() {
                if a == 0.0 {
                    continue;
                }
                for (o, &b) in dst.iter_mut().zip(rhs.row(k)) {
                    *o += a * b;
                }
            }
        }
        Ok(out)
    }

    /// Row-wise softmax with max subtraction.
    pub fn softmax_rows(&self) -> DenseMatrix {
        let mut out = self.clone();
        for row in out.data.chunks_exact_mut(self.cols) {
            softmax_in_place(row);
        }
        out
    }

    pub fn row_sums(&self) -> Vec<f64> {
        self.data.chunks_exact(self.cols).map(|r| r.iter().sum()).collect()
    }

    pub fn col_sums(&self) -> Vec<f64> {
        let mut sums = vec![0.0; self.cols];
        for row in self.data.chunks_exact(self.cols) {
            for (s, v) in sums.iter_mut().zip(row) {
                *s += v;
            }
        }
        sums
    }
}

/// `exp(v - max) / sum` over the slice.
pub(crate) fn softmax_in_place(values: &mut [f64]) {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut total = 0.0;
    for v in values.iter_mut() {
        *v = (*v - max).exp();
        total += *v;
    }
    for v in values.iter_mut() {
        *v /= total;
    }
}

/// 1D circulant matrix given by its first row; row `i` is the first row
/// cyclically shifted right by `i`.
#[derive(Debug, Clone, PartialEq)]
pub struct CirculantKernel {
    pub c: Vec<f64>,
}

impl CirculantKernel {
    pub fn new(c: Vec<f64>) -> Result<Self> {
        if c.is_empty() {
            return Err(Error::Domain("circulant kernel must be non-empty".into()));
        }
        Ok(Self { c })
    }

    pub fn len(&self) -> usize {
        self.c.len()
    }

    pub fn is_empty(&self) -> bool {
        self.c.is_empty()
    }

    /// `C[i][j] = c[(j - i) mod n]`.
    pub fn materialize(&self) -> DenseMatrix {
        let n = self.c.len();
        let mut m = DenseMatrix::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                m.set(i, j, self.c[(j + n - i) % n]);
            }
        }
        m
    }
}

/// `(C x)[i] = sum_k c[k] x[(i + k) mod n]`, evaluated directly.
pub fn circulant_matvec_naive(kernel: &CirculantKernel, x: &[f64]) -> Result<Vec<f64>> {
    let n = kernel.len();
    if x.len() != n {
        return Err(Error::shape(format!(
            "vector has {} entries, circulant kernel {n}",
            x.len()
        )));
    }
    Ok((0..n)
        .map(|i| kernel.c.iter().enumerate().map(|(k, &c)| c * x[(i + k) % n]).sum())
        .collect())
}

/// BCCB matrix on a grid, stored as its first row.
#[derive(Debug, Clone, PartialEq)]
pub struct BccbKernel {
    pub b: Vec<f64>,
    shape: GridShape,
}

impl BccbKernel {
    pub fn new(shape: GridShape, b: Vec<f64>) -> Result<Self> {
        if b.len() != shape.n() {
            return Err(Error::shape(format!(
                "kernel has {} entries, grid {shape} has {}",
                b.len(),
                shape.n()
            )));
        }
        Ok(Self { b, shape })
    }

    pub fn zeros(shape: GridShape) -> Self {
        Self {
            b: vec![0.0; shape.n()],
            shape,
        }
    }

    /// The shift matrix `B_k`: first row is `e_k`.
    pub fn basis(shape: GridShape, k: usize) -> Self {
        let mut kernel = Self::zeros(shape);
        kernel.b[k] = 1.0;
        kernel
    }

    pub fn shape(&self) -> GridShape {
        self.shape
    }

    /// Entry `(i, j)` of the full matrix.
    pub fn entry(&self, i: usize, j: usize) -> f64 {
        self.b[self.shape.offset_index(i, j)]
    }

    /// Squared Frobenius norm of the full matrix: every row is a permutation of `b`.
    pub fn frobenius_sqr(&self) -> f64 {
        self.shape.n() as f64 * self.b.iter().map(|v| v * v).sum::<f64>()
    }

    /// Kernel as `H` rows of `W` values.
    pub fn to_grid(&self) -> Vec<Vec<f64>> {
        self.b.chunks(self.shape.width()).map(<[f64]>::to_vec).collect()
    }
}

/// Builds the full `N x N` BCCB matrix.
pub fn bccb_materialize(kernel: &BccbKernel, guard: SizeGuard) -> Result<DenseMatrix> {
    let n = kernel.shape.n();
    guard.check(n)?;
    let mut m = DenseMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            m.set(i, j, kernel.entry(i, j));
        }
    }
    Ok(m)
}

/// `(B x)[i] = sum_j b[offset(i, j)] x[j]` by direct double sum.
pub fn bccb_matvec_naive(kernel: &BccbKernel, x: &[f64]) -> Result<Vec<f64>> {
    let n = kernel.shape.n();
    if x.len() != n {
        return Err(Error::shape(format!(
            "vector has {} entries, grid {} has {n}",
            x.len(),
            kernel.shape
        )));
    }
    Ok((0..n)
        .map(|i| (0..n).map(|j| kernel.entry(i, j) * x[j]).sum())
        .collect())
}

/// Nearest BCCB matrix to `A` in Frobenius norm.
#[derive(Debug, Clone, PartialEq)]
pub struct ProjectionResult {
    pub kernel: BccbKernel,
    /// `||A - Ã||_F`.
    pub residual_fro: f64,
    /// `||Ã||_F^2 / ||A||_F^2`, or 1 for the zero matrix.
    pub similarity: f64,
}

fn ensure_square_for(a: &DenseMatrix, shape: GridShape) -> Result<()> {
    let n = shape.n();
    if a.rows != n || a.cols != n {
        return Err(Error::shape(format!(
            "{}x{} matrix does not match grid {shape} (N = {n})",
            a.rows, a.cols
        )));
    }
    Ok(())
}

/// Orthogonal projection of `A` onto the BCCB subspace of `shape`.
///
/// `b[k] = <A, B_k> / N`, accumulated in one pass over `A` by binning each
/// entry into its offset class.
pub fn project_to_bccb(a: &DenseMatrix, shape: GridShape) -> Result<ProjectionResult> {
    ensure_square_for(a, shape)?;
    let n = shape.n();
    let mut b = vec![0.0; n];
    for i in 0..n {
        for (j, &v) in a.row(i).iter().enumerate() {
            b[shape.offset_index(i, j)] += v;
        }
    }
    let inv_n = 1.0 / n as f64;
    for v in &mut b {
        *v *= inv_n;
    }
    let kernel = BccbKernel { b, shape };

    let mut residual_sqr = 0.0;
    for i in 0..n {
        for (j, &v) in a.row(i).iter().enumerate() {
            let r = v - kernel.entry(i, j);
            residual_sqr += r * r;
        }
    }
    let total = a.frobenius_sqr();
    let similarity = if total == 0.0 {
        1.0
    } else {
        (kernel.frobenius_sqr() / total).clamp(0.0, 1.0)
    };
    Ok(ProjectionResult {
        kernel,
        residual_fro: residual_sqr.sqrt(),
        similarity,
    })
}

/// `||A - B||_F` for a BCCB `B`, without materializing it.
pub fn distance_to_bccb(a: &DenseMatrix, kernel: &BccbKernel) -> Result<f64> {
    ensure_square_for(a, kernel.shape)?;
    let n = kernel.shape.n();
    let mut acc = 0.0;
    for i in 0..n {
        for (j, &v) in a.row(i).iter().enumerate() {
            let r = v - kernel.entry(i, j);
            acc += r * r;
        }
    }
    Ok(acc.sqrt())
}

/// Checks that the projection beats `trials` random BCCB candidates.
///
/// Candidates alternate between kernels drawn uniformly at the scale of `A`
/// and small perturbations of the projected kernel itself.
pub fn nearest_bccb_distance_check(
    a: &DenseMatrix,
    shape: GridShape,
    trials: usize,
    seed: u64,
) -> Result<bool> {
    let projection = project_to_bccb(a, shape)?;
    let best = projection.residual_fro;
    let scale = a.data.iter().fold(0.0, |m: f64, v| m.max(v.abs())) + 1.0;
    let mut rng = SplitMix64::new(seed);
    for t in 0..trials {
        let b: Vec<f64> = if t % 2 == 0 {
            rng.fill_uniform(shape.n(), -scale, scale)
        } else {
            projection
                .kernel
                .b
                .iter()
                .map(|&v| v + rng.uniform(-1e-3, 1e-3) * scale)
                .collect()
        };
        let candidate = BccbKernel { b, shape };
        if best > distance_to_bccb(a, &candidate)? + 1e-9 {
            return Ok(false);
        }
    }
    Ok(true)
}
