//! Discrete Fourier transforms and the DFT-based correlation operator.
//!
//! Conventions: the forward transform is unnormalized,
//! `X[k] = sum_j x[j] exp(-2 pi i jk / n)`, and the inverse carries the
//! full `1/n` (or `1/(H W)` in 2D). Power-of-two lengths use an iterative
//! radix-2 Cooley-Tukey transform; every other length goes through
//! Bluestein's chirp-z algorithm on a power-of-two convolution of length
//! at least `2n - 1`, so all lengths run in `O(n log n)`.
//!
//! On top of the transforms sits the 2D circular cross-correlation
//! `b ⊛ x = IDFT2(conj(DFT2(b)) * DFT2(x))`, which equals multiplication
//! by the BCCB matrix whose first row is `b`:
//!
//! ```text
//! (b ⊛ x)[h, w] = sum_{dh, dw} b[dh, dw] * x[(h + dh) mod H, (w + dw) mod W]
//! ```

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::tensor::{GridShape, SequenceTensor};

/// Relative tolerance on the imaginary residue of inverse transforms of real data.
pub const IMAG_RESIDUE_TOL: f64 = 1e-9;

/// Twiddles are recomputed from `cos`/`sin` every this many recurrence steps.
const TWIDDLE_REANCHOR: usize = 32;

/// A length-`n` complex vector stored as separate real and imaginary parts.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexVector {
    pub re: Vec<f64>,
    pub im: Vec<f64>,
}

impl ComplexVector {
    pub fn new(re: Vec<f64>, im: Vec<f64>) -> Result<Self> {
        if re.len() != im.len() {
            return Err(Error::shape(format!(
                "real part has {} entries, imaginary part {}",
                re.len(),
                im.len()
            )));
        }
        if re.is_empty() {
            return Err(Error::Domain("complex vector must be non-empty".into()));
        }
        Ok(Self { re, im })
    }

    pub fn from_real(re: Vec<f64>) -> Result<Self> {
        let im = vec![0.0; re.len()];
        Self::new(re, im)
    }

    pub fn len(&self) -> usize {
        self.re.len()
    }

    pub fn is_empty(&self) -> bool {
        self.re.is_empty()
    }

    pub fn to_complex(&self) -> Vec<Complex64> {
        self.re
            .iter()
            .zip(&self.im)
            .map(|(&re, &im)| Complex64::new(re, im))
            .collect()
    }

    pub fn from_complex(values: &[Complex64]) -> Self {
        Self {
            re: values.iter().map(|c| c.re).collect(),
            im: values.iter().map(|c| c.im).collect(),
        }
    }

    /// Sum of squared magnitudes.
    pub fn norm_sqr(&self) -> f64 {
        self.re.iter().chain(&self.im).map(|v| v * v).sum()
    }

    /// Largest component magnitude.
    pub fn max_abs(&self) -> f64 {
        self.re
            .iter()
            .zip(&self.im)
            .fold(0.0, |m, (&re, &im)| m.max(re.hypot(im)))
    }
}

/// An `H x W` complex grid in row-major order.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexGrid {
    pub re: Vec<f64>,
    pub im: Vec<f64>,
    shape: GridShape,
}

impl ComplexGrid {
    pub fn new(shape: GridShape, re: Vec<f64>, im: Vec<f64>) -> Result<Self> {
        if re.len() != shape.n() || im.len() != shape.n() {
            return Err(Error::shape(format!(
                "grid {shape} needs {} entries per plane, got {} and {}",
                shape.n(),
                re.len(),
                im.len()
            )));
        }
        Ok(Self { re, im, shape })
    }

    pub fn from_real(shape: GridShape, re: Vec<f64>) -> Result<Self> {
        let im = vec![0.0; re.len()];
        Self::new(shape, re, im)
    }

    pub fn shape(&self) -> GridShape {
        self.shape
    }

    fn to_complex(&self) -> Vec<Complex64> {
        self.re
            .iter()
            .zip(&self.im)
            .map(|(&re, &im)| Complex64::new(re, im))
            .collect()
    }

    fn from_complex(shape: GridShape, values: &[Complex64]) -> Self {
        Self {
            re: values.iter().map(|c| c.re).collect(),
            im: values.iter().map(|c| c.im).collect(),
            shape,
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.re
            .iter()
            .zip(&self.im)
            .fold(0.0, |m, (&re, &im)| m.max(re.hypot(im)))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Forward,
    Inverse,
}

impl Direction {
    fn sign(self) -> f64 {
        match self {
            Direction::Forward => -1.0,
            Direction::Inverse => 1.0,
        }
    }
}

/// Which 1D kernel to run. `Auto` picks radix-2 for powers of two and
/// Bluestein otherwise; `Bluestein` forces the chirp-z path for any length.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Algorithm {
    #[default]
    Auto,
    Bluestein,
}

/// Iterative radix-2 transform of one power-of-two length.
#[derive(Debug, Clone)]
struct Radix2 {
    n: usize,
    /// Forward twiddles for each butterfly stage, `stage[s][k] = exp(-2 pi i k / 2^(s+1))`.
    stages: Vec<Vec<Complex64>>,
}

impl Radix2 {
    fn new(n: usize) -> Self {
        debug_assert!(n.is_power_of_two());
        let mut stages = Vec::new();
        let mut m = 2;
        while m <= n {
            stages.push(stage_twiddles(m));
            m <<= 1;
        }
        Self { n, stages }
    }

    /// Unnormalized transform in place.
    fn run(&self, buf: &mut [Complex64], direction: Direction) {
        let n = self.n;
        debug_assert_eq!(buf.len(), n);
        if n <= 1 {
            return;
        }
        let bits = n.trailing_zeros();
        for i in 0..n {
            let j = i.reverse_bits() >> (usize::BITS - bits);
            if i < j {
                buf.swap(i, j);
            }
        }
        let inverse = direction == Direction::Inverse;
        for (s, twiddles) in self.stages.iter().enumerate() {
            let m = 2usize << s;
            let half = m / 2;
            for start in (0..n).step_by(m) {
                for (k, &tw) in twiddles.iter().enumerate() {
                    let w = if inverse { tw.conj() } else { tw };
                    let t = w * buf[start + k + half];
                    let u = buf[start + k];
                    buf[start + k] = u + t;
                    buf[start + k + half] = u - t;
                }
            }
        }
    }
}

/// `exp(-2 pi i k / m)` for `k < m / 2`, by recurrence on the stage root,
/// re-anchored to the exact value every `TWIDDLE_REANCHOR` steps.
fn stage_twiddles(m: usize) -> Vec<Complex64> {
    let step = -2.0 * PI / m as f64;
    let root = Complex64::new(step.cos(), step.sin());
    let mut out = Vec::with_capacity(m / 2);
    let mut w = Complex64::new(1.0, 0.0);
    for k in 0..m / 2 {
        if k % TWIDDLE_REANCHOR == 0 {
            let angle = step * k as f64;
            w = Complex64::new(angle.cos(), angle.sin());
        }
        out.push(w);
        w *= root;
    }
    out
}

/// Bluestein chirp-z transform of one arbitrary length in one direction.
#[derive(Debug, Clone)]
struct Bluestein {
    n: usize,
    inner: Radix2,
    /// `exp(sign * pi i j^2 / n)` for `j < n`.
    chirp: Vec<Complex64>,
    /// Inner-length spectrum of the conjugate chirp, pre-scaled by `1/m`.
    kernel_spectrum: Vec<Complex64>,
}

impl Bluestein {
    fn new(n: usize, direction: Direction) -> Self {
        let m = (2 * n - 1).next_power_of_two();
        let inner = Radix2::new(m);
        let sign = direction.sign();
        let two_n = 2 * n as u128;
        let chirp: Vec<Complex64> = (0..n)
            .map(|j| {
                // j^2 mod 2n keeps the phase argument small and exact.
                let phase = ((j as u128 * j as u128) % two_n) as f64;
                let angle = sign * PI * phase / n as f64;
                Complex64::new(angle.cos(), angle.sin())
            })
            .collect();
        let mut kernel = vec![Complex64::new(0.0, 0.0); m];
        kernel[0] = chirp[0].conj();
        for j in 1..n {
            kernel[j] = chirp[j].conj();
            kernel[m - j] = chirp[j].conj();
        }
        inner.run(&mut kernel, Direction::Forward);
        let scale = 1.0 / m as f64;
        for v in &mut kernel {
            *v *= scale;
        }
        Self {
            n,
            inner,
            chirp,
            kernel_spectrum: kernel,
        }
    }

    fn run(&self, buf: &mut [Complex64]) {
        let m = self.inner.n;
        let mut work = vec![Complex64::new(0.0, 0.0); m];
        for ((w, &x), &c) in work.iter_mut().zip(buf.iter()).zip(&self.chirp) {
            *w = x * c;
        }
        self.inner.run(&mut work, Direction::Forward);
        for (w, &k) in work.iter_mut().zip(&self.kernel_spectrum) {
            *w *= k;
        }
        self.inner.run(&mut work, Direction::Inverse);
        for ((out, &w), &c) in buf.iter_mut().zip(&work[..self.n]).zip(&self.chirp) {
            *out = w * c;
        }
    }
}

/// Per-invocation 1D plan for one length and direction.
#[derive(Debug, Clone)]
enum Plan {
    Radix2(Radix2),
    Bluestein(Bluestein),
}

impl Plan {
    fn new(n: usize, direction: Direction, algorithm: Algorithm) -> Self {
        match algorithm {
            Algorithm::Auto if n.is_power_of_two() => Plan::Radix2(Radix2::new(n)),
            _ => Plan::Bluestein(Bluestein::new(n, direction)),
        }
    }

    /// Unnormalized transform in place.
    fn run(&self, buf: &mut [Complex64], direction: Direction) {
        match self {
            Plan::Radix2(p) => p.run(buf, direction),
            Plan::Bluestein(p) => p.run(buf),
        }
    }
}

fn transform_1d(x: &ComplexVector, direction: Direction, algorithm: Algorithm) -> ComplexVector {
    let n = x.len();
    let mut buf = x.to_complex();
    Plan::new(n, direction, algorithm).run(&mut buf, direction);
    if direction == Direction::Inverse {
        let scale = 1.0 / n as f64;
        for v in &mut buf {
            *v *= scale;
        }
    }
    ComplexVector::from_complex(&buf)
}

/// Unnormalized forward DFT.
pub fn dft1d_forward(x: &ComplexVector) -> ComplexVector {
    transform_1d(x, Direction::Forward, Algorithm::Auto)
}

/// Inverse DFT with `1/n` normalization.
pub fn dft1d_inverse(x: &ComplexVector) -> ComplexVector {
    transform_1d(x, Direction::Inverse, Algorithm::Auto)
}

/// Forward DFT with an explicit choice of kernel.
pub fn dft1d_forward_with(x: &ComplexVector, algorithm: Algorithm) -> ComplexVector {
    transform_1d(x, Direction::Forward, algorithm)
}

/// Inverse DFT with an explicit choice of kernel.
pub fn dft1d_inverse_with(x: &ComplexVector, algorithm: Algorithm) -> ComplexVector {
    transform_1d(x, Direction::Inverse, algorithm)
}

/// Row and column plans for one grid shape and direction.
struct Plan2d {
    shape: GridShape,
    direction: Direction,
    rows: Plan,
    cols: Plan,
}

impl Plan2d {
    fn new(shape: GridShape, direction: Direction) -> Self {
        Self {
            shape,
            direction,
            rows: Plan::new(shape.width(), direction, Algorithm::Auto),
            cols: Plan::new(shape.height(), direction, Algorithm::Auto),
        }
    }

    /// Separable transform in place: every row, then every column.
    /// The inverse direction applies the `1/(H W)` normalization.
    fn run(&self, buf: &mut [Complex64]) {
        let (h, w) = (self.shape.height(), self.shape.width());
        debug_assert_eq!(buf.len(), h * w);
        if w > 1 {
            for row in buf.chunks_exact_mut(w) {
                self.rows.run(row, self.direction);
            }
        }
        if h > 1 {
            let mut column = vec![Complex64::new(0.0, 0.0); h];
            for c in 0..w {
                for (r, v) in column.iter_mut().enumerate() {
                    *v = buf[r * w + c];
                }
                self.cols.run(&mut column, self.direction);
                for (r, v) in column.iter().enumerate() {
                    buf[r * w + c] = *v;
                }
            }
        }
        if self.direction == Direction::Inverse {
            let scale = 1.0 / (h * w) as f64;
            for v in buf.iter_mut() {
                *v *= scale;
            }
        }
    }
}

/// Unnormalized 2D forward DFT.
pub fn dft2d_forward(x: &ComplexGrid) -> ComplexGrid {
    let mut buf = x.to_complex();
    Plan2d::new(x.shape, Direction::Forward).run(&mut buf);
    ComplexGrid::from_complex(x.shape, &buf)
}

/// 2D inverse DFT with `1/(H W)` normalization.
pub fn dft2d_inverse(x: &ComplexGrid) -> ComplexGrid {
    let mut buf = x.to_complex();
    Plan2d::new(x.shape, Direction::Inverse).run(&mut buf);
    ComplexGrid::from_complex(x.shape, &buf)
}

/// Forward and inverse 2D plans for real planes on one grid.
///
/// Built once per call site and reused across channels; not shared between threads.
pub(crate) struct GridTransform {
    forward: Plan2d,
    inverse: Plan2d,
}

impl GridTransform {
    pub(crate) fn new(shape: GridShape) -> Self {
        Self {
            forward: Plan2d::new(shape, Direction::Forward),
            inverse: Plan2d::new(shape, Direction::Inverse),
        }
    }

    pub(crate) fn forward_real(&self, plane: &[f64]) -> Vec<Complex64> {
        let mut buf: Vec<Complex64> = plane.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.forward.run(&mut buf);
        buf
    }

    /// Inverse transform of a spectrum known to belong to real data.
    ///
    /// `bound` is an a-priori bound on the magnitude of the real result; the
    /// imaginary residue must stay below `IMAG_RESIDUE_TOL * bound`.
    pub(crate) fn inverse_real(&self, mut spectrum: Vec<Complex64>, bound: f64) -> Result<Vec<f64>> {
        self.inverse.run(&mut spectrum);
        let tolerance = IMAG_RESIDUE_TOL * bound;
        let residue = spectrum.iter().fold(0.0, |m: f64, c| m.max(c.im.abs()));
        if residue > tolerance {
            return Err(Error::SpectralResidue { residue, tolerance });
        }
        Ok(spectrum.into_iter().map(|c| c.re).collect())
    }
}

fn l1(plane: &[f64]) -> f64 {
    plane.iter().map(|v| v.abs()).sum()
}

fn linf(plane: &[f64]) -> f64 {
    plane.iter().fold(0.0, |m, v| m.max(v.abs()))
}

/// Channel-wise 2D circular cross-correlation `b ⊛ x`.
///
/// Each output channel is the product of the BCCB matrix with first row
/// `b[:, c]` and the column `x[:, c]`.
pub fn circorr2d(b: &SequenceTensor, x: &SequenceTensor) -> Result<SequenceTensor> {
    b.ensure_same_layout(x, "circorr2d")?;
    let shape = x.shape();
    let plans = GridTransform::new(shape);
    let mut planes = Vec::with_capacity(x.channels());
    for c in 0..x.channels() {
        let bc = b.channel(c);
        let xc = x.channel(c);
        let fb = plans.forward_real(&bc);
        let mut fx = plans.forward_real(&xc);
        for (v, kb) in fx.iter_mut().zip(&fb) {
            *v *= kb.conj();
        }
        planes.push(plans.inverse_real(fx, l1(&bc) * linf(&xc))?);
    }
    SequenceTensor::from_channels(shape, &planes)
}

/// Correlates every channel of `x` with one shared kernel: `kernel ⊛ x[:, c]`.
pub fn circorr2d_broadcast(kernel: &[f64], x: &SequenceTensor) -> Result<SequenceTensor> {
    broadcast(kernel, x, true)
}

/// Circular convolution of every channel of `x` with one shared kernel.
///
/// This is the adjoint of `x -> kernel ⊛ x`, i.e. multiplication by the
/// transpose of the BCCB matrix with first row `kernel`.
pub fn circconv2d_broadcast(kernel: &[f64], x: &SequenceTensor) -> Result<SequenceTensor> {
    broadcast(kernel, x, false)
}

fn broadcast(kernel: &[f64], x: &SequenceTensor, conjugate: bool) -> Result<SequenceTensor> {
    let shape = x.shape();
    if kernel.len() != shape.n() {
        return Err(Error::shape(format!(
            "kernel has {} entries, grid {shape} has {}",
            kernel.len(),
            shape.n()
        )));
    }
    let plans = GridTransform::new(shape);
    let mut fk = plans.forward_real(kernel);
    if conjugate {
        for v in &mut fk {
            *v = v.conj();
        }
    }
    let kernel_l1 = l1(kernel);
    let mut planes = Vec::with_capacity(x.channels());
    for c in 0..x.channels() {
        let xc = x.channel(c);
        let mut fx = plans.forward_real(&xc);
        for (v, k) in fx.iter_mut().zip(&fk) {
            *v *= k;
        }
        planes.push(plans.inverse_real(fx, kernel_l1 * linf(&xc))?);
    }
    SequenceTensor::from_channels(shape, &planes)
}

/// `sum_c (b ⊛ x)[:, c]`: the channel-summed correlation, accumulated in the
/// frequency domain so only one inverse transform is needed.
pub fn circorr2d_channel_sum(b: &SequenceTensor, x: &SequenceTensor) -> Result<Vec<f64>> {
    b.ensure_same_layout(x, "circorr2d_channel_sum")?;
    let shape = x.shape();
    let plans = GridTransform::new(shape);
    let mut acc = vec![Complex64::new(0.0, 0.0); shape.n()];
    let mut bound = 0.0;
    for c in 0..x.channels() {
        let bc = b.channel(c);
        let xc = x.channel(c);
        let fb = plans.forward_real(&bc);
        let fx = plans.forward_real(&xc);
        for ((a, vb), vx) in acc.iter_mut().zip(&fb).zip(&fx) {
            *a += vb.conj() * vx;
        }
        bound += l1(&bc) * linf(&xc);
    }
    plans.inverse_real(acc, bound)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SplitMix64;

    /// O(n^2) DFT by direct summation.
    fn naive_dft(x: &[Complex64], sign: f64) -> Vec<Complex64> {
        let n = x.len();
        (0..n)
            .map(|k| {
                x.iter().enumerate().fold(Complex64::new(0.0, 0.0), |acc, (j, &v)| {
                    let angle = sign * 2.0 * PI * ((j * k) % n) as f64 / n as f64;
                    acc + v * Complex64::new(angle.cos(), angle.sin())
                })
            })
            .collect()
    }

    fn random_vector(rng: &mut SplitMix64, n: usize) -> ComplexVector {
        ComplexVector::new(rng.fill_uniform(n, -1.0, 1.0), rng.fill_uniform(n, -1.0, 1.0)).unwrap()
    }

    fn rel_err(a: &ComplexVector, b: &[Complex64]) -> f64 {
        let scale = b.iter().fold(0.0, |m: f64, c| m.max(c.norm()));
        let err = a
            .to_complex()
            .iter()
            .zip(b)
            .fold(0.0, |m: f64, (x, y)| m.max((x - y).norm()));
        err / scale.max(f64::MIN_POSITIVE)
    }

    #[test]
    fn impulse_and_constant() {
        let impulse = ComplexVector::from_real(vec![1.0, 0.0, 0.0, 0.0]).unwrap();
        assert_eq!(dft1d_forward(&impulse).re, vec![1.0; 4]);
        let constant = ComplexVector::from_real(vec![1.0; 4]).unwrap();
        let spec = dft1d_forward(&constant);
        assert_eq!(spec.re, vec![4.0, 0.0, 0.0, 0.0]);
        assert!(spec.im.iter().all(|v| *v == 0.0));
        let back = dft1d_inverse(&ComplexVector::from_real(vec![4.0, 0.0, 0.0, 0.0]).unwrap());
        assert_eq!(back.re, vec![1.0; 4]);
    }

    #[test]
    fn length_seven_matches_naive() {
        let mut rng = SplitMix64::new(7);
        let x = random_vector(&mut rng, 7);
        let expected = naive_dft(&x.to_complex(), -1.0);
        assert!(rel_err(&dft1d_forward(&x), &expected) <= 1e-12);
    }

    #[test]
    fn length_fourteen_inverse_matches_naive() {
        let mut rng = SplitMix64::new(14);
        let x = random_vector(&mut rng, 14);
        let expected: Vec<Complex64> = naive_dft(&x.to_complex(), 1.0)
            .into_iter()
            .map(|v| v / 14.0)
            .collect();
        assert!(rel_err(&dft1d_inverse(&x), &expected) <= 1e-12);
    }

    #[test]
    fn length_twelve_round_trip() {
        let mut rng = SplitMix64::new(12);
        let x = random_vector(&mut rng, 12);
        let back = dft1d_inverse(&dft1d_forward(&x));
        assert!(rel_err(&back, &x.to_complex()) <= 1e-12);
    }

    #[test]
    fn length_one_is_identity() {
        let x = ComplexVector::new(vec![3.5], vec![-1.0]).unwrap();
        assert_eq!(dft1d_forward(&x), x);
        assert_eq!(dft1d_inverse(&x), x);
    }

    #[test]
    fn forced_bluestein_matches_radix2() {
        let mut rng = SplitMix64::new(3);
        for n in [1usize, 2, 4, 8, 16, 64, 256] {
            let x = random_vector(&mut rng, n);
            let fast = dft1d_forward(&x);
            let blue = dft1d_forward_with(&x, Algorithm::Bluestein);
            assert!(rel_err(&blue, &fast.to_complex()) <= 1e-11, "n = {n}");
        }
    }

    #[test]
    fn long_radix2_twiddles_stay_accurate() {
        // Long enough for many re-anchoring intervals in the top stage.
        let mut rng = SplitMix64::new(4096);
        let x = random_vector(&mut rng, 4096);
        let blue = dft1d_forward_with(&x, Algorithm::Bluestein);
        assert!(rel_err(&dft1d_forward(&x), &blue.to_complex()) <= 1e-11);
    }

    #[test]
    fn non_finite_input_propagates() {
        let x = ComplexVector::from_real(vec![1.0, f64::NAN, 0.0]).unwrap();
        let y = dft1d_forward(&x);
        assert!(y.re.iter().any(|v| !v.is_finite()));
    }

    #[test]
    fn empty_vector_rejected() {
        assert!(ComplexVector::new(vec![], vec![]).is_err());
        assert!(ComplexVector::new(vec![1.0], vec![]).is_err());
    }

    fn naive_dft2(x: &ComplexGrid) -> Vec<Complex64> {
        let (h, w) = (x.shape().height(), x.shape().width());
        let data = x.to_complex();
        let mut out = vec![Complex64::new(0.0, 0.0); h * w];
        for u in 0..h {
            for v in 0..w {
                for r in 0..h {
                    for c in 0..w {
                        let angle = -2.0
                            * PI
                            * (((u * r) % h) as f64 / h as f64 + ((v * c) % w) as f64 / w as f64);
                        out[u * w + v] += data[r * w + c] * Complex64::new(angle.cos(), angle.sin());
                    }
                }
            }
        }
        out
    }

    #[test]
    fn impulse_2d() {
        let shape = GridShape::new(3, 4).unwrap();
        let mut re = vec![0.0; 12];
        re[0] = 1.0;
        let spec = dft2d_forward(&ComplexGrid::from_real(shape, re).unwrap());
        for (&r, &i) in spec.re.iter().zip(&spec.im) {
            assert!((r - 1.0).abs() < 1e-15 && i.abs() < 1e-15);
        }
    }

    #[test]
    fn two_by_two_matches_naive() {
        let shape = GridShape::new(2, 2).unwrap();
        let mut rng = SplitMix64::new(22);
        let x = ComplexGrid::new(shape, rng.fill_uniform(4, -1.0, 1.0), rng.fill_uniform(4, -1.0, 1.0))
            .unwrap();
        let expected = naive_dft2(&x);
        let got = dft2d_forward(&x).to_complex();
        let err = got.iter().zip(&expected).fold(0.0, |m: f64, (a, b)| m.max((a - b).norm()));
        assert!(err <= 1e-12);
    }

    #[test]
    fn rectangular_grid_matches_naive() {
        let shape = GridShape::new(5, 6).unwrap();
        let mut rng = SplitMix64::new(56);
        let x = ComplexGrid::new(shape, rng.fill_uniform(30, -1.0, 1.0), rng.fill_uniform(30, -1.0, 1.0))
            .unwrap();
        let expected = naive_dft2(&x);
        let got = dft2d_forward(&x).to_complex();
        let scale = expected.iter().fold(0.0, |m: f64, c| m.max(c.norm()));
        let err = got.iter().zip(&expected).fold(0.0, |m: f64, (a, b)| m.max((a - b).norm()));
        assert!(err / scale <= 1e-12);
    }

    #[test]
    fn fourteen_square_round_trip() {
        let shape = GridShape::new(14, 14).unwrap();
        let mut rng = SplitMix64::new(1414);
        let x = ComplexGrid::new(shape, rng.fill_uniform(196, -1.0, 1.0), rng.fill_uniform(196, -1.0, 1.0))
            .unwrap();
        let back = dft2d_inverse(&dft2d_forward(&x));
        let err = back
            .re
            .iter()
            .zip(&x.re)
            .chain(back.im.iter().zip(&x.im))
            .fold(0.0, |m: f64, (a, b)| m.max((a - b).abs()));
        assert!(err <= 1e-12 * x.max_abs());
    }

    #[test]
    fn identity_kernel_correlation() {
        let shape = GridShape::new(3, 5).unwrap();
        let mut rng = SplitMix64::new(5);
        let x = SequenceTensor::random(shape, 2, &mut rng, -1.0, 1.0);
        let mut b = SequenceTensor::zeros(shape, 2);
        b.set(0, 0, 1.0);
        b.set(0, 1, 1.0);
        let out = circorr2d(&b, &x).unwrap();
        for (a, e) in out.data().iter().zip(x.data()) {
            assert!((a - e).abs() <= 1e-15);
        }
    }

    #[test]
    fn shift_kernel_correlation() {
        let shape = GridShape::new(3, 5).unwrap();
        let mut rng = SplitMix64::new(6);
        let x = SequenceTensor::random(shape, 1, &mut rng, -1.0, 1.0);
        for k in 0..shape.n() {
            let mut b = SequenceTensor::zeros(shape, 1);
            b.set(k, 0, 1.0);
            let out = circorr2d(&b, &x).unwrap();
            let (dh, dw) = shape.coords(k);
            for i in 0..shape.n() {
                let (h, w) = shape.coords(i);
                let src = shape.wrap_index((h + dh) as isize, (w + dw) as isize);
                assert!((out.get(i, 0) - x.get(src, 0)).abs() <= 1e-12);
            }
            // out is x rolled by (-dh, -dw)
            let rolled = x.roll(-(dh as isize), -(dw as isize));
            for (a, e) in out.data().iter().zip(rolled.data()) {
                assert!((a - e).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn correlation_layout_mismatch() {
        let a = SequenceTensor::zeros(GridShape::new(2, 3).unwrap(), 1);
        let b = SequenceTensor::zeros(GridShape::new(3, 2).unwrap(), 1);
        assert!(matches!(circorr2d(&a, &b), Err(Error::ShapeMismatch(_))));
        let c = SequenceTensor::zeros(GridShape::new(2, 3).unwrap(), 2);
        assert!(matches!(circorr2d(&a, &c), Err(Error::ShapeMismatch(_))));
        assert!(circorr2d_broadcast(&[1.0; 5], &a).is_err());
    }

    #[test]
    fn channel_sum_is_sum_of_channels() {
        let shape = GridShape::new(4, 3).unwrap();
        let mut rng = SplitMix64::new(8);
        let b = SequenceTensor::random(shape, 3, &mut rng, -1.0, 1.0);
        let x = SequenceTensor::random(shape, 3, &mut rng, -1.0, 1.0);
        let per = circorr2d(&b, &x).unwrap();
        let summed = circorr2d_channel_sum(&b, &x).unwrap();
        for (i, s) in summed.iter().enumerate() {
            let expected: f64 = per.row(i).iter().sum();
            assert!((s - expected).abs() <= 1e-12);
        }
    }

    #[test]
    fn convolution_is_adjoint_of_correlation() {
        let shape = GridShape::new(3, 4).unwrap();
        let mut rng = SplitMix64::new(9);
        let kernel = rng.fill_uniform(12, -1.0, 1.0);
        let x = SequenceTensor::random(shape, 2, &mut rng, -1.0, 1.0);
        let y = SequenceTensor::random(shape, 2, &mut rng, -1.0, 1.0);
        let lhs = circorr2d_broadcast(&kernel, &x).unwrap().dot(&y);
        let rhs = x.dot(&circconv2d_broadcast(&kernel, &y).unwrap());
        assert!((lhs - rhs).abs() <= 1e-10 * lhs.abs().max(1.0));
    }
}
