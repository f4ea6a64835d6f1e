//! Property suites behind `circattn verify`.
//!
//! Each property reports the largest error it observed and the tolerance
//! it is held to. All randomness comes from SplitMix64 seeded from the
//! suite seed, so output is identical across runs with the same seed.
//! `cases` scales the number of random cases; `cases = 1` runs the base counts.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;

use crate::attention::{
    circulant_attention, circulant_attention_dense, circulant_scores, multihead_circulant_attention,
    multihead_circulant_attention_dense, softmax_first_row, AttentionConfig, ProjectionWeights, ReweightMode,
};
use crate::error::{Error, Result};
use crate::gradients::{
    circulant_attention_backward, correlation_adjoint, finite_difference_gradient, relative_gradient_error,
    softmax_jacobian, FD_EPSILON,
};
use crate::rng::SplitMix64;
use crate::spectral::{
    circorr2d, circorr2d_broadcast, dft1d_forward, dft1d_forward_with, dft1d_inverse, dft2d_forward, dft2d_inverse,
    Algorithm, ComplexGrid, ComplexVector,
};
use crate::structured::{
    bccb_materialize, distance_to_bccb, project_to_bccb, BccbKernel, DenseMatrix, SizeGuard,
};
use crate::tensor::{GridShape, SequenceTensor};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Suite {
    Fft,
    Bccb,
    Attention,
    Grad,
    All,
}

impl Suite {
    pub fn as_str(self) -> &'static str {
        match self {
            Suite::Fft => "fft",
            Suite::Bccb => "bccb",
            Suite::Attention => "attention",
            Suite::Grad => "grad",
            Suite::All => "all",
        }
    }
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Suite {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fft" => Ok(Suite::Fft),
            "bccb" => Ok(Suite::Bccb),
            "attention" => Ok(Suite::Attention),
            "grad" => Ok(Suite::Grad),
            "all" => Ok(Suite::All),
            other => Err(Error::Domain(format!("unknown suite `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PropertyOutcome {
    pub name: String,
    pub max_err: f64,
    pub tolerance: f64,
}

impl PropertyOutcome {
    fn new(name: &str, max_err: f64, tolerance: f64) -> Self {
        Self {
            name: name.to_string(),
            max_err,
            tolerance,
        }
    }

    /// NaN errors fail.
    pub fn passed(&self) -> bool {
        self.max_err <= self.tolerance
    }
}

impl fmt::Display for PropertyOutcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let status = if self.passed() { "PASS" } else { "FAIL" };
        write!(f, "{status} {} max_err={:.3e}", self.name, self.max_err)
    }
}

/// Runs one suite (or all of them) and returns every property outcome in order.
pub fn run_suite(suite: Suite, seed: u64, cases: usize) -> Result<Vec<PropertyOutcome>> {
    if cases == 0 {
        return Err(Error::Domain("cases must be at least 1".into()));
    }
    match suite {
        Suite::Fft => fft_suite(seed, cases),
        Suite::Bccb => bccb_suite(seed, cases),
        Suite::Attention => attention_suite(seed, cases),
        Suite::Grad => grad_suite(seed, cases),
        Suite::All => {
            let mut all = fft_suite(seed, cases)?;
            all.extend(bccb_suite(seed, cases)?);
            all.extend(attention_suite(seed, cases)?);
            all.extend(grad_suite(seed, cases)?);
            Ok(all)
        }
    }
}

fn rng_for(seed: u64, tag: u64) -> SplitMix64 {
    let mut mix = SplitMix64::new(seed ^ tag.wrapping_mul(0x9E37_79B9_7F4A_7C15));
    SplitMix64::new(mix.next_u64())
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0, |m, (x, y)| m.max((x - y).abs()))
}

fn max_abs(a: &[f64]) -> f64 {
    a.iter().fold(0.0, |m, v| m.max(v.abs()))
}

fn random_vector(rng: &mut SplitMix64, n: usize) -> ComplexVector {
    ComplexVector::new(rng.fill_uniform(n, -1.0, 1.0), rng.fill_uniform(n, -1.0, 1.0)).expect("n >= 1")
}

fn random_grid_shape(rng: &mut SplitMix64, max_side: usize) -> GridShape {
    GridShape::new(1 + rng.below(max_side), 1 + rng.below(max_side)).expect("sides >= 1")
}

/// Direct O(n^2) DFT with exact integer phase reduction.
pub fn naive_dft(x: &ComplexVector, direction_sign: f64) -> ComplexVector {
    let n = x.len();
    let data = x.to_complex();
    let out: Vec<Complex64> = (0..n)
        .map(|k| {
            data.iter().enumerate().fold(Complex64::new(0.0, 0.0), |acc, (j, &v)| {
                let angle = direction_sign * 2.0 * PI * ((j * k) % n) as f64 / n as f64;
                acc + v * Complex64::new(angle.cos(), angle.sin())
            })
        })
        .collect();
    ComplexVector::from_complex(&out)
}

fn vector_rel_err(got: &ComplexVector, expected: &ComplexVector) -> f64 {
    let err = got
        .re
        .iter()
        .zip(&expected.re)
        .chain(got.im.iter().zip(&expected.im))
        .fold(0.0, |m: f64, (a, b)| m.max((a - b).abs()));
    let scale = expected.max_abs();
    if scale == 0.0 {
        err
    } else {
        err / scale
    }
}

const PRIMES_TO_64: [usize; 18] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53, 59, 61];

/// Lengths for the naive-DFT agreement check: every prime up to 64 plus random fill, 20 per case.
pub fn naive_check_lengths(rng: &mut SplitMix64, cases: usize) -> Vec<usize> {
    let mut lengths: Vec<usize> = PRIMES_TO_64.to_vec();
    while lengths.len() < 20 * cases {
        lengths.push(1 + rng.below(64));
    }
    lengths
}

fn fft_suite(seed: u64, cases: usize) -> Result<Vec<PropertyOutcome>> {
    let mut out = Vec::new();

    let mut rng = rng_for(seed, 1);
    let (mut round_trip, mut parseval, mut linearity) = (0.0f64, 0.0f64, 0.0f64);
    for n in 1..=64 {
        for _ in 0..cases {
            let x = random_vector(&mut rng, n);
            let spec = dft1d_forward(&x);
            round_trip = round_trip.max(vector_rel_err(&dft1d_inverse(&spec), &x));
            let energy = x.norm_sqr() * n as f64;
            parseval = parseval.max((spec.norm_sqr() - energy).abs() / energy);

            let y = random_vector(&mut rng, n);
            let (alpha, beta) = (rng.uniform(-2.0, 2.0), rng.uniform(-2.0, 2.0));
            let combo = ComplexVector::new(
                x.re.iter().zip(&y.re).map(|(a, b)| alpha * a + beta * b).collect(),
                x.im.iter().zip(&y.im).map(|(a, b)| alpha * a + beta * b).collect(),
            )?;
            let fy = dft1d_forward(&y);
            let expected = ComplexVector::new(
                spec.re.iter().zip(&fy.re).map(|(a, b)| alpha * a + beta * b).collect(),
                spec.im.iter().zip(&fy.im).map(|(a, b)| alpha * a + beta * b).collect(),
            )?;
            linearity = linearity.max(vector_rel_err(&dft1d_forward(&combo), &expected));
        }
    }
    out.push(PropertyOutcome::new("fft_round_trip_1d", round_trip, 1e-11));
    out.push(PropertyOutcome::new("fft_parseval", parseval, 1e-11));
    out.push(PropertyOutcome::new("fft_linearity", linearity, 1e-11));

    let mut rng = rng_for(seed, 2);
    let mut naive = 0.0f64;
    for n in naive_check_lengths(&mut rng, cases) {
        let x = random_vector(&mut rng, n);
        naive = naive.max(vector_rel_err(&dft1d_forward(&x), &naive_dft(&x, -1.0)));
        let scaled = naive_dft(&x, 1.0);
        let expected = ComplexVector::new(
            scaled.re.iter().map(|v| v / n as f64).collect(),
            scaled.im.iter().map(|v| v / n as f64).collect(),
        )?;
        naive = naive.max(vector_rel_err(&dft1d_inverse(&x), &expected));
    }
    out.push(PropertyOutcome::new("fft_naive_agreement", naive, 1e-12));

    let mut rng = rng_for(seed, 3);
    let mut paths = 0.0f64;
    for n in [1usize, 2, 4, 8, 16, 32, 64] {
        for _ in 0..cases {
            let x = random_vector(&mut rng, n);
            paths = paths.max(vector_rel_err(&dft1d_forward_with(&x, Algorithm::Bluestein), &dft1d_forward(&x)));
        }
    }
    out.push(PropertyOutcome::new("fft_bluestein_matches_radix2", paths, 1e-11));

    let mut rng = rng_for(seed, 4);
    let mut shapes = vec![
        GridShape::new(1, 1)?,
        GridShape::new(14, 14)?,
        GridShape::new(61, 64)?,
        GridShape::new(64, 1)?,
    ];
    for _ in 0..8 * cases {
        shapes.push(random_grid_shape(&mut rng, 64));
    }
    let mut round_trip_2d = 0.0f64;
    for shape in shapes {
        let n = shape.n();
        let x = ComplexGrid::new(shape, rng.fill_uniform(n, -1.0, 1.0), rng.fill_uniform(n, -1.0, 1.0))?;
        let back = dft2d_inverse(&dft2d_forward(&x));
        let err = back
            .re
            .iter()
            .zip(&x.re)
            .chain(back.im.iter().zip(&x.im))
            .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        round_trip_2d = round_trip_2d.max(err / x.max_abs());
    }
    out.push(PropertyOutcome::new("fft_round_trip_2d", round_trip_2d, 1e-11));

    let mut rng = rng_for(seed, 5);
    let mut corr = 0.0f64;
    for _ in 0..10 * cases {
        let shape = random_grid_shape(&mut rng, 8);
        let c = 1 + rng.below(3);
        let b = SequenceTensor::random(shape, c, &mut rng, -1.0, 1.0);
        let x = SequenceTensor::random(shape, c, &mut rng, -1.0, 1.0);
        let fast = circorr2d(&b, &x)?;
        let direct = direct_correlation(&b, &x);
        corr = corr.max(max_abs_diff(fast.data(), direct.data()));
    }
    out.push(PropertyOutcome::new("fft_cross_correlation_theorem", corr, 1e-10));
    Ok(out)
}

/// `out[(h, w), c] = sum_{dh, dw} b[(dh, dw), c] x[(h + dh, w + dw), c]` by direct summation.
pub fn direct_correlation(b: &SequenceTensor, x: &SequenceTensor) -> SequenceTensor {
    let shape = x.shape();
    let mut out = SequenceTensor::zeros(shape, x.channels());
    for i in 0..shape.n() {
        let (h, w) = shape.coords(i);
        for k in 0..shape.n() {
            let (dh, dw) = shape.coords(k);
            let src = shape.wrap_index((h + dh) as isize, (w + dw) as isize);
            for c in 0..x.channels() {
                let v = out.get(i, c) + b.get(k, c) * x.get(src, c);
                out.set(i, c, v);
            }
        }
    }
    out
}

fn random_bccb(rng: &mut SplitMix64, shape: GridShape) -> BccbKernel {
    BccbKernel::new(shape, rng.fill_uniform(shape.n(), -1.0, 1.0)).expect("length matches")
}

fn random_dense(rng: &mut SplitMix64, n: usize) -> DenseMatrix {
    DenseMatrix::new(n, n, rng.fill_uniform(n * n, -1.0, 1.0)).expect("length matches")
}

fn bccb_suite(seed: u64, cases: usize) -> Result<Vec<PropertyOutcome>> {
    let mut out = Vec::new();

    // Exact integer arithmetic on 0/1 matrices: tolerance is zero.
    let mut basis_err = 0.0f64;
    for h in 1..=4 {
        for w in 1..=4 {
            let shape = GridShape::new(h, w)?;
            let n = shape.n();
            let basis: Vec<DenseMatrix> = (0..n)
                .map(|k| bccb_materialize(&BccbKernel::basis(shape, k), SizeGuard::Enforce))
                .collect::<Result<_>>()?;
            for (k, bk) in basis.iter().enumerate() {
                for (j, bj) in basis.iter().enumerate() {
                    let expected = if k == j { n as f64 } else { 0.0 };
                    basis_err = basis_err.max((bk.inner(bj) - expected).abs());
                }
            }
        }
    }
    out.push(PropertyOutcome::new("bccb_basis_orthogonality", basis_err, 0.0));

    let mut rng = rng_for(seed, 11);
    let (mut idempotence, mut pythagoras, mut linearity, mut optimality) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
    for _ in 0..10 * cases {
        let shape = random_grid_shape(&mut rng, 6);
        let n = shape.n();
        let a = random_dense(&mut rng, n);
        let p = project_to_bccb(&a, shape)?;
        let again = project_to_bccb(&bccb_materialize(&p.kernel, SizeGuard::Enforce)?, shape)?;
        idempotence = idempotence.max(max_abs_diff(&again.kernel.b, &p.kernel.b));

        let total = a.frobenius_sqr();
        let parts = p.kernel.frobenius_sqr() + p.residual_fro.powi(2);
        pythagoras = pythagoras.max((total - parts).abs() / total);

        let c = random_dense(&mut rng, n);
        let (alpha, beta) = (rng.uniform(-2.0, 2.0), rng.uniform(-2.0, 2.0));
        let combo = DenseMatrix::new(
            n,
            n,
            a.data().iter().zip(c.data()).map(|(x, y)| alpha * x + beta * y).collect(),
        )?;
        let pc = project_to_bccb(&c, shape)?;
        let expected: Vec<f64> = p.kernel.b.iter().zip(&pc.kernel.b).map(|(x, y)| alpha * x + beta * y).collect();
        linearity = linearity.max(max_abs_diff(&project_to_bccb(&combo, shape)?.kernel.b, &expected));

        // 100 random competitors per case, alternating wide draws and perturbations of the optimum.
        for t in 0..100 {
            let b: Vec<f64> = if t % 2 == 0 {
                rng.fill_uniform(n, -2.0, 2.0)
            } else {
                p.kernel.b.iter().map(|v| v + rng.uniform(-1e-3, 1e-3)).collect()
            };
            let competitor = distance_to_bccb(&a, &BccbKernel::new(shape, b)?)?;
            optimality = optimality.max(p.residual_fro - competitor);
        }
    }
    out.push(PropertyOutcome::new("bccb_projection_idempotence", idempotence, 1e-12));
    out.push(PropertyOutcome::new("bccb_pythagoras", pythagoras, 1e-9));
    out.push(PropertyOutcome::new("bccb_projection_linearity", linearity, 1e-11));
    out.push(PropertyOutcome::new("bccb_nearest_optimality", optimality.max(0.0), 1e-9));

    // Offset classes by brute force on a 3x4 grid.
    let shape = GridShape::new(3, 4)?;
    let n = shape.n();
    let basis: Vec<DenseMatrix> = (0..n)
        .map(|k| bccb_materialize(&BccbKernel::basis(shape, k), SizeGuard::Enforce))
        .collect::<Result<_>>()?;
    let class_of = |i: usize, j: usize| (0..n).find(|&k| basis[k].get(i, j) == 1.0).expect("every entry has a class");
    let mut class_mismatches = 0usize;
    for i in 0..n {
        for j in 0..n {
            let (ih, iw) = shape.coords(i);
            let (jh, jw) = shape.coords(j);
            let offset = ((jh + 3 - ih) % 3, (jw + 4 - iw) % 4);
            for i2 in 0..n {
                for j2 in 0..n {
                    let (ih2, iw2) = shape.coords(i2);
                    let (jh2, jw2) = shape.coords(j2);
                    let offset2 = ((jh2 + 3 - ih2) % 3, (jw2 + 4 - iw2) % 4);
                    let same_class = class_of(i, j) == class_of(i2, j2);
                    if same_class != (offset == offset2) {
                        class_mismatches += 1;
                    }
                }
            }
        }
    }
    out.push(PropertyOutcome::new("bccb_shift_classes", class_mismatches as f64, 0.0));

    let mut rng = rng_for(seed, 12);
    let (mut stochastic, mut matvec) = (0.0f64, 0.0f64);
    for _ in 0..10 * cases {
        let shape = random_grid_shape(&mut rng, 6);
        let k = random_bccb(&mut rng, shape);
        let m = bccb_materialize(&k, SizeGuard::Enforce)?;
        let total: f64 = k.b.iter().sum();
        let mut sorted_b = k.b.clone();
        sorted_b.sort_by(f64::total_cmp);
        for r in 0..shape.n() {
            let mut row = m.row(r).to_vec();
            row.sort_by(f64::total_cmp);
            stochastic = stochastic.max(max_abs_diff(&row, &sorted_b));
        }
        for s in m.row_sums().into_iter().chain(m.col_sums()) {
            stochastic = stochastic.max((s - total).abs());
        }
        let x = rng.fill_uniform(shape.n(), -1.0, 1.0);
        let dense = m.matvec(&x)?;
        let fast = circorr2d(
            &SequenceTensor::new(shape, 1, k.b.clone())?,
            &SequenceTensor::new(shape, 1, x)?,
        )?;
        matvec = matvec.max(max_abs_diff(fast.data(), &dense));
    }
    out.push(PropertyOutcome::new("bccb_rows_permute_first_row", stochastic, 1e-12));
    out.push(PropertyOutcome::new("bccb_matvec_matches_correlation", matvec, 1e-10));
    Ok(out)
}

/// Random `(grid, d, mode)` case for the attention equivalence checks.
pub struct AttentionCase {
    pub q: SequenceTensor,
    pub k: SequenceTensor,
    pub v: SequenceTensor,
    pub t: SequenceTensor,
    pub mode: ReweightMode,
}

pub fn attention_case(rng: &mut SplitMix64, index: usize) -> AttentionCase {
    const DIMS: [usize; 3] = [1, 2, 8];
    let shape = random_grid_shape(rng, 8);
    let d = DIMS[index % 3];
    let mode = ReweightMode::ALL[(index / 3) % 3];
    AttentionCase {
        q: SequenceTensor::random(shape, d, rng, -1.0, 1.0),
        k: SequenceTensor::random(shape, d, rng, -1.0, 1.0),
        v: SequenceTensor::random(shape, d, rng, -1.0, 1.0),
        t: SequenceTensor::random(shape, d, rng, -1.0, 1.0),
        mode,
    }
}

/// Largest fast-vs-dense discrepancy over `count` random cases.
pub fn fast_dense_equivalence(seed: u64, count: usize) -> Result<f64> {
    let mut rng = rng_for(seed, 21);
    let mut worst = 0.0f64;
    for i in 0..count {
        let c = attention_case(&mut rng, i);
        let fast = circulant_attention(&c.q, &c.k, &c.v, c.mode, Some(&c.t))?;
        let dense = circulant_attention_dense(&c.q, &c.k, &c.v, c.mode, Some(&c.t), SizeGuard::Enforce)?;
        worst = worst.max(max_abs_diff(fast.data(), dense.data()));
    }
    Ok(worst)
}

/// Largest deviation of row and column sums of `softmax(Ã)` from 1.
pub fn double_stochasticity(seed: u64, count: usize) -> Result<f64> {
    let mut rng = rng_for(seed, 22);
    let mut worst = 0.0f64;
    for i in 0..count {
        let c = attention_case(&mut rng, i);
        let weights = softmax_first_row(&circulant_scores(&c.q, &c.k)?);
        let m = bccb_materialize(&weights, SizeGuard::Enforce)?;
        for s in m.row_sums().into_iter().chain(m.col_sums()) {
            worst = worst.max((s - 1.0).abs());
        }
    }
    Ok(worst)
}

/// Largest violation of `attn(roll(Q, K, V)) = roll(attn(Q, K, V))` in mode none.
pub fn shift_equivariance(seed: u64, count: usize) -> Result<f64> {
    let mut rng = rng_for(seed, 23);
    let mut worst = 0.0f64;
    for i in 0..count {
        let c = attention_case(&mut rng, i);
        let shape = c.q.shape();
        let dh = rng.below(shape.height()) as isize;
        let dw = rng.below(shape.width()) as isize;
        let base = circulant_attention(&c.q, &c.k, &c.v, ReweightMode::None, None)?;
        let rolled = circulant_attention(
            &c.q.roll(dh, dw),
            &c.k.roll(dh, dw),
            &c.v.roll(dh, dw),
            ReweightMode::None,
            None,
        )?;
        worst = worst.max(max_abs_diff(rolled.data(), base.roll(dh, dw).data()));
    }
    Ok(worst)
}

fn attention_suite(seed: u64, cases: usize) -> Result<Vec<PropertyOutcome>> {
    let mut out = vec![
        PropertyOutcome::new("attention_fast_matches_dense", fast_dense_equivalence(seed, 50 * cases)?, 1e-9),
        PropertyOutcome::new("attention_doubly_stochastic", double_stochasticity(seed, 20 * cases)?, 1e-12),
        PropertyOutcome::new("attention_shift_equivariance", shift_equivariance(seed, 20 * cases)?, 1e-10),
    ];

    let mut rng = rng_for(seed, 24);
    let (mut convexity, mut score_roll) = (0.0f64, 0.0f64);
    for i in 0..20 * cases {
        let c = attention_case(&mut rng, i);
        let o = circulant_attention(&c.q, &c.k, &c.v, ReweightMode::None, None)?;
        for ch in 0..c.v.channels() {
            let col = c.v.channel(ch);
            let lo = col.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = col.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            for v in o.channel(ch) {
                convexity = convexity.max(lo - v).max(v - hi);
            }
        }
        let shape = c.q.shape();
        let dh = rng.below(shape.height()) as isize;
        let dw = rng.below(shape.width()) as isize;
        let a = circulant_scores(&c.q, &c.k)?;
        let rolled = circulant_scores(&c.q.roll(dh, dw), &c.k.roll(dh, dw))?;
        score_roll = score_roll.max(max_abs_diff(&a.b, &rolled.b));
    }
    out.push(PropertyOutcome::new("attention_convex_combination", convexity.max(0.0), 1e-12));
    out.push(PropertyOutcome::new("attention_scores_roll_invariant", score_roll, 1e-12));

    let mut rng = rng_for(seed, 25);
    let mut single = 0.0f64;
    let unit = GridShape::new(1, 1)?;
    for d in [1, 2, 8] {
        let q = SequenceTensor::random(unit, d, &mut rng, -1.0, 1.0);
        let k = SequenceTensor::random(unit, d, &mut rng, -1.0, 1.0);
        let v = SequenceTensor::random(unit, d, &mut rng, -1.0, 1.0);
        let o = circulant_attention(&q, &k, &v, ReweightMode::None, None)?;
        single = single.max(max_abs_diff(o.data(), v.data()));
    }
    out.push(PropertyOutcome::new("attention_single_token", single, 1e-15));

    let mut rng = rng_for(seed, 26);
    let mut multihead = 0.0f64;
    for i in 0..5 * cases {
        let shape = random_grid_shape(&mut rng, 6);
        let mode = ReweightMode::ALL[i % 3];
        let config = AttentionConfig::new(shape, 4, 2, mode, rng.next_u64())?;
        let weights = ProjectionWeights::random(&config)?;
        let x = SequenceTensor::random(shape, 8, &mut rng, -1.0, 1.0);
        let fast = multihead_circulant_attention(&x, &weights, &config)?;
        let dense = multihead_circulant_attention_dense(&x, &weights, &config, SizeGuard::Enforce)?;
        multihead = multihead.max(max_abs_diff(fast.data(), dense.data()));
    }
    out.push(PropertyOutcome::new("attention_multihead_matches_dense", multihead, 1e-9));
    Ok(out)
}

/// Worst relative gradient error for one mode over `d in {1,2,4}`,
/// grids `{2x2, 3x4, 4x4}` and `seeds` seeds.
pub fn gradient_check(seed: u64, mode: ReweightMode, seeds: usize) -> Result<f64> {
    let mut worst = 0.0f64;
    let grids = [GridShape::new(2, 2)?, GridShape::new(3, 4)?, GridShape::new(4, 4)?];
    for &shape in &grids {
        for d in [1usize, 2, 4] {
            for s in 0..seeds {
                let tag = 1000 + (shape.n() * 100 + d * 10) as u64 + s as u64;
                let mut rng = rng_for(seed, tag);
                let q = SequenceTensor::random(shape, d, &mut rng, -1.0, 1.0);
                let k = SequenceTensor::random(shape, d, &mut rng, -1.0, 1.0);
                let v = SequenceTensor::random(shape, d, &mut rng, -1.0, 1.0);
                let t = SequenceTensor::random(shape, d, &mut rng, -1.0, 1.0);
                let u = SequenceTensor::random(shape, d, &mut rng, -1.0, 1.0);
                let tf = (mode != ReweightMode::None).then_some(&t);
                let grads = circulant_attention_backward(&q, &k, &v, tf, mode, &u)?;
                let loss = |q: &SequenceTensor, k: &SequenceTensor, v: &SequenceTensor, t: &SequenceTensor| {
                    let tf = (mode != ReweightMode::None).then_some(t);
                    circulant_attention(q, k, v, mode, tf).expect("layouts checked").dot(&u)
                };
                let nq = finite_difference_gradient(|x| loss(x, &k, &v, &t), &q, FD_EPSILON);
                let nk = finite_difference_gradient(|x| loss(&q, x, &v, &t), &k, FD_EPSILON);
                let nv = finite_difference_gradient(|x| loss(&q, &k, x, &t), &v, FD_EPSILON);
                worst = worst
                    .max(relative_gradient_error(&grads.dq, &nq))
                    .max(relative_gradient_error(&grads.dk, &nk))
                    .max(relative_gradient_error(&grads.dv, &nv));
                if let Some(dt) = &grads.dt {
                    let nt = finite_difference_gradient(|x| loss(&q, &k, &v, x), &t, FD_EPSILON);
                    worst = worst.max(relative_gradient_error(dt, &nt));
                }
            }
        }
    }
    Ok(worst)
}

fn grad_suite(seed: u64, cases: usize) -> Result<Vec<PropertyOutcome>> {
    let mut out = Vec::new();

    let mut rng = rng_for(seed, 31);
    let mut adjoint = 0.0f64;
    for _ in 0..10 * cases {
        let shape = random_grid_shape(&mut rng, 8);
        let c = 1 + rng.below(3);
        let kernel = rng.fill_uniform(shape.n(), -1.0, 1.0);
        let x = SequenceTensor::random(shape, c, &mut rng, -1.0, 1.0);
        let y = SequenceTensor::random(shape, c, &mut rng, -1.0, 1.0);
        let lhs = circorr2d_broadcast(&kernel, &x)?.dot(&y);
        let rhs = x.dot(&correlation_adjoint(&kernel, &y)?);
        adjoint = adjoint.max((lhs - rhs).abs() / lhs.abs().max(rhs.abs()).max(1e-300));
    }
    out.push(PropertyOutcome::new("grad_correlation_adjoint", adjoint, 1e-10));

    let mut rng = rng_for(seed, 32);
    let mut jac = 0.0f64;
    for _ in 0..10 * cases {
        let n = 1 + rng.below(64);
        let a = BccbKernel::new(GridShape::new(1, n)?, rng.fill_uniform(n, -3.0, 3.0))?;
        let sigma = softmax_first_row(&a).b;
        jac = jac.max(max_abs(&softmax_jacobian(&sigma).row_sums()));
    }
    out.push(PropertyOutcome::new("grad_softmax_jacobian_rows", jac, 1e-12));

    for mode in ReweightMode::ALL {
        let name = format!("grad_check_{mode}");
        out.push(PropertyOutcome::new(&name, gradient_check(seed, mode, 5 * cases)?, 1e-6));
    }
    Ok(out)
}
