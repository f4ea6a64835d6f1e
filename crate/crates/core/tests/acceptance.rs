//! Acceptance criteria, run sequentially with one PASS/FAIL line each.
//!
//! Runs as its own harness so the timing criteria are not disturbed by
//! other tests executing in parallel. Set `CI` to downgrade the wall-clock
//! scaling criterion to advisory.

use std::f64::consts::PI;
use std::path::Path;
use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use num_complex::Complex64;

use circattn::attention::{circulant_attention, circulant_scores, softmax_first_row, ReweightMode};
use circattn::bench::{wallclock_sweep, BenchImpl, SweepConfig};
use circattn::cost::{attention_flops, model_flops, tokens_for_resolution, BlockModelSpec};
use circattn::rng::SplitMix64;
use circattn::spectral::{dft1d_forward, dft1d_inverse, ComplexVector};
use circattn::structured::{
    bccb_materialize, distance_to_bccb, project_to_bccb, BccbKernel, DenseMatrix, SizeGuard,
};
use circattn::verify::{fast_dense_equivalence, gradient_check};
use circattn::{GridShape, SequenceTensor};

const SEED: u64 = 20_240_601;

struct Outcome {
    pass: bool,
    detail: String,
}

impl Outcome {
    fn check(pass: bool, detail: impl Into<String>) -> Self {
        Self {
            pass,
            detail: detail.into(),
        }
    }
}

type Criterion = fn() -> Outcome;

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0, |m, (x, y)| m.max((x - y).abs()))
}

fn grid(h: usize, w: usize) -> GridShape {
    GridShape::new(h, w).unwrap()
}

// 1. Fast DFT path vs projection-then-dense path.
fn oracle_equivalence() -> Outcome {
    let start = Instant::now();
    let err = fast_dense_equivalence(SEED, 50).unwrap();
    let elapsed = start.elapsed();
    Outcome::check(
        err <= 1e-9 && elapsed < Duration::from_secs(10),
        format!("50 cases max_abs_err={err:.3e} (tol 1e-9) runtime={elapsed:.2?} (limit 10s)"),
    )
}

// 2. Projection: idempotence, basis orthogonality, Pythagoras, optimality.
fn projection_correctness() -> Outcome {
    let mut basis_err = 0.0f64;
    for h in 1..=4 {
        for w in 1..=4 {
            let g = grid(h, w);
            let basis: Vec<DenseMatrix> = (0..g.n())
                .map(|k| bccb_materialize(&BccbKernel::basis(g, k), SizeGuard::Enforce).unwrap())
                .collect();
            for (k, bk) in basis.iter().enumerate() {
                for (j, bj) in basis.iter().enumerate() {
                    let expected = if k == j { g.n() as f64 } else { 0.0 };
                    basis_err = basis_err.max((bk.inner(bj) - expected).abs());
                }
            }
        }
    }

    let mut rng = SplitMix64::new(SEED ^ 2);
    let (mut idem, mut pyth, mut worst_margin) = (0.0f64, 0.0f64, f64::INFINITY);
    let shapes = [grid(2, 2), grid(3, 3), grid(2, 5), grid(4, 4), grid(1, 7), grid(6, 5)];
    for &g in &shapes {
        let n = g.n();
        let a = DenseMatrix::new(n, n, rng.fill_uniform(n * n, -1.0, 1.0)).unwrap();
        let p = project_to_bccb(&a, g).unwrap();
        let again = project_to_bccb(&bccb_materialize(&p.kernel, SizeGuard::Enforce).unwrap(), g).unwrap();
        idem = idem.max(max_abs_diff(&again.kernel.b, &p.kernel.b));
        let total = a.frobenius_sqr();
        pyth = pyth.max((total - p.kernel.frobenius_sqr() - p.residual_fro.powi(2)).abs() / total);
        for t in 0..100 {
            let b: Vec<f64> = if t % 2 == 0 {
                rng.fill_uniform(n, -1.0, 1.0)
            } else {
                p.kernel.b.iter().map(|v| v + rng.uniform(-1e-4, 1e-4)).collect()
            };
            let d = distance_to_bccb(&a, &BccbKernel::new(g, b).unwrap()).unwrap();
            worst_margin = worst_margin.min(d + 1e-9 - p.residual_fro);
        }
    }
    Outcome::check(
        basis_err == 0.0 && idem <= 1e-12 && pyth <= 1e-9 && worst_margin >= 0.0,
        format!(
            "basis_err={basis_err:e} idempotence={idem:.3e} pythagoras_rel={pyth:.3e} \
             optimality_margin={worst_margin:.3e} over {} candidates",
            shapes.len() * 100
        ),
    )
}

fn naive_dft(x: &[Complex64]) -> Vec<Complex64> {
    let n = x.len();
    (0..n)
        .map(|k| {
            x.iter().enumerate().fold(Complex64::new(0.0, 0.0), |acc, (j, &v)| {
                let angle = -2.0 * PI * ((j * k) % n) as f64 / n as f64;
                acc + v * Complex64::from_polar(1.0, angle)
            })
        })
        .collect()
}

// 3. FFT core.
fn fft_core() -> Outcome {
    let mut rng = SplitMix64::new(SEED ^ 3);
    let random = |rng: &mut SplitMix64, n: usize| {
        ComplexVector::new(rng.fill_uniform(n, -1.0, 1.0), rng.fill_uniform(n, -1.0, 1.0)).unwrap()
    };
    let (mut round_trip, mut parseval) = (0.0f64, 0.0f64);
    for n in 1..=64 {
        let x = random(&mut rng, n);
        let spec = dft1d_forward(&x);
        let back = dft1d_inverse(&spec);
        let err = max_abs_diff(&back.re, &x.re).max(max_abs_diff(&back.im, &x.im));
        round_trip = round_trip.max(err / x.max_abs());
        let energy = n as f64 * x.norm_sqr();
        parseval = parseval.max((spec.norm_sqr() - energy).abs() / energy);
    }
    let mut lengths = vec![2usize, 3, 5, 7, 13, 31, 37, 53, 61];
    while lengths.len() < 20 {
        lengths.push(1 + rng.below(64));
    }
    let mut naive = 0.0f64;
    for &n in &lengths {
        let x = random(&mut rng, n);
        let expected = naive_dft(&x.to_complex());
        let got = dft1d_forward(&x).to_complex();
        let scale = expected.iter().fold(0.0f64, |m, c| m.max(c.norm()));
        let err = got.iter().zip(&expected).fold(0.0f64, |m, (a, b)| m.max((a - b).norm()));
        naive = naive.max(err / scale);
    }
    Outcome::check(
        round_trip <= 1e-11 && parseval <= 1e-11 && naive <= 1e-12,
        format!(
            "round_trip_rel={round_trip:.3e} parseval_rel={parseval:.3e} (tol 1e-11, n=1..64) \
             naive_rel={naive:.3e} (tol 1e-12, {} lengths)",
            lengths.len()
        ),
    )
}

// 4. Gradient checks.
fn gradient_checks() -> Outcome {
    let start = Instant::now();
    let mut worst = 0.0f64;
    let mut parts = Vec::new();
    for mode in ReweightMode::ALL {
        let err = gradient_check(SEED, mode, 5).unwrap();
        parts.push(format!("{mode}={err:.3e}"));
        worst = worst.max(err);
    }
    let elapsed = start.elapsed();
    Outcome::check(
        worst <= 1e-6 && elapsed < Duration::from_secs(60),
        format!("rel_err {} (tol 1e-6) runtime={elapsed:.2?} (limit 60s)", parts.join(" ")),
    )
}

// 5. Doubly stochastic attention map; exact shift equivariance.
fn structural_properties() -> Outcome {
    let mut rng = SplitMix64::new(SEED ^ 5);
    let (mut stochastic, mut equivariance) = (0.0f64, 0.0f64);
    for i in 0..30 {
        let g = grid(1 + rng.below(8), 1 + rng.below(8));
        let d = [1, 2, 8][i % 3];
        let q = SequenceTensor::random(g, d, &mut rng, -2.0, 2.0);
        let k = SequenceTensor::random(g, d, &mut rng, -2.0, 2.0);
        let v = SequenceTensor::random(g, d, &mut rng, -1.0, 1.0);
        let m = bccb_materialize(&softmax_first_row(&circulant_scores(&q, &k).unwrap()), SizeGuard::Enforce).unwrap();
        for s in m.row_sums().into_iter().chain(m.col_sums()) {
            stochastic = stochastic.max((s - 1.0).abs());
        }
        let dh = rng.below(g.height()) as isize;
        let dw = rng.below(g.width()) as isize;
        let base = circulant_attention(&q, &k, &v, ReweightMode::None, None).unwrap();
        let rolled = circulant_attention(&q.roll(dh, dw), &k.roll(dh, dw), &v.roll(dh, dw), ReweightMode::None, None)
            .unwrap();
        equivariance = equivariance.max(max_abs_diff(rolled.data(), base.roll(dh, dw).data()));
    }
    Outcome::check(
        stochastic <= 1e-12 && equivariance <= 1e-10,
        format!("row/col sum err={stochastic:.3e} (tol 1e-12) shift err={equivariance:.3e} (tol 1e-10)"),
    )
}

// 6. FLOP claims.
fn flop_claims() -> Outcome {
    let deit = BlockModelSpec::deit_tiny();
    let ca = BlockModelSpec::ca_deit_tiny();
    let at_224 = model_flops(&deit, tokens_for_resolution(224, 16).unwrap()).unwrap();
    let rel_224 = (at_224 - 1.2e9).abs() / 1.2e9;
    let n_1536 = tokens_for_resolution(1536, 16).unwrap();
    let ratio = model_flops(&deit, n_1536).unwrap() / model_flops(&ca, n_1536).unwrap();

    // Uncollapsed per-step terms, evaluated independently from a text table.
    let table = "1 1\n2 1\n16 4\n196 64\n256 64\n1024 8\n3136 64\n4096 1\n9216 64\n65536 2";
    let mut exact = true;
    let mut worst_rel = 0.0f64;
    for line in table.lines() {
        let mut it = line.split_whitespace().map(|t| t.parse::<usize>().unwrap());
        let (n, d) = (it.next().unwrap(), it.next().unwrap());
        let (nf, df, lg) = (n as f64, d as f64, (n as f64).log2());
        let step1 = 2.0 * nf * lg * df + 2.0 * nf * df + nf * lg;
        let step2 = nf * lg * (df + 1.0) + 2.0 * nf * df + nf * lg * df;
        let sa = nf * nf * df + nf * nf * df;
        let r = attention_flops(n, d, 1).unwrap();
        if n.is_power_of_two() {
            exact &= r.flops_ca == step1 + step2 && r.flops_sa == sa;
        } else {
            exact &= r.flops_sa == sa;
            worst_rel = worst_rel.max((r.flops_ca - (step1 + step2)).abs() / r.flops_ca);
        }
    }
    let formula_ok = exact && worst_rel <= 4.0 * f64::EPSILON;
    Outcome::check(
        rel_224 <= 0.05 && (7.0..=9.0).contains(&ratio) && formula_ok,
        format!(
            "(a) deit-t@224={at_224:.4e} rel_gap={rel_224:.3} (tol 0.05) (b) ratio@1536={ratio:.3} (band [7,9]) \
             (c) formula exact={exact} non-pow2 rel={worst_rel:.1e}"
        ),
    )
}

// 7. Wall-clock scaling.
fn scaling_law() -> Outcome {
    let run = |implementation: BenchImpl, reps: usize| {
        let rows = wallclock_sweep(&SweepConfig {
            implementation,
            grids: vec![grid(32, 32), grid(64, 64)],
            d: 8,
            heads: 1,
            reps,
            seed: SEED,
            guard: SizeGuard::Enforce,
        })
        .unwrap();
        rows[1].wall_ns_mean / rows[0].wall_ns_mean
    };
    let fast = run(BenchImpl::CaFast, 30);
    let dense = run(BenchImpl::SaReference, 3);
    Outcome::check(
        fast <= 8.0 && dense >= 10.0,
        format!("ca_fast growth={fast:.2} (<= 8) sa_reference growth={dense:.2} (>= 10)"),
    )
}

fn run_cli(args: &[&str]) -> (i32, Vec<u8>) {
    let out = Command::new(env!("CARGO_BIN_EXE_circattn"))
        .args(args)
        .env_remove("CIRC_ATTN_SEED")
        .output()
        .expect("binary runs");
    (out.status.code().unwrap_or(-1), out.stdout)
}

fn dir_snapshot(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<(String, Vec<u8>)> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().to_string_lossy().into_owned(), std::fs::read(e.path()).unwrap())
        })
        .collect();
    files.sort();
    files
}

// 8. Determinism of kernels and verification output.
fn determinism() -> Outcome {
    let tmp = tempfile::tempdir().unwrap();
    let mut snapshots = Vec::new();
    for run in 0..2 {
        let dir = tmp.path().join(format!("run{run}"));
        let (code, _) = run_cli(&[
            "kernels", "--seed", "42", "--grid", "6x5", "--dim", "3", "--count", "4",
            "--out-dir", dir.to_str().unwrap(),
        ]);
        assert_eq!(code, 0);
        snapshots.push(dir_snapshot(&dir));
    }
    let kernels_same = snapshots[0] == snapshots[1] && snapshots[0].len() == 8;
    let first = run_cli(&["verify", "--suite", "all", "--seed", "42"]);
    let second = run_cli(&["verify", "--suite", "all", "--seed", "42"]);
    let verify_same = first == second && first.0 == 0 && !first.1.is_empty();
    Outcome::check(
        kernels_same && verify_same,
        format!("kernels identical={kernels_same} ({} files) verify identical={verify_same}", snapshots[0].len()),
    )
}

fn main() -> ExitCode {
    let advisory_timing = std::env::var_os("CI").is_some();
    let criteria: [(&str, Criterion, bool); 8] = [
        ("oracle equivalence", oracle_equivalence, false),
        ("projection correctness", projection_correctness, false),
        ("fft core", fft_core, false),
        ("gradient checks", gradient_checks, false),
        ("structural properties", structural_properties, false),
        ("flop claims", flop_claims, false),
        ("scaling law", scaling_law, advisory_timing),
        ("determinism", determinism, false),
    ];
    let mut failures = 0;
    for (i, (name, criterion, advisory)) in criteria.iter().enumerate() {
        let outcome = criterion();
        let status = match (outcome.pass, advisory) {
            (true, _) => "PASS",
            (false, true) => "ADVISORY-FAIL",
            (false, false) => {
                failures += 1;
                "FAIL"
            }
        };
        println!("{status} [{}] {name}: {}", i + 1, outcome.detail);
    }
    println!("acceptance: {} criteria, {failures} failed", criteria.len());
    if failures == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
