//! Sequential wall-clock sweep over grid sizes.

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use crate::attention::{circulant_attention, circulant_attention_dense, self_attention_reference, ReweightMode};
use crate::cost::attention_flops;
use crate::error::{Error, Result};
use crate::rng::SplitMix64;
use crate::structured::SizeGuard;
use crate::tensor::{GridShape, SequenceTensor};

pub const CSV_HEADER: &str = "impl,N,H,W,d,heads,flops_model,wall_ns_mean,wall_ns_std";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BenchImpl {
    CaFast,
    CaNaive,
    SaReference,
}

impl BenchImpl {
    pub fn as_str(self) -> &'static str {
        match self {
            BenchImpl::CaFast => "ca_fast",
            BenchImpl::CaNaive => "ca_naive",
            BenchImpl::SaReference => "sa_reference",
        }
    }

    /// Whether the implementation is quadratic in memory or time and subject to the size guard.
    pub fn is_dense(self) -> bool {
        !matches!(self, BenchImpl::CaFast)
    }
}

impl fmt::Display for BenchImpl {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for BenchImpl {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ca_fast" => Ok(BenchImpl::CaFast),
            "ca_naive" => Ok(BenchImpl::CaNaive),
            "sa_reference" => Ok(BenchImpl::SaReference),
            other => Err(Error::Domain(format!("unknown implementation `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchRow {
    pub implementation: BenchImpl,
    pub shape: GridShape,
    pub d: usize,
    pub heads: usize,
    /// Analytic count for the algorithm actually timed.
    pub flops_model: f64,
    pub wall_ns_mean: f64,
    pub wall_ns_std: f64,
}

impl BenchRow {
    pub fn to_csv(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{:.1},{:.1}",
            self.implementation,
            self.shape.n(),
            self.shape.height(),
            self.shape.width(),
            self.d,
            self.heads,
            self.flops_model,
            self.wall_ns_mean,
            self.wall_ns_std
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepConfig {
    pub implementation: BenchImpl,
    pub grids: Vec<GridShape>,
    pub d: usize,
    pub heads: usize,
    pub reps: usize,
    pub seed: u64,
    pub guard: SizeGuard,
}

struct HeadInputs {
    q: SequenceTensor,
    k: SequenceTensor,
    v: SequenceTensor,
}

fn run_once(implementation: BenchImpl, inputs: &[HeadInputs], guard: SizeGuard) -> Result<f64> {
    let mut checksum = 0.0;
    for h in inputs {
        let out = match implementation {
            BenchImpl::CaFast => circulant_attention(&h.q, &h.k, &h.v, ReweightMode::None, None)?,
            BenchImpl::CaNaive => circulant_attention_dense(&h.q, &h.k, &h.v, ReweightMode::None, None, guard)?,
            BenchImpl::SaReference => self_attention_reference(&h.q, &h.k, &h.v)?,
        };
        checksum += out.data()[0];
    }
    Ok(checksum)
}

fn mean_std(samples: &[f64]) -> (f64, f64) {
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    let var = samples.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / (n - 1.0).max(1.0);
    (mean, var.sqrt())
}

/// One warm-up run then `reps` timed runs per grid, on seeded uniform inputs.
pub fn wallclock_sweep(config: &SweepConfig) -> Result<Vec<BenchRow>> {
    if config.reps < 3 {
        return Err(Error::Domain(format!("reps must be at least 3, got {}", config.reps)));
    }
    if config.d == 0 || config.heads == 0 {
        return Err(Error::Domain("d and heads must be positive".into()));
    }
    if config.implementation.is_dense() {
        for g in &config.grids {
            config.guard.check(g.n())?;
        }
    }
    let mut rng = SplitMix64::new(config.seed);
    let mut rows = Vec::with_capacity(config.grids.len());
    for &shape in &config.grids {
        let inputs: Vec<HeadInputs> = (0..config.heads)
            .map(|_| HeadInputs {
                q: SequenceTensor::random(shape, config.d, &mut rng, -1.0, 1.0),
                k: SequenceTensor::random(shape, config.d, &mut rng, -1.0, 1.0),
                v: SequenceTensor::random(shape, config.d, &mut rng, -1.0, 1.0),
            })
            .collect();
        std::hint::black_box(run_once(config.implementation, &inputs, config.guard)?);
        let mut samples = Vec::with_capacity(config.reps);
        for _ in 0..config.reps {
            let start = Instant::now();
            std::hint::black_box(run_once(config.implementation, &inputs, config.guard)?);
            samples.push(start.elapsed().as_nanos() as f64);
        }
        let (mean, std) = mean_std(&samples);
        let report = attention_flops(shape.n(), config.d, config.heads)?;
        let flops_model = match config.implementation {
            BenchImpl::CaFast => report.flops_ca,
            BenchImpl::CaNaive | BenchImpl::SaReference => report.flops_sa,
        };
        rows.push(BenchRow {
            implementation: config.implementation,
            shape,
            d: config.d,
            heads: config.heads,
            flops_model,
            wall_ns_mean: mean,
            wall_ns_std: std,
        });
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn config(implementation: BenchImpl, grids: Vec<GridShape>) -> SweepConfig {
        SweepConfig {
            implementation,
            grids,
            d: 2,
            heads: 1,
            reps: 3,
            seed: 1,
            guard: SizeGuard::Enforce,
        }
    }

    #[test]
    fn one_row_nine_fields() {
        let g = GridShape::new(2, 2).unwrap();
        for imp in [BenchImpl::CaFast, BenchImpl::CaNaive, BenchImpl::SaReference] {
            let rows = wallclock_sweep(&config(imp, vec![g])).unwrap();
            assert_eq!(rows.len(), 1);
            let line = rows[0].to_csv();
            assert_eq!(line.split(',').count(), 9);
            assert!(line.starts_with(&format!("{imp},4,2,2,2,1,")));
        }
        assert_eq!(CSV_HEADER.split(',').count(), 9);
    }

    #[test]
    fn too_few_reps() {
        let mut c = config(BenchImpl::CaFast, vec![GridShape::new(2, 2).unwrap()]);
        c.reps = 2;
        assert!(matches!(wallclock_sweep(&c), Err(Error::Domain(_))));
    }

    #[test]
    fn dense_guard() {
        let c = config(BenchImpl::CaNaive, vec![GridShape::new(128, 128).unwrap()]);
        assert!(matches!(wallclock_sweep(&c), Err(Error::TooLarge { .. })));
    }

    #[test]
    fn impl_names() {
        for s in ["ca_fast", "ca_naive", "sa_reference"] {
            assert_eq!(s.parse::<BenchImpl>().unwrap().as_str(), s);
        }
        assert!("fast".parse::<BenchImpl>().is_err());
    }
}
