//! Dense self-attention and circulant attention.
//!
//! Circulant attention replaces the raw score matrix `A = Q K^T / sqrt(d)`
//! with its nearest BCCB matrix `Ã`. Because `Ã` is fixed by its first row
//! `a`, and `softmax` of a BCCB matrix row by row is again BCCB with first row
//! `softmax(a)`, the whole head reduces to two rounds of 2D correlation:
//!
//! ```text
//! a = (Q ⊛ K) 1_d / (N sqrt(d))
//! O = softmax(a) ⊛ V
//! ```
//!
//! Token reweighting with `T = SiLU(x W_T)` is applied to the values (pre)
//! or to the output (post).

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::rng::SplitMix64;
use crate::spectral::{circorr2d_broadcast, circorr2d_channel_sum};
use crate::structured::{
    bccb_materialize, project_to_bccb, softmax_in_place, BccbKernel, DenseMatrix, SizeGuard,
};
use crate::tensor::{GridShape, SequenceTensor};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum ReweightMode {
    None,
    Pre,
    #[default]
    Post,
}

impl ReweightMode {
    pub const ALL: [ReweightMode; 3] = [ReweightMode::None, ReweightMode::Pre, ReweightMode::Post];

    pub fn as_str(self) -> &'static str {
        match self {
            ReweightMode::None => "none",
            ReweightMode::Pre => "pre",
            ReweightMode::Post => "post",
        }
    }
}

impl fmt::Display for ReweightMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ReweightMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(ReweightMode::None),
            "pre" => Ok(ReweightMode::Pre),
            "post" => Ok(ReweightMode::Post),
            other => Err(Error::Domain(format!("unknown reweighting mode `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AttentionConfig {
    pub shape: GridShape,
    pub heads: usize,
    pub head_dim: usize,
    pub model_dim: usize,
    pub reweighting: ReweightMode,
    pub seed: u64,
}

impl AttentionConfig {
    pub fn new(shape: GridShape, heads: usize, head_dim: usize, reweighting: ReweightMode, seed: u64) -> Result<Self> {
        if heads == 0 || head_dim == 0 {
            return Err(Error::Domain("heads and head_dim must be positive".into()));
        }
        Ok(Self {
            shape,
            heads,
            head_dim,
            model_dim: heads * head_dim,
            reweighting,
            seed,
        })
    }

    fn validate(&self) -> Result<()> {
        if self.heads == 0 || self.head_dim == 0 || self.model_dim != self.heads * self.head_dim {
            return Err(Error::shape(format!(
                "model dim {} must equal heads {} x head dim {}",
                self.model_dim, self.heads, self.head_dim
            )));
        }
        Ok(())
    }
}

/// Per-head projections, each `C x d` row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct HeadWeights {
    pub wq: Vec<f64>,
    pub wk: Vec<f64>,
    pub wv: Vec<f64>,
    pub wt: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProjectionWeights {
    pub heads: Vec<HeadWeights>,
    /// Output projection, `C x C` row-major.
    pub wo: Vec<f64>,
}

impl ProjectionWeights {
    /// Uniform weights in `[-1/sqrt(C), 1/sqrt(C)]` from SplitMix64 seeded
    /// with `config.seed`. Draw order: for each head `wq, wk, wv, wt`, then `wo`.
    pub fn random(config: &AttentionConfig) -> Result<Self> {
        config.validate()?;
        let c = config.model_dim;
        let d = config.head_dim;
        let bound = 1.0 / (c as f64).sqrt();
        let mut rng = SplitMix64::new(config.seed);
        let heads = (0..config.heads)
            .map(|_| HeadWeights {
                wq: rng.fill_uniform(c * d, -bound, bound),
                wk: rng.fill_uniform(c * d, -bound, bound),
                wv: rng.fill_uniform(c * d, -bound, bound),
                wt: rng.fill_uniform(c * d, -bound, bound),
            })
            .collect();
        let wo = rng.fill_uniform(c * c, -bound, bound);
        Ok(Self { heads, wo })
    }

    fn validate(&self, config: &AttentionConfig) -> Result<()> {
        let (c, d) = (config.model_dim, config.head_dim);
        if self.heads.len() != config.heads {
            return Err(Error::shape(format!(
                "{} head weight sets for {} heads",
                self.heads.len(),
                config.heads
            )));
        }
        for (h, w) in self.heads.iter().enumerate() {
            for (name, m) in [("wq", &w.wq), ("wk", &w.wk), ("wv", &w.wv), ("wt", &w.wt)] {
                if m.len() != c * d {
                    return Err(Error::shape(format!(
                        "head {h} {name} has {} entries, expected {c}x{d}",
                        m.len()
                    )));
                }
            }
        }
        if self.wo.len() != c * c {
            return Err(Error::shape(format!("wo has {} entries, expected {c}x{c}", self.wo.len())));
        }
        Ok(())
    }
}

fn check_qkv(q: &SequenceTensor, k: &SequenceTensor, v: &SequenceTensor) -> Result<()> {
    q.ensure_same_layout(k, "queries vs keys")?;
    q.ensure_same_layout(v, "queries vs values")
}

fn to_dense(t: &SequenceTensor) -> DenseMatrix {
    DenseMatrix::new(t.n(), t.channels(), t.data().to_vec()).expect("tensor layout is consistent")
}

fn from_dense(shape: GridShape, m: DenseMatrix) -> Result<SequenceTensor> {
    SequenceTensor::new(shape, m.cols(), m.data().to_vec())
}

/// `softmax(Q K^T / sqrt(d)) V`, one query row at a time.
pub fn self_attention_reference(
    q: &SequenceTensor,
    k: &SequenceTensor,
    v: &SequenceTensor,
) -> Result<SequenceTensor> {
    check_qkv(q, k, v)?;
    let n = q.n();
    let d = q.channels();
    let scale = 1.0 / (d as f64).sqrt();
    let mut out = SequenceTensor::zeros(q.shape(), d);
    let mut weights = vec![0.0; n];
    for i in 0..n {
        let qi = q.row(i);
        for (j, w) in weights.iter_mut().enumerate() {
            *w = qi.iter().zip(k.row(j)).map(|(a, b)| a * b).sum::<f64>() * scale;
        }
        softmax_in_place(&mut weights);
        let dst = &mut out.data_mut()[i * d..(i + 1) * d];
        for (j, &w) in weights.iter().enumerate() {
            for (o, &x) in dst.iter_mut().zip(v.row(j)) {
                *o += w * x;
            }
        }
    }
    Ok(out)
}

/// First row of the projected score matrix, via 2D DFTs.
pub fn circulant_scores(q: &SequenceTensor, k: &SequenceTensor) -> Result<BccbKernel> {
    q.ensure_same_layout(k, "queries vs keys")?;
    let n = q.n() as f64;
    let d = q.channels() as f64;
    let scale = 1.0 / (n * d.sqrt());
    let mut a = circorr2d_channel_sum(q, k)?;
    for v in &mut a {
        *v *= scale;
    }
    BccbKernel::new(q.shape(), a)
}

/// First row of the projected score matrix, by forming `Q K^T / sqrt(d)`
/// densely and projecting it onto the BCCB subspace.
pub fn circulant_scores_naive(q: &SequenceTensor, k: &SequenceTensor, guard: SizeGuard) -> Result<BccbKernel> {
    q.ensure_same_layout(k, "queries vs keys")?;
    let n = q.n();
    guard.check(n)?;
    let scale = 1.0 / (q.channels() as f64).sqrt();
    let mut scores = DenseMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            let s: f64 = q.row(i).iter().zip(k.row(j)).map(|(a, b)| a * b).sum();
            scores.set(i, j, s * scale);
        }
    }
    Ok(project_to_bccb(&scores, q.shape())?.kernel)
}

/// Softmax of the first row, which is the first row of the row-wise softmax
/// of the full BCCB matrix.
pub fn softmax_first_row(a: &BccbKernel) -> BccbKernel {
    let mut out = a.clone();
    softmax_in_place(&mut out.b);
    out
}

fn reweight_input<'a>(mode: ReweightMode, t: Option<&'a SequenceTensor>, v: &SequenceTensor) -> Result<Option<&'a SequenceTensor>> {
    match (mode, t) {
        (ReweightMode::None, _) => Ok(None),
        (_, None) => Err(Error::MissingReweight(mode.as_str())),
        (_, Some(t)) => {
            v.ensure_same_layout(t, "reweighting factor vs values")?;
            Ok(Some(t))
        }
    }
}

/// Applies the reweighting mode around a `values -> output` attention map.
fn with_reweighting(
    mode: ReweightMode,
    t: Option<&SequenceTensor>,
    v: &SequenceTensor,
    attend: impl FnOnce(&SequenceTensor) -> Result<SequenceTensor>,
) -> Result<SequenceTensor> {
    let t = reweight_input(mode, t, v)?;
    match (mode, t) {
        (ReweightMode::Pre, Some(t)) => attend(&v.hadamard(t)?),
        (ReweightMode::Post, Some(t)) => attend(v)?.hadamard(t),
        _ => attend(v),
    }
}

/// Circulant attention through the FFT path, `O(N log N d)`.
///
/// `t` is required unless `mode` is [`ReweightMode::None`].
pub fn circulant_attention(
    q: &SequenceTensor,
    k: &SequenceTensor,
    v: &SequenceTensor,
    mode: ReweightMode,
    t: Option<&SequenceTensor>,
) -> Result<SequenceTensor> {
    check_qkv(q, k, v)?;
    with_reweighting(mode, t, v, |values| {
        let weights = softmax_first_row(&circulant_scores(q, k)?);
        circorr2d_broadcast(&weights.b, values)
    })
}

/// Circulant attention through the dense path: project, materialize
/// `softmax(Ã)` and multiply. `O(N^2 d)`; serves as the oracle for the FFT path.
pub fn circulant_attention_dense(
    q: &SequenceTensor,
    k: &SequenceTensor,
    v: &SequenceTensor,
    mode: ReweightMode,
    t: Option<&SequenceTensor>,
    guard: SizeGuard,
) -> Result<SequenceTensor> {
    check_qkv(q, k, v)?;
    with_reweighting(mode, t, v, |values| {
        let scores = circulant_scores_naive(q, k, guard)?;
        let attn = bccb_materialize(&scores, guard)?.softmax_rows();
        from_dense(q.shape(), attn.matmul(&to_dense(values))?)
    })
}

fn silu(z: f64) -> f64 {
    z / (1.0 + (-z).exp())
}

/// `T = SiLU(x W_T)` with `W_T` given as `C x d` row-major.
pub fn compute_reweighting(x: &SequenceTensor, wt: &[f64], head_dim: usize) -> Result<SequenceTensor> {
    let mut t = x.matmul(wt, head_dim)?;
    for v in t.data_mut() {
        *v = silu(*v);
    }
    Ok(t)
}

/// Single-head kernel used by the multi-head assembly.
type HeadFn<'a> = dyn Fn(&SequenceTensor, &SequenceTensor, &SequenceTensor, Option<&SequenceTensor>) -> Result<SequenceTensor> + 'a;

fn multihead_with(
    x: &SequenceTensor,
    weights: &ProjectionWeights,
    config: &AttentionConfig,
    head: &HeadFn<'_>,
) -> Result<SequenceTensor> {
    config.validate()?;
    weights.validate(config)?;
    if x.channels() != config.model_dim || x.shape() != config.shape {
        return Err(Error::shape(format!(
            "input is {}x{} on grid {}, config expects {}x{} on grid {}",
            x.n(),
            x.channels(),
            x.shape(),
            config.shape.n(),
            config.model_dim,
            config.shape
        )));
    }
    let d = config.head_dim;
    let mut concat = SequenceTensor::zeros(x.shape(), config.model_dim);
    for (h, w) in weights.heads.iter().enumerate() {
        let q = x.matmul(&w.wq, d)?;
        let k = x.matmul(&w.wk, d)?;
        let v = x.matmul(&w.wv, d)?;
        let t = match config.reweighting {
            ReweightMode::None => None,
            _ => Some(compute_reweighting(x, &w.wt, d)?),
        };
        let o = head(&q, &k, &v, t.as_ref())?;
        for c in 0..d {
            concat.set_channel(h * d + c, &o.channel(c));
        }
    }
    concat.matmul(&weights.wo, config.model_dim)
}

/// Per-head projection, circulant attention, channel concatenation and output projection.
pub fn multihead_circulant_attention(
    x: &SequenceTensor,
    weights: &ProjectionWeights,
    config: &AttentionConfig,
) -> Result<SequenceTensor> {
    let mode = config.reweighting;
    multihead_with(x, weights, config, &|q, k, v, t| circulant_attention(q, k, v, mode, t))
}

/// Same assembly as [`multihead_circulant_attention`] with every head on the dense path.
pub fn multihead_circulant_attention_dense(
    x: &SequenceTensor,
    weights: &ProjectionWeights,
    config: &AttentionConfig,
    guard: SizeGuard,
) -> Result<SequenceTensor> {
    let mode = config.reweighting;
    multihead_with(x, weights, config, &|q, k, v, t| {
        circulant_attention_dense(q, k, v, mode, t, guard)
    })
}
