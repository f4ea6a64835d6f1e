//! Analytic operation counts for attention layers and whole ViT-style models.
//!
//! A DFT of length `N` is counted as `N log2 N`, an elementwise product or
//! reduction over `N x d` as `N d`, and a dense `N x C` by `C x C'`
//! projection as `N C C'`.

use serde::Serialize;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FlopReport {
    #[serde(rename = "N")]
    pub n: usize,
    pub d: usize,
    pub heads: usize,
    /// Circulant attention: `heads * (N log2 N (4d + 2) + 4 N d)`.
    pub flops_ca: f64,
    /// Self-attention: `heads * 2 N^2 d`.
    pub flops_sa: f64,
    pub ratio: f64,
}

/// Attention cost for `heads` heads of dimension `d` over `n` tokens.
pub fn attention_flops(n: usize, d: usize, heads: usize) -> Result<FlopReport> {
    if n == 0 || d == 0 || heads == 0 {
        return Err(Error::Domain(format!(
            "N, d and heads must be positive (got N={n}, d={d}, heads={heads})"
        )));
    }
    let (nf, df, hf) = (n as f64, d as f64, heads as f64);
    let flops_ca = hf * (nf * nf.log2() * (4.0 * df + 2.0) + 4.0 * nf * df);
    let flops_sa = hf * 2.0 * nf * nf * df;
    Ok(FlopReport {
        n,
        d,
        heads,
        flops_ca,
        flops_sa,
        ratio: flops_sa / flops_ca,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum AttentionKind {
    #[serde(rename = "self")]
    SelfAttention,
    Circulant,
}

/// A stack of identical transformer blocks.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BlockModelSpec {
    pub blocks: usize,
    pub model_dim: usize,
    pub heads: usize,
    pub head_dim: usize,
    pub mlp_ratio: f64,
    pub attention_kind: AttentionKind,
    pub reweighting: bool,
}

/// Patch size of the DeiT presets.
pub const DEIT_PATCH: usize = 16;

impl BlockModelSpec {
    /// DeiT-Tiny: 12 blocks, dim 192, 3 heads of 64.
    pub fn deit_tiny() -> Self {
        Self {
            blocks: 12,
            model_dim: 192,
            heads: 3,
            head_dim: 64,
            mlp_ratio: 4.0,
            attention_kind: AttentionKind::SelfAttention,
            reweighting: false,
        }
    }

    /// DeiT-Tiny with circulant attention: 192 heads of dimension 1 and token reweighting.
    pub fn ca_deit_tiny() -> Self {
        Self {
            blocks: 12,
            model_dim: 192,
            heads: 192,
            head_dim: 1,
            mlp_ratio: 4.0,
            attention_kind: AttentionKind::Circulant,
            reweighting: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.model_dim != self.heads * self.head_dim {
            return Err(Error::Domain(format!(
                "model dim {} must equal heads {} x head dim {}",
                self.model_dim, self.heads, self.head_dim
            )));
        }
        if self.heads == 0 || self.head_dim == 0 {
            return Err(Error::Domain("heads and head dim must be positive".into()));
        }
        if !(self.mlp_ratio.is_finite() && self.mlp_ratio >= 0.0) {
            return Err(Error::Domain(format!("invalid mlp ratio {}", self.mlp_ratio)));
        }
        Ok(())
    }
}

/// Tokens produced by a square image of side `resolution` cut into `patch` patches.
pub fn tokens_for_resolution(resolution: usize, patch: usize) -> Result<usize> {
    if patch == 0 || resolution == 0 || !resolution.is_multiple_of(patch) {
        return Err(Error::Domain(format!(
            "resolution {resolution} must be a positive multiple of the patch size {patch}"
        )));
    }
    let side = resolution / patch;
    Ok(side * side)
}

/// Total cost of the block stack on `n` tokens. Patch embedding and the
/// classifier head are not counted.
///
/// Per block: QKV projections `3 N C^2`, output projection `N C^2`, MLP
/// `2 r N C^2`, the attention term, and with reweighting `N C^2 + N d heads`.
pub fn model_flops(spec: &BlockModelSpec, n: usize) -> Result<f64> {
    spec.validate()?;
    if n == 0 {
        return Err(Error::Domain("token count must be positive".into()));
    }
    if spec.blocks == 0 {
        return Ok(0.0);
    }
    let nf = n as f64;
    let c = spec.model_dim as f64;
    let linear = (3.0 + 1.0 + 2.0 * spec.mlp_ratio) * nf * c * c;
    let report = attention_flops(n, spec.head_dim, spec.heads)?;
    let attention = match spec.attention_kind {
        AttentionKind::SelfAttention => report.flops_sa,
        AttentionKind::Circulant => report.flops_ca,
    };
    let reweighting = if spec.reweighting {
        nf * c * c + nf * (spec.head_dim * spec.heads) as f64
    } else {
        0.0
    };
    Ok(spec.blocks as f64 * (linear + attention + reweighting))
}
