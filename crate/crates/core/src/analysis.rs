//! BCCB-similarity scoring of attention maps and equivalent-kernel extraction.

use serde::Serialize;

use crate::attention::{circulant_scores, softmax_first_row};
use crate::error::Result;
use crate::structured::{project_to_bccb, DenseMatrix};
use crate::tensor::{GridShape, SequenceTensor};

pub use crate::io::{export_kernel_pgm, parse_pgm, pgm_to_text, quantize_grid};

/// How close an `N x N` matrix is to the BCCB subspace of a grid.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimilarityReport {
    pub similarity: f64,
    pub residual_fro: f64,
    pub grid: [usize; 2],
    /// First row of the projection reshaped to `H x W`.
    #[serde(skip)]
    pub kernel: Vec<Vec<f64>>,
}

impl SimilarityReport {
    /// `{"similarity", "residual_fro", "grid": [H, W]}`.
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("report serializes")
    }
}

pub fn bccb_similarity_report(a: &DenseMatrix, shape: GridShape) -> Result<SimilarityReport> {
    let p = project_to_bccb(a, shape)?;
    Ok(SimilarityReport {
        similarity: p.similarity,
        residual_fro: p.residual_fro,
        grid: [shape.height(), shape.width()],
        kernel: p.kernel.to_grid(),
    })
}

/// The global convolution kernel `softmax(a)` that circulant attention
/// applies to the values, as `H` rows of `W`.
pub fn extract_equivalent_kernel(q: &SequenceTensor, k: &SequenceTensor) -> Result<Vec<Vec<f64>>> {
    Ok(softmax_first_row(&circulant_scores(q, k)?).to_grid())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SplitMix64;
    use crate::structured::{bccb_materialize, BccbKernel, SizeGuard};

    #[test]
    fn bccb_input_scores_one() {
        let g = GridShape::new(3, 4).unwrap();
        let mut rng = SplitMix64::new(1);
        let k = BccbKernel::new(g, rng.fill_uniform(12, -1.0, 1.0)).unwrap();
        let r = bccb_similarity_report(&bccb_materialize(&k, SizeGuard::Enforce).unwrap(), g).unwrap();
        assert!((r.similarity - 1.0).abs() <= 1e-12);
        assert_eq!(r.kernel.len(), 3);
        assert_eq!(r.kernel[0].len(), 4);
    }

    #[test]
    fn half_similar_pair() {
        let g = GridShape::new(1, 2).unwrap();
        let a = DenseMatrix::new(2, 2, vec![0.0, 1.0, 0.0, 0.0]).unwrap();
        let r = bccb_similarity_report(&a, g).unwrap();
        assert!((r.similarity - 0.5).abs() <= 1e-15);
        let json: serde_json::Value = serde_json::from_str(&r.to_json()).unwrap();
        assert_eq!(json["grid"], serde_json::json!([1, 2]));
        assert_eq!(json["similarity"], serde_json::json!(0.5));
        assert!(json.get("kernel").is_none());
    }

    #[test]
    fn zero_queries_give_uniform_kernel() {
        let g = GridShape::new(3, 5).unwrap();
        let mut rng = SplitMix64::new(2);
        let q = SequenceTensor::zeros(g, 2);
        let k = SequenceTensor::random(g, 2, &mut rng, -1.0, 1.0);
        let kernel = extract_equivalent_kernel(&q, &k).unwrap();
        assert!(kernel.iter().flatten().all(|v| (v - 1.0 / 15.0).abs() < 1e-15));
    }

    #[test]
    fn single_token_kernel() {
        let g = GridShape::new(1, 1).unwrap();
        let q = SequenceTensor::new(g, 2, vec![3.0, -1.0]).unwrap();
        assert_eq!(extract_equivalent_kernel(&q, &q).unwrap(), vec![vec![1.0]]);
    }
}
