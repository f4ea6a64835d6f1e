//! Circulant attention: attention maps constrained to block-circulant
//! matrices with circulant blocks (BCCB) and evaluated with 2D FFTs in
//! `O(N log N)`.
//!
//! Modules, bottom up:
//!
//! - [`spectral`]: 1D/2D DFTs (radix-2 and Bluestein) and the `⊛` correlation operator.
//! - [`structured`]: circulant/BCCB kernels, dense materialization, BCCB projection.
//! - [`attention`]: dense self-attention, circulant attention (FFT and dense paths), reweighting, multi-head.
//! - [`gradients`]: analytic backward pass and finite-difference oracle.
//! - [`analysis`]: BCCB-similarity reports and equivalent-kernel extraction.
//! - [`cost`] and [`bench`]: analytic FLOP model and wall-clock sweeps.
//! - [`verify`]: the property suites run by `circattn verify`.

pub mod analysis;
pub mod attention;
pub mod bench;
pub mod cost;
pub mod error;
pub mod gradients;
pub mod io;
pub mod rng;
pub mod spectral;
pub mod structured;
pub mod tensor;
pub mod verify;

pub use error::{Error, Result};
pub use tensor::{GridShape, SequenceTensor};
