//! Grid shapes and token-major sequence tensors.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::rng::SplitMix64;

/// Spatial layout of a token sequence: `n = height * width` tokens in row-major order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct GridShape {
    height: usize,
    width: usize,
}

impl GridShape {
    pub fn new(height: usize, width: usize) -> Result<Self> {
        if height == 0 || width == 0 {
            return Err(Error::Domain(format!(
                "grid dimensions must be positive, got {height}x{width}"
            )));
        }
        Ok(Self { height, width })
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    /// Number of tokens.
    pub fn n(&self) -> usize {
        self.height * self.width
    }

    /// Flat index of grid position `(h, w)`, wrapping circularly.
    pub fn wrap_index(&self, h: isize, w: isize) -> usize {
        let h = h.rem_euclid(self.height as isize) as usize;
        let w = w.rem_euclid(self.width as isize) as usize;
        h * self.width + w
    }

    /// Grid coordinates of a flat index.
    pub fn coords(&self, index: usize) -> (usize, usize) {
        (index / self.width, index % self.width)
    }

    /// Flat index of the 2D circular offset that takes token `from` to token `to`.
    pub fn offset_index(&self, from: usize, to: usize) -> usize {
        let (fh, fw) = self.coords(from);
        let (th, tw) = self.coords(to);
        let dh = (th + self.height - fh) % self.height;
        let dw = (tw + self.width - fw) % self.width;
        dh * self.width + dw
    }
}

impl fmt::Display for GridShape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}x{}", self.height, self.width)
    }
}

/// Parses `HxW` (lowercase `x`). A bare token count is rejected because it
/// does not determine the grid.
impl FromStr for GridShape {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (h, w) = s
            .split_once('x')
            .ok_or_else(|| Error::Domain(format!("grid `{s}` must be written HxW")))?;
        let parse = |part: &str| {
            part.trim()
                .parse::<usize>()
                .map_err(|_| Error::Domain(format!("grid `{s}` must be written HxW")))
        };
        GridShape::new(parse(h)?, parse(w)?)
    }
}

/// An `n x channels` real array laid out token-major over a grid.
///
/// Holds queries, keys, values, outputs, reweighting factors and model
/// activations alike; `channels` is the head dim `d` or the model dim `C`.
#[derive(Debug, Clone, PartialEq)]
pub struct SequenceTensor {
    shape: GridShape,
    channels: usize,
    data: Vec<f64>,
}

impl SequenceTensor {
    pub fn new(shape: GridShape, channels: usize, data: Vec<f64>) -> Result<Self> {
        if channels == 0 {
            return Err(Error::Domain("channel count must be positive".into()));
        }
        if data.len() != shape.n() * channels {
            return Err(Error::shape(format!(
                "tensor data has {} entries, expected {} ({} tokens x {channels} channels)",
                data.len(),
                shape.n() * channels,
                shape.n()
            )));
        }
        Ok(Self {
            shape,
            channels,
            data,
        })
    }

    pub fn zeros(shape: GridShape, channels: usize) -> Self {
        Self::filled(shape, channels, 0.0)
    }

    pub fn filled(shape: GridShape, channels: usize, value: f64) -> Self {
        assert!(channels > 0, "channel count must be positive");
        Self {
            shape,
            channels,
            data: vec![value; shape.n() * channels],
        }
    }

    /// Entries drawn uniformly from `[lo, hi)`, token-major.
    pub fn random(shape: GridShape, channels: usize, rng: &mut SplitMix64, lo: f64, hi: f64) -> Self {
        assert!(channels > 0, "channel count must be positive");
        Self {
            shape,
            channels,
            data: rng.fill_uniform(shape.n() * channels, lo, hi),
        }
    }

    pub fn shape(&self) -> GridShape {
        self.shape
    }

    pub fn n(&self) -> usize {
        self.shape.n()
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn get(&self, token: usize, channel: usize) -> f64 {
        self.data[token * self.channels + channel]
    }

    pub fn set(&mut self, token: usize, channel: usize, value: f64) {
        self.data[token * self.channels + channel] = value;
    }

    pub fn row(&self, token: usize) -> &[f64] {
        &self.data[token * self.channels..(token + 1) * self.channels]
    }

    /// Copy of one channel as a length-`n` plane.
    pub fn channel(&self, channel: usize) -> Vec<f64> {
        self.data
            .iter()
            .skip(channel)
            .step_by(self.channels)
            .copied()
            .collect()
    }

    pub fn set_channel(&mut self, channel: usize, plane: &[f64]) {
        debug_assert_eq!(plane.len(), self.n());
        for (token, &v) in plane.iter().enumerate() {
            self.data[token * self.channels + channel] = v;
        }
    }

    /// Builds a tensor from per-channel planes.
    pub fn from_channels(shape: GridShape, planes: &[Vec<f64>]) -> Result<Self> {
        if planes.is_empty() {
            return Err(Error::Domain("at least one channel is required".into()));
        }
        let mut out = SequenceTensor::zeros(shape, planes.len());
        for (c, plane) in planes.iter().enumerate() {
            if plane.len() != shape.n() {
                return Err(Error::shape(format!(
                    "channel {c} has {} entries, grid has {}",
                    plane.len(),
                    shape.n()
                )));
            }
            out.set_channel(c, plane);
        }
        Ok(out)
    }

    /// Fails unless `other` has the same grid and channel count.
    pub fn ensure_same_layout(&self, other: &SequenceTensor, what: &str) -> Result<()> {
        if self.shape != other.shape || self.channels != other.channels {
            return Err(Error::shape(format!(
                "{what}: {}x{} tensor on grid {} vs {}x{} tensor on grid {}",
                self.n(),
                self.channels,
                self.shape,
                other.n(),
                other.channels,
                other.shape
            )));
        }
        Ok(())
    }

    pub fn hadamard(&self, other: &SequenceTensor) -> Result<SequenceTensor> {
        self.ensure_same_layout(other, "elementwise product")?;
        let data = self.data.iter().zip(&other.data).map(|(a, b)| a * b).collect();
        Ok(SequenceTensor {
            shape: self.shape,
            channels: self.channels,
            data,
        })
    }

    /// Frobenius inner product.
    pub fn dot(&self, other: &SequenceTensor) -> f64 {
        self.data.iter().zip(&other.data).map(|(a, b)| a * b).sum()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Right-multiplies by a `channels x cols` row-major matrix.
    pub fn matmul(&self, weight: &[f64], cols: usize) -> Result<SequenceTensor> {
        if weight.len() != self.channels * cols {
            return Err(Error::shape(format!(
                "weight has {} entries, expected {}x{cols}",
                weight.len(),
                self.channels
            )));
        }
        let mut out = vec![0.0; self.n() * cols];
        for (row, dst) in self.data.chunks_exact(self.channels).zip(out.chunks_exact_mut(cols)) {
            for (&x, wrow) in row.iter().zip(weight.chunks_exact(cols)) {
                for (o, &w) in dst.iter_mut().zip(wrow) {
                    *o += x * w;
                }
            }
        }
        SequenceTensor::new(self.shape, cols, out)
    }

    /// Circularly rolls the grid so that `out[(h + dh, w + dw)] = self[(h, w)]`.
    pub fn roll(&self, dh: isize, dw: isize) -> SequenceTensor {
        let mut out = SequenceTensor::zeros(self.shape, self.channels);
        for token in 0..self.n() {
            let (h, w) = self.shape.coords(token);
            let dst = self.shape.wrap_index(h as isize + dh, w as isize + dw);
            out.data[dst * self.channels..(dst + 1) * self.channels].copy_from_slice(self.row(token));
        }
        out
    }
}
