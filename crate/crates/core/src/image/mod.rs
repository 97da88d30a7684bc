//! Planar floating-point rasters, datasets of them, and their on-disk forms.
//!
//! Every module works on [`Image`]: `K` channels of `H x W` samples stored
//! channel-major. Codec-facing images live in the unit range `[0, 1]`; the
//! theory module produces [`ValueRange::Unbounded`] images so that linear
//! maps stay linear.

mod dataset;
mod io;
mod synth;

use std::fmt;

use serde::{Deserialize, Serialize};

pub(crate) use dataset::sha256_hex;
pub use dataset::{load_dataset, Dataset, Manifest, ManifestItem, Provenance};
pub use io::{read_image, write_image, BitDepth};
pub use synth::{dead_leaves, DeadLeaves};

use crate::error::{Error, Result};

/// Declared value range of an image's samples.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ValueRange {
    /// Canonical `[0, 1]` intensities.
    Unit,
    /// Any finite real; used by theory-mode ensembles.
    Unbounded,
}

impl ValueRange {
    pub fn contains(self, v: f64) -> bool {
        match self {
            ValueRange::Unit => (0.0..=1.0).contains(&v),
            ValueRange::Unbounded => v.is_finite(),
        }
    }

    fn clamp(self, v: f64) -> f64 {
        match self {
            ValueRange::Unit => v.clamp(0.0, 1.0),
            ValueRange::Unbounded => v,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Shape {
    pub channels: usize,
    pub height: usize,
    pub width: usize,
}

impl Shape {
    pub fn new(channels: usize, height: usize, width: usize) -> Self {
        Shape {
            channels,
            height,
            width,
        }
    }

    pub fn len(&self) -> usize {
        self.channels * self.height * self.width
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn pixels(&self) -> usize {
        self.height * self.width
    }

    fn validate(&self) -> Result<()> {
        if self.channels != 1 && self.channels != 3 {
            return Err(Error::InvalidImage(format!(
                "channel count must be 1 or 3, got {}",
                self.channels
            )));
        }
        if self.height < 2 || self.width < 2 {
            return Err(Error::InvalidImage(format!(
                "images must be at least 2x2, got {}x{}",
                self.height, self.width
            )));
        }
        Ok(())
    }
}

impl fmt::Display for Shape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}x{}x{}", self.channels, self.height, self.width)
    }
}

/// A `K x H x W` raster of `f64` samples, channel-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Image {
    shape: Shape,
    data: Vec<f64>,
    range: ValueRange,
    clamped: bool,
}

impl Image {
    /// Builds a unit-range image, rejecting samples outside `[0, 1]`.
    pub fn new(channels: usize, height: usize, width: usize, data: Vec<f64>) -> Result<Self> {
        Self::with_range(Shape::new(channels, height, width), data, ValueRange::Unit)
    }

    /// Builds an image whose samples must all lie in `range`.
    pub fn with_range(shape: Shape, data: Vec<f64>, range: ValueRange) -> Result<Self> {
        shape.validate()?;
        check_len(&shape, &data)?;
        if let Some(bad) = data.iter().find(|v| !range.contains(**v)) {
            return Err(Error::InvalidImage(format!(
                "sample {bad} outside declared range {range:?}"
            )));
        }
        Ok(Image {
            shape,
            data,
            range,
            clamped: false,
        })
    }

    /// Builds an image, clamping samples into `range`. Returns the image and
    /// the number of samples that had to be clamped.
    pub fn clamped_from(shape: Shape, mut data: Vec<f64>, range: ValueRange) -> Result<(Self, usize)> {
        shape.validate()?;
        check_len(&shape, &data)?;
        let mut count = 0;
        for v in data.iter_mut() {
            if !v.is_finite() {
                return Err(Error::InvalidImage("non-finite sample".into()));
            }
            let c = range.clamp(*v);
            if c != *v {
                count += 1;
                *v = c;
            }
        }
        Ok((
            Image {
                shape,
                data,
                range,
                clamped: count > 0,
            },
            count,
        ))
    }

    /// Unbounded-range image (theory mode, difference images).
    pub fn unbounded(shape: Shape, data: Vec<f64>) -> Result<Self> {
        Self::with_range(shape, data, ValueRange::Unbounded)
    }

    pub fn filled(shape: Shape, value: f64) -> Result<Self> {
        let range = if ValueRange::Unit.contains(value) {
            ValueRange::Unit
        } else {
            ValueRange::Unbounded
        };
        Self::with_range(shape, vec![value; shape.len()], range)
    }

    pub fn shape(&self) -> Shape {
        self.shape
    }

    pub fn channels(&self) -> usize {
        self.shape.channels
    }

    pub fn height(&self) -> usize {
        self.shape.height
    }

    pub fn width(&self) -> usize {
        self.shape.width
    }

    pub fn range(&self) -> ValueRange {
        self.range
    }

    /// Whether any sample was clamped when this image was constructed.
    pub fn clamped(&self) -> bool {
        self.clamped
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn channel(&self, c: usize) -> &[f64] {
        let n = self.shape.pixels();
        &self.data[c * n..(c + 1) * n]
    }

    pub fn channels_iter(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.shape.pixels())
    }

    #[inline]
    pub fn get(&self, c: usize, y: usize, x: usize) -> f64 {
        self.data[(c * self.shape.height + y) * self.shape.width + x]
    }

    /// Same samples, relabelled as unbounded. Never fails.
    pub fn to_unbounded(&self) -> Image {
        Image {
            shape: self.shape,
            data: self.data.clone(),
            range: ValueRange::Unbounded,
            clamped: self.clamped,
        }
    }

    /// `self - other` as an unbounded image.
    pub fn difference(&self, other: &Image) -> Result<Image> {
        self.ensure_same_shape(other)?;
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| a - b)
            .collect();
        Ok(Image {
            shape: self.shape,
            data,
            range: ValueRange::Unbounded,
            clamped: false,
        })
    }

    pub fn ensure_same_shape(&self, other: &Image) -> Result<()> {
        if self.shape != other.shape {
            return Err(Error::Dimension(format!(
                "shape {} does not match {}",
                self.shape, other.shape
            )));
        }
        Ok(())
    }

    /// Mean squared error over all `K*H*W` samples.
    pub fn mse(&self, other: &Image) -> Result<f64> {
        self.ensure_same_shape(other)?;
        let sum: f64 = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b) * (a - b))
            .sum();
        Ok(sum / self.data.len() as f64)
    }

    /// The centred `h x w` window; offsets are `floor((H-h)/2)`, `floor((W-w)/2)`.
    pub fn center_crop(&self, h: usize, w: usize) -> Result<Image> {
        let Shape {
            channels,
            height,
            width,
        } = self.shape;
        if h > height || w > width {
            return Err(Error::Dimension(format!(
                "crop {h}x{w} larger than image {height}x{width}"
            )));
        }
        let top = (height - h) / 2;
        let left = (width - w) / 2;
        let mut data = Vec::with_capacity(channels * h * w);
        for c in 0..channels {
            let plane = self.channel(c);
            for y in top..top + h {
                data.extend_from_slice(&plane[y * width + left..y * width + left + w]);
            }
        }
        let shape = Shape::new(channels, h, w);
        shape.validate()?;
        Ok(Image {
            shape,
            data,
            range: self.range,
            clamped: self.clamped,
        })
    }

    /// SHA-256 over shape and the little-endian bytes of every sample.
    pub fn digest(&self) -> String {
        use sha2::{Digest, Sha256};
        let mut h = Sha256::new();
        for d in [self.shape.channels, self.shape.height, self.shape.width] {
            h.update((d as u64).to_le_bytes());
        }
        for v in &self.data {
            h.update(v.to_le_bytes());
        }
        hex::encode(h.finalize())
    }
}

/// Free-function form of [`Image::center_crop`].
pub fn center_crop(image: &Image, h: usize, w: usize) -> Result<Image> {
    image.center_crop(h, w)
}

fn check_len(shape: &Shape, data: &[f64]) -> Result<()> {
    if data.len() != shape.len() {
        return Err(Error::InvalidImage(format!(
            "expected {} samples for shape {}, got {}",
            shape.len(),
            shape,
            data.len()
        )));
    }
    Ok(())
}
