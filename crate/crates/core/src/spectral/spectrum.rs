use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::fft::{conjugate_centered, dft2, fftshift, offset_to_centered};
use crate::error::{Error, Result};
use crate::image::Image;

/// Which computation produced a [`Spectrum`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpectrumTag {
    RawPsd,
    MeanPsd,
    Distortion,
    Generalization,
    Robustness,
    Corruption,
    PredictedDistortion,
    PredictedGeneralization,
    PredictedRobustness,
}

impl SpectrumTag {
    pub fn short(self) -> &'static str {
        match self {
            SpectrumTag::RawPsd => "psd",
            SpectrumTag::MeanPsd => "mean_psd",
            SpectrumTag::Distortion => "D",
            SpectrumTag::Generalization => "G",
            SpectrumTag::Robustness => "R",
            SpectrumTag::Corruption => "corruption",
            SpectrumTag::PredictedDistortion => "pred_D",
            SpectrumTag::PredictedGeneralization => "pred_G",
            SpectrumTag::PredictedRobustness => "pred_R",
        }
    }
}

/// Centred `H x W` map of non-negative Fourier magnitudes.
///
/// Zero frequency sits at `(H/2, W/2)` (floor division); `samples` is the
/// number of images averaged into it.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    height: usize,
    width: usize,
    values: Vec<f64>,
    tag: SpectrumTag,
    samples: usize,
}

impl Spectrum {
    pub fn new(height: usize, width: usize, values: Vec<f64>, tag: SpectrumTag, samples: usize) -> Result<Self> {
        if values.len() != height * width {
            return Err(Error::Dimension(format!(
                "spectrum needs {} values, got {}",
                height * width,
                values.len()
            )));
        }
        if let Some(v) = values.iter().find(|v| !(**v >= 0.0) || !v.is_finite()) {
            return Err(Error::InvalidArgument(format!("spectrum value {v} is not a finite non-negative number")));
        }
        Ok(Spectrum {
            height,
            width,
            values,
            tag,
            samples,
        })
    }

    pub fn zeros(height: usize, width: usize, tag: SpectrumTag) -> Self {
        Spectrum {
            height,
            width,
            values: vec![0.0; height * width],
            tag,
            samples: 0,
        }
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn tag(&self) -> SpectrumTag {
        self.tag
    }

    pub fn samples(&self) -> usize {
        self.samples
    }

    /// Every emitted spectrum is centred.
    pub fn centered(&self) -> bool {
        true
    }

    pub fn with_tag(mut self, tag: SpectrumTag) -> Self {
        self.tag = tag;
        self
    }

    /// Value at centred row/column.
    #[inline]
    pub fn at(&self, row: usize, col: usize) -> f64 {
        self.values[row * self.width + col]
    }

    /// Value at signed frequency offset `(i, j)` from the centre.
    pub fn at_offset(&self, i: isize, j: isize) -> f64 {
        self.at(offset_to_centered(i, self.height), offset_to_centered(j, self.width))
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(0.0, f64::max)
    }

    pub fn sum(&self) -> f64 {
        self.values.iter().sum()
    }

    pub fn same_grid(&self, other: &Spectrum) -> bool {
        self.height == other.height && self.width == other.width
    }

    /// Largest relative gap between each value and its conjugate partner,
    /// `|a - b| / max(|a|, |b|, floor)`.
    pub fn conjugate_asymmetry(&self, floor: f64) -> f64 {
        let mut worst: f64 = 0.0;
        for r in 0..self.height {
            let rc = conjugate_centered(r, self.height);
            for c in 0..self.width {
                let cc = conjugate_centered(c, self.width);
                let (a, b) = (self.at(r, c), self.at(rc, cc));
                let scale = a.abs().max(b.abs()).max(floor);
                worst = worst.max((a - b).abs() / scale);
            }
        }
        worst
    }

    /// Largest elementwise relative difference `|a-b| / (1 + |b|)`.
    pub fn max_rel_diff(&self, other: &Spectrum) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).abs() / (1.0 + b.abs()))
            .fold(0.0, f64::max)
    }
}

/// Channel-averaged magnitudes of one plane set, centred.
fn psd_values(image: &Image) -> Result<Vec<f64>> {
    let (h, w) = (image.height(), image.width());
    let k = image.channels() as f64;
    let mut acc = vec![0.0; h * w];
    for plane in image.channels_iter() {
        let spec = dft2(plane, h, w)?;
        for (a, z) in acc.iter_mut().zip(&spec) {
            *a += z.norm();
        }
    }
    acc.iter_mut().for_each(|a| *a /= k);
    Ok(fftshift(&acc, h, w))
}

/// `|fftshift(dft2(channel))|`, averaged over channels.
pub fn psd(image: &Image) -> Result<Spectrum> {
    let values = psd_values(image)?;
    Spectrum::new(image.height(), image.width(), values, SpectrumTag::RawPsd, 1)
}

/// Sums per-item PSD maps in slice order, then divides by the count.
///
/// Item PSDs are computed in parallel; the reduction order never depends on
/// the worker count.
fn ordered_mean(maps: Vec<Vec<f64>>, h: usize, w: usize, tag: SpectrumTag) -> Result<Spectrum> {
    let n = maps.len();
    let mut acc = vec![0.0; h * w];
    for m in &maps {
        for (a, v) in acc.iter_mut().zip(m) {
            *a += v;
        }
    }
    acc.iter_mut().for_each(|a| *a /= n as f64);
    Spectrum::new(h, w, acc, tag, n)
}

/// Mean PSD of a set of images, e.g. `(1/N) sum PSD(X_k)`.
pub fn mean_psd<'a, I>(images: I) -> Result<Spectrum>
where
    I: IntoIterator<Item = &'a Image>,
{
    let images: Vec<&Image> = images.into_iter().collect();
    let first = images
        .first()
        .ok_or_else(|| Error::Dataset("cannot average an empty image set".into()))?;
    let (h, w) = (first.height(), first.width());
    let maps = images
        .par_iter()
        .map(|img| {
            if (img.height(), img.width()) != (h, w) {
                return Err(Error::Dimension("images differ in size".into()));
            }
            psd_values(img)
        })
        .collect::<Result<Vec<_>>>()?;
    ordered_mean(maps, h, w, SpectrumTag::MeanPsd)
}

/// `(1/N) sum_k PSD(a_k - b_k)` over id-labelled pairs.
///
/// A shape mismatch is reported against the offending item id.
pub fn mean_difference_psd(pairs: &[(&str, &Image, &Image)], tag: SpectrumTag) -> Result<Spectrum> {
    let (_, first, _) = pairs
        .first()
        .ok_or_else(|| Error::Dataset("cannot average an empty image set".into()))?;
    let expected = first.shape();
    let maps = pairs
        .par_iter()
        .map(|(id, a, b)| {
            for img in [a, b] {
                if img.shape() != expected {
                    return Err(Error::ShapeMismatch {
                        id: id.to_string(),
                        expected: expected.to_string(),
                        actual: img.shape().to_string(),
                    });
                }
            }
            psd_values(&a.difference(b)?)
        })
        .collect::<Result<Vec<_>>>()?;
    ordered_mean(maps, expected.height, expected.width, tag)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::image::{Shape, ValueRange};

    #[test]
    fn zero_and_constant_images() {
        let z = psd(&Image::filled(Shape::new(1, 8, 8), 0.0).unwrap()).unwrap();
        assert_eq!(z.max(), 0.0);
        let c = psd(&Image::filled(Shape::new(1, 8, 8), 0.5).unwrap()).unwrap();
        assert!((c.at(4, 4) - 32.0).abs() < 1e-12);
        assert!((c.sum() - 32.0).abs() < 1e-9);
    }

    #[test]
    fn channel_average() {
        let shape1 = Shape::new(1, 6, 6);
        let x: Vec<f64> = (0..36).map(|i| ((i * 7) % 11) as f64 / 11.0).collect();
        let single = psd(&Image::with_range(shape1, x.clone(), ValueRange::Unit).unwrap()).unwrap();
        let mut data = x;
        data.extend(vec![0.0; 72]);
        let rgb = psd(&Image::new(3, 6, 6, data).unwrap()).unwrap();
        for (a, b) in rgb.values().iter().zip(single.values()) {
            assert!((a - b / 3.0).abs() < 1e-12);
        }
    }

    #[test]
    fn real_inputs_are_conjugate_symmetric() {
        for (h, w) in [(8, 8), (5, 6), (7, 3)] {
            let data: Vec<f64> = (0..h * w).map(|i| ((i * 13) % 17) as f64 / 17.0).collect();
            let s = psd(&Image::new(1, h, w, data).unwrap()).unwrap();
            let a = s.conjugate_asymmetry(1e-6 * s.max());
            assert!(a < 1e-9, "{h}x{w}: {a}");
        }
    }

    #[test]
    fn rejects_negative_values() {
        assert!(Spectrum::new(2, 2, vec![0.0, -1.0, 0.0, 0.0], SpectrumTag::RawPsd, 1).is_err());
    }
}
