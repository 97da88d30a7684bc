//! Closed-form spectra of an ideal low-pass linear codec.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::FrequencyMask;
use crate::corruptions::{corrupt_dataset, CorruptionSpec};
use crate::error::{Error, Result};
use crate::image::{Dataset, Image, ValueRange};
use crate::spectral::fft::{dft2, fftshift, idft2, offset_to_centered, raw_to_offset};
use crate::spectral::{Spectrum, SpectrumTag};

/// Negative squared moduli within this of zero are rounding.
const NEGATIVE_TOL: f64 = 1e-12;

fn check_grid(mask: &FrequencyMask, h: usize, w: usize) -> Result<()> {
    if (mask.height(), mask.width()) != (h, w) {
        return Err(Error::Dimension(format!(
            "mask is {}x{} but images are {h}x{w}",
            mask.height(),
            mask.width()
        )));
    }
    Ok(())
}

/// Mask membership indexed by raw (unshifted) DFT position.
fn raw_membership(mask: &FrequencyMask) -> Vec<bool> {
    let (h, w) = (mask.height(), mask.width());
    (0..h * w)
        .map(|p| mask.at(offset_to_centered(raw_to_offset(p / w, h), h), offset_to_centered(raw_to_offset(p % w, w), w)))
        .collect()
}

fn channel_dfts(image: &Image) -> Result<Vec<Vec<Complex64>>> {
    image.channels_iter().map(|c| dft2(c, image.height(), image.width())).collect()
}

/// Keeps only the masked frequencies of every channel.
pub fn predict_reconstruction(mask: &FrequencyMask, image: &Image) -> Result<Image> {
    let (h, w) = (image.height(), image.width());
    check_grid(mask, h, w)?;
    let keep = raw_membership(mask);
    let mut data = Vec::with_capacity(image.data().len());
    for mut coeffs in channel_dfts(image)? {
        for (z, &k) in coeffs.iter_mut().zip(&keep) {
            if !k {
                *z = Complex64::new(0.0, 0.0);
            }
        }
        data.extend(idft2(&coeffs, h, w)?.into_iter().map(|z| z.re));
    }
    Image::with_range(image.shape(), data, ValueRange::Unbounded)
}

/// Dataset mean over items of the channel mean of `f(inside, x_hat, d_hat)`,
/// where `d_hat` is the transform of `corrupted - clean` (zero without a
/// corrupted set). Returned centred, with the grid size.
fn accumulate<F>(mask: &FrequencyMask, clean: &Dataset, corrupted: Option<&Dataset>, f: F) -> Result<(Vec<f64>, usize, usize)>
where
    F: Fn(bool, Complex64, Complex64) -> f64 + Sync,
{
    let shape = clean.common_shape()?;
    let (h, w) = (shape.height, shape.width);
    check_grid(mask, h, w)?;
    if let Some(c) = corrupted {
        if c.len() != clean.len() {
            return Err(Error::Dataset("clean and corrupted datasets differ in length".into()));
        }
    }
    let keep = raw_membership(mask);
    let maps = (0..clean.len())
        .into_par_iter()
        .map(|k| {
            let (id, x) = &clean.items()[k];
            let xs = channel_dfts(x)?;
            let ds = match corrupted {
                Some(c) => {
                    let (cid, cx) = &c.items()[k];
                    if cid != id {
                        return Err(Error::Dataset(format!("item ids differ: `{id}` vs `{cid}`")));
                    }
                    channel_dfts(&cx.difference(x)?)?
                }
                None => vec![vec![Complex64::new(0.0, 0.0); h * w]; xs.len()],
            };
            let kf = xs.len() as f64;
            let mut acc = vec![0.0; h * w];
            for (xc, dc) in xs.iter().zip(&ds) {
                for p in 0..h * w {
                    acc[p] += f(keep[p], xc[p], dc[p]);
                }
            }
            acc.iter_mut().for_each(|a| *a /= kf);
            Ok(acc)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut sum = vec![0.0; h * w];
    for m in &maps {
        for (s, v) in sum.iter_mut().zip(m) {
            *s += v;
        }
    }
    let n = maps.len() as f64;
    sum.iter_mut().for_each(|s| *s /= n);
    Ok((fftshift(&sum, h, w), h, w))
}

fn predicted<F>(mask: &FrequencyMask, clean: &Dataset, corrupted: Option<&Dataset>, tag: SpectrumTag, f: F) -> Result<Spectrum>
where
    F: Fn(bool, Complex64, Complex64) -> f64 + Sync,
{
    let (values, h, w) = accumulate(mask, clean, corrupted, f)?;
    Spectrum::new(h, w, values, tag, clean.len())
}

/// Predicted distortion: zero inside the mask, mean `|X_hat|` outside.
pub fn predict_d(mask: &FrequencyMask, dataset: &Dataset) -> Result<Spectrum> {
    predicted(mask, dataset, None, SpectrumTag::PredictedDistortion, |inside, x, _| {
        if inside {
            0.0
        } else {
            x.norm()
        }
    })
}

/// Predicted robustness error: mean `|c_hat - X_hat|` inside the mask, mean
/// `|X_hat|` outside.
pub fn predict_r(mask: &FrequencyMask, dataset: &Dataset, corruption: &CorruptionSpec) -> Result<Spectrum> {
    let (corrupted, _) = corrupt_dataset(dataset, corruption)?;
    predict_r_of(mask, dataset, &corrupted)
}

pub fn predict_r_of(mask: &FrequencyMask, clean: &Dataset, corrupted: &Dataset) -> Result<Spectrum> {
    predicted(mask, clean, Some(corrupted), SpectrumTag::PredictedRobustness, |inside, x, d| {
        if inside {
            d.norm()
        } else {
            x.norm()
        }
    })
}

/// Predicted generalization error: zero inside the mask; outside, the square
/// root of `|X_hat|^2 + 2 Re(conj(X_hat) d_hat) + |d_hat|^2`.
pub fn predict_g(mask: &FrequencyMask, dataset: &Dataset, corruption: &CorruptionSpec) -> Result<Spectrum> {
    let (corrupted, _) = corrupt_dataset(dataset, corruption)?;
    predict_g_of(mask, dataset, &corrupted)
}

pub fn predict_g_of(mask: &FrequencyMask, clean: &Dataset, corrupted: &Dataset) -> Result<Spectrum> {
    predicted(mask, clean, Some(corrupted), SpectrumTag::PredictedGeneralization, |inside, x, d| {
        if inside {
            return 0.0;
        }
        let sq = x.norm_sqr() + 2.0 * (x.conj() * d).re + d.norm_sqr();
        if sq < -NEGATIVE_TOL * (x.norm_sqr() + d.norm_sqr()).max(1.0) {
            log::warn!("negative squared modulus {sq:e} in generalization prediction");
        }
        sq.max(0.0).sqrt()
    })
}

/// Size of the dataset-mean cross term `2 Re(conj(X_hat) d_hat)` relative to
/// the mean of `|X_hat|^2 + |d_hat|^2`, per frequency.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrossTermStats {
    pub mean_ratio: f64,
    pub max_ratio: f64,
    /// Centred row-major ratios.
    pub ratios: Vec<f64>,
}

pub fn cross_term_stats(clean: &Dataset, corrupted: &Dataset) -> Result<CrossTermStats> {
    let shape = clean.common_shape()?;
    let full = super::lemma1_mask(0, 1, shape.height, shape.width, super::MaskMode::Disk)?;
    let (cross, _, _) = accumulate(&full, clean, Some(corrupted), |_, x, d| 2.0 * (x.conj() * d).re)?;
    let (dominant, _, _) = accumulate(&full, clean, Some(corrupted), |_, x, d| x.norm_sqr() + d.norm_sqr())?;
    let ratios: Vec<f64> = cross
        .iter()
        .zip(&dominant)
        .map(|(c, d)| if *d > 0.0 { c.abs() / d } else { 0.0 })
        .collect();
    let mean_ratio = ratios.iter().sum::<f64>() / ratios.len() as f64;
    let max_ratio = ratios.iter().cloned().fold(0.0, f64::max);
    Ok(CrossTermStats {
        mean_ratio,
        max_ratio,
        ratios,
    })
}
