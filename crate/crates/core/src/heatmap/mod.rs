//! Sensitivity of a codec to single-frequency perturbations of its input.

use std::fs;
use std::path::Path;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::codecs::{reconstruct_dataset, Codec};
use crate::error::{Error, Result};
use crate::harness::psnr_capped;
use crate::image::{Dataset, Image};
use crate::spectral::export::write_grid_png;
use crate::spectral::fft::{idft2, offset_to_raw};

pub const DEFAULT_EPS: f64 = 0.1;
pub const DEFAULT_CAP: f64 = 100.0;
/// Cells with more clamped samples than this are flagged.
pub const CLAMP_FLAG: f64 = 0.01;

/// Unit-norm real image whose spectrum sits on `(i, j)` and its conjugate.
#[derive(Debug, Clone, PartialEq)]
pub struct FourierBasisImage {
    pub height: usize,
    pub width: usize,
    pub i: isize,
    pub j: isize,
    pub data: Vec<f64>,
}

fn offset_range(n: usize) -> std::ops::RangeInclusive<isize> {
    -((n / 2) as isize)..=((n - 1) / 2) as isize
}

pub fn fourier_basis(h: usize, w: usize, i: isize, j: isize) -> Result<FourierBasisImage> {
    if h == 0 || w == 0 || !offset_range(h).contains(&i) || !offset_range(w).contains(&j) {
        return Err(Error::InvalidArgument(format!("frequency ({i}, {j}) lies outside the {h}x{w} grid")));
    }
    let (u, v) = (offset_to_raw(i, h), offset_to_raw(j, w));
    let (uc, vc) = ((h - u) % h, (w - v) % w);
    let mut coeffs = vec![Complex64::new(0.0, 0.0); h * w];
    coeffs[u * w + v] = Complex64::new(1.0, 0.0);
    coeffs[uc * w + vc] = Complex64::new(1.0, 0.0);
    let mut data: Vec<f64> = idft2(&coeffs, h, w)?.into_iter().map(|z| z.re).collect();
    let norm = data.iter().map(|x| x * x).sum::<f64>().sqrt();
    data.iter_mut().for_each(|x| *x /= norm);
    Ok(FourierBasisImage { height: h, width: w, i, j, data })
}

/// Random signs `r_k` for each item; they depend only on the seed and the
/// item position, so conjugate cells see the same perturbation.
pub fn perturbation_signs(seed: u64, n: usize) -> Vec<f64> {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    h.update(b"fourier-heatmap");
    let mut rng = ChaCha8Rng::from_seed(h.finalize().into());
    (0..n).map(|_| if rng.random::<bool>() { 1.0 } else { -1.0 }).collect()
}

/// `X_k + r_k eps U` on every channel, clamped to each image's value range.
/// Returns the dataset and the fraction of clamped samples.
pub fn perturb(dataset: &Dataset, i: isize, j: isize, eps: f64, seed: u64) -> Result<(Dataset, f64)> {
    let shape = dataset.common_shape()?;
    let basis = fourier_basis(shape.height, shape.width, i, j)?;
    let signs = perturbation_signs(seed, dataset.len());
    perturb_with(dataset, &basis, eps, &signs)
}

fn perturb_with(dataset: &Dataset, basis: &FourierBasisImage, eps: f64, signs: &[f64]) -> Result<(Dataset, f64)> {
    let clamped = std::sync::atomic::AtomicUsize::new(0);
    let out = dataset.map_images(format!("{}+fourier({},{})", dataset.name(), basis.i, basis.j), |k, _, img| {
        let a = signs[k] * eps;
        let data = img
            .data()
            .chunks(basis.data.len())
            .flat_map(|plane| plane.iter().zip(&basis.data).map(move |(x, u)| x + a * u))
            .collect();
        let (out, n) = Image::clamped_from(img.shape(), data, img.range())?;
        clamped.fetch_add(n, std::sync::atomic::Ordering::Relaxed);
        Ok(out)
    })?;
    let total: usize = dataset.images().map(|x| x.data().len()).sum();
    Ok((out, clamped.into_inner() as f64 / total as f64))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HeatmapVariant {
    /// PSNR of `C(X')` against the perturbed input `X'`.
    WrtPerturbed,
    /// PSNR of `C(X')` against the original `X`.
    WrtOriginal,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeatmapResult {
    pub variant: HeatmapVariant,
    pub codec: String,
    pub dataset: String,
    pub eps: f64,
    pub psnr_cap: f64,
    pub stride: usize,
    /// Sampled row offsets, ascending.
    pub rows: Vec<isize>,
    /// Sampled column offsets, ascending.
    pub cols: Vec<isize>,
    /// Mean PSNR per cell, row-major over `rows x cols`.
    pub psnr: Vec<f64>,
    pub clamp_frac: Vec<f64>,
}

impl HeatmapResult {
    pub fn at(&self, i: isize, j: isize) -> Option<f64> {
        let r = self.rows.iter().position(|&x| x == i)?;
        let c = self.cols.iter().position(|&x| x == j)?;
        Some(self.psnr[r * self.cols.len() + c])
    }

    /// Cells whose perturbation clamped more than [`CLAMP_FLAG`] of samples.
    pub fn flagged(&self) -> Vec<(isize, isize)> {
        self.cells().filter(|&(_, _, k)| self.clamp_frac[k] > CLAMP_FLAG).map(|(i, j, _)| (i, j)).collect()
    }

    fn cells(&self) -> impl Iterator<Item = (isize, isize, usize)> + '_ {
        self.rows
            .iter()
            .enumerate()
            .flat_map(move |(r, &i)| self.cols.iter().enumerate().map(move |(c, &j)| (i, j, r * self.cols.len() + c)))
    }

    /// Largest PSNR gap between a cell and its conjugate reflection, over
    /// pairs that were both sampled.
    pub fn max_asymmetry(&self, h: usize, w: usize) -> f64 {
        let reflect = |o: isize, n: usize| crate::spectral::fft::raw_to_offset(offset_to_raw(-o, n), n);
        self.cells()
            .filter_map(|(i, j, k)| self.at(reflect(i, h), reflect(j, w)).map(|p| (p - self.psnr[k]).abs()))
            .fold(0.0, f64::max)
    }

    /// `i,j,psnr,clamp_frac` rows.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("i,j,psnr,clamp_frac\n");
        for (i, j, k) in self.cells() {
            out.push_str(&format!("{i},{j},{},{}\n", self.psnr[k], self.clamp_frac[k]));
        }
        out
    }

    /// Writes `<stem>.csv` and `<stem>.png` in `dir`.
    pub fn write(&self, dir: impl AsRef<Path>, stem: &str) -> Result<()> {
        let dir = dir.as_ref();
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let csv = dir.join(format!("{stem}.csv"));
        fs::write(&csv, self.to_csv()).map_err(|e| Error::io(&csv, e))?;
        write_grid_png(&self.psnr, self.rows.len(), self.cols.len(), true, dir.join(format!("{stem}.png")))
    }
}

/// Offsets `k * stride` inside the grid; DC is always among them.
fn sampled(n: usize, stride: usize) -> Vec<isize> {
    offset_range(n).filter(|o| o.rem_euclid(stride as isize) == 0).collect()
}

/// Both heatmap variants.
pub fn heatmap(codec: &dyn Codec, dataset: &Dataset, eps: f64, stride: usize, psnr_cap: f64, seed: u64) -> Result<(HeatmapResult, HeatmapResult)> {
    if stride == 0 {
        return Err(Error::InvalidArgument("heatmap stride must be >= 1".into()));
    }
    let shape = dataset.common_shape()?;
    let (h, w) = (shape.height, shape.width);
    let (rows, cols) = (sampled(h, stride), sampled(w, stride));
    let signs = perturbation_signs(seed, dataset.len());
    let cells: Vec<(isize, isize)> = rows.iter().flat_map(|&i| cols.iter().map(move |&j| (i, j))).collect();
    let results = cells
        .par_iter()
        .map(|&(i, j)| {
            let cell = || -> Result<(f64, f64, f64)> {
                let basis = fourier_basis(h, w, i, j)?;
                let (perturbed, clamp) = perturb_with(dataset, &basis, eps, &signs)?;
                let recon = reconstruct_dataset(codec, &perturbed)?;
                let n = dataset.len() as f64;
                let (mut a, mut b) = (0.0, 0.0);
                for ((rx, px), ox) in recon.images().zip(perturbed.images()).zip(dataset.images()) {
                    a += psnr_capped(rx, px, psnr_cap)?;
                    b += psnr_capped(rx, ox, psnr_cap)?;
                }
                Ok((a / n, b / n, clamp))
            };
            cell().map_err(|e| Error::Cell { i, j, source: Box::new(e) })
        })
        .collect::<Result<Vec<_>>>()?;
    let make = |variant, pick: fn(&(f64, f64, f64)) -> f64| HeatmapResult {
        variant,
        codec: codec.id(),
        dataset: dataset.name().to_string(),
        eps,
        psnr_cap,
        stride,
        rows: rows.clone(),
        cols: cols.clone(),
        psnr: results.iter().map(pick).collect(),
        clamp_frac: results.iter().map(|r| r.2).collect(),
    };
    Ok((make(HeatmapVariant::WrtPerturbed, |r| r.0), make(HeatmapVariant::WrtOriginal, |r| r.1)))
}
