//! Distortion, generalization, robustness and corruption spectra of a codec.

use super::spectrum::{mean_difference_psd, Spectrum, SpectrumTag};
use crate::codecs::{reconstruct_dataset, Codec};
use crate::corruptions::{corrupt_dataset, CorruptionSpec};
use crate::error::{Error, Result};
use crate::image::Dataset;

/// Mean PSD of `a_k - b_k` over two datasets with matching ids.
pub fn pair_psd(a: &Dataset, b: &Dataset, tag: SpectrumTag) -> Result<Spectrum> {
    if a.len() != b.len() {
        return Err(Error::Dataset(format!(
            "datasets `{}` and `{}` differ in length ({} vs {})",
            a.name(),
            b.name(),
            a.len(),
            b.len()
        )));
    }
    let pairs = a
        .items()
        .iter()
        .zip(b.items())
        .map(|((ia, xa), (ib, xb))| {
            if ia != ib {
                return Err(Error::Dataset(format!("item ids differ: `{ia}` vs `{ib}`")));
            }
            Ok((ia.as_str(), xa, xb))
        })
        .collect::<Result<Vec<_>>>()?;
    mean_difference_psd(&pairs, tag)
}

/// Distortion spectrum: mean PSD of `X - C(X)`.
pub fn metric_d(codec: &dyn Codec, dataset: &Dataset) -> Result<Spectrum> {
    let recon = reconstruct_dataset(codec, dataset)?;
    pair_psd(dataset, &recon, SpectrumTag::Distortion)
}

/// Generalization spectrum: mean PSD of `cX - C(cX)`.
pub fn metric_g(codec: &dyn Codec, dataset: &Dataset, spec: &CorruptionSpec) -> Result<Spectrum> {
    let (corrupted, _) = corrupt_dataset(dataset, spec)?;
    let recon = reconstruct_dataset(codec, &corrupted)?;
    pair_psd(&corrupted, &recon, SpectrumTag::Generalization)
}

/// Robustness spectrum: mean PSD of `X - C(cX)`.
pub fn metric_r(codec: &dyn Codec, dataset: &Dataset, spec: &CorruptionSpec) -> Result<Spectrum> {
    let (corrupted, _) = corrupt_dataset(dataset, spec)?;
    let recon = reconstruct_dataset(codec, &corrupted)?;
    pair_psd(dataset, &recon, SpectrumTag::Robustness)
}

/// Mean PSD of `cX - X`.
pub fn corruption_spectrum(dataset: &Dataset, spec: &CorruptionSpec) -> Result<Spectrum> {
    let (corrupted, _) = corrupt_dataset(dataset, spec)?;
    corruption_spectrum_of(dataset, &corrupted)
}

pub fn corruption_spectrum_of(clean: &Dataset, corrupted: &Dataset) -> Result<Spectrum> {
    pair_psd(corrupted, clean, SpectrumTag::Corruption)
}

/// All four spectra for one codec and one corrupted copy of the data.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricSet {
    pub d: Spectrum,
    pub g: Spectrum,
    pub r: Spectrum,
    pub corruption: Spectrum,
}

impl MetricSet {
    /// Each dataset is reconstructed once.
    pub fn compute(codec: &dyn Codec, clean: &Dataset, corrupted: &Dataset) -> Result<Self> {
        let recon_clean = reconstruct_dataset(codec, clean)?;
        let recon_corrupt = reconstruct_dataset(codec, corrupted)?;
        Ok(MetricSet {
            d: pair_psd(clean, &recon_clean, SpectrumTag::Distortion)?,
            g: pair_psd(corrupted, &recon_corrupt, SpectrumTag::Generalization)?,
            r: pair_psd(clean, &recon_corrupt, SpectrumTag::Robustness)?,
            corruption: corruption_spectrum_of(clean, corrupted)?,
        })
    }
}
