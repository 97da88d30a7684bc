//! Seeded, severity-graded image corruptions and their spectral fingerprints.

mod filters;
mod ops;
mod table;

use std::fmt;
use std::str::FromStr;
use std::sync::atomic::{AtomicUsize, Ordering};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub(crate) use filters::reflect;
pub use table::{ElasticParams, FogParams, GlassParams, Severity, SeverityTable, SnowParams};

use crate::error::{Error, Result};
use crate::image::{Dataset, Image, Manifest, Provenance};
use crate::spectral::{self, Band, BandThresholds};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CorruptionKind {
    Identity,
    GaussianNoise,
    ShotNoise,
    ImpulseNoise,
    DefocusBlur,
    MotionBlur,
    GlassBlur,
    Pixelate,
    ElasticTransform,
    Brightness,
    Contrast,
    Fog,
    SnowOverlay,
}

impl CorruptionKind {
    pub const ALL: [CorruptionKind; 13] = [
        CorruptionKind::Identity,
        CorruptionKind::GaussianNoise,
        CorruptionKind::ShotNoise,
        CorruptionKind::ImpulseNoise,
        CorruptionKind::DefocusBlur,
        CorruptionKind::MotionBlur,
        CorruptionKind::GlassBlur,
        CorruptionKind::Pixelate,
        CorruptionKind::ElasticTransform,
        CorruptionKind::Brightness,
        CorruptionKind::Contrast,
        CorruptionKind::Fog,
        CorruptionKind::SnowOverlay,
    ];

    pub fn name(self) -> &'static str {
        match self {
            CorruptionKind::Identity => "identity",
            CorruptionKind::GaussianNoise => "gaussian_noise",
            CorruptionKind::ShotNoise => "shot_noise",
            CorruptionKind::ImpulseNoise => "impulse_noise",
            CorruptionKind::DefocusBlur => "defocus_blur",
            CorruptionKind::MotionBlur => "motion_blur",
            CorruptionKind::GlassBlur => "glass_blur",
            CorruptionKind::Pixelate => "pixelate",
            CorruptionKind::ElasticTransform => "elastic_transform",
            CorruptionKind::Brightness => "brightness",
            CorruptionKind::Contrast => "contrast",
            CorruptionKind::Fog => "fog",
            CorruptionKind::SnowOverlay => "snow_overlay",
        }
    }

    /// Whether the output depends on the seed.
    pub fn is_stochastic(self) -> bool {
        !matches!(
            self,
            CorruptionKind::Identity
                | CorruptionKind::DefocusBlur
                | CorruptionKind::Pixelate
                | CorruptionKind::Brightness
                | CorruptionKind::Contrast
        )
    }
}

impl fmt::Display for CorruptionKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for CorruptionKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        CorruptionKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::UnknownCorruption(s.to_string()))
    }
}

/// A corruption `c(.)`: kind, severity and the global seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct CorruptionSpec {
    pub name: CorruptionKind,
    pub severity: Severity,
    pub seed: u64,
}

impl CorruptionSpec {
    pub fn new(name: CorruptionKind, severity: u8, seed: u64) -> Result<Self> {
        Ok(CorruptionSpec {
            name,
            severity: Severity::new(severity)?,
            seed,
        })
    }

    pub fn parse(name: &str, severity: u8, seed: u64) -> Result<Self> {
        Self::new(name.parse()?, severity, seed)
    }

    pub fn identity() -> Self {
        CorruptionSpec {
            name: CorruptionKind::Identity,
            severity: Severity::ALL[0],
            seed: 0,
        }
    }

    pub fn is_identity(&self) -> bool {
        self.name == CorruptionKind::Identity
    }

    pub fn label(&self) -> String {
        format!("{}-s{}", self.name, self.severity)
    }

    pub fn provenance(&self) -> Provenance {
        Provenance {
            corruption: self.name.to_string(),
            severity: self.severity.get(),
            seed: self.seed,
        }
    }

    /// Generator for one item, keyed by (seed, name, severity, index) so that
    /// items can be corrupted in any order.
    fn rng(&self, item_index: usize) -> ChaCha8Rng {
        let mut h = Sha256::new();
        h.update(self.seed.to_le_bytes());
        h.update(self.name.name().as_bytes());
        h.update([self.severity.get()]);
        h.update((item_index as u64).to_le_bytes());
        ChaCha8Rng::from_seed(h.finalize().into())
    }

    /// Applies the corruption with the default severity table.
    pub fn apply(&self, image: &Image, item_index: usize) -> Result<Image> {
        self.apply_with(&SeverityTable::default(), image, item_index)
    }

    /// Output is clamped to the input's declared value range.
    pub fn apply_with(&self, table: &SeverityTable, image: &Image, item_index: usize) -> Result<Image> {
        Ok(self.apply_counted(table, image, item_index)?.0)
    }

    /// Also returns how many samples were clamped.
    pub fn apply_counted(&self, table: &SeverityTable, image: &Image, item_index: usize) -> Result<(Image, usize)> {
        if self.is_identity() {
            return Ok((image.clone(), 0));
        }
        let mut rng = self.rng(item_index);
        let data = ops::corrupt(self.name, self.severity.index(), table, image, &mut rng);
        Image::clamped_from(image.shape(), data, image.range())
    }
}

impl fmt::Display for CorruptionSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}(severity={}, seed={})", self.name, self.severity, self.seed)
    }
}

/// Corrupts every item (item index = ordinal position in the dataset).
pub fn corrupt_dataset(dataset: &Dataset, spec: &CorruptionSpec) -> Result<(Dataset, Manifest)> {
    corrupt_dataset_with(dataset, spec, &SeverityTable::default())
}

pub fn corrupt_dataset_with(
    dataset: &Dataset,
    spec: &CorruptionSpec,
    table: &SeverityTable,
) -> Result<(Dataset, Manifest)> {
    let (out, manifest, _) = corrupt_dataset_counted(dataset, spec, table)?;
    Ok((out, manifest))
}

/// Like [`corrupt_dataset_with`], plus the fraction of clamped samples.
pub fn corrupt_dataset_counted(
    dataset: &Dataset,
    spec: &CorruptionSpec,
    table: &SeverityTable,
) -> Result<(Dataset, Manifest, f64)> {
    let name = if spec.is_identity() {
        dataset.name().to_string()
    } else {
        format!("{}+{}", dataset.name(), spec.label())
    };
    let clamped = AtomicUsize::new(0);
    let out = dataset.map_images(name, |k, _, img| {
        let (x, n) = spec.apply_counted(table, img, k)?;
        clamped.fetch_add(n, Ordering::Relaxed);
        Ok(x)
    })?;
    let total: usize = dataset.images().map(|x| x.data().len()).sum();
    let manifest = out.manifest(Some(&spec.provenance()));
    Ok((out, manifest, clamped.into_inner() as f64 / total.max(1) as f64))
}

/// One row of the band-categorization table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FingerprintRow {
    pub name: CorruptionKind,
    pub severity: u8,
    pub band: Band,
    pub low_fraction: f64,
    pub high_fraction: f64,
}

/// Corruption spectrum and band verdict for each spec.
pub fn fingerprint_suite(
    dataset: &Dataset,
    specs: &[CorruptionSpec],
    table: &SeverityTable,
    thresholds: &BandThresholds,
) -> Result<Vec<FingerprintRow>> {
    specs
        .iter()
        .map(|spec| {
            let (corrupted, _) = corrupt_dataset_with(dataset, spec, table)?;
            let fingerprint = spectral::corruption_spectrum_of(dataset, &corrupted)?;
            let profile = spectral::radial_profile(&fingerprint, spectral::DEFAULT_BINS)?;
            let verdict = spectral::classify_band_with(&profile, thresholds);
            Ok(FingerprintRow {
                name: spec.name,
                severity: spec.severity.get(),
                band: verdict.band,
                low_fraction: verdict.low_fraction,
                high_fraction: verdict.high_fraction,
            })
        })
        .collect()
}
