//! 2-D Fourier machinery, spectral error maps and their summaries.

mod audit;
pub mod export;
pub mod fft;
mod metrics;
mod radial;
mod spectrum;

pub use audit::{triangle_audit, AuditReport};
pub use fft::{dft2, idft2};
pub use metrics::{
    corruption_spectrum, corruption_spectrum_of, metric_d, metric_g, metric_r, pair_psd, MetricSet,
};
pub use radial::{
    classify_band, classify_band_with, radial_profile, Band, BandThresholds, BandVerdict, RadialProfile,
    DEFAULT_BINS,
};
pub use spectrum::{mean_difference_psd, mean_psd, psd, Spectrum, SpectrumTag};
