use serde::{Deserialize, Serialize};

use super::fft::centered_to_offset;
use super::Spectrum;
use crate::error::{Error, Result};

/// Default bin count; its edges land exactly on the default band thresholds.
pub const DEFAULT_BINS: usize = 40;

/// Ring-averaged summary of a centred spectrum.
///
/// Bin `b` holds coordinates whose normalized radius `rho = r / r_max` lies in
/// `[b/n, (b+1)/n)`, with `r_max` the corner radius; `rho = 1` goes to the
/// last bin.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RadialProfile {
    pub n_bins: usize,
    pub counts: Vec<usize>,
    /// Mean magnitude per bin (0 for empty bins).
    pub mean: Vec<f64>,
    /// Sum of squared magnitudes per bin.
    pub energy: Vec<f64>,
}

impl RadialProfile {
    pub fn edges(&self) -> Vec<f64> {
        (0..=self.n_bins).map(|b| b as f64 / self.n_bins as f64).collect()
    }

    pub fn total_energy(&self) -> f64 {
        self.energy.iter().sum()
    }

    /// Fraction of energy in bins lying entirely below `rho`.
    pub fn energy_below(&self, rho: f64) -> f64 {
        let total = self.total_energy();
        if total == 0.0 {
            return 0.0;
        }
        let n = self.n_bins as f64;
        let sum: f64 = (0..self.n_bins)
            .filter(|&b| (b + 1) as f64 / n <= rho + 1e-12)
            .map(|b| self.energy[b])
            .sum();
        sum / total
    }

    /// Fraction of energy in bins lying entirely above `rho`.
    pub fn energy_above(&self, rho: f64) -> f64 {
        let total = self.total_energy();
        if total == 0.0 {
            return 0.0;
        }
        let n = self.n_bins as f64;
        let sum: f64 = (0..self.n_bins)
            .filter(|&b| b as f64 / n >= rho - 1e-12)
            .map(|b| self.energy[b])
            .sum();
        sum / total
    }

    /// Whether the mean magnitude never drops between consecutive non-empty
    /// bins whose centres lie in `[lo, hi]`.
    pub fn is_non_decreasing(&self, lo: f64, hi: f64, rel_tol: f64) -> bool {
        let vals: Vec<f64> = (0..self.n_bins)
            .filter(|&b| {
                let centre = (b as f64 + 0.5) / self.n_bins as f64;
                self.counts[b] > 0 && centre >= lo && centre <= hi
            })
            .map(|b| self.mean[b])
            .collect();
        vals.windows(2).all(|p| p[1] >= p[0] * (1.0 - rel_tol))
    }
}

pub fn radial_profile(spectrum: &Spectrum, n_bins: usize) -> Result<RadialProfile> {
    if n_bins == 0 {
        return Err(Error::InvalidArgument("radial profile needs at least one bin".into()));
    }
    let (h, w) = (spectrum.height(), spectrum.width());
    let r_max = (((h / 2).pow(2) + (w / 2).pow(2)) as f64).sqrt();
    let mut counts = vec![0usize; n_bins];
    let mut sum = vec![0.0; n_bins];
    let mut energy = vec![0.0; n_bins];
    for r in 0..h {
        let i = centered_to_offset(r, h) as f64;
        for c in 0..w {
            let j = centered_to_offset(c, w) as f64;
            let rho = (i * i + j * j).sqrt() / r_max;
            let b = ((rho * n_bins as f64) as usize).min(n_bins - 1);
            let v = spectrum.at(r, c);
            counts[b] += 1;
            sum[b] += v;
            energy[b] += v * v;
        }
    }
    let mean = sum
        .iter()
        .zip(&counts)
        .map(|(s, &n)| if n > 0 { s / n as f64 } else { 0.0 })
        .collect();
    Ok(RadialProfile {
        n_bins,
        counts,
        mean,
        energy,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Band {
    Low,
    Medium,
    High,
    /// All-zero profile.
    Undefined,
}

impl std::fmt::Display for Band {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Band::Low => "low",
            Band::Medium => "medium",
            Band::High => "high",
            Band::Undefined => "undefined",
        })
    }
}

/// Radius/fraction thresholds for [`classify_band`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BandThresholds {
    pub low_radius: f64,
    pub low_fraction: f64,
    pub high_radius: f64,
    pub high_fraction: f64,
}

impl Default for BandThresholds {
    fn default() -> Self {
        BandThresholds {
            low_radius: 0.25,
            low_fraction: 0.6,
            high_radius: 0.6,
            high_fraction: 0.4,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BandVerdict {
    pub band: Band,
    pub low_fraction: f64,
    pub high_fraction: f64,
}

/// Low if enough energy sits below `low_radius`, else high if enough sits
/// above `high_radius`, else medium.
pub fn classify_band(profile: &RadialProfile) -> Band {
    classify_band_with(profile, &BandThresholds::default()).band
}

pub fn classify_band_with(profile: &RadialProfile, t: &BandThresholds) -> BandVerdict {
    let low_fraction = profile.energy_below(t.low_radius);
    let high_fraction = profile.energy_above(t.high_radius);
    let band = if profile.total_energy() == 0.0 {
        Band::Undefined
    } else if low_fraction >= t.low_fraction {
        Band::Low
    } else if high_fraction >= t.high_fraction {
        Band::High
    } else {
        Band::Medium
    };
    BandVerdict {
        band,
        low_fraction,
        high_fraction,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::SpectrumTag;

    fn spec(h: usize, w: usize, f: impl Fn(usize, usize) -> f64) -> Spectrum {
        let vals = (0..h * w).map(|k| f(k / w, k % w)).collect();
        Spectrum::new(h, w, vals, SpectrumTag::RawPsd, 1).unwrap()
    }

    #[test]
    fn zero_dc_and_flat() {
        let z = radial_profile(&spec(16, 16, |_, _| 0.0), 8).unwrap();
        assert!(z.mean.iter().all(|&m| m == 0.0));
        assert_eq!(classify_band(&z), Band::Undefined);

        let dc = radial_profile(&spec(16, 16, |r, c| if (r, c) == (8, 8) { 5.0 } else { 0.0 }), 8).unwrap();
        assert_eq!(dc.mean[0] > 0.0, true);
        assert!(dc.mean[1..].iter().all(|&m| m == 0.0));
        assert_eq!(classify_band(&dc), Band::Low);

        let flat = radial_profile(&spec(16, 12, |_, _| 2.5), 10).unwrap();
        for b in 0..10 {
            if flat.counts[b] > 0 {
                assert!((flat.mean[b] - 2.5).abs() < 1e-12);
            }
        }
        assert_eq!(flat.counts.iter().sum::<usize>(), 16 * 12);
    }

    #[test]
    fn corner_lands_in_last_bin() {
        let p = radial_profile(&spec(8, 8, |r, c| if (r, c) == (0, 0) { 1.0 } else { 0.0 }), 4).unwrap();
        assert_eq!(p.energy[3], 1.0);
    }

    #[test]
    fn flat_spectrum_is_high_band() {
        let p = radial_profile(&spec(64, 64, |_, _| 1.0), DEFAULT_BINS).unwrap();
        let v = classify_band_with(&p, &BandThresholds::default());
        assert_eq!(v.band, Band::High, "{v:?}");
    }

    #[test]
    fn mid_ring_is_medium() {
        let p = radial_profile(
            &spec(64, 64, |r, c| {
                let (i, j) = (r as f64 - 32.0, c as f64 - 32.0);
                let rho = (i * i + j * j).sqrt() / 45.254;
                if (0.3..0.5).contains(&rho) { 1.0 } else { 0.0 }
            }),
            DEFAULT_BINS,
        )
        .unwrap();
        assert_eq!(classify_band(&p), Band::Medium);
    }
}
