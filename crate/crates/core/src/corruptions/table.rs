use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Strength levels `1..=5`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub struct Severity(u8);

impl Severity {
    pub const ALL: [Severity; 5] = [Severity(1), Severity(2), Severity(3), Severity(4), Severity(5)];

    pub fn new(level: u8) -> Result<Self> {
        if (1..=5).contains(&level) {
            Ok(Severity(level))
        } else {
            Err(Error::Severity(level))
        }
    }

    pub fn get(self) -> u8 {
        self.0
    }

    pub(crate) fn index(self) -> usize {
        self.0 as usize - 1
    }
}

impl TryFrom<u8> for Severity {
    type Error = Error;
    fn try_from(v: u8) -> Result<Self> {
        Severity::new(v)
    }
}

impl From<Severity> for u8 {
    fn from(s: Severity) -> u8 {
        s.0
    }
}

impl std::fmt::Display for Severity {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GlassParams {
    pub sigma: f64,
    /// Maximum swap offset in pixels.
    pub radius: usize,
    pub rounds: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ElasticParams {
    /// RMS displacement in pixels.
    pub amplitude: f64,
    /// Gaussian smoothing of the displacement noise.
    pub smoothness: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FogParams {
    pub blend: f64,
    /// Per-level amplitude divisor of the plasma field.
    pub decay: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SnowParams {
    /// Blend toward the whitened image `max(x, 1.5 * gray + 0.5)`.
    pub whiten: f64,
    /// Flakes per pixel.
    pub density: f64,
    /// Streak length in pixels.
    pub length: f64,
    /// Streak opacity.
    pub weight: f64,
}

/// Per-corruption parameters for severities 1 to 5.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SeverityTable {
    pub gaussian_noise: [f64; 5],
    /// Photon count per unit intensity.
    pub shot_noise: [f64; 5],
    pub impulse_noise: [f64; 5],
    pub defocus_blur: [f64; 5],
    pub motion_blur: [f64; 5],
    pub glass_blur: [GlassParams; 5],
    pub pixelate: [usize; 5],
    pub elastic_transform: [ElasticParams; 5],
    pub brightness: [f64; 5],
    pub contrast: [f64; 5],
    pub fog: [FogParams; 5],
    pub snow_overlay: [SnowParams; 5],
}

impl Default for SeverityTable {
    fn default() -> Self {
        let glass = |sigma, radius, rounds| GlassParams { sigma, radius, rounds };
        let elastic = |amplitude, smoothness| ElasticParams { amplitude, smoothness };
        let fog = |blend, decay| FogParams { blend, decay };
        let snow = |whiten, density, length, weight| SnowParams {
            whiten,
            density,
            length,
            weight,
        };
        SeverityTable {
            gaussian_noise: [0.08, 0.12, 0.18, 0.26, 0.38],
            shot_noise: [60.0, 25.0, 12.0, 5.0, 3.0],
            impulse_noise: [0.03, 0.06, 0.09, 0.17, 0.27],
            defocus_blur: [1.0, 1.5, 2.0, 3.0, 4.0],
            motion_blur: [3.0, 5.0, 7.0, 9.0, 12.0],
            glass_blur: [glass(0.6, 1, 1), glass(0.7, 1, 2), glass(0.8, 2, 1), glass(0.9, 2, 2), glass(0.6, 2, 3)],
            pixelate: [2, 3, 4, 5, 6],
            elastic_transform: [
                elastic(0.5, 3.0),
                elastic(0.8, 3.0),
                elastic(1.1, 3.0),
                elastic(1.5, 3.0),
                elastic(2.0, 3.0),
            ],
            brightness: [0.1, 0.2, 0.3, 0.4, 0.5],
            contrast: [0.4, 0.3, 0.2, 0.1, 0.05],
            fog: [fog(0.15, 2.0), fog(0.25, 2.0), fog(0.35, 2.0), fog(0.45, 2.0), fog(0.55, 2.0)],
            snow_overlay: [
                snow(0.2, 0.002, 4.0, 0.5),
                snow(0.3, 0.003, 5.0, 0.6),
                snow(0.4, 0.004, 6.0, 0.7),
                snow(0.5, 0.005, 7.0, 0.8),
                snow(0.6, 0.006, 8.0, 0.9),
            ],
        }
    }
}

impl SeverityTable {
    /// Parses a full or partial table from TOML or JSON (chosen by content).
    pub fn from_str(text: &str) -> Result<Self> {
        let trimmed = text.trim_start();
        let table: SeverityTable = if trimmed.starts_with('{') {
            serde_json::from_str(text)?
        } else {
            toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?
        };
        table.validate()?;
        Ok(table)
    }

    pub fn from_path(path: impl AsRef<std::path::Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_str(&text)
    }

    /// Rejects parameters outside their meaningful domain.
    pub fn validate(&self) -> Result<()> {
        let bad = |field: &str, msg: &str| Err(Error::Config(format!("severity table `{field}`: {msg}")));
        if self.gaussian_noise.iter().any(|&s| !(s >= 0.0)) {
            return bad("gaussian_noise", "sigma must be >= 0");
        }
        if self.shot_noise.iter().any(|&l| !(l > 0.0)) {
            return bad("shot_noise", "photon count must be > 0");
        }
        if self.impulse_noise.iter().any(|&p| !(0.0..=1.0).contains(&p)) {
            return bad("impulse_noise", "rate must lie in [0, 1]");
        }
        if self.defocus_blur.iter().chain(&self.motion_blur).any(|&r| !(r >= 0.0)) {
            return bad("blur", "radius/length must be >= 0");
        }
        if self.pixelate.contains(&0) {
            return bad("pixelate", "factor must be >= 1");
        }
        if self.fog.iter().any(|f| !(0.0..=1.0).contains(&f.blend) || !(f.decay > 0.0)) {
            return bad("fog", "blend must lie in [0, 1] and decay be > 0");
        }
        if self
            .snow_overlay
            .iter()
            .any(|s| !(0.0..=1.0).contains(&s.whiten) || !(0.0..=1.0).contains(&s.weight) || !(s.density >= 0.0))
        {
            return bad("snow_overlay", "whiten/weight must lie in [0, 1]");
        }
        Ok(())
    }
}
