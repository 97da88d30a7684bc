//! Dead-leaves images: occluding random disks whose sizes follow a power
//! law, which gives roughly `1/f` amplitude spectra like natural photographs.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{Dataset, Image, Shape};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DeadLeaves {
    pub n: usize,
    pub height: usize,
    pub width: usize,
    #[serde(default = "three")]
    pub channels: usize,
    #[serde(default)]
    pub seed: u64,
    /// Smallest and largest disk radius as fractions of the shorter side.
    #[serde(default = "default_radii")]
    pub radii: (f64, f64),
    #[serde(default = "default_disks")]
    pub disks: usize,
}

fn three() -> usize {
    3
}

fn default_radii() -> (f64, f64) {
    (0.01, 0.4)
}

fn default_disks() -> usize {
    600
}

impl DeadLeaves {
    pub fn new(n: usize, height: usize, width: usize, seed: u64) -> Self {
        DeadLeaves {
            n,
            height,
            width,
            channels: 3,
            seed,
            radii: default_radii(),
            disks: default_disks(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::InvalidArgument("dead leaves: n must be positive".into()));
        }
        let (lo, hi) = self.radii;
        if !(lo > 0.0 && lo < hi) {
            return Err(Error::InvalidArgument(format!("dead leaves: bad radius range ({lo}, {hi})")));
        }
        Ok(())
    }

    pub fn generate(&self) -> Result<Dataset> {
        dead_leaves(self)
    }
}

fn item_rng(seed: u64, index: usize) -> ChaCha8Rng {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    h.update(b"dead_leaves");
    h.update((index as u64).to_le_bytes());
    ChaCha8Rng::from_seed(h.finalize().into())
}

/// Items are named `dl_000`, `dl_001`, ...
pub fn dead_leaves(cfg: &DeadLeaves) -> Result<Dataset> {
    cfg.validate()?;
    let shape = Shape::new(cfg.channels, cfg.height, cfg.width);
    let items = (0..cfg.n)
        .into_par_iter()
        .map(|k| Ok((format!("dl_{k:03}"), render(cfg, shape, &mut item_rng(cfg.seed, k))?)))
        .collect::<Result<Vec<_>>>()?;
    Dataset::new(format!("dead_leaves_{}", cfg.seed), items)
}

fn render(cfg: &DeadLeaves, shape: Shape, rng: &mut ChaCha8Rng) -> Result<Image> {
    let (h, w, k) = (shape.height, shape.width, shape.channels);
    let side = h.min(w) as f64;
    let (rmin, rmax) = (cfg.radii.0 * side, cfg.radii.1 * side);
    let mut data = vec![0.0; k * h * w];
    // Painted front to back; a pixel keeps the first disk that covers it.
    let mut covered = vec![false; h * w];
    let mut left = h * w;
    for _ in 0..cfg.disks {
        if left == 0 {
            break;
        }
        // Inverse-CDF draw from density proportional to r^-3.
        let u: f64 = rng.random();
        let radius = (rmin.powi(-2) - u * (rmin.powi(-2) - rmax.powi(-2))).powf(-0.5);
        let cy = rng.random_range(-rmax..h as f64 + rmax);
        let cx = rng.random_range(-rmax..w as f64 + rmax);
        let grey: f64 = rng.random_range(0.08..0.92);
        let tint: Vec<f64> = (0..k).map(|_| rng.random_range(-0.08..0.08)).collect();
        let (gy, gx) = (rng.random_range(-0.25..0.25), rng.random_range(-0.25..0.25));
        let y0 = (cy - radius).floor().max(0.0) as usize;
        let y1 = ((cy + radius).ceil().max(0.0) as usize).min(h);
        let x0 = (cx - radius).floor().max(0.0) as usize;
        let x1 = ((cx + radius).ceil().max(0.0) as usize).min(w);
        for y in y0..y1 {
            for x in x0..x1 {
                let (dy, dx) = (y as f64 + 0.5 - cy, x as f64 + 0.5 - cx);
                let p = y * w + x;
                if covered[p] || dy * dy + dx * dx > radius * radius {
                    continue;
                }
                covered[p] = true;
                left -= 1;
                let shade = (gy * dy + gx * dx) / radius;
                for (c, t) in tint.iter().enumerate() {
                    data[c * h * w + p] = (grey + t + 0.15 * shade).clamp(0.0, 1.0);
                }
            }
        }
    }
    let fill: Vec<f64> = (0..k).map(|_| rng.random_range(0.3..0.7)).collect();
    for (p, _) in covered.iter().enumerate().filter(|(_, &c)| !c) {
        for (c, v) in fill.iter().enumerate() {
            data[c * h * w + p] = *v;
        }
    }
    Image::new(k, h, w, data)
}
