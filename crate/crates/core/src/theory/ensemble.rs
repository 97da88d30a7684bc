use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::image::{Dataset, Image, Shape};
use crate::spectral::fft::{idft2, raw_to_offset};

/// Gaussian images whose orthonormal Fourier coefficients are independent
/// with variance `1 / (|i|^alpha + |j|^beta)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerLawEnsemble {
    pub shape: Shape,
    pub alpha: f64,
    pub beta: f64,
    pub n: usize,
    pub seed: u64,
    /// Finite stand-in for the DC variance.
    pub dc_variance: f64,
}

impl PowerLawEnsemble {
    /// `alpha = beta = 2` and a DC variance of ten times that of `(1, 0)`.
    pub fn new(shape: Shape, n: usize, seed: u64) -> Self {
        PowerLawEnsemble {
            shape,
            alpha: 2.0,
            beta: 2.0,
            n,
            seed,
            dc_variance: 10.0,
        }
    }

    pub fn with_exponents(mut self, alpha: f64, beta: f64) -> Self {
        self.alpha = alpha;
        self.beta = beta;
        self
    }

    /// Variance of the orthonormal coefficient at signed offset `(i, j)`.
    pub fn variance(&self, i: isize, j: isize) -> f64 {
        powerlaw_variance(i, j, self.alpha, self.beta, self.dc_variance)
    }

    pub fn generate(&self) -> Result<Dataset> {
        generate_powerlaw(self)
    }
}

pub(crate) fn powerlaw_variance(i: isize, j: isize, alpha: f64, beta: f64, dc: f64) -> f64 {
    if i == 0 && j == 0 {
        dc
    } else {
        1.0 / ((i.unsigned_abs() as f64).powf(alpha) + (j.unsigned_abs() as f64).powf(beta))
    }
}

fn item_rng(seed: u64, index: usize) -> ChaCha8Rng {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    h.update(b"powerlaw");
    h.update((index as u64).to_le_bytes());
    ChaCha8Rng::from_seed(h.finalize().into())
}

/// Draws `n` unbounded, mean-zero images; items are named `pl_00000`, ...
pub fn generate_powerlaw(ensemble: &PowerLawEnsemble) -> Result<Dataset> {
    let Shape {
        channels: k,
        height: h,
        width: w,
    } = ensemble.shape;
    if k == 0 || h < 2 || w < 2 {
        return Err(Error::Dimension(format!("power-law ensemble needs H, W >= 2, got {}", ensemble.shape)));
    }
    if ensemble.n == 0 {
        return Err(Error::InvalidArgument("ensemble size must be positive".into()));
    }
    let scale = ((h * w) as f64).sqrt();
    let items = (0..ensemble.n)
        .into_par_iter()
        .map(|index| {
            let mut rng = item_rng(ensemble.seed, index);
            let mut data = Vec::with_capacity(k * h * w);
            for _ in 0..k {
                let mut coeffs = vec![Complex64::new(0.0, 0.0); h * w];
                for u in 0..h {
                    for v in 0..w {
                        let p = u * w + v;
                        let q = ((h - u) % h) * w + (w - v) % w;
                        if p > q {
                            continue;
                        }
                        let var = ensemble.variance(raw_to_offset(u, h), raw_to_offset(v, w));
                        let re: f64 = StandardNormal.sample(&mut rng);
                        if p == q {
                            coeffs[p] = Complex64::new(re * var.sqrt(), 0.0);
                        } else {
                            let im: f64 = StandardNormal.sample(&mut rng);
                            let z = Complex64::new(re, im) * (var / 2.0).sqrt();
                            coeffs[p] = z;
                            coeffs[q] = z.conj();
                        }
                    }
                }
                // Orthonormal synthesis: sqrt(HW) times the 1/(HW) inverse.
                data.extend(idft2(&coeffs, h, w)?.into_iter().map(|z| z.re * scale));
            }
            Ok((format!("pl_{index:05}"), Image::unbounded(ensemble.shape, data)?))
        })
        .collect::<Result<Vec<_>>>()?;
    Dataset::new(format!("powerlaw-a{}-b{}-n{}-s{}", ensemble.alpha, ensemble.beta, ensemble.n, ensemble.seed), items)
}
