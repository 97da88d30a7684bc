use serde::{Deserialize, Serialize};

use super::ensemble::powerlaw_variance;
use crate::error::{Error, Result};
use crate::spectral::fft::{centered_to_offset, offset_to_centered};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MaskMode {
    /// `i^2 + j^2 <= r / (pi K)`.
    Disk,
    /// The `ceil(r / K)` frequencies of largest power-law variance.
    VarianceRank,
}

/// Frequencies kept by a rank-`r` linear codec, on the centred grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrequencyMask {
    height: usize,
    width: usize,
    cells: Vec<bool>,
    pub mode: MaskMode,
    pub r: usize,
    pub channels: usize,
}

impl FrequencyMask {
    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    /// Row-major over centred coordinates.
    pub fn cells(&self) -> &[bool] {
        &self.cells
    }

    pub fn at(&self, row: usize, col: usize) -> bool {
        self.cells[row * self.width + col]
    }

    pub fn contains(&self, i: isize, j: isize) -> bool {
        self.at(offset_to_centered(i, self.height), offset_to_centered(j, self.width))
    }

    pub fn count(&self) -> usize {
        self.cells.iter().filter(|&&c| c).count()
    }

    /// Kept offsets in row-major centred order.
    pub fn offsets(&self) -> Vec<(isize, isize)> {
        (0..self.height * self.width)
            .filter(|&p| self.cells[p])
            .map(|p| (centered_to_offset(p / self.width, self.height), centered_to_offset(p % self.width, self.width)))
            .collect()
    }

    /// Cells with an 8-neighbour of opposite membership: a ring two
    /// frequencies wide straddling the mask edge.
    pub fn boundary_ring(&self) -> Vec<bool> {
        let (h, w) = (self.height as isize, self.width as isize);
        (0..h * w)
            .map(|p| {
                let (y, x) = (p / w, p % w);
                let me = self.cells[p as usize];
                (-1..=1).any(|dy| {
                    (-1..=1).any(|dx| {
                        let (ny, nx) = (y + dy, x + dx);
                        ny >= 0 && nx >= 0 && ny < h && nx < w && self.cells[(ny * w + nx) as usize] != me
                    })
                })
            })
            .collect()
    }
}

/// Prediction of the frequencies a rank-`r` linear codec keeps, with the
/// default exponents `alpha = beta = 2`.
pub fn lemma1_mask(r: usize, k: usize, h: usize, w: usize, mode: MaskMode) -> Result<FrequencyMask> {
    lemma1_mask_with(r, k, h, w, mode, 2.0, 2.0)
}

pub fn lemma1_mask_with(
    r: usize,
    k: usize,
    h: usize,
    w: usize,
    mode: MaskMode,
    alpha: f64,
    beta: f64,
) -> Result<FrequencyMask> {
    if k == 0 || h == 0 || w == 0 {
        return Err(Error::Dimension(format!("mask needs a non-empty grid, got {k}x{h}x{w}")));
    }
    if r > k * h * w {
        return Err(Error::InvalidArgument(format!("r = {r} exceeds K*H*W = {}", k * h * w)));
    }
    let offset = |p: usize| (centered_to_offset(p / w, h), centered_to_offset(p % w, w));
    let cells = match mode {
        // A rank-0 codec keeps nothing, not even DC.
        _ if r == 0 => vec![false; h * w],
        // Full rank is the identity; the disk rule would still drop corners.
        _ if r == k * h * w => vec![true; h * w],
        MaskMode::Disk => {
            let limit = r as f64 / (std::f64::consts::PI * k as f64);
            (0..h * w)
                .map(|p| {
                    let (i, j) = offset(p);
                    ((i * i + j * j) as f64) <= limit
                })
                .collect()
        }
        MaskMode::VarianceRank => {
            let keep = r.div_ceil(k);
            let mut order: Vec<usize> = (0..h * w).collect();
            order.sort_by(|&a, &b| {
                let ((ia, ja), (ib, jb)) = (offset(a), offset(b));
                // DC ranks first whatever its variance.
                let va = powerlaw_variance(ia, ja, alpha, beta, f64::INFINITY);
                let vb = powerlaw_variance(ib, jb, alpha, beta, f64::INFINITY);
                vb.total_cmp(&va)
                    .then((ia.abs(), ja.abs(), ia, ja).cmp(&(ib.abs(), jb.abs(), ib, jb)))
            });
            let mut cells = vec![false; h * w];
            for &p in &order[..keep] {
                cells[p] = true;
            }
            cells
        }
    };
    Ok(FrequencyMask {
        height: h,
        width: w,
        cells,
        mode,
        r,
        channels: k,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_and_full() {
        for mode in [MaskMode::Disk, MaskMode::VarianceRank] {
            assert_eq!(lemma1_mask(0, 1, 8, 8, mode).unwrap().count(), 0);
            assert_eq!(lemma1_mask(192, 3, 8, 8, mode).unwrap().count(), 64);
        }
        assert!(lemma1_mask(65, 1, 8, 8, MaskMode::Disk).is_err());
    }

    #[test]
    fn variance_rank_top_five() {
        let m = lemma1_mask(5, 1, 8, 8, MaskMode::VarianceRank).unwrap();
        let mut got = m.offsets();
        got.sort();
        assert_eq!(got, vec![(-1, 0), (0, -1), (0, 0), (0, 1), (1, 0)]);
    }

    #[test]
    fn ring_straddles_the_edge() {
        let m = lemma1_mask(5, 1, 8, 8, MaskMode::VarianceRank).unwrap();
        let ring = m.boundary_ring();
        let c = offset_to_centered(0, 8);
        // DC touches the excluded diagonal (1, 1)
        assert!(ring[c * 8 + c]);
        assert!(ring[offset_to_centered(1, 8) * 8 + offset_to_centered(1, 8)]);
        assert!(!ring[offset_to_centered(3, 8) * 8 + offset_to_centered(3, 8)]);
    }
}
