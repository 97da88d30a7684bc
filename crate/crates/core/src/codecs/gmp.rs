//! Gradual magnitude pruning of the linear codec's two matrices.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::LinearAECodec;
use crate::error::{Error, Result};
use crate::image::Dataset;

/// Pruning times `t0, t0 + dt, ..., t0 + n * dt`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PruneSteps {
    pub t0: u64,
    pub dt: u64,
    pub n: u64,
}

impl Default for PruneSteps {
    fn default() -> Self {
        PruneSteps { t0: 0, dt: 1, n: 10 }
    }
}

/// Cubic sparsity ramp `s_f + (s_i - s_f) (1 - (t - t0) / (n dt))^3`.
pub fn gmp_schedule(s_i: f64, s_f: f64, t0: u64, dt: u64, n: u64, t: u64) -> Result<f64> {
    if !(0.0 <= s_i && s_i <= s_f && s_f < 1.0) {
        return Err(Error::Schedule(format!(
            "need 0 <= s_i <= s_f < 1, got s_i={s_i}, s_f={s_f}"
        )));
    }
    if dt == 0 || n == 0 {
        return Err(Error::Schedule("dt and n must be positive".into()));
    }
    let end = t0 + n * dt;
    if t < t0 || t > end || (t - t0) % dt != 0 {
        return Err(Error::Schedule(format!(
            "t={t} is not on the grid {t0}, {}, ..., {end}",
            t0 + dt
        )));
    }
    if t == t0 {
        return Ok(s_i);
    }
    if t == end {
        return Ok(s_f);
    }
    let progress = (t - t0) as f64 / (n * dt) as f64;
    Ok(s_f + (s_i - s_f) * (1.0 - progress).powi(3))
}

/// Audit line for one pruning step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PruneStep {
    pub t: u64,
    pub scheduled: f64,
    pub target_zeros: usize,
    pub zeros: usize,
    pub total: usize,
}

/// Prunes `(W1, W2)` jointly by global magnitude along the schedule. Among
/// equal magnitudes the lower flat index (`W1` entries first, then `W2`) is
/// pruned first. With `refit`, the surviving entries of each `W2` row are
/// re-fitted by least squares to the training images after every step.
pub fn prune_linear_ae(
    codec: &LinearAECodec,
    target: f64,
    steps: PruneSteps,
    refit: Option<&Dataset>,
) -> Result<(LinearAECodec, Vec<PruneStep>)> {
    if !(0.0..1.0).contains(&target) {
        return Err(Error::InvalidArgument(format!("target sparsity must lie in [0, 1), got {target}")));
    }
    let mut out = codec.clone();
    let s_i = out.sparsity();
    if target < s_i {
        return Err(Error::InvalidArgument(format!(
            "codec already has sparsity {s_i:.4} above the target {target}"
        )));
    }
    let total = 2 * out.r() * out.dim();
    let mut audit = Vec::with_capacity(steps.n as usize + 1);
    for k in 0..=steps.n {
        let t = steps.t0 + k * steps.dt;
        let scheduled = gmp_schedule(s_i, target, steps.t0, steps.dt, steps.n, t)?;
        let want = (scheduled * total as f64 + 1e-9).floor() as usize;
        let zeros = prune_to(&mut out, want);
        if let Some(data) = refit {
            refit_decoder(&mut out, data)?;
        }
        audit.push(PruneStep {
            t,
            scheduled,
            target_zeros: want,
            zeros,
            total,
        });
    }
    Ok((out, audit))
}

/// Masks the smallest surviving entries until `want` are pruned; returns the
/// resulting pruned count.
fn prune_to(codec: &mut LinearAECodec, want: usize) -> usize {
    let (w1, w2, m1, m2) = codec.weights_mut();
    let n1 = w1.len();
    let pruned = m1.iter().chain(m2.iter()).filter(|m| !**m).count();
    if want <= pruned {
        return pruned;
    }
    let mut alive: Vec<(f64, usize)> = m1
        .iter()
        .chain(m2.iter())
        .enumerate()
        .filter(|(_, m)| **m)
        .map(|(i, _)| (if i < n1 { w1[i] } else { w2[i - n1] }.abs(), i))
        .collect();
    let need = want - pruned;
    alive.select_nth_unstable_by(need - 1, |a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    for &(_, i) in &alive[..need] {
        if i < n1 {
            m1[i] = false;
            w1[i] = 0.0;
        } else {
            m2[i - n1] = false;
            w2[i - n1] = 0.0;
        }
    }
    want
}

fn refit_decoder(codec: &mut LinearAECodec, data: &Dataset) -> Result<()> {
    let r = codec.r();
    let d = codec.dim();
    if r == 0 {
        return Ok(());
    }
    let n = data.len();
    let latents: Vec<Vec<f64>> = data.images().map(|img| codec.encode_latent(img)).collect::<Result<_>>()?;
    let y = DMatrix::from_fn(n, r, |k, j| latents[k][j]);
    let targets: Vec<&[f64]> = data.images().map(|img| img.data()).collect();
    let mean = codec.mean().to_vec();
    let m2 = codec.masks().1.to_vec();
    let rows: Vec<Vec<f64>> = (0..d)
        .into_par_iter()
        .map(|i| {
            let keep: Vec<usize> = (0..r).filter(|&j| m2[i * r + j]).collect();
            let mut row = vec![0.0; r];
            if keep.is_empty() {
                return row;
            }
            let ys = DMatrix::from_fn(n, keep.len(), |k, c| y[(k, keep[c])]);
            let t = DVector::from_fn(n, |k, _| targets[k][i] - mean[i]);
            let a = ys.transpose() * &ys;
            let b = ys.transpose() * t;
            if let Ok(sol) = a.svd(true, true).solve(&b, 1e-12) {
                for (c, &j) in keep.iter().enumerate() {
                    row[j] = sol[c];
                }
            }
            row
        })
        .collect();
    let (_, w2, _, _) = codec.weights_mut();
    for (i, row) in rows.into_iter().enumerate() {
        w2[i * r..(i + 1) * r].copy_from_slice(&row);
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn schedule_endpoints_and_midpoint() {
        assert_eq!(gmp_schedule(0.1, 0.8, 5, 2, 4, 5).unwrap(), 0.1);
        assert_eq!(gmp_schedule(0.1, 0.8, 5, 2, 4, 13).unwrap(), 0.8);
        assert!((gmp_schedule(0.0, 0.8, 0, 1, 10, 5).unwrap() - 0.7).abs() < 1e-15);
    }

    #[test]
    fn schedule_rejects_off_grid_times_and_bad_targets() {
        assert!(gmp_schedule(0.0, 0.5, 0, 2, 3, 3).is_err());
        assert!(gmp_schedule(0.0, 0.5, 10, 2, 3, 8).is_err());
        assert!(gmp_schedule(0.0, 0.5, 0, 2, 3, 8).is_err());
        assert!(gmp_schedule(0.0, 1.0, 0, 1, 1, 0).is_err());
        assert!(gmp_schedule(0.6, 0.5, 0, 1, 1, 0).is_err());
    }
}
