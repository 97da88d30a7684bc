use std::fs;
use std::path::Path;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{
    cross_term_stats, lemma1_mask_with, predict_d, predict_g_of, predict_r_of, FrequencyMask, MaskMode,
};
use crate::codecs::{fit_linear_ae, reconstruct_dataset};
use crate::corruptions::{corrupt_dataset, CorruptionSpec};
use crate::error::{Error, Result};
use crate::image::{Dataset, Image, Shape, ValueRange};
use crate::spectral::fft::dft2;
use crate::spectral::{export, mean_psd, pair_psd, triangle_audit, AuditReport, MetricSet, Spectrum, SpectrumTag};

/// Quantization step standing in for the `Delta -> 0` limit.
pub const THEORY_DELTA: f64 = 1e-12;

/// Relative tolerance used for the "within" fractions.
pub const REL_TOLERANCE: f64 = 0.15;

/// Threshold, relative to mean `|X_hat|`, below which an empirical
/// distortion counts as "kept".
pub const KEPT_FRACTION: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TheoryOptions {
    pub alpha: f64,
    pub beta: f64,
    pub delta: f64,
}

impl Default for TheoryOptions {
    fn default() -> Self {
        TheoryOptions {
            alpha: 2.0,
            beta: 2.0,
            delta: THEORY_DELTA,
        }
    }
}

/// Per-frequency relative error of an empirical spectrum against a
/// prediction, over coordinates outside the boundary ring. Where the
/// prediction is zero the error is scaled by `fallback` instead.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrorStats {
    pub max: f64,
    pub mean: f64,
    pub within_tolerance: f64,
    pub evaluated: usize,
}

pub fn relative_errors(empirical: &Spectrum, predicted: &Spectrum, fallback: &Spectrum, exclude: &[bool]) -> Vec<Option<f64>> {
    empirical
        .values()
        .iter()
        .zip(predicted.values())
        .zip(fallback.values())
        .zip(exclude)
        .map(|(((e, p), f), &skip)| {
            if skip {
                return None;
            }
            let denom = if *p > 0.0 { *p } else { *f };
            Some(if denom > 0.0 { (e - p).abs() / denom } else { (e - p).abs() })
        })
        .collect()
}

fn error_stats(errors: &[Option<f64>]) -> ErrorStats {
    let vals: Vec<f64> = errors.iter().flatten().copied().collect();
    let n = vals.len();
    if n == 0 {
        return ErrorStats {
            max: 0.0,
            mean: 0.0,
            within_tolerance: 1.0,
            evaluated: 0,
        };
    }
    ErrorStats {
        max: vals.iter().cloned().fold(0.0, f64::max),
        mean: vals.iter().sum::<f64>() / n as f64,
        within_tolerance: vals.iter().filter(|&&v| v <= REL_TOLERANCE).count() as f64 / n as f64,
        evaluated: n,
    }
}

/// Fraction of coordinates outside the ring where "empirical distortion is
/// below half the mean clean magnitude" agrees with mask membership.
pub fn mask_agreement(d: &Spectrum, clean_psd: &Spectrum, mask: &FrequencyMask) -> f64 {
    let ring = mask.boundary_ring();
    let (mut agree, mut total) = (0usize, 0usize);
    for (p, (&dv, &xv)) in d.values().iter().zip(clean_psd.values()).enumerate() {
        if ring[p] {
            continue;
        }
        total += 1;
        if (dv < KEPT_FRACTION * xv) == mask.cells()[p] {
            agree += 1;
        }
    }
    if total == 0 {
        1.0
    } else {
        agree as f64 / total as f64
    }
}

/// How far the sample covariance of the Fourier coefficients is from
/// diagonal: the off-diagonal share of its Frobenius norm, next to the share
/// expected from sampling noise alone under independent coefficients.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OffDiagonality {
    pub ratio: f64,
    pub independence_baseline: f64,
    pub excess: f64,
}

pub fn off_diagonality(dataset: &Dataset) -> Result<OffDiagonality> {
    let shape = dataset.common_shape()?;
    let n = dataset.len();
    let (h, w) = (shape.height, shape.width);
    let scale = 1.0 / ((h * w) as f64).sqrt();
    let coeffs: Vec<Vec<Complex64>> = dataset
        .images()
        .collect::<Vec<_>>()
        .par_iter()
        .map(|img| {
            let mut v = Vec::with_capacity(shape.len());
            for c in img.channels_iter() {
                v.extend(dft2(c, h, w)?.into_iter().map(|z| z * scale));
            }
            Ok(v)
        })
        .collect::<Result<_>>()?;
    let dim = shape.len();
    let mut mean = vec![Complex64::new(0.0, 0.0); dim];
    for z in &coeffs {
        for (m, v) in mean.iter_mut().zip(z) {
            *m += v;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n as f64);
    let centred: Vec<Vec<Complex64>> = coeffs
        .into_iter()
        .map(|z| z.iter().zip(&mean).map(|(a, b)| a - b).collect())
        .collect();
    let diag: Vec<f64> = (0..dim)
        .map(|f| centred.iter().map(|z| z[f].norm_sqr()).sum::<f64>() / n as f64)
        .collect();
    // ||Sigma||_F^2 = (1/N^2) sum_{k,l} |<z_k, z_l>|^2
    let gram_sq: f64 = (0..n)
        .into_par_iter()
        .map(|k| {
            (0..n)
                .map(|l| {
                    let ip: Complex64 = centred[k].iter().zip(&centred[l]).map(|(a, b)| a.conj() * b).sum();
                    ip.norm_sqr()
                })
                .sum::<f64>()
        })
        .collect::<Vec<_>>()
        .iter()
        .sum();
    let total = gram_sq / (n * n) as f64;
    let diag_sq: f64 = diag.iter().map(|d| d * d).sum();
    let off = (total - diag_sq).max(0.0);
    let trace: f64 = diag.iter().sum();
    let baseline_off = ((trace * trace - diag_sq) / n as f64).max(0.0);
    let ratio = if total > 0.0 { (off / total).sqrt() } else { 0.0 };
    let baseline = if baseline_off + diag_sq > 0.0 {
        (baseline_off / (baseline_off + diag_sq)).sqrt()
    } else {
        0.0
    };
    Ok(OffDiagonality {
        ratio,
        independence_baseline: baseline,
        excess: if baseline > 0.0 { ratio / baseline } else { 0.0 },
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaskSummary {
    pub mode: MaskMode,
    pub kept: usize,
    pub ring: usize,
    pub agreement: f64,
    pub d_error: ErrorStats,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModeErrors {
    pub mode: MaskMode,
    pub r_error: ErrorStats,
    pub g_error: ErrorStats,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorruptionTheory {
    pub corruption: CorruptionSpec,
    pub label: String,
    pub cross_term_mean_ratio: f64,
    pub cross_term_max_ratio: f64,
    pub modes: Vec<ModeErrors>,
    pub audit: AuditReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TheoryReport {
    pub dataset: String,
    pub shape: Shape,
    pub n: usize,
    pub r: usize,
    pub effective_rank: usize,
    pub options: TheoryOptions,
    pub off_diagonality: OffDiagonality,
    pub masks: Vec<MaskSummary>,
    pub corruptions: Vec<CorruptionTheory>,
}

/// The report together with every spectrum it was computed from.
#[derive(Debug, Clone)]
pub struct TheoryOutput {
    pub report: TheoryReport,
    pub spectra: Vec<(String, Spectrum)>,
}

impl TheoryOutput {
    /// Writes `report.json` and `spectra/<name>.pfm` under `dir`.
    pub fn write(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        let spectra_dir = dir.join("spectra");
        fs::create_dir_all(&spectra_dir).map_err(|e| Error::io(&spectra_dir, e))?;
        for (name, s) in &self.spectra {
            export::write_pfm(s, spectra_dir.join(format!("{name}.pfm")))?;
        }
        let path = dir.join("report.json");
        let json = serde_json::to_string_pretty(&serde_json::to_value(&self.report)?)?;
        fs::write(&path, json + "\n").map_err(|e| Error::io(&path, e))
    }
}

/// Subtracts the per-sample dataset mean `mean` from every item, as
/// unbounded images.
fn centre(dataset: &Dataset, mean: &[f64], name: &str) -> Result<Dataset> {
    dataset.map_images(name.to_string(), |_, _, img| {
        let data = img.data().iter().zip(mean).map(|(x, m)| x - m).collect();
        Image::with_range(img.shape(), data, ValueRange::Unbounded)
    })
}

fn dataset_mean(dataset: &Dataset) -> Result<Vec<f64>> {
    let shape = dataset.common_shape()?;
    let mut mean = vec![0.0; shape.len()];
    for img in dataset.images() {
        for (m, v) in mean.iter_mut().zip(img.data()) {
            *m += v;
        }
    }
    let n = dataset.len() as f64;
    mean.iter_mut().for_each(|m| *m /= n);
    Ok(mean)
}

/// Fits a rank-`r` linear codec to the mean-centred dataset and compares its
/// empirical spectra against both mask predictions.
///
/// Corruptions act on the original images (so clamping applies to unit-range
/// data); the result is then centred by the clean mean.
pub fn theory_report(r: usize, dataset: &Dataset, corruptions: &[CorruptionSpec], options: &TheoryOptions) -> Result<TheoryOutput> {
    let shape = dataset.common_shape()?;
    let mean = dataset_mean(dataset)?;
    let clean = centre(dataset, &mean, &format!("{}-centred", dataset.name()))?;
    let fitted = fit_linear_ae(&clean, r)?;
    let effective_rank = fitted.r();
    let codec = fitted.with_delta(options.delta)?;

    let masks: Vec<FrequencyMask> = [MaskMode::Disk, MaskMode::VarianceRank]
        .into_iter()
        .map(|mode| lemma1_mask_with(r, shape.channels, shape.height, shape.width, mode, options.alpha, options.beta))
        .collect::<Result<_>>()?;

    let clean_psd = mean_psd(clean.images())?;
    let recon = reconstruct_dataset(&codec, &clean)?;
    let d = pair_psd(&clean, &recon, SpectrumTag::Distortion)?;
    let mut spectra = vec![("clean_psd".to_string(), clean_psd.clone()), ("D".to_string(), d.clone())];

    let mut mask_summaries = Vec::new();
    for mask in &masks {
        let ring = mask.boundary_ring();
        let pred = predict_d(mask, &clean)?;
        let errs = relative_errors(&d, &pred, &clean_psd, &ring);
        mask_summaries.push(MaskSummary {
            mode: mask.mode,
            kept: mask.count(),
            ring: ring.iter().filter(|&&b| b).count(),
            agreement: mask_agreement(&d, &clean_psd, mask),
            d_error: error_stats(&errs),
        });
        spectra.push((format!("pred_D_{}", mode_name(mask.mode)), pred));
    }

    let mut per_corruption = Vec::new();
    for spec in corruptions {
        let (raw, _) = corrupt_dataset(dataset, spec)?;
        let corrupted = centre(&raw, &mean, &format!("{}-centred", raw.name()))?;
        let metrics = MetricSet::compute(&codec, &clean, &corrupted)?;
        let audit = triangle_audit(&metrics.corruption, &metrics.g, &metrics.r)?;
        let corrupted_psd = mean_psd(corrupted.images())?;
        let cross = cross_term_stats(&clean, &corrupted)?;
        let label = spec.label();
        let mut modes = Vec::new();
        for mask in &masks {
            let ring = mask.boundary_ring();
            let pr = predict_r_of(mask, &clean, &corrupted)?;
            let pg = predict_g_of(mask, &clean, &corrupted)?;
            modes.push(ModeErrors {
                mode: mask.mode,
                r_error: error_stats(&relative_errors(&metrics.r, &pr, &corrupted_psd, &ring)),
                g_error: error_stats(&relative_errors(&metrics.g, &pg, &corrupted_psd, &ring)),
            });
            spectra.push((format!("pred_R_{}_{label}", mode_name(mask.mode)), pr));
            spectra.push((format!("pred_G_{}_{label}", mode_name(mask.mode)), pg));
        }
        spectra.push((format!("R_{label}"), metrics.r));
        spectra.push((format!("G_{label}"), metrics.g));
        spectra.push((format!("corruption_{label}"), metrics.corruption));
        per_corruption.push(CorruptionTheory {
            corruption: *spec,
            label,
            cross_term_mean_ratio: cross.mean_ratio,
            cross_term_max_ratio: cross.max_ratio,
            modes,
            audit,
        });
    }

    let report = TheoryReport {
        dataset: dataset.name().to_string(),
        shape,
        n: dataset.len(),
        r,
        effective_rank,
        options: *options,
        off_diagonality: off_diagonality(&clean)?,
        masks: mask_summaries,
        corruptions: per_corruption,
    };
    log::info!("theory report for r={r} on {} items done", dataset.len());
    Ok(TheoryOutput { report, spectra })
}

fn mode_name(mode: MaskMode) -> &'static str {
    match mode {
        MaskMode::Disk => "disk",
        MaskMode::VarianceRank => "rank",
    }
}
