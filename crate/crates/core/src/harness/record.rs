use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::psnr;
use crate::codecs::{Codec, RateParam};
use crate::corruptions::CorruptionSpec;
use crate::error::{Error, Result};
use crate::image::Dataset;

/// Frozen column order of `records.csv`.
pub const RECORD_COLUMNS: [&str; 12] = [
    "codec",
    "rate_param",
    "dataset",
    "corruption",
    "severity",
    "seed",
    "bpp_exact",
    "bpp_entropy",
    "psnr_vs_input",
    "psnr_vs_clean",
    "clamp_frac",
    "wall_ms",
];

/// One codec at one rate on one (possibly corrupted) dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalRecord {
    pub codec: String,
    pub rate_param: RateParam,
    pub dataset: String,
    /// `None` for clean data.
    pub corruption: Option<CorruptionSpec>,
    pub bpp_exact: f64,
    pub bpp_entropy: f64,
    /// Mean PSNR of `C(cX)` against `cX`.
    pub psnr_vs_input: f64,
    /// Mean PSNR of `C(cX)` against `X`.
    pub psnr_vs_clean: f64,
    /// Fraction of input samples the corruption clamped.
    pub clamp_frac: f64,
    pub wall_ms: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tool: Option<String>,
    #[serde(default)]
    pub config_hash: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub spectra: Vec<String>,
}

impl EvalRecord {
    pub fn is_clean(&self) -> bool {
        self.corruption.is_none_or(|c| c.is_identity())
    }

    /// CSV row in [`RECORD_COLUMNS`] order; uncorrupted inputs are written
    /// as `clean` with empty severity and seed. `wall_ms` is written as 0
    /// unless `timing` is set, so that rows are reproducible.
    pub fn csv_row(&self, timing: bool) -> String {
        let (name, severity, seed) = match &self.corruption {
            Some(c) => (c.name.to_string(), c.severity.to_string(), c.seed.to_string()),
            None => ("clean".to_string(), String::new(), String::new()),
        };
        let fields = [
            csv_field(&self.codec),
            csv_field(&self.rate_param.to_string()),
            csv_field(&self.dataset),
            name,
            severity,
            seed,
            format!("{:.6}", self.bpp_exact),
            format!("{:.6}", self.bpp_entropy),
            format!("{:.6}", self.psnr_vs_input),
            format!("{:.6}", self.psnr_vs_clean),
            format!("{:.6}", self.clamp_frac),
            if timing { self.wall_ms.to_string() } else { "0".into() },
        ];
        fields.join(",")
    }
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

pub fn records_csv(records: &[EvalRecord], timing: bool) -> String {
    let mut out = RECORD_COLUMNS.join(",");
    out.push('\n');
    for r in records {
        out.push_str(&r.csv_row(timing));
        out.push('\n');
    }
    out
}

/// The corrupted inputs a sweep runs on, with their clean originals.
#[derive(Debug, Clone, Copy)]
pub struct SweepInput<'a> {
    pub clean: &'a Dataset,
    pub input: &'a Dataset,
    pub corruption: Option<&'a CorruptionSpec>,
    pub clamp_frac: f64,
}

impl<'a> SweepInput<'a> {
    pub fn clean(dataset: &'a Dataset) -> Self {
        SweepInput {
            clean: dataset,
            input: dataset,
            corruption: None,
            clamp_frac: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointFailure {
    pub codec: String,
    pub rate_param: RateParam,
    pub dataset: String,
    pub error: String,
}

/// Evaluates one codec at one rate.
pub fn evaluate_point(codec: &dyn Codec, input: &SweepInput<'_>) -> Result<EvalRecord> {
    Ok(evaluate_with_outputs(codec, input)?.0)
}

/// Like [`evaluate_point`], also returning the reconstructions `C(cX)`.
/// Items run in parallel; sums are taken in dataset order.
pub fn evaluate_with_outputs(codec: &dyn Codec, input: &SweepInput<'_>) -> Result<(EvalRecord, Dataset)> {
    if input.clean.len() != input.input.len() {
        return Err(Error::Dataset("clean and corrupted datasets differ in length".into()));
    }
    let start = Instant::now();
    let per_item = input
        .clean
        .items()
        .par_iter()
        .zip(input.input.items())
        .map(|((id, x), (cid, cx))| {
            if id != cid {
                return Err(Error::Dataset(format!("item ids differ: `{id}` vs `{cid}`")));
            }
            let (out, blob) = codec.roundtrip(cx).map_err(|e| e.for_item(id))?;
            if out.shape() != cx.shape() {
                return Err(Error::ShapeMismatch {
                    id: id.clone(),
                    expected: cx.shape().to_string(),
                    actual: out.shape().to_string(),
                });
            }
            let scores = [blob.bpp(), blob.bpp_entropy(), psnr(&out, cx)?, psnr(&out, x)?];
            Ok((id.clone(), out, scores, blob.header.tool))
        })
        .collect::<Result<Vec<_>>>()?;
    let n = per_item.len() as f64;
    let mut sums = [0.0; 4];
    for (_, _, scores, _) in &per_item {
        for (s, v) in sums.iter_mut().zip(scores) {
            *s += v;
        }
    }
    let tool = per_item.iter().find_map(|p| p.3.clone());
    let rec = EvalRecord {
        codec: codec.id(),
        rate_param: codec.rate_param(),
        dataset: input.clean.name().to_string(),
        corruption: input.corruption.copied(),
        bpp_exact: sums[0] / n,
        bpp_entropy: sums[1] / n,
        psnr_vs_input: sums[2] / n,
        psnr_vs_clean: sums[3] / n,
        clamp_frac: input.clamp_frac,
        wall_ms: start.elapsed().as_millis() as u64,
        tool,
        config_hash: String::new(),
        spectra: Vec::new(),
    };
    let name = format!("{}@{}", input.input.name(), codec.id());
    let recon = Dataset::new(name, per_item.into_iter().map(|(id, out, _, _)| (id, out)).collect())?;
    Ok((rec, recon))
}

/// One record per codec in `family`, sorted by exact bpp. Failing points
/// are reported separately and do not stop the sweep.
pub fn rd_sweep(family: &[&dyn Codec], input: &SweepInput<'_>) -> (Vec<EvalRecord>, Vec<PointFailure>) {
    let mut records = Vec::new();
    let mut failures = Vec::new();
    for codec in family {
        match evaluate_point(*codec, input) {
            Ok(r) => records.push(r),
            Err(e) => {
                log::warn!("{} at {} failed: {e}", codec.id(), codec.rate_param());
                failures.push(PointFailure {
                    codec: codec.id(),
                    rate_param: codec.rate_param(),
                    dataset: input.clean.name().to_string(),
                    error: e.to_string(),
                });
            }
        }
    }
    records.sort_by(|a, b| a.bpp_exact.total_cmp(&b.bpp_exact));
    (records, failures)
}
