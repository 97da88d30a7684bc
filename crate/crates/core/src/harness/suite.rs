//! End-to-end evaluation: corrupt, sweep, measure spectra, audit, bin and
//! write a self-describing run directory.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::config::{corruption_specs, CodecConfig, CodecTemplates, SuiteConfig};
use super::operating::{match_operating_points, OperatingPointBin};
use super::record::{evaluate_with_outputs, records_csv, EvalRecord, PointFailure, SweepInput};
use crate::codecs::{
    fit_linear_ae, prune_linear_ae, BlockDctCodec, Codec, CodecKind, ExternalCodec, IdentityCodec, PruneSteps,
    RateParam, ZeroingCodec,
};
use crate::corruptions::{corrupt_dataset_counted, CorruptionSpec, FingerprintRow};
use crate::error::{Error, Result};
use crate::heatmap::heatmap;
use crate::image::{Dataset, Manifest};
use crate::spectral::{
    classify_band_with, export, pair_psd, radial_profile, triangle_audit, AuditReport, Spectrum, SpectrumTag,
    DEFAULT_BINS,
};
use crate::theory::{theory_report, PowerLawEnsemble, TheoryOptions, TheoryReport};

/// Identity checks between spectra hold to this relative tolerance.
const IDENTITY_TOL: f64 = 1e-12;

pub fn tool_id() -> String {
    format!("scb-core {}", env!("CARGO_PKG_VERSION"))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditEntry {
    pub dataset: String,
    pub codec: String,
    pub rate_param: RateParam,
    pub corruption: String,
    #[serde(flatten)]
    pub report: AuditReport,
}

/// An exact relation between spectra implied by an identity codec or an
/// identity corruption.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IdentityCheck {
    pub dataset: String,
    pub codec: String,
    pub rate_param: RateParam,
    pub corruption: String,
    pub relation: String,
    pub max_rel_diff: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BandTable {
    pub dataset: String,
    pub rows: Vec<FingerprintRow>,
}

/// A bin together with how its clean-chosen members fare on corrupted data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinReport {
    pub dataset: String,
    #[serde(flatten)]
    pub bin: OperatingPointBin,
    pub corrupted: Vec<DriftRow>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DriftRow {
    pub codec: String,
    pub rate_param: RateParam,
    pub corruption: String,
    pub bpp_exact: f64,
    /// `bpp(cX) - bpp(X)` at the same rate parameter.
    pub bpp_drift: f64,
    pub psnr_vs_input: f64,
    pub psnr_vs_clean: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeatmapSummary {
    pub dataset: String,
    pub codec: String,
    pub rate_param: RateParam,
    pub files: Vec<String>,
    pub max_asymmetry_db: f64,
    pub flagged_cells: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TheorySummary {
    pub dir: String,
    pub report: TheoryReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteReport {
    pub tool: String,
    pub config_hash: String,
    pub passed: bool,
    pub records: usize,
    pub bands: Vec<BandTable>,
    pub audits: Vec<AuditEntry>,
    pub identities: Vec<IdentityCheck>,
    pub bins: Vec<BinReport>,
    pub failures: Vec<PointFailure>,
    pub heatmaps: Vec<HeatmapSummary>,
    pub theory: Vec<TheorySummary>,
}

#[derive(Debug, Clone)]
pub struct SuiteOutcome {
    pub dir: PathBuf,
    pub records: Vec<EvalRecord>,
    pub report: SuiteReport,
}

impl SuiteOutcome {
    pub fn passed(&self) -> bool {
        self.report.passed
    }

    pub fn exit_code(&self) -> i32 {
        if self.passed() {
            0
        } else {
            1
        }
    }
}

/// Instantiates every member of a codec family, fitting linear codecs on
/// `train`. Members that cannot be built are returned as failures.
pub fn build_family(
    cfg: &CodecConfig,
    templates: &CodecTemplates,
    train: &Dataset,
) -> (Vec<Box<dyn Codec>>, Vec<PointFailure>) {
    let mut codecs: Vec<Box<dyn Codec>> = Vec::new();
    let mut failures = Vec::new();
    let family = cfg.family_id(templates);
    let mut fail = |rate_param: RateParam, e: Error| {
        log::warn!("{family} at {rate_param}: {e}");
        failures.push(PointFailure {
            codec: family.clone(),
            rate_param,
            dataset: train.name().to_string(),
            error: e.to_string(),
        });
    };
    match cfg {
        CodecConfig::Identity => codecs.push(Box::new(IdentityCodec)),
        CodecConfig::Zeroing => codecs.push(Box::new(ZeroingCodec)),
        CodecConfig::LinearAe {
            r,
            delta,
            sparsity,
            refit,
        } => {
            for &r in r {
                let fitted = fit_linear_ae(train, r).and_then(|c| match sparsity {
                    Some(s) if *s > 0.0 => {
                        Ok(prune_linear_ae(&c, *s, PruneSteps::default(), refit.then_some(train))?.0)
                    }
                    _ => Ok(c),
                });
                for &d in delta {
                    match fitted.as_ref().map_err(|e| Error::Codec(e.to_string())).and_then(|c| c.clone().with_delta(d)) {
                        Ok(c) => codecs.push(Box::new(c)),
                        Err(e) => fail(RateParam::LinearAe { r, delta: d }, e),
                    }
                }
            }
        }
        CodecConfig::BlockDct { q, block } => {
            for &q in q {
                match BlockDctCodec::with_block(*block, q) {
                    Ok(c) => codecs.push(Box::new(c)),
                    Err(e) => fail(RateParam::Quality { q }, e),
                }
            }
        }
        CodecConfig::External { template, q } => {
            for &q in q {
                let built = templates
                    .external
                    .get(template)
                    .ok_or_else(|| Error::Config(format!("no template `{template}`")))
                    .and_then(|t| ExternalCodec::new(t.clone(), q));
                match built {
                    Ok(c) => codecs.push(Box::new(c)),
                    Err(e) => fail(RateParam::External { q }, e),
                }
            }
        }
    }
    (codecs, failures)
}

fn slug(s: &str) -> String {
    s.chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '.' || c == '-' { c } else { '_' })
        .collect()
}

fn corruption_label(spec: Option<&CorruptionSpec>) -> String {
    spec.map_or_else(|| "clean".to_string(), |c| c.label())
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    // Through `Value` so that object keys come out sorted.
    let text = serde_json::to_string_pretty(&serde_json::to_value(value)?)? + "\n";
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

struct LoadedDataset {
    data: Dataset,
    manifest: Manifest,
}

fn load(cfg: &SuiteConfig, index: usize) -> Result<LoadedDataset> {
    let data = cfg.load_dataset(index)?;
    let d = &cfg.datasets[index];
    let manifest = match &d.path {
        Some(path) => data.manifest_from_source(path, d.crop)?,
        None => data.manifest(None),
    };
    Ok(LoadedDataset { data, manifest })
}

/// Everything the run directory will hold, built in memory first.
struct RunContents {
    files: Vec<(PathBuf, Vec<u8>)>,
    spectra: Vec<(PathBuf, Spectrum)>,
    heatmaps: Vec<(PathBuf, String, crate::heatmap::HeatmapResult)>,
    theory: Vec<(PathBuf, crate::theory::TheoryOutput)>,
}

/// Runs the configured suite and writes the run directory atomically. When
/// the target already holds an earlier run it is replaced.
pub fn evaluate_suite(config: &SuiteConfig) -> Result<SuiteOutcome> {
    config.validate()?;
    let out = config.out.clone().unwrap_or_else(|| PathBuf::from("scb-run"));
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.jobs)
        .build()
        .map_err(|e| Error::InvalidArgument(format!("thread pool: {e}")))?;
    let (records, report, contents) = pool.install(|| run(config))?;

    let parent = match out.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    };
    fs::create_dir_all(&parent).map_err(|e| Error::io(&parent, e))?;
    let tmp = tempfile::Builder::new()
        .prefix(".scb-run-")
        .tempdir_in(&parent)
        .map_err(|e| Error::io(&parent, e))?;
    let root = tmp.path();
    for (rel, bytes) in &contents.files {
        let path = root.join(rel);
        if let Some(dir) = path.parent() {
            fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        }
        fs::write(&path, bytes).map_err(|e| Error::io(&path, e))?;
    }
    for (rel, s) in &contents.spectra {
        let path = root.join(rel);
        if let Some(dir) = path.parent() {
            fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        }
        export::write_pfm(s, &path)?;
    }
    for (rel, stem, h) in &contents.heatmaps {
        h.write(root.join(rel), stem)?;
    }
    for (rel, t) in &contents.theory {
        t.write(root.join(rel))?;
    }
    write_json(&root.join("report.json"), &report)?;

    if out.exists() {
        if !out.join("manifest.json").is_file() {
            return Err(Error::InvalidArgument(format!(
                "{} exists and is not a previous run directory",
                out.display()
            )));
        }
        fs::remove_dir_all(&out).map_err(|e| Error::io(&out, e))?;
    }
    let kept = tmp.keep();
    fs::rename(&kept, &out).map_err(|e| Error::io(&out, e))?;
    Ok(SuiteOutcome {
        dir: out,
        records,
        report,
    })
}

fn run(cfg: &SuiteConfig) -> Result<(Vec<EvalRecord>, SuiteReport, RunContents)> {
    let config_hash = cfg.hash()?;
    let table = cfg.severity_table();
    let specs = cfg.corruption_specs()?;
    let mut contents = RunContents {
        files: Vec::new(),
        spectra: Vec::new(),
        heatmaps: Vec::new(),
        theory: Vec::new(),
    };
    let mut records = Vec::new();
    let mut timings = String::from("codec,rate_param,dataset,corruption,wall_ms\n");
    let mut audits = Vec::new();
    let mut identities = Vec::new();
    let mut failures = Vec::new();
    let mut bands = Vec::new();
    let mut bins = Vec::new();
    let mut heatmaps = Vec::new();
    let mut manifests = Vec::new();
    let mut corrupted_manifests = Vec::new();

    for index in 0..cfg.datasets.len() {
        let LoadedDataset { data: clean, manifest } = load(cfg, index)?;
        let ds_slug = slug(clean.name());
        log::info!("dataset `{}`: {} items", clean.name(), clean.len());
        manifests.push(manifest);

        let mut variants: Vec<(Option<CorruptionSpec>, Dataset, f64)> = vec![(None, clean.clone(), 0.0)];
        for spec in &specs {
            let (data, m, clamp) = corrupt_dataset_counted(&clean, spec, &table)?;
            corrupted_manifests.push(m);
            variants.push((Some(*spec), data, clamp));
        }

        let mut corruption_spectra: BTreeMap<usize, Spectrum> = BTreeMap::new();
        let mut rows = Vec::new();
        for (v, (spec, data, _)) in variants.iter().enumerate().skip(1) {
            let s = pair_psd(data, &clean, SpectrumTag::Corruption)?;
            let label = corruption_label(spec.as_ref());
            if cfg.spectra {
                contents.spectra.push((PathBuf::from(format!("spectra/{ds_slug}/corruption/{label}.pfm")), s.clone()));
            }
            if let Some(spec) = spec.filter(|s| !s.is_identity()) {
                let verdict = classify_band_with(&radial_profile(&s, DEFAULT_BINS)?, &cfg.bands);
                rows.push(FingerprintRow {
                    name: spec.name,
                    severity: spec.severity.get(),
                    band: verdict.band,
                    low_fraction: verdict.low_fraction,
                    high_fraction: verdict.high_fraction,
                });
            }
            corruption_spectra.insert(v, s);
        }
        bands.push(BandTable {
            dataset: clean.name().to_string(),
            rows,
        });

        let families: Vec<(Vec<Box<dyn Codec>>, Vec<PointFailure>)> =
            cfg.codecs.iter().map(|c| build_family(c, &cfg.codec, &clean)).collect();
        for (_, f) in &families {
            failures.extend(f.iter().cloned());
        }

        // Distortion spectra of every codec instance, for the identity checks.
        let mut distortion: BTreeMap<(usize, usize), Spectrum> = BTreeMap::new();
        let mut ds_records = Vec::new();
        for (v, (spec, data, clamp)) in variants.iter().enumerate() {
            let label = corruption_label(spec.as_ref());
            let input = SweepInput {
                clean: &clean,
                input: data,
                corruption: spec.as_ref(),
                clamp_frac: *clamp,
            };
            for (f, (codecs, _)) in families.iter().enumerate() {
                let mut family_records = Vec::new();
                for (m, codec) in codecs.iter().enumerate() {
                    let (mut rec, recon) = match evaluate_with_outputs(codec.as_ref(), &input) {
                        Ok(x) => x,
                        Err(e) => {
                            log::warn!("{} at {} on {label}: {e}", codec.id(), codec.rate_param());
                            failures.push(PointFailure {
                                codec: codec.id(),
                                rate_param: codec.rate_param(),
                                dataset: data.name().to_string(),
                                error: e.to_string(),
                            });
                            continue;
                        }
                    };
                    rec.config_hash = config_hash.clone();
                    timings.push_str(&format!(
                        "{},{},{},{},{}\n",
                        rec.codec, rec.rate_param, rec.dataset, label, rec.wall_ms
                    ));
                    if !cfg.timing_in_records {
                        rec.wall_ms = 0;
                    }
                    let stem = format!("spectra/{ds_slug}/{}/{}", slug(&rec.codec), slug(&rec.rate_param.to_string()));
                    let mut emit = |name: String, s: &Spectrum, rec: &mut EvalRecord| {
                        if cfg.spectra {
                            let rel = format!("{stem}/{name}.pfm");
                            rec.spectra.push(rel.clone());
                            contents.spectra.push((PathBuf::from(rel), s.clone()));
                        }
                    };
                    let context = |relation: &str, max_rel_diff: f64| IdentityCheck {
                        dataset: clean.name().to_string(),
                        codec: codec.id(),
                        rate_param: codec.rate_param(),
                        corruption: label.clone(),
                        relation: relation.to_string(),
                        max_rel_diff,
                        passed: max_rel_diff <= IDENTITY_TOL,
                    };
                    match spec {
                        None => {
                            let d = pair_psd(&clean, &recon, SpectrumTag::Distortion)?;
                            emit("D".into(), &d, &mut rec);
                            if codec.kind() == CodecKind::Identity {
                                let zero = Spectrum::zeros(d.height(), d.width(), SpectrumTag::Distortion);
                                identities.push(context("D = 0", d.max_rel_diff(&zero)));
                            }
                            distortion.insert((f, m), d);
                        }
                        Some(_) => {
                            let g = pair_psd(data, &recon, SpectrumTag::Generalization)?;
                            let r = pair_psd(&clean, &recon, SpectrumTag::Robustness)?;
                            emit(format!("G_{label}"), &g, &mut rec);
                            emit(format!("R_{label}"), &r, &mut rec);
                            let corr = &corruption_spectra[&v];
                            audits.push(AuditEntry {
                                dataset: clean.name().to_string(),
                                codec: codec.id(),
                                rate_param: codec.rate_param(),
                                corruption: label.clone(),
                                report: triangle_audit(corr, &g, &r)?,
                            });
                            if codec.kind() == CodecKind::Identity {
                                let zero = Spectrum::zeros(g.height(), g.width(), SpectrumTag::Generalization);
                                identities.push(context("G = 0", g.max_rel_diff(&zero)));
                                identities.push(context("R = corruption", r.max_rel_diff(corr)));
                            }
                            if spec.is_some_and(|s| s.is_identity()) {
                                if let Some(d) = distortion.get(&(f, m)) {
                                    identities.push(context("G = D", g.max_rel_diff(d)));
                                    identities.push(context("R = D", r.max_rel_diff(d)));
                                }
                            }
                        }
                    }
                    family_records.push(rec);
                }
                family_records.sort_by(|a, b| a.bpp_exact.total_cmp(&b.bpp_exact));
                ds_records.extend(family_records);
            }
        }

        for c in &cfg.constraints {
            if ds_records.is_empty() {
                break;
            }
            let bin = match_operating_points(&ds_records, c.constraint(), c.tolerance)?;
            let corrupted = bin
                .members
                .iter()
                .flat_map(|m| {
                    ds_records
                        .iter()
                        .filter(move |r| !r.corruption.is_none() && r.codec == m.codec && r.rate_param == m.rate_param)
                        .map(move |r| DriftRow {
                            codec: r.codec.clone(),
                            rate_param: r.rate_param.clone(),
                            corruption: corruption_label(r.corruption.as_ref()),
                            bpp_exact: r.bpp_exact,
                            bpp_drift: r.bpp_exact - m.bpp_exact,
                            psnr_vs_input: r.psnr_vs_input,
                            psnr_vs_clean: r.psnr_vs_clean,
                        })
                })
                .collect();
            bins.push(BinReport {
                dataset: clean.name().to_string(),
                bin,
                corrupted,
            });
        }

        if let Some(h) = cfg.heatmap.filter(|h| h.enabled) {
            let first_bin = bins.iter().find(|b| b.dataset == clean.name() && !b.bin.members.is_empty());
            let chosen: Vec<&dyn Codec> = match first_bin {
                Some(b) => b
                    .bin
                    .members
                    .iter()
                    .filter_map(|m| {
                        families
                            .iter()
                            .flat_map(|(cs, _)| cs.iter())
                            .find(|c| c.id() == m.codec && c.rate_param() == m.rate_param)
                            .map(|c| c.as_ref())
                    })
                    .collect(),
                None => families.iter().filter_map(|(cs, _)| cs.first().map(|c| c.as_ref())).collect(),
            };
            for codec in chosen {
                let rel = PathBuf::from(format!("heatmaps/{ds_slug}"));
                let stem = format!("{}_{}", slug(&codec.id()), slug(&codec.rate_param().to_string()));
                match heatmap(codec, &clean, h.eps, h.stride, h.cap, cfg.seed) {
                    Ok((a, b)) => {
                        let shape = clean.common_shape()?;
                        let asym = a
                            .max_asymmetry(shape.height, shape.width)
                            .max(b.max_asymmetry(shape.height, shape.width));
                        let flagged = a.flagged().len();
                        heatmaps.push(HeatmapSummary {
                            dataset: clean.name().to_string(),
                            codec: codec.id(),
                            rate_param: codec.rate_param(),
                            files: ["a", "b"]
                                .iter()
                                .flat_map(|v| {
                                    let base = format!("{}/{stem}_{v}", rel.display());
                                    [format!("{base}.csv"), format!("{base}.png")]
                                })
                                .collect(),
                            max_asymmetry_db: asym,
                            flagged_cells: flagged,
                        });
                        contents.heatmaps.push((rel.clone(), format!("{stem}_a"), a));
                        contents.heatmaps.push((rel, format!("{stem}_b"), b));
                    }
                    Err(e) => failures.push(PointFailure {
                        codec: codec.id(),
                        rate_param: codec.rate_param(),
                        dataset: clean.name().to_string(),
                        error: format!("heatmap: {e}"),
                    }),
                }
            }
        }
        records.extend(ds_records);
    }

    let mut theory = Vec::new();
    if let Some(t) = cfg.theory.as_ref().filter(|t| t.enabled) {
        let (k, h, w) = t.shape;
        let ensemble = PowerLawEnsemble::new(crate::image::Shape::new(k, h, w), t.n, cfg.seed).with_exponents(t.alpha, t.beta);
        let data = ensemble.generate()?;
        let specs = corruption_specs(&t.corruptions, cfg.seed)?;
        let options = TheoryOptions {
            alpha: t.alpha,
            beta: t.beta,
            delta: t.delta,
        };
        for &r in &t.r {
            let out = theory_report(r, &data, &specs, &options)?;
            let dir = format!("theory/r{r}");
            theory.push(TheorySummary {
                dir: dir.clone(),
                report: out.report.clone(),
            });
            contents.theory.push((PathBuf::from(dir), out));
        }
    }

    let passed = audits.iter().all(|a| a.report.passed()) && identities.iter().all(|c| c.passed);
    contents.files.push(("records.csv".into(), records_csv(&records, cfg.timing_in_records).into_bytes()));
    contents.files.push(("timings.csv".into(), timings.into_bytes()));
    let manifest: Value = json!({
        "config": serde_json::to_value(cfg)?,
        "datasets": manifests,
        "corrupted": corrupted_manifests,
        "tool": tool_id(),
    });
    let text = serde_json::to_string_pretty(&manifest)? + "\n";
    contents.files.push(("manifest.json".into(), text.into_bytes()));

    let report = SuiteReport {
        tool: tool_id(),
        config_hash,
        passed,
        records: records.len(),
        bands,
        audits,
        identities,
        bins,
        failures,
        heatmaps,
        theory,
    };
    Ok((records, report, contents))
}
