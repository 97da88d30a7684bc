mod codec_arg;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use codec_arg::CodecArg;
use scb_core::codecs::{container, prune_linear_ae, Codec, PruneSteps};
use scb_core::corruptions::{corrupt_dataset_counted, CorruptionSpec, SeverityTable};
use scb_core::harness::{
    build_family, evaluate_suite, rd_sweep, records_csv, SuiteConfig, SweepInput,
};
use scb_core::heatmap::{heatmap, DEFAULT_CAP, DEFAULT_EPS};
use scb_core::image::{load_dataset, read_image, BitDepth, Dataset, DeadLeaves, Shape};
use scb_core::spectral::{
    classify_band, export, mean_psd, radial_profile, triangle_audit, MetricSet, Spectrum, DEFAULT_BINS,
};
use scb_core::theory::{theory_report, PowerLawEnsemble, TheoryOptions};

#[derive(Parser, Debug)]
#[command(name = "spectral-codec-bench", version, about = "Spectral inspection of image codecs")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct Global {
    /// Suite configuration (TOML or JSON), or a run directory / manifest.json.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (0 = all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Write a corrupted copy of an image directory.
    Corrupt {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        corruption: String,
        #[arg(long)]
        severity: u8,
        #[arg(long, value_parser = parse_hw)]
        crop: Option<(usize, usize)>,
        /// Severity table overrides (TOML or JSON).
        #[arg(long)]
        table: Option<PathBuf>,
        #[arg(long, default_value_t = 8)]
        depth: u8,
    },
    /// Fit a linear autoencoder codec and save it as a model container.
    FitCodec {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long, value_parser = parse_hw)]
        crop: Option<(usize, usize)>,
        #[arg(long)]
        r: usize,
        #[arg(long, default_value_t = scb_core::codecs::DEFAULT_DELTA)]
        delta: f64,
    },
    /// Encode and decode every image, writing reconstructions and a summary.
    Roundtrip {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long, value_parser = parse_hw)]
        crop: Option<(usize, usize)>,
        #[command(flatten)]
        codec: CodecOpt,
    },
    /// Gradually magnitude-prune a saved linear codec.
    Prune {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        target: f64,
        #[arg(long, default_value_t = 0)]
        t0: u64,
        #[arg(long, default_value_t = 1)]
        dt: u64,
        #[arg(long, default_value_t = 10)]
        steps: u64,
        /// Refit the decoder on this image directory after every step.
        #[arg(long)]
        refit_on: Option<PathBuf>,
    },
    /// Mean PSD of an image or directory, with radial profile and band.
    Psd {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long, value_parser = parse_hw)]
        crop: Option<(usize, usize)>,
    },
    /// Distortion, generalization and robustness spectra plus the triangle audit.
    Metrics {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long, value_parser = parse_hw)]
        crop: Option<(usize, usize)>,
        #[command(flatten)]
        codec: CodecOpt,
        #[arg(long, default_value = "identity")]
        corruption: String,
        #[arg(long, default_value_t = 1)]
        severity: u8,
    },
    /// Fourier sensitivity heatmaps.
    Heatmap {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long, value_parser = parse_hw)]
        crop: Option<(usize, usize)>,
        #[command(flatten)]
        codec: CodecOpt,
        #[arg(long, default_value_t = DEFAULT_EPS)]
        eps: f64,
        #[arg(long, default_value_t = 1)]
        stride: usize,
        #[arg(long, value_enum, default_value_t = Variant::Both)]
        variant: Variant,
        #[arg(long, default_value_t = DEFAULT_CAP)]
        cap: f64,
    },
    /// Compare a linear codec on a power-law ensemble with its low-pass predictions.
    Theory {
        #[arg(long, value_parser = parse_shape, default_value = "1x32x32")]
        shape: Shape,
        #[arg(long, default_value_t = 2.0)]
        alpha: f64,
        #[arg(long, default_value_t = 2.0)]
        beta: f64,
        #[arg(long, default_value_t = 500)]
        n: usize,
        #[arg(long, value_delimiter = ',', required = true)]
        r: Vec<usize>,
        #[arg(long, default_value = "gaussian_noise")]
        corruption: String,
        #[arg(long, default_value_t = 3)]
        severity: u8,
    },
    /// Rate-distortion sweep of the configured codecs on clean or corrupted data.
    RdSweep {
        #[arg(long)]
        corruption: Option<String>,
        #[arg(long, default_value_t = 1)]
        severity: u8,
    },
    /// Run the configured evaluation suite; exits non-zero if any audit fails.
    Suite,
    /// Write a synthetic dead-leaves image set.
    DemoData {
        #[arg(long, default_value_t = 20)]
        n: usize,
        #[arg(long, default_value_t = 128)]
        size: usize,
        #[arg(long, default_value_t = 3)]
        channels: usize,
    },
}

#[derive(Args, Debug)]
struct CodecOpt {
    /// `identity`, `zeroing`, `block_dct:Q`, `linear_ae:R[:DELTA]` (fitted on
    /// the input) or `model:PATH`.
    #[arg(long, default_value = "identity")]
    codec: CodecArg,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Variant {
    A,
    B,
    Both,
}

fn parse_hw(s: &str) -> std::result::Result<(usize, usize), String> {
    let (h, w) = s.split_once(['x', 'X']).ok_or_else(|| format!("expected HxW, got `{s}`"))?;
    Ok((h.parse().map_err(|e| format!("{e}"))?, w.parse().map_err(|e| format!("{e}"))?))
}

fn parse_shape(s: &str) -> std::result::Result<Shape, String> {
    let parts: Vec<usize> = s
        .split(['x', 'X'])
        .map(|p| p.parse().map_err(|e| format!("`{s}`: {e}")))
        .collect::<std::result::Result<_, _>>()?;
    match parts[..] {
        [k, h, w] => Ok(Shape::new(k, h, w)),
        _ => Err(format!("expected KxHxW, got `{s}`")),
    }
}

fn out_dir(global: &Global) -> Result<&Path> {
    global.out.as_deref().context("--out is required for this command")
}

fn write_json(path: &Path, value: &serde_json::Value) -> Result<()> {
    fs::write(path, serde_json::to_string_pretty(value)? + "\n").with_context(|| path.display().to_string())
}

fn load_images(input: &Path, crop: Option<(usize, usize)>) -> Result<Dataset> {
    if input.is_file() {
        let mut img = read_image(input)?;
        if let Some((h, w)) = crop {
            img = img.center_crop(h, w)?;
        }
        let id = input.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "image".into());
        Ok(Dataset::new(id.clone(), vec![(id, img)])?)
    } else {
        Ok(load_dataset(input, crop)?)
    }
}

fn write_spectrum(dir: &Path, name: &str, s: &Spectrum) -> Result<()> {
    export::write_pfm(s, dir.join(format!("{name}.pfm")))?;
    export::write_csv(s, dir.join(format!("{name}.csv")))?;
    export::write_png(s, dir.join(format!("{name}.png")))?;
    Ok(())
}

fn load_config(global: &Global) -> Result<SuiteConfig> {
    let path = global.config.as_ref().context("--config is required for this command")?;
    let mut cfg = SuiteConfig::load(path)?;
    if let Some(s) = global.seed {
        cfg.seed = s;
    }
    if let Some(j) = global.jobs {
        cfg.jobs = j;
    }
    if let Some(o) = &global.out {
        cfg.out = Some(o.clone());
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run(cli: Cli) -> Result<ExitCode> {
    let g = &cli.global;
    let seed = g.seed.unwrap_or(0);
    match cli.command {
        Command::Corrupt {
            input,
            corruption,
            severity,
            crop,
            table,
            depth,
        } => {
            let out = out_dir(g)?;
            let table = match table {
                Some(p) => SeverityTable::from_path(p)?,
                None => SeverityTable::default(),
            };
            let depth = match depth {
                8 => BitDepth::Eight,
                16 => BitDepth::Sixteen,
                d => bail!("--depth must be 8 or 16, got {d}"),
            };
            let spec = CorruptionSpec::parse(&corruption, severity, seed)?;
            let ds = load_dataset(&input, crop)?;
            let (corrupted, _, clamp) = corrupt_dataset_counted(&ds, &spec, &table)?;
            let mut manifest = corrupted.write_dir(out, depth, Some(&spec.provenance()))?;
            manifest.crop = crop;
            manifest.write(out.join("manifest.json"))?;
            println!("{}", json!({"items": corrupted.len(), "corruption": spec.label(), "clamp_frac": clamp}));
        }
        Command::FitCodec { input, crop, r, delta } => {
            let out = g.out.as_deref().context("--out FILE is required")?;
            let ds = load_dataset(&input, crop)?;
            let codec = scb_core::codecs::fit_linear_ae(&ds, r)?.with_delta(delta)?;
            let sidecar = container::save(&codec, out, Some(&input.display().to_string()))?;
            println!("{}", serde_json::to_string_pretty(&sidecar)?);
        }
        Command::Roundtrip { input, crop, codec } => {
            let out = out_dir(g)?;
            let ds = load_images(&input, crop)?;
            let codec = codec.codec.build(&ds)?;
            let (recon_rec, recon) =
                scb_core::harness::evaluate_with_outputs(codec.as_ref(), &SweepInput::clean(&ds))?;
            recon.write_dir(out, BitDepth::Eight, None)?.write(out.join("manifest.json"))?;
            let summary = serde_json::to_value(&recon_rec)?;
            write_json(&out.join("summary.json"), &summary)?;
            println!("{}", serde_json::to_string_pretty(&summary)?);
        }
        Command::Prune {
            model,
            target,
            t0,
            dt,
            steps,
            refit_on,
        } => {
            let out = g.out.as_deref().context("--out FILE is required")?;
            let codec = container::load(&model)?;
            let refit = refit_on.map(|d| load_dataset(d, Some((codec.shape().height, codec.shape().width)))).transpose()?;
            let (pruned, audit) = prune_linear_ae(&codec, target, PruneSteps { t0, dt, n: steps }, refit.as_ref())?;
            container::save(&pruned, out, None)?;
            println!("{}", serde_json::to_string_pretty(&audit)?);
        }
        Command::Psd { input, crop } => {
            let out = out_dir(g)?;
            fs::create_dir_all(out)?;
            let ds = load_images(&input, crop)?;
            let s = mean_psd(ds.images())?;
            write_spectrum(out, "psd", &s)?;
            let profile = radial_profile(&s, DEFAULT_BINS)?;
            let band = classify_band(&profile);
            write_json(&out.join("profile.json"), &json!({"profile": profile, "band": band}))?;
            println!("{}", json!({"items": ds.len(), "band": band}));
        }
        Command::Metrics {
            input,
            crop,
            codec,
            corruption,
            severity,
        } => {
            let out = out_dir(g)?;
            fs::create_dir_all(out)?;
            let ds = load_images(&input, crop)?;
            let codec = codec.codec.build(&ds)?;
            let spec = CorruptionSpec::parse(&corruption, severity, seed)?;
            let (corrupted, _, _) = corrupt_dataset_counted(&ds, &spec, &SeverityTable::default())?;
            let m = MetricSet::compute(codec.as_ref(), &ds, &corrupted)?;
            for (name, s) in [("D", &m.d), ("G", &m.g), ("R", &m.r), ("corruption", &m.corruption)] {
                write_spectrum(out, name, s)?;
            }
            let audit = triangle_audit(&m.corruption, &m.g, &m.r)?;
            write_json(&out.join("audit.json"), &serde_json::to_value(&audit)?)?;
            println!("{}", serde_json::to_string(&audit)?);
            if !audit.passed() {
                return Ok(ExitCode::FAILURE);
            }
        }
        Command::Heatmap {
            input,
            crop,
            codec,
            eps,
            stride,
            variant,
            cap,
        } => {
            let out = out_dir(g)?;
            let ds = load_images(&input, crop)?;
            let codec = codec.codec.build(&ds)?;
            let (a, b) = heatmap(codec.as_ref(), &ds, eps, stride, cap, seed)?;
            if variant != Variant::B {
                a.write(out, "heatmap_a")?;
            }
            if variant != Variant::A {
                b.write(out, "heatmap_b")?;
            }
            println!("{}", json!({"cells": a.psnr.len(), "flagged": a.flagged().len()}));
        }
        Command::Theory {
            shape,
            alpha,
            beta,
            n,
            r,
            corruption,
            severity,
        } => {
            let out = out_dir(g)?;
            let ds = PowerLawEnsemble::new(shape, n, seed).with_exponents(alpha, beta).generate()?;
            let spec = CorruptionSpec::parse(&corruption, severity, seed)?;
            let options = TheoryOptions {
                alpha,
                beta,
                ..TheoryOptions::default()
            };
            for r in r {
                let report = theory_report(r, &ds, &[spec], &options)?;
                let dir = out.join(format!("r{r}"));
                report.write(&dir)?;
                let masks: Vec<_> = report.report.masks.iter().map(|m| json!({"mode": m.mode, "agreement": m.agreement})).collect();
                println!("{}", json!({"r": r, "dir": dir, "masks": masks}));
            }
        }
        Command::RdSweep { corruption, severity } => {
            let cfg = load_config(g)?;
            let out = out_dir(g)?;
            fs::create_dir_all(out)?;
            let spec = corruption.map(|c| CorruptionSpec::parse(&c, severity, cfg.seed)).transpose()?;
            let table = cfg.severity_table();
            let mut records = Vec::new();
            let mut failures = Vec::new();
            for i in 0..cfg.datasets.len() {
                let ds = cfg.load_dataset(i)?;
                let (input, clamp) = match &spec {
                    Some(s) => {
                        let (c, _, clamp) = corrupt_dataset_counted(&ds, s, &table)?;
                        (c, clamp)
                    }
                    None => (ds.clone(), 0.0),
                };
                let sweep = SweepInput {
                    clean: &ds,
                    input: &input,
                    corruption: spec.as_ref(),
                    clamp_frac: clamp,
                };
                for c in &cfg.codecs {
                    let (family, fails) = build_family(c, &cfg.codec, &ds);
                    failures.extend(fails);
                    let refs: Vec<&dyn Codec> = family.iter().map(|c| c.as_ref()).collect();
                    let (recs, fails) = rd_sweep(&refs, &sweep);
                    records.extend(recs);
                    failures.extend(fails);
                }
            }
            fs::write(out.join("records.csv"), records_csv(&records, cfg.timing_in_records))?;
            write_json(&out.join("failures.json"), &serde_json::to_value(&failures)?)?;
            println!("{}", json!({"records": records.len(), "failures": failures.len()}));
        }
        Command::Suite => {
            let cfg = load_config(g)?;
            if cfg.out.is_none() {
                bail!("--out is required for suite");
            }
            let outcome = evaluate_suite(&cfg)?;
            let r = &outcome.report;
            println!(
                "{}",
                json!({
                    "dir": outcome.dir,
                    "records": r.records,
                    "audits": r.audits.len(),
                    "failed_audits": r.audits.iter().filter(|a| !a.report.passed()).count(),
                    "identity_checks": r.identities.len(),
                    "failures": r.failures.len(),
                    "passed": r.passed,
                })
            );
            return Ok(ExitCode::from(outcome.exit_code() as u8));
        }
        Command::DemoData { n, size, channels } => {
            let out = out_dir(g)?;
            let cfg = DeadLeaves {
                channels,
                ..DeadLeaves::new(n, size, size, seed)
            };
            let ds = cfg.generate()?;
            ds.write_dir(out, BitDepth::Eight, None)?.write(out.join("manifest.json"))?;
            println!("{}", json!({"items": ds.len(), "dir": out}));
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    if let Some(j) = cli.global.jobs {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(j).build_global() {
            eprintln!("warning: {e}");
        }
    }
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
