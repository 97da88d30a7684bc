use std::fs;
use std::path::Path;

use scb_core::codecs::{reconstruct_dataset, BlockDctCodec, Codec, IdentityCodec};
use scb_core::corruptions::{corrupt_dataset, CorruptionSpec};
use scb_core::harness::{evaluate_point, evaluate_suite, rd_sweep, SuiteConfig, SweepInput, RECORD_COLUMNS};
use scb_core::image::{DeadLeaves, Manifest};
use scb_core::spectral::export::read_pfm;
use scb_core::spectral::SpectrumTag;

fn small_config(out: &Path) -> SuiteConfig {
    let text = format!(
        r#"
        seed = 5
        out = "{}"
        [[datasets]]
        dead_leaves = {{ n = 4, height = 24, width = 24, seed = 2 }}
        [[codecs]]
        kind = "linear_ae"
        r = [2, 3]
        [[codecs]]
        kind = "block_dct"
        q = [10, 60]
        [[codecs]]
        kind = "identity"
        [[corruptions]]
        name = "identity"
        severities = [1]
        [[corruptions]]
        name = "shot_noise"
        severities = [2]
        [[constraints]]
        kind = "fixed_psnr"
        target = 26.0
        tolerance = 0.1
        [heatmap]
        stride = 6
        "#,
        out.display()
    );
    SuiteConfig::from_toml(&text).unwrap()
}

#[test]
fn psnr_matches_direct_computation() {
    let ds = DeadLeaves::new(5, 16, 16, 1).generate().unwrap();
    let codec = BlockDctCodec::new(30).unwrap();
    let rec = evaluate_point(&codec, &SweepInput::clean(&ds)).unwrap();
    let recon = reconstruct_dataset(&codec, &ds).unwrap();
    // Mean over items of the per-image PSNR.
    let per_image: Vec<f64> = ds
        .images()
        .zip(recon.images())
        .map(|(x, y)| {
            let se: f64 = x.data().iter().zip(y.data()).map(|(a, b)| (a - b) * (a - b)).sum();
            -10.0 * (se / x.data().len() as f64).log10()
        })
        .collect();
    let expected = per_image.iter().sum::<f64>() / per_image.len() as f64;
    assert!((rec.psnr_vs_clean - expected).abs() < 1e-9, "{} vs {expected}", rec.psnr_vs_clean);
    assert_eq!(rec.psnr_vs_input, rec.psnr_vs_clean);
    assert!(rec.bpp_exact >= rec.bpp_entropy);
}

#[test]
fn corrupted_sweep_separates_input_and_clean() {
    let ds = DeadLeaves::new(4, 16, 16, 3).generate().unwrap();
    let spec = CorruptionSpec::parse("gaussian_noise", 4, 0).unwrap();
    let (noisy, _) = corrupt_dataset(&ds, &spec).unwrap();
    let codecs: Vec<Box<dyn Codec>> = vec![Box::new(IdentityCodec), Box::new(BlockDctCodec::new(50).unwrap())];
    let refs: Vec<&dyn Codec> = codecs.iter().map(|c| c.as_ref()).collect();
    let input = SweepInput { clean: &ds, input: &noisy, corruption: Some(&spec), clamp_frac: 0.0 };
    let (recs, failures) = rd_sweep(&refs, &input);
    assert!(failures.is_empty());
    assert!(recs.windows(2).all(|w| w[0].bpp_exact <= w[1].bpp_exact));
    let id = recs.iter().find(|r| r.codec == "identity").unwrap();
    assert_eq!(id.psnr_vs_input, 100.0);
    assert!(id.psnr_vs_clean < 40.0);
}

#[test]
fn minimal_suite_has_zero_spectra() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    let text = format!(
        r#"
        out = "{}"
        [[datasets]]
        dead_leaves = {{ n = 2, height = 16, width = 16 }}
        [[codecs]]
        kind = "identity"
        [[corruptions]]
        name = "identity"
        severities = [1]
        "#,
        out.display()
    );
    let outcome = evaluate_suite(&SuiteConfig::from_toml(&text).unwrap()).unwrap();
    assert_eq!(outcome.exit_code(), 0);
    assert!(outcome.report.audits.iter().all(|a| a.report.passed()));
    assert!(outcome.report.identities.iter().all(|c| c.passed));
    let mut spectra = 0;
    for entry in walk(&out.join("spectra")) {
        if entry.extension().is_some_and(|e| e == "pfm") {
            let s = read_pfm(&entry, SpectrumTag::RawPsd).unwrap();
            assert_eq!(s.max(), 0.0, "{}", entry.display());
            spectra += 1;
        }
    }
    assert!(spectra >= 4);
    let csv = fs::read_to_string(out.join("records.csv")).unwrap();
    assert_eq!(csv.lines().next().unwrap(), RECORD_COLUMNS.join(","));
}

fn walk(dir: &Path) -> Vec<std::path::PathBuf> {
    let mut out = Vec::new();
    for e in fs::read_dir(dir).unwrap() {
        let p = e.unwrap().path();
        if p.is_dir() {
            out.extend(walk(&p));
        } else {
            out.push(p);
        }
    }
    out.sort();
    out
}

#[test]
fn validation_names_fields_before_running() {
    let dir = tempfile::tempdir().unwrap();
    let text = format!(
        r#"
        out = "{}"
        [[datasets]]
        dead_leaves = {{ n = 2, height = 16, width = 16 }}
        [[codecs]]
        kind = "identity"
        [[corruptions]]
        name = "sepia"
        "#,
        dir.path().join("run").display()
    );
    let err = SuiteConfig::from_toml(&text).unwrap_err().to_string();
    assert!(err.contains("corruptions[0].name"), "{err}");
    assert!(!dir.path().join("run").exists());
}

#[test]
fn runs_are_deterministic_and_self_describing() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    let first = evaluate_suite(&small_config(&a)).unwrap();
    let mut cfg = small_config(&b);
    cfg.jobs = 3;
    evaluate_suite(&cfg).unwrap();
    for f in ["records.csv", "manifest.json", "report.json"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f}");
    }
    assert_eq!(first.exit_code(), 0, "{:?}", first.report.failures);
    assert!(!first.report.bins.is_empty());
    assert!(!first.report.heatmaps.is_empty());

    // Re-running from the emitted manifest reproduces the run in place.
    let mut again = SuiteConfig::load(a.join("manifest.json")).unwrap();
    again.out = Some(a.clone());
    let before = fs::read(a.join("records.csv")).unwrap();
    evaluate_suite(&again).unwrap();
    assert_eq!(fs::read(a.join("records.csv")).unwrap(), before);
    let manifest: serde_json::Value = serde_json::from_slice(&fs::read(a.join("manifest.json")).unwrap()).unwrap();
    assert!(manifest["tool"].as_str().unwrap().starts_with("scb-core "));

    let records = fs::read_to_string(a.join("records.csv")).unwrap();
    for line in records.lines().skip(1) {
        let cells: Vec<&str> = line.split(',').collect();
        assert_eq!(cells.len(), RECORD_COLUMNS.len());
        if cells[3] == "clean" {
            assert_eq!(cells[8], cells[9], "clean psnr_vs_input != psnr_vs_clean: {line}");
        }
    }
}

#[test]
fn refuses_to_replace_foreign_directories() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("busy");
    fs::create_dir(&out).unwrap();
    fs::write(out.join("keep.txt"), "x").unwrap();
    assert!(evaluate_suite(&small_config(&out)).is_err());
    assert!(out.join("keep.txt").exists());
}

#[test]
fn corrupted_manifests_are_recorded() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    evaluate_suite(&small_config(&out)).unwrap();
    let v: serde_json::Value = serde_json::from_slice(&fs::read(out.join("manifest.json")).unwrap()).unwrap();
    let text = serde_json::to_string(&v).unwrap();
    assert!(text.contains("shot_noise"));
    let datasets = v["datasets"].as_array().unwrap();
    let m: Manifest = serde_json::from_value(datasets[0].clone()).unwrap();
    assert_eq!(m.items.len(), 4);
}
