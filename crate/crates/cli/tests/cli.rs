use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn bench(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_spectral-codec-bench")).args(args).output().expect("spawn")
}

fn ok(args: &[&str]) -> Output {
    let out = bench(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    out
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

#[test]
fn demo_data_corrupt_and_spectra() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    ok(&["demo-data", "--n", "4", "--size", "24", "--seed", "3", "--out", p(&data)]);
    assert!(data.join("manifest.json").exists());

    let noisy = dir.path().join("noisy");
    let args = ["corrupt", "--in", p(&data), "--corruption", "gaussian_noise", "--severity", "4", "--seed", "1"];
    ok(&[&args[..], &["--out", p(&noisy)]].concat());
    let again = dir.path().join("again");
    ok(&[&args[..], &["--out", p(&again)]].concat());
    for entry in fs::read_dir(&noisy).unwrap() {
        let name = entry.unwrap().file_name();
        // The manifest records its own output directory.
        if name == "manifest.json" {
            continue;
        }
        assert_eq!(fs::read(noisy.join(&name)).unwrap(), fs::read(again.join(&name)).unwrap(), "{name:?}");
    }

    let psd = dir.path().join("psd");
    ok(&["psd", "--in", p(&data), "--out", p(&psd)]);
    let profile: serde_json::Value = serde_json::from_slice(&fs::read(psd.join("profile.json")).unwrap()).unwrap();
    assert!(profile.is_object());

    let metrics = dir.path().join("metrics");
    ok(&[
        "metrics", "--in", p(&data), "--codec", "block_dct:40", "--corruption", "fog", "--severity", "2", "--out", p(&metrics),
    ]);
    let audit: serde_json::Value = serde_json::from_slice(&fs::read(metrics.join("audit.json")).unwrap()).unwrap();
    assert_eq!(audit["count"], 0);
}

#[test]
fn fit_roundtrip_and_prune() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    ok(&["demo-data", "--n", "6", "--size", "16", "--channels", "1", "--out", p(&data)]);
    let model = dir.path().join("m.scbm");
    ok(&["fit-codec", "--in", p(&data), "--r", "4", "--out", p(&model)]);
    let pruned = dir.path().join("p.scbm");
    ok(&["prune", "--model", p(&model), "--target", "0.5", "--out", p(&pruned)]);
    let rt = dir.path().join("rt");
    let spec = format!("model:{}", p(&pruned));
    ok(&["roundtrip", "--in", p(&data), "--codec", &spec, "--out", p(&rt)]);
    let summary: serde_json::Value = serde_json::from_slice(&fs::read(rt.join("summary.json")).unwrap()).unwrap();
    assert!(summary.is_object());
}

#[test]
fn suite_and_bad_input_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("suite.toml");
    fs::write(
        &cfg,
        r#"
        [[datasets]]
        dead_leaves = { n = 3, height = 16, width = 16 }
        [[codecs]]
        kind = "block_dct"
        q = [20, 80]
        [[corruptions]]
        name = "shot_noise"
        severities = [2]
        "#,
    )
    .unwrap();
    let run = dir.path().join("run");
    let out = ok(&["--config", p(&cfg), "--out", p(&run), "suite"]);
    let summary: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!(summary.is_object());
    assert!(run.join("records.csv").exists());

    let bad = bench(&["corrupt", "--in", p(dir.path()), "--corruption", "frost", "--severity", "2", "--out", p(&dir.path().join("x"))]);
    assert!(!bad.status.success());
    let bad_cfg = dir.path().join("bad.toml");
    fs::write(&bad_cfg, "[[codecs]]\nkind = \"wavelet\"\n").unwrap();
    let out = bench(&["--config", p(&bad_cfg), "suite"]);
    assert_eq!(out.status.code(), Some(2));
}
