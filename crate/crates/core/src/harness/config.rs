//! Suite configuration: TOML or JSON files, environment overrides, and
//! exhaustive validation.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::operating::{Constraint, DEFAULT_TOLERANCE};
use crate::codecs::ExternalTemplate;
use crate::corruptions::{CorruptionKind, CorruptionSpec, SeverityTable};
use crate::error::{Error, Result};
use crate::heatmap::{DEFAULT_CAP, DEFAULT_EPS};
use crate::image::{load_dataset, Dataset, DeadLeaves};
use crate::spectral::BandThresholds;
use crate::theory::THEORY_DELTA;

/// Environment variables `SCB_A__B__0` override the key path `a.b[0]`.
pub const ENV_PREFIX: &str = "SCB_";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SuiteConfig {
    #[serde(default)]
    pub seed: u64,
    /// Worker threads; 0 uses every core. Results do not depend on it, so
    /// it is not part of the recorded configuration.
    #[serde(default, skip_serializing)]
    pub jobs: usize,
    /// Run directory; not part of the recorded configuration.
    #[serde(default, skip_serializing)]
    pub out: Option<PathBuf>,
    /// Write measured wall times into `records.csv` (breaks byte-identity).
    #[serde(default)]
    pub timing_in_records: bool,
    /// Write per-record spectra under `spectra/`.
    #[serde(default = "yes")]
    pub spectra: bool,
    pub datasets: Vec<DatasetConfig>,
    pub codecs: Vec<CodecConfig>,
    #[serde(default)]
    pub corruptions: Vec<CorruptionConfig>,
    #[serde(default)]
    pub constraints: Vec<ConstraintConfig>,
    #[serde(default)]
    pub bands: BandThresholds,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub severity_table: Option<SeverityTable>,
    /// Named external tool templates, referenced by `external` codecs.
    #[serde(default, skip_serializing_if = "CodecTemplates::is_empty")]
    pub codec: CodecTemplates,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub heatmap: Option<HeatmapConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theory: Option<TheoryConfig>,
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CodecTemplates {
    #[serde(default)]
    pub external: BTreeMap<String, ExternalTemplate>,
}

impl CodecTemplates {
    fn is_empty(&self) -> bool {
        self.external.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub path: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub crop: Option<(usize, usize)>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dead_leaves: Option<DeadLeaves>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum CodecConfig {
    Identity,
    Zeroing,
    LinearAe {
        r: Vec<usize>,
        #[serde(default = "default_deltas")]
        delta: Vec<f64>,
        /// Prune to this fraction of zero weights after fitting.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        sparsity: Option<f64>,
        #[serde(default)]
        refit: bool,
    },
    BlockDct {
        q: Vec<u8>,
        #[serde(default = "default_block")]
        block: usize,
    },
    External {
        template: String,
        q: Vec<u32>,
    },
}

fn default_deltas() -> Vec<f64> {
    vec![crate::codecs::DEFAULT_DELTA]
}

fn default_block() -> usize {
    8
}

impl CodecConfig {
    /// The codec id shared by every member of the family.
    pub fn family_id(&self, templates: &CodecTemplates) -> String {
        match self {
            CodecConfig::Identity => "identity".into(),
            CodecConfig::Zeroing => "zeroing".into(),
            CodecConfig::LinearAe { sparsity: Some(s), .. } if *s > 0.0 => format!("linear_ae_sp{s:.2}"),
            CodecConfig::LinearAe { .. } => "linear_ae".into(),
            CodecConfig::BlockDct { .. } => "block_dct".into(),
            CodecConfig::External { template, .. } => match templates.external.get(template) {
                Some(t) if !t.name.is_empty() => format!("external_{}", t.name),
                _ => format!("external_{template}"),
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CorruptionConfig {
    pub name: String,
    #[serde(default = "all_severities")]
    pub severities: Vec<u8>,
}

fn all_severities() -> Vec<u8> {
    vec![1, 2, 3, 4, 5]
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConstraintKind {
    FixedBpp,
    FixedPsnr,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConstraintConfig {
    pub kind: ConstraintKind,
    pub target: f64,
    #[serde(default = "default_tolerance")]
    pub tolerance: f64,
}

impl ConstraintConfig {
    pub fn constraint(&self) -> Constraint {
        match self.kind {
            ConstraintKind::FixedBpp => Constraint::FixedBpp(self.target),
            ConstraintKind::FixedPsnr => Constraint::FixedPsnr(self.target),
        }
    }
}

fn default_tolerance() -> f64 {
    DEFAULT_TOLERANCE
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HeatmapConfig {
    #[serde(default = "yes")]
    pub enabled: bool,
    #[serde(default = "default_eps")]
    pub eps: f64,
    #[serde(default = "default_stride")]
    pub stride: usize,
    #[serde(default = "default_cap")]
    pub cap: f64,
}

fn default_eps() -> f64 {
    DEFAULT_EPS
}

fn default_stride() -> usize {
    4
}

fn default_cap() -> f64 {
    DEFAULT_CAP
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TheoryConfig {
    #[serde(default = "yes")]
    pub enabled: bool,
    /// `(K, H, W)` of the power-law ensemble.
    #[serde(default = "default_theory_shape")]
    pub shape: (usize, usize, usize),
    #[serde(default = "default_theory_n")]
    pub n: usize,
    #[serde(default = "default_theory_r")]
    pub r: Vec<usize>,
    #[serde(default = "default_exponent")]
    pub alpha: f64,
    #[serde(default = "default_exponent")]
    pub beta: f64,
    #[serde(default = "default_theory_delta")]
    pub delta: f64,
    #[serde(default = "default_theory_corruptions")]
    pub corruptions: Vec<CorruptionConfig>,
}

fn default_theory_shape() -> (usize, usize, usize) {
    (1, 32, 32)
}

fn default_theory_n() -> usize {
    500
}

fn default_theory_r() -> Vec<usize> {
    vec![16]
}

fn default_exponent() -> f64 {
    2.0
}

fn default_theory_delta() -> f64 {
    THEORY_DELTA
}

fn default_theory_corruptions() -> Vec<CorruptionConfig> {
    vec![CorruptionConfig {
        name: "gaussian_noise".into(),
        severities: vec![3],
    }]
}

pub(crate) fn corruption_specs(list: &[CorruptionConfig], seed: u64) -> Result<Vec<CorruptionSpec>> {
    let mut out = Vec::new();
    for c in list {
        for &s in &c.severities {
            out.push(CorruptionSpec::parse(&c.name, s, seed)?);
        }
    }
    Ok(out)
}

impl SuiteConfig {
    /// Reads a TOML or JSON file, a run directory's `manifest.json`, or a run
    /// directory itself, then applies `SCB_*` environment overrides. Relative
    /// dataset paths resolve against the file's directory.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::load_with_env(path, std::env::vars())
    }

    pub fn load_with_env<I>(path: impl AsRef<Path>, env: I) -> Result<Self>
    where
        I: IntoIterator<Item = (String, String)>,
    {
        let mut path = path.as_ref().to_path_buf();
        if path.is_dir() {
            path = path.join("manifest.json");
        }
        let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        let is_json = path.extension().is_some_and(|e| e == "json") || text.trim_start().starts_with('{');
        let mut value = parse_document(&text, is_json)?;
        // A run manifest carries the resolved configuration under `config`.
        if let Some(cfg) = value.get("config").filter(|_| value.get("tool").is_some()) {
            value = cfg.clone();
        }
        apply_env(&mut value, env)?;
        let mut cfg = Self::from_value(value)?;
        let base = path.parent().unwrap_or(Path::new("."));
        cfg.resolve_paths(base);
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg = Self::from_value(parse_document(text, false)?)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg = Self::from_value(parse_document(text, true)?)?;
        cfg.validate()?;
        Ok(cfg)
    }

    fn from_value(value: Value) -> Result<Self> {
        serde_json::from_value(value).map_err(|e| Error::Config(e.to_string()))
    }

    fn resolve_paths(&mut self, base: &Path) {
        for d in &mut self.datasets {
            if let Some(p) = &d.path {
                if p.is_relative() {
                    let joined = base.join(p);
                    d.path = Some(joined.canonicalize().unwrap_or(joined));
                }
            }
        }
    }

    /// Every problem at once, each prefixed with its key path.
    pub fn validate(&self) -> Result<()> {
        let mut errs: Vec<String> = Vec::new();
        let mut err = |field: String, msg: String| errs.push(format!("{field}: {msg}"));

        if self.datasets.is_empty() {
            err("datasets".into(), "at least one dataset is required".into());
        }
        let mut names = BTreeSet::new();
        for (k, d) in self.datasets.iter().enumerate() {
            let f = format!("datasets[{k}]");
            match (&d.path, &d.dead_leaves) {
                (Some(_), Some(_)) => err(f.clone(), "give either `path` or `dead_leaves`, not both".into()),
                (None, None) => err(f.clone(), "one of `path` or `dead_leaves` is required".into()),
                (None, Some(dl)) => {
                    if let Err(e) = dl.validate() {
                        err(format!("{f}.dead_leaves"), e.to_string());
                    }
                    if d.crop.is_some() {
                        err(format!("{f}.crop"), "crop applies only to directory datasets".into());
                    }
                }
                (Some(p), None) => {
                    if !p.is_dir() {
                        err(format!("{f}.path"), format!("`{}` is not a directory", p.display()));
                    }
                }
            }
            if let Some((h, w)) = d.crop {
                if h < 2 || w < 2 {
                    err(format!("{f}.crop"), "crop must be at least 2x2".into());
                }
            }
            if !names.insert(self.dataset_name(k)) {
                err(format!("{f}.name"), format!("duplicate dataset name `{}`", self.dataset_name(k)));
            }
        }

        if self.codecs.is_empty() {
            err("codecs".into(), "at least one codec is required".into());
        }
        let mut families = BTreeSet::new();
        for (k, c) in self.codecs.iter().enumerate() {
            let f = format!("codecs[{k}]");
            match c {
                CodecConfig::Identity | CodecConfig::Zeroing => {}
                CodecConfig::LinearAe { r, delta, sparsity, .. } => {
                    if r.is_empty() {
                        err(format!("{f}.r"), "no latent sizes given".into());
                    }
                    if delta.is_empty() {
                        err(format!("{f}.delta"), "no quantization steps given".into());
                    }
                    if delta.iter().any(|d| !(*d > 0.0 && d.is_finite())) {
                        err(format!("{f}.delta"), "steps must be positive and finite".into());
                    }
                    if let Some(s) = sparsity {
                        if !(0.0..1.0).contains(s) {
                            err(format!("{f}.sparsity"), format!("{s} is outside [0, 1)"));
                        }
                    }
                }
                CodecConfig::BlockDct { q, block } => {
                    if q.is_empty() {
                        err(format!("{f}.q"), "no quality settings given".into());
                    }
                    if q.iter().any(|q| !(1..=100).contains(q)) {
                        err(format!("{f}.q"), "quality must lie in 1..=100".into());
                    }
                    if *block < 2 {
                        err(format!("{f}.block"), "block size must be at least 2".into());
                    }
                }
                CodecConfig::External { template, q } => {
                    match self.codec.external.get(template) {
                        None => err(format!("{f}.template"), format!("no template `codec.external.{template}`")),
                        Some(t) => {
                            if let Err(e) = t.validate() {
                                err(format!("codec.external.{template}"), e.to_string());
                            }
                        }
                    }
                    if q.is_empty() {
                        err(format!("{f}.q"), "no quality settings given".into());
                    }
                }
            }
            let id = c.family_id(&self.codec);
            if !families.insert(id.clone()) {
                err(f, format!("duplicate codec family `{id}`"));
            }
        }

        let check_corruptions = |prefix: &str, list: &[CorruptionConfig], err: &mut dyn FnMut(String, String)| {
            for (k, c) in list.iter().enumerate() {
                let f = format!("{prefix}[{k}]");
                if c.name.parse::<CorruptionKind>().is_err() {
                    err(format!("{f}.name"), format!("unknown corruption `{}`", c.name));
                }
                if c.severities.is_empty() {
                    err(format!("{f}.severities"), "no severities given".into());
                }
                if let Some(s) = c.severities.iter().find(|s| !(1..=5).contains(*s)) {
                    err(format!("{f}.severities"), format!("severity {s} out of range 1..=5"));
                }
            }
        };
        check_corruptions("corruptions", &self.corruptions, &mut err);

        for (k, c) in self.constraints.iter().enumerate() {
            let f = format!("constraints[{k}]");
            if !(c.target > 0.0) {
                err(format!("{f}.target"), "target must be positive".into());
            }
            if !(c.tolerance >= 0.0) {
                err(format!("{f}.tolerance"), "tolerance must be non-negative".into());
            }
        }

        if let Some(h) = &self.heatmap {
            if !(h.eps >= 0.0) {
                err("heatmap.eps".into(), "must be non-negative".into());
            }
            if h.stride == 0 {
                err("heatmap.stride".into(), "must be at least 1".into());
            }
            if !(h.cap > 0.0) {
                err("heatmap.cap".into(), "must be positive".into());
            }
        }

        if let Some(t) = &self.theory {
            let (k, h, w) = t.shape;
            if ![1, 3].contains(&k) || h < 2 || w < 2 {
                err("theory.shape".into(), format!("invalid shape {k}x{h}x{w}"));
            }
            if t.n < 2 {
                err("theory.n".into(), "at least two samples are needed".into());
            }
            if let Some(r) = t.r.iter().find(|&&r| r > k * h * w) {
                err("theory.r".into(), format!("{r} exceeds K*H*W = {}", k * h * w));
            }
            if !(t.delta > 0.0) {
                err("theory.delta".into(), "must be positive".into());
            }
            check_corruptions("theory.corruptions", &t.corruptions, &mut err);
        }

        if let Some(table) = &self.severity_table {
            if let Err(e) = table.validate() {
                errs.push(format!("severity_table: {e}"));
            }
        }

        if errs.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(errs.join("; ")))
        }
    }

    /// Configured name, else the directory name, else `dead_leaves_{seed}`.
    pub fn dataset_name(&self, index: usize) -> String {
        let d = &self.datasets[index];
        if let Some(n) = &d.name {
            return n.clone();
        }
        match (&d.path, &d.dead_leaves) {
            (Some(p), _) => p.file_name().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| format!("dataset{index}")),
            (None, Some(dl)) => format!("dead_leaves_{}", dl.seed),
            _ => format!("dataset{index}"),
        }
    }

    /// Loads or synthesizes dataset `index`, named by [`Self::dataset_name`].
    pub fn load_dataset(&self, index: usize) -> Result<Dataset> {
        let d = self
            .datasets
            .get(index)
            .ok_or_else(|| Error::Config(format!("datasets[{index}]: out of range")))?;
        let data = match (&d.path, &d.dead_leaves) {
            (Some(path), _) => load_dataset(path, d.crop)?,
            (None, Some(dl)) => dl.generate()?,
            (None, None) => return Err(Error::Config(format!("datasets[{index}]: no source"))),
        };
        Ok(data.renamed(self.dataset_name(index)))
    }

    pub fn corruption_specs(&self) -> Result<Vec<CorruptionSpec>> {
        corruption_specs(&self.corruptions, self.seed)
    }

    pub fn severity_table(&self) -> SeverityTable {
        self.severity_table.clone().unwrap_or_default()
    }

    /// Canonical JSON (sorted keys, no `out`).
    pub fn canonical_json(&self) -> Result<String> {
        Ok(serde_json::to_string(&serde_json::to_value(self)?)?)
    }

    pub fn hash(&self) -> Result<String> {
        Ok(crate::image::sha256_hex(self.canonical_json()?.as_bytes()))
    }
}

fn parse_document(text: &str, json: bool) -> Result<Value> {
    if json {
        serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))
    } else {
        let t: toml::Value = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        serde_json::to_value(t).map_err(|e| Error::Config(e.to_string()))
    }
}

/// Applies every `SCB_*` variable; segments are separated by `__`, numeric
/// segments index arrays, and values parse as JSON or fall back to strings.
pub(crate) fn apply_env<I>(root: &mut Value, env: I) -> Result<()>
where
    I: IntoIterator<Item = (String, String)>,
{
    let mut vars: Vec<(String, String)> = env.into_iter().filter(|(k, _)| k.starts_with(ENV_PREFIX)).collect();
    vars.sort();
    for (key, raw) in vars {
        let path: Vec<String> = key[ENV_PREFIX.len()..].split("__").map(str::to_lowercase).collect();
        if path.iter().any(String::is_empty) {
            return Err(Error::Config(format!("{key}: empty key segment")));
        }
        let value = serde_json::from_str(&raw).unwrap_or(Value::String(raw.clone()));
        let mut node = &mut *root;
        for seg in &path {
            if node.is_null() {
                *node = Value::Object(Default::default());
            }
            node = match node {
                Value::Array(items) => {
                    let idx: usize = seg
                        .parse()
                        .map_err(|_| Error::Config(format!("{key}: `{seg}` indexes an array but is not a number")))?;
                    let len = items.len();
                    items
                        .get_mut(idx)
                        .ok_or_else(|| Error::Config(format!("{key}: index {idx} out of range (length {len})")))?
                }
                Value::Object(map) => map.entry(seg.clone()).or_insert(Value::Null),
                _ => return Err(Error::Config(format!("{key}: `{seg}` descends into a scalar"))),
            };
        }
        *node = value;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
        seed = 3
        [[datasets]]
        dead_leaves = { n = 2, height = 16, width = 16 }
        [[codecs]]
        kind = "identity"
        [[corruptions]]
        name = "identity"
        severities = [1]
    "#;

    #[test]
    fn minimal_parses() {
        let cfg = SuiteConfig::from_toml(MINIMAL).unwrap();
        assert_eq!(cfg.seed, 3);
        assert_eq!(cfg.codecs, vec![CodecConfig::Identity]);
        assert!(cfg.spectra);
        assert_eq!(cfg.dataset_name(0), "dead_leaves_0");
    }

    #[test]
    fn validation_is_exhaustive() {
        let text = r#"
            [[datasets]]
            dead_leaves = { n = 2, height = 16, width = 16 }
            [[codecs]]
            kind = "block_dct"
            q = [0, 50]
            [[corruptions]]
            name = "gaussian_noise"
            [[corruptions]]
            name = "frost"
            severities = [6]
        "#;
        let msg = SuiteConfig::from_toml(text).unwrap_err().to_string();
        assert!(msg.contains("codecs[0].q: quality must lie in 1..=100"), "{msg}");
        assert!(msg.contains("corruptions[1].name: unknown corruption `frost`"), "{msg}");
        assert!(msg.contains("corruptions[1].severities: severity 6"), "{msg}");
        assert!(!msg.contains("corruptions[0]"), "{msg}");
    }

    #[test]
    fn unknown_keys_rejected() {
        let text = format!("{MINIMAL}\nbogus = 1\n");
        assert!(SuiteConfig::from_toml(&text).is_err());
    }

    #[test]
    fn env_overrides() {
        let mut v = parse_document(MINIMAL, false).unwrap();
        let env = [
            ("SCB_SEED".to_string(), "11".to_string()),
            ("SCB_CORRUPTIONS__0__NAME".to_string(), "brightness".to_string()),
            ("SCB_CORRUPTIONS__0__SEVERITIES".to_string(), "[2, 5]".to_string()),
            ("SCB_HEATMAP__STRIDE".to_string(), "8".to_string()),
            ("OTHER".to_string(), "x".to_string()),
        ];
        apply_env(&mut v, env).unwrap();
        let cfg = SuiteConfig::from_value(v).unwrap();
        assert_eq!(cfg.seed, 11);
        assert_eq!(cfg.corruptions[0].name, "brightness");
        assert_eq!(cfg.corruptions[0].severities, vec![2, 5]);
        assert_eq!(cfg.heatmap.unwrap().stride, 8);

        let mut v = parse_document(MINIMAL, false).unwrap();
        assert!(apply_env(&mut v, [("SCB_CODECS__4__KIND".into(), "zeroing".into())]).is_err());
    }

    #[test]
    fn constraints_and_templates() {
        let text = format!(
            "{MINIMAL}\n[[constraints]]\nkind = \"fixed_bpp\"\ntarget = 1.0\n\
             [codec.external.copy]\nencode = \"cp {{in}} {{out}}\"\ndecode = \"cp {{in}} {{out}}\"\n"
        );
        let cfg = SuiteConfig::from_toml(&text).unwrap();
        assert_eq!(cfg.constraints[0].constraint(), Constraint::FixedBpp(1.0));
        assert_eq!(cfg.constraints[0].tolerance, DEFAULT_TOLERANCE);
        assert!(cfg.codec.external.contains_key("copy"));
        let back = SuiteConfig::from_json(&cfg.canonical_json().unwrap()).unwrap();
        assert_eq!(back, cfg);
    }
}
