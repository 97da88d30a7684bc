//! Round trips through command-line encoders and decoders.

use std::io::ErrorKind;
use std::path::Path;
use std::process::Command;

use serde::{Deserialize, Serialize};

use super::{BlobHeader, Codec, CodecKind, CompressedBlob, RateParam};
use crate::error::{Error, Result};
use crate::image::{read_image, write_image, BitDepth, Image, ValueRange};

/// Encoder/decoder command lines with `{in}`, `{out}` and `{q}`
/// placeholders. Commands are split with POSIX shell quoting rules and run
/// without a shell.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExternalTemplate {
    #[serde(default)]
    pub name: String,
    pub encode: String,
    pub decode: String,
    /// Extension of the encoded file.
    #[serde(default = "default_encoded_ext")]
    pub encoded_ext: String,
    /// Format handed to the encoder: `ppm` (PGM for one channel) or `png`.
    #[serde(default = "default_input_ext")]
    pub input_ext: String,
    /// Extension the decoder is asked to write.
    #[serde(default = "default_input_ext")]
    pub output_ext: String,
    /// Optional command whose first output line identifies the tool version.
    #[serde(default)]
    pub version: Option<String>,
}

fn default_encoded_ext() -> String {
    "bin".into()
}

fn default_input_ext() -> String {
    "ppm".into()
}

impl ExternalTemplate {
    pub fn validate(&self) -> Result<()> {
        for (field, cmd) in [("encode", &self.encode), ("decode", &self.decode)] {
            let argv = split(cmd, field)?;
            if argv.is_empty() {
                return Err(Error::Config(format!("external `{}`: empty {field} command", self.name)));
            }
            for placeholder in ["{in}", "{out}"] {
                if !argv.iter().any(|a| a.contains(placeholder)) {
                    return Err(Error::Config(format!(
                        "external `{}`: {field} template lacks {placeholder}",
                        self.name
                    )));
                }
            }
        }
        for ext in [&self.input_ext, &self.output_ext] {
            if !["ppm", "pgm", "pnm", "png"].contains(&ext.as_str()) {
                return Err(Error::Config(format!("external `{}`: unsupported image extension `{ext}`", self.name)));
            }
        }
        Ok(())
    }
}

fn split(cmd: &str, field: &str) -> Result<Vec<String>> {
    shlex::split(cmd).ok_or_else(|| Error::Config(format!("{field} template has unbalanced quotes: {cmd}")))
}

/// An external tool at one quality setting.
#[derive(Debug, Clone)]
pub struct ExternalCodec {
    template: ExternalTemplate,
    quality: u32,
    tool: String,
}

impl ExternalCodec {
    pub fn new(template: ExternalTemplate, quality: u32) -> Result<Self> {
        template.validate()?;
        let program = split(&template.encode, "encode")?[0].clone();
        let tool = match &template.version {
            Some(cmd) => {
                let argv = split(cmd, "version")?;
                let out = run(&argv, &program)?;
                let line = out.lines().next().unwrap_or("").trim().to_string();
                format!("{program} {line}")
            }
            None => program,
        };
        Ok(ExternalCodec {
            template,
            quality,
            tool,
        })
    }

    pub fn tool(&self) -> &str {
        &self.tool
    }

    fn command(&self, template: &str, field: &str, input: &Path, output: &Path) -> Result<Vec<String>> {
        Ok(split(template, field)?
            .into_iter()
            .map(|a| {
                a.replace("{in}", &input.to_string_lossy())
                    .replace("{out}", &output.to_string_lossy())
                    .replace("{q}", &self.quality.to_string())
            })
            .collect())
    }
}

/// Runs `argv`, returning stdout; spawn failures are configuration errors and
/// non-zero exits carry stderr.
fn run(argv: &[String], tool: &str) -> Result<String> {
    let output = Command::new(&argv[0]).args(&argv[1..]).output().map_err(|e| match e.kind() {
        ErrorKind::NotFound => Error::Config(format!("external codec binary `{}` not found", argv[0])),
        _ => Error::Config(format!("cannot run `{}`: {e}", argv[0])),
    })?;
    if !output.status.success() {
        return Err(Error::Adapter {
            tool: tool.to_string(),
            stderr: String::from_utf8_lossy(&output.stderr).trim().to_string(),
        });
    }
    Ok(String::from_utf8_lossy(&output.stdout).into_owned())
}

impl Codec for ExternalCodec {
    fn kind(&self) -> CodecKind {
        CodecKind::External
    }

    fn id(&self) -> String {
        if self.template.name.is_empty() {
            "external".into()
        } else {
            format!("external_{}", self.template.name)
        }
    }

    fn rate_param(&self) -> RateParam {
        RateParam::External { q: self.quality }
    }

    fn roundtrip(&self, image: &Image) -> Result<(Image, CompressedBlob)> {
        let dir = tempfile::Builder::new()
            .prefix("scb-ext-")
            .tempdir()
            .map_err(|e| Error::io(std::env::temp_dir(), e))?;
        let in_ext = match (self.template.input_ext.as_str(), image.channels()) {
            ("ppm" | "pgm" | "pnm", 1) => "pgm",
            ("ppm" | "pgm" | "pnm", _) => "ppm",
            (other, _) => other,
        };
        let input = dir.path().join(format!("in.{in_ext}"));
        let encoded = dir.path().join(format!("enc.{}", self.template.encoded_ext));
        let decoded = dir.path().join(format!("dec.{}", self.template.output_ext));
        write_image(image, &input, BitDepth::Eight)?;
        run(&self.command(&self.template.encode, "encode", &input, &encoded)?, &self.tool)?;
        let size = std::fs::metadata(&encoded)
            .map_err(|e| Error::Adapter {
                tool: self.tool.clone(),
                stderr: format!("encoder produced no output file: {e}"),
            })?
            .len();
        run(&self.command(&self.template.decode, "decode", &encoded, &decoded)?, &self.tool)?;
        let mut out = read_image(&decoded)?;
        if out.channels() != image.channels() && out.channels() == 3 && image.channels() == 1 {
            let gray: Vec<f64> = out.channel(0).to_vec();
            out = Image::with_range(image.shape(), gray, ValueRange::Unit)?;
        }
        if out.shape() != image.shape() {
            return Err(Error::Adapter {
                tool: self.tool.clone(),
                stderr: format!("decoded shape {} differs from input {}", out.shape(), image.shape()),
            });
        }
        let bits = 8 * size;
        let blob = CompressedBlob {
            header: BlobHeader {
                kind: CodecKind::External,
                shape: image.shape(),
                rate_param: self.rate_param(),
                tool: Some(self.tool.clone()),
            },
            streams: Vec::new(),
            exact_bits: bits,
            entropy_bits: bits as f64,
        };
        Ok((out, blob))
    }
}
