//! Compression models under test and their bit accounting.

mod block_dct;
pub mod container;
pub mod entropy;
mod external;
mod gmp;
mod linear_ae;

use std::fmt;

use serde::{Deserialize, Serialize};

pub use block_dct::{dct_matrix, BlockDctCodec, JPEG_LUMA};
pub use external::{ExternalCodec, ExternalTemplate};
pub use gmp::{gmp_schedule, prune_linear_ae, PruneStep, PruneSteps};
pub use linear_ae::{fit_linear_ae, LinearAECodec, DEFAULT_DELTA};

use crate::error::{Error, Result};
use crate::image::{Dataset, Image, Shape};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CodecKind {
    Identity,
    Zeroing,
    LinearAe,
    BlockDct,
    External,
}

impl fmt::Display for CodecKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CodecKind::Identity => "identity",
            CodecKind::Zeroing => "zeroing",
            CodecKind::LinearAe => "linear_ae",
            CodecKind::BlockDct => "block_dct",
            CodecKind::External => "external",
        })
    }
}

/// The knob traded along a rate-distortion curve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum RateParam {
    None,
    LinearAe { r: usize, delta: f64 },
    Quality { q: u8 },
    External { q: u32 },
}

impl fmt::Display for RateParam {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RateParam::None => f.write_str("-"),
            RateParam::LinearAe { r, delta } => write!(f, "r={r};delta={delta:e}"),
            RateParam::Quality { q } => write!(f, "q={q}"),
            RateParam::External { q } => write!(f, "q={q}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlobHeader {
    pub kind: CodecKind,
    pub shape: Shape,
    pub rate_param: RateParam,
    /// Identity and version of an external tool, when one was used.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tool: Option<String>,
}

/// Encoded representation of one image.
#[derive(Debug, Clone, PartialEq)]
pub struct CompressedBlob {
    pub header: BlobHeader,
    pub streams: Vec<entropy::EncodedStream>,
    /// Coded size: stream headers plus range-coded payloads, or the encoded
    /// file size for external tools.
    pub exact_bits: u64,
    /// Shannon estimate of the payload symbols (headers excluded).
    pub entropy_bits: f64,
}

impl CompressedBlob {
    pub(crate) fn from_streams(header: BlobHeader, streams: Vec<entropy::EncodedStream>, entropy_bits: f64) -> Self {
        let exact_bits = streams.iter().map(|s| s.bits()).sum();
        CompressedBlob {
            header,
            streams,
            exact_bits,
            entropy_bits,
        }
    }

    pub fn bpp(&self) -> f64 {
        self.exact_bits as f64 / self.header.shape.pixels() as f64
    }

    pub fn bpp_entropy(&self) -> f64 {
        self.entropy_bits / self.header.shape.pixels() as f64
    }
}

/// `(exact, entropy)` bits per pixel of `blob` for `image`.
pub fn bpp(blob: &CompressedBlob, image: &Image) -> (f64, f64) {
    let px = image.shape().pixels() as f64;
    (blob.exact_bits as f64 / px, blob.entropy_bits / px)
}

/// A compression model `C`.
pub trait Codec: Send + Sync {
    fn kind(&self) -> CodecKind;

    /// Stable identifier used in records and reports.
    fn id(&self) -> String;

    fn rate_param(&self) -> RateParam;

    /// Encodes and decodes `image`, returning the reconstruction and the blob.
    fn roundtrip(&self, image: &Image) -> Result<(Image, CompressedBlob)>;

    fn reconstruct(&self, image: &Image) -> Result<Image> {
        Ok(self.roundtrip(image)?.0)
    }
}

/// Reconstructs every item; a changed shape is an error naming the item.
pub fn reconstruct_dataset(codec: &dyn Codec, dataset: &Dataset) -> Result<Dataset> {
    let name = format!("{}@{}", dataset.name(), codec.id());
    dataset.map_images(name, |_, id, img| {
        let out = codec.reconstruct(img)?;
        if out.shape() != img.shape() {
            return Err(Error::ShapeMismatch {
                id: id.to_string(),
                expected: img.shape().to_string(),
                actual: out.shape().to_string(),
            });
        }
        Ok(out)
    })
}

/// `C(X) = X`, charged 8 bits per sample.
#[derive(Debug, Clone, Copy, Default)]
pub struct IdentityCodec;

impl Codec for IdentityCodec {
    fn kind(&self) -> CodecKind {
        CodecKind::Identity
    }

    fn id(&self) -> String {
        "identity".into()
    }

    fn rate_param(&self) -> RateParam {
        RateParam::None
    }

    fn roundtrip(&self, image: &Image) -> Result<(Image, CompressedBlob)> {
        let raw = 8 * image.shape().len() as u64;
        let blob = CompressedBlob {
            header: BlobHeader {
                kind: CodecKind::Identity,
                shape: image.shape(),
                rate_param: RateParam::None,
                tool: None,
            },
            streams: Vec::new(),
            exact_bits: entropy::STREAM_HEADER_BITS + raw,
            entropy_bits: raw as f64,
        };
        Ok((image.clone(), blob))
    }
}

/// `C(X) = 0`; header only.
#[derive(Debug, Clone, Copy, Default)]
pub struct ZeroingCodec;

impl Codec for ZeroingCodec {
    fn kind(&self) -> CodecKind {
        CodecKind::Zeroing
    }

    fn id(&self) -> String {
        "zeroing".into()
    }

    fn rate_param(&self) -> RateParam {
        RateParam::None
    }

    fn roundtrip(&self, image: &Image) -> Result<(Image, CompressedBlob)> {
        let out = Image::with_range(image.shape(), vec![0.0; image.shape().len()], image.range())?;
        let blob = CompressedBlob {
            header: BlobHeader {
                kind: CodecKind::Zeroing,
                shape: image.shape(),
                rate_param: RateParam::None,
                tool: None,
            },
            streams: Vec::new(),
            exact_bits: entropy::STREAM_HEADER_BITS,
            entropy_bits: 0.0,
        };
        Ok((out, blob))
    }
}
