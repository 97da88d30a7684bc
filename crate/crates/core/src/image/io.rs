use std::fs::{self, File};
use std::io::BufWriter;
use std::path::Path;

use image::codecs::pnm::{PnmEncoder, PnmSubtype, SampleEncoding};
use image::{DynamicImage, ExtendedColorType, ImageEncoder, ImageFormat, ImageReader};
use serde::{Deserialize, Serialize};

use super::{Image, Shape, ValueRange};
use crate::error::{Error, Result};

/// Sample depth used when exporting images.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BitDepth {
    #[default]
    Eight,
    Sixteen,
}

impl BitDepth {
    pub fn max_value(self) -> f64 {
        match self {
            BitDepth::Eight => 255.0,
            BitDepth::Sixteen => 65535.0,
        }
    }
}

/// Reads a PNG or binary PNM file into a unit-range image.
///
/// Gray(+alpha) becomes one channel, RGB(A) three; alpha is dropped.
pub fn read_image(path: impl AsRef<Path>) -> Result<Image> {
    let path = path.as_ref();
    let decoded = ImageReader::open(path)
        .map_err(|e| Error::io(path, e))?
        .with_guessed_format()
        .map_err(|e| Error::io(path, e))?
        .decode()?;
    let (w, h) = (decoded.width() as usize, decoded.height() as usize);
    let (channels, interleaved): (usize, Vec<f64>) = match &decoded {
        DynamicImage::ImageLuma8(_) | DynamicImage::ImageLumaA8(_) => (
            1,
            decoded.to_luma8().into_raw().iter().map(|&v| v as f64 / 255.0).collect(),
        ),
        DynamicImage::ImageLuma16(_) | DynamicImage::ImageLumaA16(_) => (
            1,
            decoded.to_luma16().into_raw().iter().map(|&v| v as f64 / 65535.0).collect(),
        ),
        DynamicImage::ImageRgb8(_) | DynamicImage::ImageRgba8(_) => (
            3,
            decoded.to_rgb8().into_raw().iter().map(|&v| v as f64 / 255.0).collect(),
        ),
        DynamicImage::ImageRgb16(_) | DynamicImage::ImageRgba16(_) => (
            3,
            decoded.to_rgb16().into_raw().iter().map(|&v| v as f64 / 65535.0).collect(),
        ),
        _ => (
            3,
            decoded
                .to_rgb32f()
                .into_raw()
                .iter()
                .map(|&v| (v as f64).clamp(0.0, 1.0))
                .collect(),
        ),
    };
    let planar = deinterleave(&interleaved, channels, h * w);
    Image::with_range(Shape::new(channels, h, w), planar, ValueRange::Unit)
}

/// Writes `image` as PNG, PPM or PGM (chosen by extension) with round-half-up
/// quantization to the requested depth.
pub fn write_image(image: &Image, path: impl AsRef<Path>, depth: BitDepth) -> Result<()> {
    let path = path.as_ref();
    if let Some(bad) = image.data().iter().find(|v| !(0.0..=1.0).contains(*v)) {
        return Err(Error::InvalidImage(format!(
            "cannot export sample {bad} outside [0, 1]"
        )));
    }
    let format = match path
        .extension()
        .and_then(|e| e.to_str())
        .map(|e| e.to_ascii_lowercase())
        .as_deref()
    {
        Some("png") => ImageFormat::Png,
        Some("ppm" | "pgm" | "pnm") => ImageFormat::Pnm,
        other => {
            return Err(Error::InvalidArgument(format!(
                "unsupported output extension {other:?}"
            )))
        }
    };
    let (w, h, k) = (image.width() as u32, image.height() as u32, image.channels());
    let interleaved = interleave(image);
    let max = depth.max_value();
    let quantize = |v: f64| (v * max + 0.5).floor();
    let result = match (depth, format) {
        (BitDepth::Eight, ImageFormat::Pnm) => {
            let bytes: Vec<u8> = interleaved.iter().map(|&v| quantize(v) as u8).collect();
            let (color, subtype) = if k == 1 {
                (ExtendedColorType::L8, PnmSubtype::Graymap(SampleEncoding::Binary))
            } else {
                (ExtendedColorType::Rgb8, PnmSubtype::Pixmap(SampleEncoding::Binary))
            };
            let file = File::create(path).map_err(|e| Error::io(path, e))?;
            PnmEncoder::new(BufWriter::new(file))
                .with_subtype(subtype)
                .write_image(&bytes, w, h, color)
        }
        (BitDepth::Eight, _) => {
            let bytes: Vec<u8> = interleaved.iter().map(|&v| quantize(v) as u8).collect();
            let color = if k == 1 { ExtendedColorType::L8 } else { ExtendedColorType::Rgb8 };
            image::save_buffer_with_format(path, &bytes, w, h, color, format)
        }
        (BitDepth::Sixteen, ImageFormat::Pnm) => {
            // Binary P5/P6 with maxval 65535 stores samples big-endian; the
            // image crate only emits PAM at this depth.
            let magic = if k == 1 { "P5" } else { "P6" };
            let mut bytes = format!("{magic}\n{w} {h}\n65535\n").into_bytes();
            bytes.extend(interleaved.iter().flat_map(|&v| (quantize(v) as u16).to_be_bytes()));
            return fs::write(path, bytes).map_err(|e| Error::io(path, e));
        }
        (BitDepth::Sixteen, _) => {
            let words: Vec<u16> = interleaved.iter().map(|&v| quantize(v) as u16).collect();
            // The image crate takes 16-bit buffers as native-endian bytes.
            let bytes: Vec<u8> = words.iter().flat_map(|v| v.to_ne_bytes()).collect();
            let color = if k == 1 { ExtendedColorType::L16 } else { ExtendedColorType::Rgb16 };
            image::save_buffer_with_format(path, &bytes, w, h, color, format)
        }
    };
    result.map_err(Error::from)
}

fn deinterleave(src: &[f64], channels: usize, pixels: usize) -> Vec<f64> {
    let mut out = vec![0.0; src.len()];
    for p in 0..pixels {
        for c in 0..channels {
            out[c * pixels + p] = src[p * channels + c];
        }
    }
    out
}

fn interleave(image: &Image) -> Vec<f64> {
    let k = image.channels();
    let pixels = image.shape().pixels();
    let mut out = vec![0.0; k * pixels];
    for (c, plane) in image.channels_iter().enumerate() {
        for (p, v) in plane.iter().enumerate() {
            out[p * k + c] = *v;
        }
    }
    out
}
