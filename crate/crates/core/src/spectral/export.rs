//! Spectrum serializations: PFM, `i,j,value` CSV and a log-scaled PNG preview.

use std::fmt::Write as _;
use std::fs;
use std::io::{BufRead, BufReader, Read};
use std::path::Path;

use byteorder::{ByteOrder, LittleEndian};

use super::fft::centered_to_offset;
use super::{Spectrum, SpectrumTag};
use crate::error::{Error, Result};

/// Grayscale PFM, little-endian (scale `-1.0`), rows stored bottom to top.
pub fn write_pfm(spectrum: &Spectrum, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let (h, w) = (spectrum.height(), spectrum.width());
    let mut out = format!("Pf\n{w} {h}\n-1.0\n").into_bytes();
    let mut buf = [0u8; 4];
    for row in (0..h).rev() {
        for col in 0..w {
            LittleEndian::write_f32(&mut buf, spectrum.at(row, col) as f32);
            out.extend_from_slice(&buf);
        }
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

/// Reads a grayscale PFM written by [`write_pfm`] (either endianness).
pub fn read_pfm(path: impl AsRef<Path>, tag: SpectrumTag) -> Result<Spectrum> {
    let path = path.as_ref();
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = BufReader::new(file);
    let mut header = Vec::new();
    while header.len() < 3 {
        let mut line = String::new();
        if reader.read_line(&mut line).map_err(|e| Error::io(path, e))? == 0 {
            return Err(Error::Container("truncated PFM header".into()));
        }
        header.extend(line.split_whitespace().map(str::to_owned));
    }
    if header[0] != "Pf" {
        return Err(Error::Container(format!("not a grayscale PFM: {}", header[0])));
    }
    let parse = |s: &str| s.parse::<usize>().map_err(|_| Error::Container(format!("bad PFM size `{s}`")));
    let (w, h) = (parse(&header[1])?, parse(&header[2])?);
    let mut scale_line = String::new();
    if header.len() > 3 {
        scale_line = header[3].clone();
    } else {
        reader.read_line(&mut scale_line).map_err(|e| Error::io(path, e))?;
    }
    let scale: f64 = scale_line
        .trim()
        .parse()
        .map_err(|_| Error::Container("bad PFM scale".into()))?;
    let mut raw = vec![0u8; 4 * w * h];
    reader.read_exact(&mut raw).map_err(|e| Error::io(path, e))?;
    let mut values = vec![0.0; w * h];
    for (k, chunk) in raw.chunks_exact(4).enumerate() {
        let v = if scale < 0.0 {
            LittleEndian::read_f32(chunk)
        } else {
            byteorder::BigEndian::read_f32(chunk)
        };
        let (row, col) = (h - 1 - k / w, k % w);
        values[row * w + col] = v as f64;
    }
    Spectrum::new(h, w, values, tag, 0)
}

/// CSV with header `i,j,value`, where `(i, j)` is the signed offset from the
/// zero frequency.
pub fn to_csv(spectrum: &Spectrum) -> String {
    let (h, w) = (spectrum.height(), spectrum.width());
    let mut s = String::from("i,j,value\n");
    for row in 0..h {
        for col in 0..w {
            let _ = writeln!(
                s,
                "{},{},{:e}",
                centered_to_offset(row, h),
                centered_to_offset(col, w),
                spectrum.at(row, col)
            );
        }
    }
    s
}

pub fn write_csv(spectrum: &Spectrum, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, to_csv(spectrum)).map_err(|e| Error::io(path, e))
}

/// Five-stop dark-to-bright ramp (black, purple, red, orange, pale yellow).
const COLORMAP: [[f64; 3]; 5] = [
    [0.0, 0.0, 4.0],
    [87.0, 16.0, 110.0],
    [188.0, 55.0, 84.0],
    [249.0, 142.0, 9.0],
    [252.0, 255.0, 164.0],
];

fn colormap(t: f64) -> [u8; 3] {
    let t = t.clamp(0.0, 1.0) * (COLORMAP.len() - 1) as f64;
    let k = (t.floor() as usize).min(COLORMAP.len() - 2);
    let f = t - k as f64;
    let mut out = [0u8; 3];
    for c in 0..3 {
        out[c] = (COLORMAP[k][c] * (1.0 - f) + COLORMAP[k + 1][c] * f).round() as u8;
    }
    out
}

/// Renders a row-major grid through the fixed colormap. With `log`, values
/// are mapped through `log10(1 + x)` first; the result is scaled to its
/// own min/max.
pub fn write_grid_png(values: &[f64], h: usize, w: usize, log: bool, path: impl AsRef<Path>) -> Result<()> {
    let mapped: Vec<f64> = values
        .iter()
        .map(|&v| if log { (1.0 + v.max(0.0)).log10() } else { v })
        .collect();
    let lo = mapped.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = mapped.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let span = if hi > lo { hi - lo } else { 1.0 };
    let mut rgb = Vec::with_capacity(3 * h * w);
    for v in &mapped {
        rgb.extend_from_slice(&colormap((v - lo) / span));
    }
    let path = path.as_ref();
    image::save_buffer_with_format(
        path,
        &rgb,
        w as u32,
        h as u32,
        image::ExtendedColorType::Rgb8,
        image::ImageFormat::Png,
    )
    .map_err(Error::from)
}

/// `log10(1 + x)` PNG rendering of a spectrum.
pub fn write_png(spectrum: &Spectrum, path: impl AsRef<Path>) -> Result<()> {
    write_grid_png(spectrum.values(), spectrum.height(), spectrum.width(), true, path)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pfm_round_trip_and_layout() {
        let vals: Vec<f64> = (0..12).map(|v| v as f64 * 0.25).collect();
        let s = Spectrum::new(3, 4, vals, SpectrumTag::Distortion, 2).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("s.pfm");
        write_pfm(&s, &p).unwrap();
        let bytes = fs::read(&p).unwrap();
        assert!(bytes.starts_with(b"Pf\n4 3\n-1.0\n"));
        // first stored row is the bottom row of the grid
        let first = LittleEndian::read_f32(&bytes[12..16]);
        assert_eq!(first as f64, s.at(2, 0));
        let back = read_pfm(&p, SpectrumTag::Distortion).unwrap();
        assert_eq!(back.values(), s.values());
    }

    #[test]
    fn csv_header_and_offsets() {
        let s = Spectrum::new(2, 2, vec![1.0, 2.0, 3.0, 4.0], SpectrumTag::RawPsd, 1).unwrap();
        let csv = to_csv(&s);
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "i,j,value");
        assert_eq!(lines.len(), 5);
        assert!(lines[1].starts_with("-1,-1,"));
        assert!(lines[4].starts_with("0,0,4"));
    }

    #[test]
    fn png_renders() {
        let s = Spectrum::new(4, 4, (0..16).map(|v| v as f64).collect(), SpectrumTag::RawPsd, 1).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("s.png");
        write_png(&s, &p).unwrap();
        let img = crate::image::read_image(&p).unwrap();
        assert_eq!((img.height(), img.width(), img.channels()), (4, 4, 3));
        assert_eq!(colormap(0.0), [0, 0, 4]);
        assert_eq!(colormap(1.0), [252, 255, 164]);
    }
}
