use std::f64::consts::PI;

use super::entropy::{encode_symbols, shannon_bits, EncodedStream, SymbolDecoder};
use super::{BlobHeader, Codec, CodecKind, CompressedBlob, RateParam};
use crate::corruptions::reflect;
use crate::error::{Error, Result};
use crate::image::{Image, Shape};

/// Baseline JPEG luminance table (8x8, row-major).
pub const JPEG_LUMA: [u16; 64] = [
    16, 11, 10, 16, 24, 40, 51, 61, //
    12, 12, 14, 19, 26, 58, 60, 55, //
    14, 13, 16, 24, 40, 57, 69, 56, //
    14, 17, 22, 29, 51, 87, 80, 62, //
    18, 22, 37, 56, 68, 109, 103, 77, //
    24, 35, 55, 64, 81, 104, 113, 92, //
    49, 64, 78, 87, 103, 121, 120, 101, //
    72, 92, 95, 98, 112, 100, 103, 99,
];

/// End-of-block marker in the run stream.
const EOB: i64 = -1;

/// Orthonormal DCT-II basis, `B x B` row-major: row `u` is frequency `u`.
pub fn dct_matrix(b: usize) -> Vec<f64> {
    let mut m = vec![0.0; b * b];
    for u in 0..b {
        let scale = if u == 0 { (1.0 / b as f64).sqrt() } else { (2.0 / b as f64).sqrt() };
        for x in 0..b {
            m[u * b + x] = scale * (PI * (2 * x + 1) as f64 * u as f64 / (2 * b) as f64).cos();
        }
    }
    m
}

/// Zigzag scan order for a `B x B` block.
fn zigzag(b: usize) -> Vec<usize> {
    let mut order: Vec<(usize, usize)> = (0..b).flat_map(|y| (0..b).map(move |x| (y, x))).collect();
    order.sort_by_key(|&(y, x)| {
        let s = y + x;
        (s, if s % 2 == 0 { x } else { y })
    });
    order.into_iter().map(|(y, x)| y * b + x).collect()
}

/// JPEG-style transform codec on `B x B` blocks of the 8-bit intensity scale.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockDctCodec {
    block: usize,
    quality: u8,
    steps: Vec<f64>,
    basis: Vec<f64>,
    scan: Vec<usize>,
}

impl BlockDctCodec {
    /// 8x8 blocks with the JPEG luminance table scaled by `quality`
    /// (libjpeg convention; `q = 100` gives unit steps).
    pub fn new(quality: u8) -> Result<Self> {
        Self::with_block(8, quality)
    }

    /// Other block sizes resample the 8x8 table by nearest neighbour.
    pub fn with_block(block: usize, quality: u8) -> Result<Self> {
        if !(1..=100).contains(&quality) {
            return Err(Error::InvalidArgument(format!("quality must lie in 1..=100, got {quality}")));
        }
        if block < 2 {
            return Err(Error::InvalidArgument("block size must be >= 2".into()));
        }
        let scale = if quality < 50 { 5000 / quality as u32 } else { 200 - 2 * quality as u32 };
        let steps = (0..block * block)
            .map(|k| {
                let (u, v) = (k / block * 8 / block, k % block * 8 / block);
                let base = JPEG_LUMA[u * 8 + v] as u32;
                ((base * scale + 50) / 100).clamp(1, 255) as f64
            })
            .collect();
        Ok(BlockDctCodec {
            block,
            quality,
            steps,
            basis: dct_matrix(block),
            scan: zigzag(block),
        })
    }

    pub fn quality(&self) -> u8 {
        self.quality
    }

    pub fn block(&self) -> usize {
        self.block
    }

    /// Quantization steps on the 0..255 scale, row-major.
    pub fn steps(&self) -> &[f64] {
        &self.steps
    }

    /// Forward 2-D DCT of one block (`B*B` samples, row-major).
    pub fn forward(&self, block: &[f64]) -> Vec<f64> {
        let b = self.block;
        let m = &self.basis;
        let mut tmp = vec![0.0; b * b];
        for u in 0..b {
            for x in 0..b {
                tmp[u * b + x] = (0..b).map(|y| m[u * b + y] * block[y * b + x]).sum();
            }
        }
        let mut out = vec![0.0; b * b];
        for u in 0..b {
            for v in 0..b {
                out[u * b + v] = (0..b).map(|x| tmp[u * b + x] * m[v * b + x]).sum();
            }
        }
        out
    }

    pub fn inverse(&self, coeffs: &[f64]) -> Vec<f64> {
        let b = self.block;
        let m = &self.basis;
        let mut tmp = vec![0.0; b * b];
        for y in 0..b {
            for v in 0..b {
                tmp[y * b + v] = (0..b).map(|u| m[u * b + y] * coeffs[u * b + v]).sum();
            }
        }
        let mut out = vec![0.0; b * b];
        for y in 0..b {
            for x in 0..b {
                out[y * b + x] = (0..b).map(|v| tmp[y * b + v] * m[v * b + x]).sum();
            }
        }
        out
    }

    /// Level-shifted 8-bit samples of each block of one plane, with the
    /// plane reflected out to a multiple of the block size.
    fn blocks(&self, plane: &[f64], h: usize, w: usize) -> Vec<Vec<f64>> {
        let b = self.block;
        let (bh, bw) = (h.div_ceil(b), w.div_ceil(b));
        let mut out = Vec::with_capacity(bh * bw);
        for by in 0..bh {
            for bx in 0..bw {
                let blk = (0..b * b)
                    .map(|k| {
                        let y = reflect((by * b + k / b) as isize, h);
                        let x = reflect((bx * b + k % b) as isize, w);
                        plane[y * w + x] * 255.0 - 128.0
                    })
                    .collect();
                out.push(blk);
            }
        }
        out
    }
}

/// DC differences, AC run lengths (or [`EOB`]) and AC levels.
#[derive(Default)]
struct Symbols {
    dc: Vec<i64>,
    runs: Vec<i64>,
    levels: Vec<i64>,
}

impl Symbols {
    fn push_block(&mut self, q: &[i64], scan: &[usize], prev_dc: &mut i64) {
        let dc = q[scan[0]];
        self.dc.push(dc - *prev_dc);
        *prev_dc = dc;
        let zz: Vec<i64> = scan[1..].iter().map(|&i| q[i]).collect();
        let last = zz.iter().rposition(|&v| v != 0);
        let mut run = 0;
        for (pos, &v) in zz.iter().enumerate() {
            if Some(pos) > last {
                break;
            }
            if v == 0 {
                run += 1;
            } else {
                self.runs.push(run);
                self.levels.push(v);
                run = 0;
            }
        }
        if last.map_or(true, |l| l + 1 < zz.len()) {
            self.runs.push(EOB);
        }
    }
}

impl Codec for BlockDctCodec {
    fn kind(&self) -> CodecKind {
        CodecKind::BlockDct
    }

    fn id(&self) -> String {
        "block_dct".into()
    }

    fn rate_param(&self) -> RateParam {
        RateParam::Quality { q: self.quality }
    }

    fn roundtrip(&self, image: &Image) -> Result<(Image, CompressedBlob)> {
        let symbols = self.symbol_streams(image);
        let streams: Vec<EncodedStream> = symbols.iter().map(|s| encode_symbols(s)).collect();
        let entropy_bits = symbols.iter().map(|s| shannon_bits(s)).sum();
        let data = self.decode(&streams, image.shape())?;
        let (out, _) = Image::clamped_from(image.shape(), data, image.range())?;
        let header = BlobHeader {
            kind: CodecKind::BlockDct,
            shape: image.shape(),
            rate_param: self.rate_param(),
            tool: None,
        };
        Ok((out, CompressedBlob::from_streams(header, streams, entropy_bits)))
    }
}

impl BlockDctCodec {
    /// The DC-difference, run-length and level symbols of `image`, in the
    /// order they are entropy coded.
    pub fn symbol_streams(&self, image: &Image) -> [Vec<i64>; 3] {
        let (h, w) = (image.height(), image.width());
        let mut sym = Symbols::default();
        for plane in image.channels_iter() {
            let mut prev = 0;
            for blk in &self.blocks(plane, h, w) {
                let coeffs = self.forward(blk);
                let q: Vec<i64> = coeffs.iter().zip(&self.steps).map(|(c, s)| (c / s).round() as i64).collect();
                sym.push_block(&q, &self.scan, &mut prev);
            }
        }
        [sym.dc, sym.runs, sym.levels]
    }

    /// Rebuilds unclamped samples from the three symbol streams.
    pub fn decode(&self, streams: &[EncodedStream], shape: Shape) -> Result<Vec<f64>> {
        let [dc_s, run_s, lvl_s] = streams else {
            return Err(Error::Codec(format!("block DCT expects 3 streams, got {}", streams.len())));
        };
        let (mut dc, mut runs, mut levels) = (SymbolDecoder::new(dc_s), SymbolDecoder::new(run_s), SymbolDecoder::new(lvl_s));
        let b = self.block;
        let (h, w) = (shape.height, shape.width);
        let (bh, bw) = (h.div_ceil(b), w.div_ceil(b));
        let mut data = Vec::with_capacity(shape.len());
        for _ in 0..shape.channels {
            let mut plane = vec![0.0; h * w];
            let mut prev = 0;
            for by in 0..bh {
                for bx in 0..bw {
                    let mut q = vec![0i64; b * b];
                    prev += dc.next_symbol()?;
                    q[self.scan[0]] = prev;
                    let mut pos = 1;
                    while pos < b * b {
                        let run = runs.next_symbol()?;
                        if run == EOB {
                            break;
                        }
                        if run < 0 || pos + run as usize >= b * b {
                            return Err(Error::Codec("corrupt run-length stream".into()));
                        }
                        pos += run as usize;
                        q[self.scan[pos]] = levels.next_symbol()?;
                        pos += 1;
                    }
                    let coeffs: Vec<f64> = q.iter().zip(&self.steps).map(|(&v, s)| v as f64 * s).collect();
                    let px = self.inverse(&coeffs);
                    for k in 0..b * b {
                        let (y, x) = (by * b + k / b, bx * b + k % b);
                        if y < h && x < w {
                            plane[y * w + x] = (px[k] + 128.0) / 255.0;
                        }
                    }
                }
            }
            data.extend(plane);
        }
        Ok(data)
    }
}
