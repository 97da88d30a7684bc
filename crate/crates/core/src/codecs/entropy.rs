//! Byte-oriented range coder with adaptive zero-order frequency models.
//!
//! The coder keeps a 32-bit range and a 64-bit low word with carry
//! propagation through a cached byte (the layout popularized by LZMA); the
//! always-zero leading byte is not stored.

use std::collections::BTreeMap;

use crate::error::{Error, Result};

const TOP: u32 = 1 << 24;
const MAX_TOTAL: u32 = 1 << 16;
const INCREMENT: u32 = 32;
/// Largest alphabet coded with a direct model; wider spans use an adaptive
/// bit-length model followed by raw mantissa bits.
pub const MAX_DIRECT_ALPHABET: u64 = 4096;
/// Bits charged for each stream header (the minimum symbol).
pub const STREAM_HEADER_BITS: u64 = 64;

struct Encoder {
    low: u64,
    range: u32,
    cache: u8,
    pending: u64,
    out: Vec<u8>,
    first: bool,
}

impl Encoder {
    fn new() -> Self {
        Encoder {
            low: 0,
            range: u32::MAX,
            cache: 0,
            pending: 1,
            out: Vec::new(),
            first: true,
        }
    }

    fn emit(&mut self, byte: u8) {
        if self.first {
            self.first = false;
        } else {
            self.out.push(byte);
        }
    }

    fn shift_low(&mut self) {
        if (self.low as u32) < 0xFF00_0000 || (self.low >> 32) != 0 {
            let carry = (self.low >> 32) as u8;
            let mut temp = self.cache;
            loop {
                self.emit(temp.wrapping_add(carry));
                temp = 0xFF;
                self.pending -= 1;
                if self.pending == 0 {
                    break;
                }
            }
            self.cache = ((self.low >> 24) & 0xFF) as u8;
        }
        self.pending += 1;
        self.low = (self.low & 0x00FF_FFFF) << 8;
    }

    fn encode(&mut self, cum: u32, freq: u32, total: u32) {
        let r = self.range / total;
        self.low += u64::from(r) * u64::from(cum);
        self.range = r * freq;
        while self.range < TOP {
            self.range <<= 8;
            self.shift_low();
        }
    }

    /// `bits <= 16` uniformly distributed bits.
    fn encode_bits(&mut self, value: u64, bits: u32) {
        let mut remaining = bits;
        while remaining > 0 {
            let chunk = remaining.min(16);
            remaining -= chunk;
            let part = ((value >> remaining) & ((1u64 << chunk) - 1)) as u32;
            self.encode(part, 1, 1 << chunk);
        }
    }

    fn finish(mut self) -> Vec<u8> {
        for _ in 0..5 {
            self.shift_low();
        }
        self.out
    }
}

struct Decoder<'a> {
    code: u32,
    range: u32,
    input: &'a [u8],
    pos: usize,
}

impl<'a> Decoder<'a> {
    fn new(input: &'a [u8]) -> Self {
        let mut d = Decoder {
            code: 0,
            range: u32::MAX,
            input,
            pos: 0,
        };
        for _ in 0..4 {
            d.code = (d.code << 8) | u32::from(d.next_byte());
        }
        d
    }

    fn next_byte(&mut self) -> u8 {
        let b = self.input.get(self.pos).copied().unwrap_or(0);
        self.pos += 1;
        b
    }

    fn target(&mut self, total: u32) -> (u32, u32) {
        let r = self.range / total;
        ((self.code / r).min(total - 1), r)
    }

    fn consume(&mut self, r: u32, cum: u32, freq: u32) {
        self.code -= r * cum;
        self.range = r * freq;
        while self.range < TOP {
            self.code = (self.code << 8) | u32::from(self.next_byte());
            self.range <<= 8;
        }
    }

    fn decode_bits(&mut self, bits: u32) -> u64 {
        let mut value = 0u64;
        let mut remaining = bits;
        while remaining > 0 {
            let chunk = remaining.min(16);
            remaining -= chunk;
            let (v, r) = self.target(1 << chunk);
            self.consume(r, v, 1);
            value = (value << chunk) | u64::from(v);
        }
        value
    }
}

/// Adaptive frequency table: every symbol starts at count 1; each coded
/// symbol adds [`INCREMENT`]; counts are halved when the total exceeds
/// [`MAX_TOTAL`].
struct Model {
    freq: Vec<u32>,
    total: u32,
}

impl Model {
    fn new(n: usize) -> Self {
        Model {
            freq: vec![1; n],
            total: n as u32,
        }
    }

    fn cum(&self, s: usize) -> u32 {
        self.freq[..s].iter().sum()
    }

    fn update(&mut self, s: usize) {
        self.freq[s] += INCREMENT;
        self.total += INCREMENT;
        if self.total > MAX_TOTAL {
            self.total = 0;
            for f in self.freq.iter_mut() {
                *f = (*f + 1) / 2;
                self.total += *f;
            }
        }
    }

    fn encode(&mut self, enc: &mut Encoder, s: usize) {
        enc.encode(self.cum(s), self.freq[s], self.total);
        self.update(s);
    }

    fn decode(&mut self, dec: &mut Decoder<'_>) -> usize {
        let (target, r) = dec.target(self.total);
        let mut cum = 0;
        let mut s = 0;
        while cum + self.freq[s] <= target {
            cum += self.freq[s];
            s += 1;
        }
        dec.consume(r, cum, self.freq[s]);
        self.update(s);
        s
    }
}

fn bit_length(v: u64) -> u32 {
    64 - v.leading_zeros()
}

/// One entropy-coded symbol stream.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EncodedStream {
    pub min_symbol: i64,
    pub payload: Vec<u8>,
}

impl EncodedStream {
    /// Header plus payload, in bits.
    pub fn bits(&self) -> u64 {
        STREAM_HEADER_BITS + 8 * self.payload.len() as u64
    }
}

/// Codes `symbols` relative to their minimum. The span `max - min + 1` is
/// stored as an Elias-gamma style prefix inside the payload; a single-valued
/// (or empty) stream has an empty payload.
pub fn encode_symbols(symbols: &[i64]) -> EncodedStream {
    let (Some(&min), Some(&max)) = (symbols.iter().min(), symbols.iter().max()) else {
        return EncodedStream {
            min_symbol: 0,
            payload: Vec::new(),
        };
    };
    if min == max {
        return EncodedStream {
            min_symbol: min,
            payload: Vec::new(),
        };
    }
    let span = max.abs_diff(min);
    let mut enc = Encoder::new();
    let len = bit_length(span);
    enc.encode(len, 1, 65);
    enc.encode_bits(span, len);
    if span < MAX_DIRECT_ALPHABET {
        let mut model = Model::new(span as usize + 1);
        for &s in symbols {
            model.encode(&mut enc, s.abs_diff(min) as usize);
        }
    } else {
        let mut model = Model::new(65);
        for &s in symbols {
            let v = s.abs_diff(min);
            let n = bit_length(v);
            model.encode(&mut enc, n as usize);
            if n > 1 {
                enc.encode_bits(v, n - 1);
            }
        }
    }
    EncodedStream {
        min_symbol: min,
        payload: enc.finish(),
    }
}

/// Incremental decoder for an [`EncodedStream`].
pub struct SymbolDecoder<'a> {
    min: i64,
    state: Option<(Decoder<'a>, Model, bool)>,
}

impl<'a> SymbolDecoder<'a> {
    pub fn new(stream: &'a EncodedStream) -> Self {
        if stream.payload.is_empty() {
            return SymbolDecoder {
                min: stream.min_symbol,
                state: None,
            };
        }
        let mut dec = Decoder::new(&stream.payload);
        let (len, r) = dec.target(65);
        dec.consume(r, len, 1);
        let span = dec.decode_bits(len);
        let state = if span < MAX_DIRECT_ALPHABET {
            (dec, Model::new(span as usize + 1), true)
        } else {
            (dec, Model::new(65), false)
        };
        SymbolDecoder {
            min: stream.min_symbol,
            state: Some(state),
        }
    }

    pub fn next_symbol(&mut self) -> Result<i64> {
        let Some((dec, model, direct)) = self.state.as_mut() else {
            return Ok(self.min);
        };
        let offset = if *direct {
            model.decode(dec) as u64
        } else {
            let n = model.decode(dec) as u32;
            match n {
                0 => 0,
                1 => 1,
                _ => (1u64 << (n - 1)) | dec.decode_bits(n - 1),
            }
        };
        if dec.pos > dec.input.len() + 8 {
            return Err(Error::Codec("symbol stream exhausted".into()));
        }
        self.min
            .checked_add_unsigned(offset)
            .ok_or_else(|| Error::Codec("decoded symbol overflows".into()))
    }

    pub fn take(&mut self, n: usize) -> Result<Vec<i64>> {
        (0..n).map(|_| self.next_symbol()).collect()
    }
}

pub fn decode_symbols(stream: &EncodedStream, n: usize) -> Result<Vec<i64>> {
    SymbolDecoder::new(stream).take(n)
}

/// `sum_s -n_s log2(n_s / n)` over the empirical histogram.
pub fn shannon_bits(symbols: &[i64]) -> f64 {
    let mut hist: BTreeMap<i64, usize> = BTreeMap::new();
    for &s in symbols {
        *hist.entry(s).or_default() += 1;
    }
    let n = symbols.len() as f64;
    hist.values()
        .map(|&c| {
            let c = c as f64;
            -c * (c / n).log2()
        })
        .sum::<f64>()
        .max(0.0)
}
