//! Lossless bi-level image coder in the style of a JBIG2 generic region.
//!
//! Each pixel is predicted from a 10-pixel causal template and coded with a
//! byte-oriented binary range coder driven by adaptive occurrence counts.
//!
//! Stream layout (big-endian):
//!
//! ```text
//! u32 width | u32 height | u8 version (=1) | range-coded payload
//! ```
//!
//! Template bits, most significant first, relative to the current pixel X:
//!
//! ```text
//!      .  9  8  7  .
//!      6  5  4  3  2
//!      1  0  X
//! ```

use thiserror::Error;

use crate::raster::BitImage;

pub const VERSION: u8 = 1;
pub const HEADER_LEN: usize = 9;

const CONTEXT_BITS: usize = 10;
const CONTEXTS: usize = 1 << CONTEXT_BITS;
const COUNT_LIMIT: u32 = 1024;
const TOP: u32 = 1 << 24;
/// Refuse to allocate for headers claiming more pixels than this.
const MAX_PIXELS: u64 = 1 << 30;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum BilevelError {
    #[error("bad bi-level stream header: {0}")]
    BadHeader(String),
    #[error("unsupported bi-level stream version {0}")]
    UnsupportedVersion(u8),
    #[error("bi-level stream truncated")]
    TruncatedStream,
}

/// Adaptive (c0, c1) counts for every template context.
#[derive(Clone)]
pub struct ContextModel {
    counts: Vec<(u32, u32)>,
}

impl Default for ContextModel {
    fn default() -> Self {
        Self {
            counts: vec![(1, 1); CONTEXTS],
        }
    }
}

impl ContextModel {
    #[inline]
    pub fn counts(&self, ctx: usize) -> (u32, u32) {
        self.counts[ctx]
    }

    #[inline]
    pub fn update(&mut self, ctx: usize, bit: bool) {
        let (c0, c1) = &mut self.counts[ctx];
        if bit {
            *c1 += 1;
        } else {
            *c0 += 1;
        }
        if *c0 + *c1 > COUNT_LIMIT {
            *c0 = c0.div_ceil(2);
            *c1 = c1.div_ceil(2);
        }
    }
}

/// Width of the sub-interval assigned to a 1 bit.
#[inline]
fn split(range: u32, (c0, c1): (u32, u32)) -> u32 {
    ((range / (c0 + c1)) * c1).max(1)
}

/// Carry-propagating range encoder (LZMA-style `cache` + pending 0xFF run).
pub struct RangeEncoder {
    low: u64,
    range: u32,
    cache: u8,
    pending: u64,
    out: Vec<u8>,
}

impl Default for RangeEncoder {
    fn default() -> Self {
        Self {
            low: 0,
            range: u32::MAX,
            cache: 0,
            pending: 1,
            out: Vec::new(),
        }
    }
}

impl RangeEncoder {
    pub fn encode(&mut self, bit: bool, counts: (u32, u32)) {
        let s = split(self.range, counts);
        if bit {
            self.range = s;
        } else {
            self.low += s as u64;
            self.range -= s;
        }
        while self.range < TOP {
            self.range <<= 8;
            self.shift_low();
        }
    }

    fn shift_low(&mut self) {
        if self.low < 0xFF00_0000 || self.low > 0xFFFF_FFFF {
            let carry = (self.low >> 32) as u8;
            let mut byte = self.cache;
            loop {
                self.out.push(byte.wrapping_add(carry));
                byte = 0xFF;
                self.pending -= 1;
                if self.pending == 0 {
                    break;
                }
            }
            self.cache = (self.low >> 24) as u8;
        }
        self.pending += 1;
        self.low = (self.low & 0x00FF_FFFF) << 8;
    }

    pub fn finish(mut self) -> Vec<u8> {
        for _ in 0..5 {
            self.shift_low();
        }
        self.out
    }
}

pub struct RangeDecoder<'a> {
    data: &'a [u8],
    pos: usize,
    code: u32,
    range: u32,
}

impl<'a> RangeDecoder<'a> {
    pub fn new(data: &'a [u8]) -> Result<Self, BilevelError> {
        if data.len() < 5 {
            return Err(BilevelError::TruncatedStream);
        }
        // the first byte is the encoder's initial (always zero) cache
        let code = u32::from_be_bytes([data[1], data[2], data[3], data[4]]);
        Ok(Self {
            data,
            pos: 5,
            code,
            range: u32::MAX,
        })
    }

    pub fn decode(&mut self, counts: (u32, u32)) -> Result<bool, BilevelError> {
        let s = split(self.range, counts);
        let bit = if self.code < s {
            self.range = s;
            true
        } else {
            self.code -= s;
            self.range -= s;
            false
        };
        while self.range < TOP {
            let byte = *self.data.get(self.pos).ok_or(BilevelError::TruncatedStream)?;
            self.pos += 1;
            self.range <<= 8;
            self.code = (self.code << 8) | byte as u32;
        }
        Ok(bit)
    }
}

/// Reads template neighbors from the already coded part of the image.
struct Template<'a> {
    img: &'a BitImage,
}

impl Template<'_> {
    #[inline]
    fn px(&self, x: i64, y: i64) -> usize {
        if x < 0 || y < 0 || x >= self.img.width() as i64 {
            0
        } else {
            self.img.get(x as u32, y as u32) as usize
        }
    }

    #[inline]
    fn context(&self, x: u32, y: u32) -> usize {
        let (x, y) = (x as i64, y as i64);
        let taps = [
            (x - 1, y - 2),
            (x, y - 2),
            (x + 1, y - 2),
            (x - 2, y - 1),
            (x - 1, y - 1),
            (x, y - 1),
            (x + 1, y - 1),
            (x + 2, y - 1),
            (x - 2, y),
            (x - 1, y),
        ];
        taps.iter().fold(0, |ctx, &(tx, ty)| (ctx << 1) | self.px(tx, ty))
    }
}

pub fn encode_bitimage(bits: &BitImage) -> Vec<u8> {
    let mut out = Vec::with_capacity(HEADER_LEN + 64);
    out.extend_from_slice(&bits.width().to_be_bytes());
    out.extend_from_slice(&bits.height().to_be_bytes());
    out.push(VERSION);

    let mut model = ContextModel::default();
    let mut enc = RangeEncoder::default();
    let template = Template { img: bits };
    for y in 0..bits.height() {
        for x in 0..bits.width() {
            let ctx = template.context(x, y);
            let bit = bits.get(x, y);
            enc.encode(bit, model.counts(ctx));
            model.update(ctx, bit);
        }
    }
    out.extend_from_slice(&enc.finish());
    out
}

pub fn decode_bitimage(bytes: &[u8]) -> Result<BitImage, BilevelError> {
    if bytes.len() < HEADER_LEN {
        return Err(BilevelError::BadHeader(format!(
            "need {HEADER_LEN} header bytes, got {}",
            bytes.len()
        )));
    }
    let width = u32::from_be_bytes(bytes[0..4].try_into().unwrap());
    let height = u32::from_be_bytes(bytes[4..8].try_into().unwrap());
    let version = bytes[8];
    if version != VERSION {
        return Err(BilevelError::UnsupportedVersion(version));
    }
    if width == 0 || height == 0 || width as u64 * height as u64 > MAX_PIXELS {
        return Err(BilevelError::BadHeader(format!("invalid dimensions {width}x{height}")));
    }
    let mut img = BitImage::zeros(width, height)
        .map_err(|e| BilevelError::BadHeader(e.to_string()))?;
    let mut model = ContextModel::default();
    let mut dec = RangeDecoder::new(&bytes[HEADER_LEN..])?;
    for y in 0..height {
        for x in 0..width {
            let ctx = Template { img: &img }.context(x, y);
            let bit = dec.decode(model.counts(ctx))?;
            model.update(ctx, bit);
            if bit {
                img.set(x, y, true);
            }
        }
    }
    Ok(img)
}

/// Size of the bitmap stored as raw packed bits.
pub fn packed_size(bits: &BitImage) -> usize {
    bits.packed().len()
}
