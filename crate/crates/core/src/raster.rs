//! Pixel buffers shared by every stage: RGB rasters, 8-bit luma planes and
//! packed bi-level images, plus binary PPM (P6) I/O.

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum RasterError {
    #[error("not a binary PPM (expected P6 magic)")]
    BadMagic,
    #[error("malformed PPM header: {0}")]
    BadHeader(String),
    #[error("unsupported maxval {0} (only 255 is accepted)")]
    UnsupportedMaxval(u32),
    #[error("pixel data truncated: expected {expected} bytes, found {found}")]
    TruncatedPixelData { expected: usize, found: usize },
    #[error("invalid dimensions {width}x{height}")]
    InvalidDimensions { width: u32, height: u32 },
    #[error("buffer length {found} does not match {expected}")]
    BufferLength { expected: usize, found: usize },
}

fn check_dims(width: u32, height: u32) -> Result<usize, RasterError> {
    if width == 0 || height == 0 {
        return Err(RasterError::InvalidDimensions { width, height });
    }
    (width as usize)
        .checked_mul(height as usize)
        .ok_or(RasterError::InvalidDimensions { width, height })
}

/// Row-major 8-bit RGB image.
#[derive(Clone, PartialEq, Eq)]
pub struct RasterImage {
    width: u32,
    height: u32,
    pixels: Vec<u8>,
}

impl std::fmt::Debug for RasterImage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("RasterImage")
            .field("width", &self.width)
            .field("height", &self.height)
            .finish_non_exhaustive()
    }
}

impl RasterImage {
    pub fn new(width: u32, height: u32, pixels: Vec<u8>) -> Result<Self, RasterError> {
        let n = check_dims(width, height)?;
        if pixels.len() != n * 3 {
            return Err(RasterError::BufferLength {
                expected: n * 3,
                found: pixels.len(),
            });
        }
        Ok(Self {
            width,
            height,
            pixels,
        })
    }

    /// Image filled with a single color.
    pub fn filled(width: u32, height: u32, rgb: [u8; 3]) -> Result<Self, RasterError> {
        let n = check_dims(width, height)?;
        let pixels = rgb.iter().copied().cycle().take(n * 3).collect();
        Ok(Self {
            width,
            height,
            pixels,
        })
    }

    /// Builds an image by evaluating `f(x, y)` for every pixel.
    pub fn from_fn(
        width: u32,
        height: u32,
        mut f: impl FnMut(u32, u32) -> [u8; 3],
    ) -> Result<Self, RasterError> {
        let n = check_dims(width, height)?;
        let mut pixels = Vec::with_capacity(n * 3);
        for y in 0..height {
            for x in 0..width {
                pixels.extend_from_slice(&f(x, y));
            }
        }
        Ok(Self {
            width,
            height,
            pixels,
        })
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn pixels(&self) -> &[u8] {
        &self.pixels
    }

    pub fn into_pixels(self) -> Vec<u8> {
        self.pixels
    }

    #[inline]
    pub fn pixel(&self, x: u32, y: u32) -> [u8; 3] {
        let i = (y as usize * self.width as usize + x as usize) * 3;
        [self.pixels[i], self.pixels[i + 1], self.pixels[i + 2]]
    }

    #[inline]
    pub fn set_pixel(&mut self, x: u32, y: u32, rgb: [u8; 3]) {
        let i = (y as usize * self.width as usize + x as usize) * 3;
        self.pixels[i..i + 3].copy_from_slice(&rgb);
    }

    /// Left-right mirror image.
    pub fn mirror_horizontal(&self) -> Self {
        let w = self.width;
        Self::from_fn(w, self.height, |x, y| self.pixel(w - 1 - x, y))
            .expect("dimensions already validated")
    }
}

/// Row-major 8-bit luma plane.
#[derive(Clone, PartialEq, Eq)]
pub struct LumaImage {
    width: u32,
    height: u32,
    samples: Vec<u8>,
}

impl std::fmt::Debug for LumaImage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("LumaImage")
            .field("width", &self.width)
            .field("height", &self.height)
            .finish_non_exhaustive()
    }
}

impl LumaImage {
    pub fn new(width: u32, height: u32, samples: Vec<u8>) -> Result<Self, RasterError> {
        let n = check_dims(width, height)?;
        if samples.len() != n {
            return Err(RasterError::BufferLength {
                expected: n,
                found: samples.len(),
            });
        }
        Ok(Self {
            width,
            height,
            samples,
        })
    }

    pub fn from_fn(
        width: u32,
        height: u32,
        mut f: impl FnMut(u32, u32) -> u8,
    ) -> Result<Self, RasterError> {
        let n = check_dims(width, height)?;
        let mut samples = Vec::with_capacity(n);
        for y in 0..height {
            for x in 0..width {
                samples.push(f(x, y));
            }
        }
        Ok(Self {
            width,
            height,
            samples,
        })
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn samples(&self) -> &[u8] {
        &self.samples
    }

    #[inline]
    pub fn get(&self, x: u32, y: u32) -> u8 {
        self.samples[y as usize * self.width as usize + x as usize]
    }

    /// Sample with coordinates clamped to the border.
    #[inline]
    pub fn get_clamped(&self, x: i64, y: i64) -> u8 {
        let x = x.clamp(0, self.width as i64 - 1) as u32;
        let y = y.clamp(0, self.height as i64 - 1) as u32;
        self.get(x, y)
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.height, self.width, |x, y| self.get(y, x))
            .expect("dimensions already validated")
    }
}

/// Packed 1-bit image, row-major, MSB first within each byte.
///
/// 1 marks foreground (an edge pixel or a preserved mask pixel). Bits past
/// `width * height` in the last byte are always zero.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct BitImage {
    width: u32,
    height: u32,
    bits: Vec<u8>,
}

impl std::fmt::Debug for BitImage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("BitImage")
            .field("width", &self.width)
            .field("height", &self.height)
            .field("ones", &self.count_ones())
            .finish()
    }
}

impl BitImage {
    pub fn zeros(width: u32, height: u32) -> Result<Self, RasterError> {
        let n = check_dims(width, height)?;
        Ok(Self {
            width,
            height,
            bits: vec![0; n.div_ceil(8)],
        })
    }

    pub fn from_fn(
        width: u32,
        height: u32,
        mut f: impl FnMut(u32, u32) -> bool,
    ) -> Result<Self, RasterError> {
        let mut img = Self::zeros(width, height)?;
        for y in 0..height {
            for x in 0..width {
                if f(x, y) {
                    img.set(x, y, true);
                }
            }
        }
        Ok(img)
    }

    /// Wraps an already packed buffer. Padding bits must be zero.
    pub fn from_packed(width: u32, height: u32, bits: Vec<u8>) -> Result<Self, RasterError> {
        let n = check_dims(width, height)?;
        let expected = n.div_ceil(8);
        if bits.len() != expected {
            return Err(RasterError::BufferLength {
                expected,
                found: bits.len(),
            });
        }
        let pad = expected * 8 - n;
        if pad > 0 && bits[expected - 1] & ((1u8 << pad) - 1) != 0 {
            return Err(RasterError::BufferLength {
                expected,
                found: bits.len(),
            });
        }
        Ok(Self {
            width,
            height,
            bits,
        })
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn packed(&self) -> &[u8] {
        &self.bits
    }

    pub fn pixel_count(&self) -> usize {
        self.width as usize * self.height as usize
    }

    #[inline]
    pub fn get(&self, x: u32, y: u32) -> bool {
        let i = y as usize * self.width as usize + x as usize;
        self.bits[i >> 3] >> (7 - (i & 7)) & 1 == 1
    }

    #[inline]
    pub fn set(&mut self, x: u32, y: u32, on: bool) {
        let i = y as usize * self.width as usize + x as usize;
        let mask = 1u8 << (7 - (i & 7));
        if on {
            self.bits[i >> 3] |= mask;
        } else {
            self.bits[i >> 3] &= !mask;
        }
    }

    pub fn count_ones(&self) -> usize {
        self.bits.iter().map(|b| b.count_ones() as usize).sum()
    }

    /// Fraction of pixels set to 1.
    pub fn density(&self) -> f64 {
        self.count_ones() as f64 / self.pixel_count() as f64
    }

    /// Whether every set pixel of `self` is also set in `other`.
    pub fn is_subset_of(&self, other: &BitImage) -> bool {
        self.width == other.width
            && self.height == other.height
            && self
                .bits
                .iter()
                .zip(&other.bits)
                .all(|(a, b)| a & !b == 0)
    }
}

/// Parses a binary PPM (P6, maxval 255). Comments in the header are accepted.
pub fn load_ppm(bytes: &[u8]) -> Result<RasterImage, RasterError> {
    if bytes.len() < 2 || &bytes[..2] != b"P6" {
        return Err(RasterError::BadMagic);
    }
    let mut pos = 2;
    let mut fields = [0u32; 3];
    for (k, field) in fields.iter_mut().enumerate() {
        // whitespace and comments
        loop {
            match bytes.get(pos) {
                Some(b) if b.is_ascii_whitespace() => pos += 1,
                Some(b'#') => {
                    while bytes.get(pos).is_some_and(|&b| b != b'\n') {
                        pos += 1;
                    }
                }
                Some(_) => break,
                None => return Err(RasterError::BadHeader("unexpected end of header".into())),
            }
        }
        if k == 0 && pos == 2 {
            return Err(RasterError::BadHeader("missing whitespace after magic".into()));
        }
        let start = pos;
        while bytes.get(pos).is_some_and(u8::is_ascii_digit) {
            pos += 1;
        }
        if start == pos {
            return Err(RasterError::BadHeader("expected a decimal number".into()));
        }
        let text = std::str::from_utf8(&bytes[start..pos]).expect("ascii digits");
        *field = text
            .parse()
            .map_err(|_| RasterError::BadHeader(format!("number out of range: {text}")))?;
    }
    match bytes.get(pos) {
        Some(b) if b.is_ascii_whitespace() => pos += 1,
        _ => return Err(RasterError::BadHeader("missing whitespace after maxval".into())),
    }
    let [width, height, maxval] = fields;
    if maxval != 255 {
        return Err(RasterError::UnsupportedMaxval(maxval));
    }
    let n = check_dims(width, height).map_err(|_| {
        RasterError::BadHeader(format!("invalid dimensions {width}x{height}"))
    })?;
    let expected = n
        .checked_mul(3)
        .ok_or_else(|| RasterError::BadHeader("image too large".into()))?;
    let data = &bytes[pos..];
    if data.len() < expected {
        return Err(RasterError::TruncatedPixelData {
            expected,
            found: data.len(),
        });
    }
    RasterImage::new(width, height, data[..expected].to_vec())
}

/// Writes a binary PPM with a minimal header: `P6\n<w> <h>\n255\n`.
pub fn save_ppm(image: &RasterImage) -> Vec<u8> {
    let header = format!("P6\n{} {}\n255\n", image.width, image.height);
    let mut out = Vec::with_capacity(header.len() + image.pixels.len());
    out.extend_from_slice(header.as_bytes());
    out.extend_from_slice(&image.pixels);
    out
}

/// BT.601 luma, rounded half up: `round(0.299 R + 0.587 G + 0.114 B)`.
#[inline]
pub fn luma_of(rgb: [u8; 3]) -> u8 {
    // weights scaled by 1000 keep the computation exact
    let weighted = 299 * rgb[0] as u32 + 587 * rgb[1] as u32 + 114 * rgb[2] as u32;
    ((weighted + 500) / 1000).min(255) as u8
}

pub fn to_luma(image: &RasterImage) -> LumaImage {
    let samples = image.pixels.chunks_exact(3).map(|p| luma_of([p[0], p[1], p[2]])).collect();
    LumaImage {
        width: image.width,
        height: image.height,
        samples,
    }
}
