//! Rectangular salient regions whose pixels travel unmodified, and the
//! keep-mask derived from them (1 = preserve, 0 = regenerate).

use thiserror::Error;

use crate::raster::{load_ppm, save_ppm, BitImage, RasterImage};

/// Patch bytes are a binary PPM (P6) of the cropped pixels.
pub const PATCH_FORMAT_PPM: u8 = 0;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SalientError {
    #[error("region {rect} lies outside the {width}x{height} image")]
    OutOfBounds { rect: Rect, width: u32, height: u32 },
    #[error("region {0} has zero area")]
    ZeroArea(Rect),
    #[error("salient section truncated")]
    Truncated,
    #[error("too many salient regions ({0})")]
    TooMany(usize),
    #[error("unsupported patch format {0}")]
    UnsupportedPatchFormat(u8),
    #[error("patch of region {rect} is invalid: {reason}")]
    BadPatch { rect: Rect, reason: String },
    #[error("malformed region: {0}")]
    Parse(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Rect {
    pub x: u32,
    pub y: u32,
    pub w: u32,
    pub h: u32,
}

impl Rect {
    pub const fn new(x: u32, y: u32, w: u32, h: u32) -> Self {
        Self { x, y, w, h }
    }

    pub fn area(&self) -> u64 {
        self.w as u64 * self.h as u64
    }

    pub fn fits(&self, width: u32, height: u32) -> bool {
        self.x as u64 + self.w as u64 <= width as u64 && self.y as u64 + self.h as u64 <= height as u64
    }

    pub fn contains(&self, px: u32, py: u32) -> bool {
        px >= self.x
            && py >= self.y
            && (px as u64) < self.x as u64 + self.w as u64
            && (py as u64) < self.y as u64 + self.h as u64
    }
}

impl std::fmt::Display for Rect {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{},{},{},{}", self.x, self.y, self.w, self.h)
    }
}

impl std::str::FromStr for Rect {
    type Err = SalientError;

    /// Parses `x,y,w,h`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let parts: Vec<&str> = s.trim().split(',').map(str::trim).collect();
        let [x, y, w, h] = parts.as_slice() else {
            return Err(SalientError::Parse(format!("expected x,y,w,h, got {s:?}")));
        };
        let num = |v: &str| {
            v.parse::<u32>()
                .map_err(|_| SalientError::Parse(format!("not a pixel coordinate: {v:?}")))
        };
        Ok(Rect::new(num(x)?, num(y)?, num(w)?, num(h)?))
    }
}

/// Parses a regions file: one `x,y,w,h` per line; blank lines and `#`
/// comments are ignored.
pub fn parse_regions(text: &str) -> Result<Vec<Rect>, SalientError> {
    text.lines()
        .map(|l| l.split('#').next().unwrap_or("").trim())
        .filter(|l| !l.is_empty())
        .map(str::parse)
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SalientRegion {
    pub rect: Rect,
    pub patch_format: u8,
    pub patch: Vec<u8>,
}

impl SalientRegion {
    pub fn decode_patch(&self) -> Result<RasterImage, SalientError> {
        if self.patch_format != PATCH_FORMAT_PPM {
            return Err(SalientError::UnsupportedPatchFormat(self.patch_format));
        }
        let bad = |reason: String| SalientError::BadPatch {
            rect: self.rect,
            reason,
        };
        let img = load_ppm(&self.patch).map_err(|e| bad(e.to_string()))?;
        if (img.width(), img.height()) != (self.rect.w, self.rect.h) {
            return Err(bad(format!("patch is {}x{}", img.width(), img.height())));
        }
        Ok(img)
    }
}

fn check_rect(rect: Rect, width: u32, height: u32) -> Result<(), SalientError> {
    if rect.w == 0 || rect.h == 0 {
        return Err(SalientError::ZeroArea(rect));
    }
    if !rect.fits(width, height) {
        return Err(SalientError::OutOfBounds { rect, width, height });
    }
    Ok(())
}

pub fn crop_patch(image: &RasterImage, rect: Rect) -> Result<SalientRegion, SalientError> {
    check_rect(rect, image.width(), image.height())?;
    let crop = RasterImage::from_fn(rect.w, rect.h, |x, y| image.pixel(rect.x + x, rect.y + y))
        .expect("non-zero area checked");
    Ok(SalientRegion {
        rect,
        patch_format: PATCH_FORMAT_PPM,
        patch: save_ppm(&crop),
    })
}

/// Rejects zero-area and out-of-bounds rectangles and sorts by `(y, x)`.
/// Overlapping and duplicate rectangles are kept as given.
pub fn validate_regions(rects: &[Rect], width: u32, height: u32) -> Result<Vec<Rect>, SalientError> {
    for &r in rects {
        check_rect(r, width, height)?;
    }
    let mut sorted = rects.to_vec();
    sorted.sort_by_key(|r| (r.y, r.x));
    Ok(sorted)
}

/// Union of all regions as a keep-mask.
pub fn rasterize_mask(rects: &[Rect], width: u32, height: u32) -> Result<BitImage, SalientError> {
    let mut mask = BitImage::zeros(width, height).map_err(|e| SalientError::Parse(e.to_string()))?;
    for &r in rects {
        if !r.fits(width, height) {
            return Err(SalientError::OutOfBounds { rect: r, width, height });
        }
        for y in r.y..r.y + r.h {
            for x in r.x..r.x + r.w {
                mask.set(x, y, true);
            }
        }
    }
    Ok(mask)
}

/// Section layout: `u16 count`, then per region `u32 x, y, w, h`,
/// `u8 patch_format`, `u32 patch_len`, patch bytes (all big-endian).
pub fn encode_section(regions: &[SalientRegion]) -> Result<Vec<u8>, SalientError> {
    if regions.len() > u16::MAX as usize {
        return Err(SalientError::TooMany(regions.len()));
    }
    let total: usize = regions.iter().map(|r| 21 + r.patch.len()).sum();
    let mut out = Vec::with_capacity(2 + total);
    out.extend_from_slice(&(regions.len() as u16).to_be_bytes());
    for r in regions {
        for v in [r.rect.x, r.rect.y, r.rect.w, r.rect.h] {
            out.extend_from_slice(&v.to_be_bytes());
        }
        out.push(r.patch_format);
        out.extend_from_slice(&(r.patch.len() as u32).to_be_bytes());
        out.extend_from_slice(&r.patch);
    }
    Ok(out)
}

pub fn decode_section(bytes: &[u8]) -> Result<Vec<SalientRegion>, SalientError> {
    let mut cur = bytes;
    let mut take = |n: usize| -> Result<&[u8], SalientError> {
        if cur.len() < n {
            return Err(SalientError::Truncated);
        }
        let (head, tail) = cur.split_at(n);
        cur = tail;
        Ok(head)
    };
    let count = u16::from_be_bytes(take(2)?.try_into().unwrap());
    let mut regions = Vec::with_capacity(count as usize);
    for _ in 0..count {
        let mut v = [0u32; 4];
        for slot in &mut v {
            *slot = u32::from_be_bytes(take(4)?.try_into().unwrap());
        }
        let patch_format = take(1)?[0];
        let len = u32::from_be_bytes(take(4)?.try_into().unwrap()) as usize;
        let patch = take(len)?.to_vec();
        regions.push(SalientRegion {
            rect: Rect::new(v[0], v[1], v[2], v[3]),
            patch_format,
            patch,
        });
    }
    Ok(regions)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> RasterImage {
        RasterImage::from_fn(6, 4, |x, y| [x as u8 * 40, y as u8 * 60, 7]).unwrap()
    }

    #[test]
    fn full_crop_is_identity() {
        let img = sample();
        let r = crop_patch(&img, Rect::new(0, 0, 6, 4)).unwrap();
        assert_eq!(r.patch_format, PATCH_FORMAT_PPM);
        assert_eq!(r.decode_patch().unwrap(), img);
    }

    #[test]
    fn single_pixel_crop() {
        let img = sample();
        let r = crop_patch(&img, Rect::new(0, 0, 1, 1)).unwrap();
        assert_eq!(r.patch, b"P6\n1 1\n255\n\0\0\x07".to_vec());
        let r = crop_patch(&img, Rect::new(5, 3, 1, 1)).unwrap();
        assert_eq!(&r.patch[r.patch.len() - 3..], &[200, 180, 7]);
    }

    #[test]
    fn crop_out_of_bounds() {
        let img = sample();
        assert!(matches!(
            crop_patch(&img, Rect::new(0, 0, 7, 4)),
            Err(SalientError::OutOfBounds { .. })
        ));
        assert!(matches!(
            crop_patch(&img, Rect::new(u32::MAX, 0, 2, 1)),
            Err(SalientError::OutOfBounds { .. })
        ));
    }

    #[test]
    fn mask_cases() {
        assert_eq!(rasterize_mask(&[], 8, 8).unwrap().count_ones(), 0);
        assert_eq!(rasterize_mask(&[Rect::new(0, 0, 8, 8)], 8, 8).unwrap().count_ones(), 64);
        // |A| = 16, |B| = 16, |A ∩ B| = 4
        let m = rasterize_mask(&[Rect::new(0, 0, 4, 4), Rect::new(2, 2, 4, 4)], 8, 8).unwrap();
        assert_eq!(m.count_ones(), 28);
        assert!(rasterize_mask(&[Rect::new(6, 0, 4, 4)], 8, 8).is_err());
    }

    #[test]
    fn validation_sorts_and_keeps_duplicates() {
        assert_eq!(
            validate_regions(&[Rect::new(5, 5, 0, 3)], 20, 20),
            Err(SalientError::ZeroArea(Rect::new(5, 5, 0, 3)))
        );
        let v = validate_regions(&[Rect::new(10, 0, 5, 5), Rect::new(0, 0, 5, 5)], 20, 20).unwrap();
        assert_eq!(v, vec![Rect::new(0, 0, 5, 5), Rect::new(10, 0, 5, 5)]);
        let v = validate_regions(&[Rect::new(1, 9, 2, 2), Rect::new(3, 1, 2, 2), Rect::new(1, 9, 2, 2)], 20, 20).unwrap();
        assert_eq!(v, vec![Rect::new(3, 1, 2, 2), Rect::new(1, 9, 2, 2), Rect::new(1, 9, 2, 2)]);
        assert!(matches!(
            validate_regions(&[Rect::new(18, 0, 3, 3)], 20, 20),
            Err(SalientError::OutOfBounds { .. })
        ));
    }

    #[test]
    fn section_round_trip_and_truncation() {
        let img = sample();
        let regions = vec![
            crop_patch(&img, Rect::new(0, 0, 2, 2)).unwrap(),
            crop_patch(&img, Rect::new(3, 1, 3, 3)).unwrap(),
        ];
        let bytes = encode_section(&regions).unwrap();
        assert_eq!(bytes.len(), 2 + regions.iter().map(|r| 21 + r.patch.len()).sum::<usize>());
        assert_eq!(decode_section(&bytes).unwrap(), regions);
        for cut in 0..bytes.len() {
            assert_eq!(decode_section(&bytes[..cut]), Err(SalientError::Truncated));
        }
    }

    #[test]
    fn parses_region_lists() {
        let rects = parse_regions("# face\n10, 20,30,40\n\n1,2,3,4 # logo\n").unwrap();
        assert_eq!(rects, vec![Rect::new(10, 20, 30, 40), Rect::new(1, 2, 3, 4)]);
        assert!(parse_regions("1,2,3").is_err());
        assert!(parse_regions("1,2,3,-4").is_err());
    }
}
