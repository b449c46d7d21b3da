//! Canny edge detection: Gaussian blur, Sobel gradients, non-maximum
//! suppression along the quantized gradient direction, and hysteresis
//! thresholding relative to the strongest gradient in the image.
//!
//! Every stage is specified down to evaluation order so that edge maps are
//! bit-reproducible: the blur runs horizontally then vertically, each tap
//! accumulated from `-radius` to `+radius` in `f64`, and rounded half-up to
//! 8 bits only after the vertical pass.

use thiserror::Error;

use crate::raster::{BitImage, LumaImage};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EdgeError {
    #[error("image {width}x{height} is smaller than the {min}x{min} minimum")]
    ImageTooSmall { width: u32, height: u32, min: u32 },
    #[error("invalid Canny parameters: {0}")]
    InvalidParams(String),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CannyParams {
    pub sigma: f64,
    pub radius: u32,
    pub low_ratio: f64,
    pub high_ratio: f64,
}

impl Default for CannyParams {
    fn default() -> Self {
        Self {
            sigma: 1.4,
            radius: 2,
            low_ratio: 0.10,
            high_ratio: 0.20,
        }
    }
}

impl CannyParams {
    pub fn validate(&self) -> Result<(), EdgeError> {
        if !(self.sigma > 0.0 && self.sigma.is_finite()) {
            return Err(EdgeError::InvalidParams(format!("sigma must be > 0, got {}", self.sigma)));
        }
        if self.radius < 1 {
            return Err(EdgeError::InvalidParams("radius must be >= 1".into()));
        }
        if !(0.0 < self.low_ratio && self.low_ratio < self.high_ratio && self.high_ratio <= 1.0) {
            return Err(EdgeError::InvalidParams(format!(
                "need 0 < low < high <= 1, got low={} high={}",
                self.low_ratio, self.high_ratio
            )));
        }
        Ok(())
    }
}

/// Gradient direction quantized to the four NMS neighbor axes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Direction {
    Deg0,
    Deg45,
    Deg90,
    Deg135,
}

impl Direction {
    /// Quantizes the gradient vector `(gx, gy)` (y pointing down) to the
    /// nearest of 0°, 45°, 90°, 135° modulo 180°. A zero vector maps to 0°.
    pub fn quantize(gx: i32, gy: i32) -> Self {
        if gx == 0 && gy == 0 {
            return Direction::Deg0;
        }
        // fold into the upper half plane; direction is only defined mod 180°
        let (gx, gy) = if gy < 0 || (gy == 0 && gx < 0) {
            (-(gx as f64), -(gy as f64))
        } else {
            (gx as f64, gy as f64)
        };
        let tan_22_5 = std::f64::consts::SQRT_2 - 1.0;
        let tan_67_5 = std::f64::consts::SQRT_2 + 1.0;
        let ax = gx.abs();
        if gy < tan_22_5 * ax {
            Direction::Deg0
        } else if gy > tan_67_5 * ax {
            Direction::Deg90
        } else if gx > 0.0 {
            Direction::Deg45
        } else {
            Direction::Deg135
        }
    }

    /// Offsets of the two neighbors compared during non-maximum suppression.
    pub fn neighbor_offsets(self) -> [(i64, i64); 2] {
        match self {
            Direction::Deg0 => [(-1, 0), (1, 0)],
            Direction::Deg45 => [(-1, -1), (1, 1)],
            Direction::Deg90 => [(0, -1), (0, 1)],
            Direction::Deg135 => [(1, -1), (-1, 1)],
        }
    }
}

#[derive(Debug, Clone)]
pub struct GradientField {
    pub width: u32,
    pub height: u32,
    pub gx: Vec<i32>,
    pub gy: Vec<i32>,
    pub magnitude: Vec<f64>,
    pub direction: Vec<Direction>,
}

impl GradientField {
    #[inline]
    fn index(&self, x: u32, y: u32) -> usize {
        y as usize * self.width as usize + x as usize
    }

    pub fn magnitude_at(&self, x: u32, y: u32) -> f64 {
        self.magnitude[self.index(x, y)]
    }

    pub fn max_magnitude(&self) -> f64 {
        self.magnitude.iter().copied().fold(0.0, f64::max)
    }
}

/// Normalized Gaussian taps for offsets `-radius..=radius`.
pub fn gaussian_kernel(sigma: f64, radius: u32) -> Vec<f64> {
    let r = radius as i64;
    let raw: Vec<f64> = (-r..=r)
        .map(|i| (-((i * i) as f64) / (2.0 * sigma * sigma)).exp())
        .collect();
    let sum: f64 = raw.iter().sum();
    raw.into_iter().map(|k| k / sum).collect()
}

pub fn gaussian_blur(image: &LumaImage, sigma: f64, radius: u32) -> Result<LumaImage, EdgeError> {
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(EdgeError::InvalidParams(format!("sigma must be > 0, got {sigma}")));
    }
    let kernel = gaussian_kernel(sigma, radius);
    let r = radius as i64;
    let (w, h) = (image.width() as usize, image.height() as usize);
    let clamp = |v: i64, n: usize| v.clamp(0, n as i64 - 1) as usize;

    let src = image.samples();
    let mut horizontal = vec![0f64; w * h];
    for y in 0..h {
        let row = &src[y * w..(y + 1) * w];
        for x in 0..w {
            let mut acc = 0.0;
            for (k, i) in kernel.iter().zip(-r..=r) {
                acc += k * row[clamp(x as i64 + i, w)] as f64;
            }
            horizontal[y * w + x] = acc;
        }
    }

    let mut out = vec![0u8; w * h];
    for y in 0..h {
        for x in 0..w {
            let mut acc = 0.0;
            for (k, i) in kernel.iter().zip(-r..=r) {
                acc += k * horizontal[clamp(y as i64 + i, h) * w + x];
            }
            out[y * w + x] = (acc + 0.5).floor().clamp(0.0, 255.0) as u8;
        }
    }
    Ok(LumaImage::new(image.width(), image.height(), out).expect("same dimensions"))
}

pub fn sobel(image: &LumaImage) -> Result<GradientField, EdgeError> {
    let (w, h) = (image.width(), image.height());
    if w < 3 || h < 3 {
        return Err(EdgeError::ImageTooSmall {
            width: w,
            height: h,
            min: 3,
        });
    }
    let n = w as usize * h as usize;
    let mut gx = Vec::with_capacity(n);
    let mut gy = Vec::with_capacity(n);
    let mut magnitude = Vec::with_capacity(n);
    let mut direction = Vec::with_capacity(n);
    for y in 0..h as i64 {
        for x in 0..w as i64 {
            let p = |dx: i64, dy: i64| image.get_clamped(x + dx, y + dy) as i32;
            let sx = (p(1, -1) + 2 * p(1, 0) + p(1, 1)) - (p(-1, -1) + 2 * p(-1, 0) + p(-1, 1));
            let sy = (p(-1, 1) + 2 * p(0, 1) + p(1, 1)) - (p(-1, -1) + 2 * p(0, -1) + p(1, -1));
            gx.push(sx);
            gy.push(sy);
            magnitude.push(((sx * sx + sy * sy) as f64).sqrt());
            direction.push(Direction::quantize(sx, sy));
        }
    }
    Ok(GradientField {
        width: w,
        height: h,
        gx,
        gy,
        magnitude,
        direction,
    })
}

/// Keeps pixels whose magnitude is >= both neighbors along the gradient
/// direction (ties survive; out-of-bounds neighbors count as 0).
pub fn non_maximum_suppression(field: &GradientField) -> Vec<f64> {
    let (w, h) = (field.width as i64, field.height as i64);
    let at = |x: i64, y: i64| {
        if x < 0 || y < 0 || x >= w || y >= h {
            0.0
        } else {
            field.magnitude[(y * w + x) as usize]
        }
    };
    let mut out = vec![0.0; field.magnitude.len()];
    for y in 0..h {
        for x in 0..w {
            let i = (y * w + x) as usize;
            let m = field.magnitude[i];
            if m == 0.0 {
                continue;
            }
            let [(ax, ay), (bx, by)] = field.direction[i].neighbor_offsets();
            if m >= at(x + ax, y + ay) && m >= at(x + bx, y + by) {
                out[i] = m;
            }
        }
    }
    out
}

/// Double threshold plus 8-connected hysteresis over suppressed magnitudes.
pub fn hysteresis(
    width: u32,
    height: u32,
    suppressed: &[f64],
    low: f64,
    high: f64,
) -> BitImage {
    let (w, h) = (width as usize, height as usize);
    let mut edges = BitImage::zeros(width, height).expect("validated dimensions");
    let mut visited = vec![false; w * h];
    let mut stack = Vec::new();
    for seed in 0..w * h {
        let m = suppressed[seed];
        if visited[seed] || m <= 0.0 || m < high {
            continue;
        }
        visited[seed] = true;
        stack.push(seed);
        while let Some(i) = stack.pop() {
            let (x, y) = (i % w, i / w);
            edges.set(x as u32, y as u32, true);
            for dy in -1i64..=1 {
                for dx in -1i64..=1 {
                    let nx = x as i64 + dx;
                    let ny = y as i64 + dy;
                    if nx < 0 || ny < 0 || nx >= w as i64 || ny >= h as i64 {
                        continue;
                    }
                    let j = ny as usize * w + nx as usize;
                    let mj = suppressed[j];
                    if !visited[j] && mj > 0.0 && mj >= low {
                        visited[j] = true;
                        stack.push(j);
                    }
                }
            }
        }
    }
    edges
}

/// Full Canny pipeline; 1 bits mark edges.
pub fn canny(image: &LumaImage, params: &CannyParams) -> Result<BitImage, EdgeError> {
    params.validate()?;
    let (w, h) = (image.width(), image.height());
    if w < 5 || h < 5 {
        return Err(EdgeError::ImageTooSmall {
            width: w,
            height: h,
            min: 5,
        });
    }
    let blurred = gaussian_blur(image, params.sigma, params.radius)?;
    let field = sobel(&blurred)?;
    let max = field.max_magnitude();
    if max == 0.0 {
        return Ok(BitImage::zeros(w, h).expect("validated dimensions"));
    }
    let suppressed = non_maximum_suppression(&field);
    Ok(hysteresis(
        w,
        h,
        &suppressed,
        params.low_ratio * max,
        params.high_ratio * max,
    ))
}
