//! Reference Canny written separately from the library: 2-D arrays,
//! angle-based direction bins, and hysteresis by repeated dilation until a
//! fixed point instead of a flood fill.

#![allow(dead_code)]

use plc_core::edgemap::CannyParams;
use plc_core::raster::LumaImage;

struct Reference {
    w: usize,
    h: usize,
}

impl Reference {
    fn blur(&self, img: &[Vec<f64>], sigma: f64, radius: i64) -> Vec<Vec<f64>> {
        let taps: Vec<f64> = (-radius..=radius)
            .map(|i| (-((i * i) as f64) / (2.0 * sigma * sigma)).exp())
            .collect();
        let total: f64 = taps.iter().sum();
        let taps: Vec<f64> = taps.iter().map(|t| t / total).collect();
        let cx = |x: i64| x.clamp(0, self.w as i64 - 1) as usize;
        let cy = |y: i64| y.clamp(0, self.h as i64 - 1) as usize;
        let mut rows = vec![vec![0.0; self.w]; self.h];
        for y in 0..self.h {
            for x in 0..self.w {
                let mut acc = 0.0;
                for (j, t) in taps.iter().enumerate() {
                    acc += t * img[y][cx(x as i64 + j as i64 - radius)];
                }
                rows[y][x] = acc;
            }
        }
        let mut out = vec![vec![0.0; self.w]; self.h];
        for y in 0..self.h {
            for x in 0..self.w {
                let mut acc = 0.0;
                for (j, t) in taps.iter().enumerate() {
                    acc += t * rows[cy(y as i64 + j as i64 - radius)][x];
                }
                out[y][x] = (acc + 0.5).floor().clamp(0.0, 255.0);
            }
        }
        out
    }

    fn run(&self, img: &[Vec<f64>], p: &CannyParams) -> Vec<Vec<bool>> {
        let (w, h) = (self.w as i64, self.h as i64);
        let b = self.blur(img, p.sigma, p.radius as i64);
        let px = |x: i64, y: i64| b[y.clamp(0, h - 1) as usize][x.clamp(0, w - 1) as usize];

        let mut mag = vec![vec![0.0f64; self.w]; self.h];
        let mut bin = vec![vec![0u32; self.w]; self.h];
        for y in 0..h {
            for x in 0..w {
                let kx = [[-1.0, 0.0, 1.0], [-2.0, 0.0, 2.0], [-1.0, 0.0, 1.0]];
                let ky = [[-1.0, -2.0, -1.0], [0.0, 0.0, 0.0], [1.0, 2.0, 1.0]];
                let (mut gx, mut gy) = (0.0f64, 0.0f64);
                for dy in 0..3 {
                    for dx in 0..3 {
                        let v = px(x + dx as i64 - 1, y + dy as i64 - 1);
                        gx += kx[dy][dx] * v;
                        gy += ky[dy][dx] * v;
                    }
                }
                mag[y as usize][x as usize] = (gx * gx + gy * gy).sqrt();
                let deg = gy.atan2(gx).to_degrees().rem_euclid(180.0);
                bin[y as usize][x as usize] = if gx == 0.0 && gy == 0.0 {
                    0
                } else {
                    ((deg / 45.0).round() as u32 % 4) * 45
                };
            }
        }
        let max = mag.iter().flatten().copied().fold(0.0, f64::max);
        let mut edges = vec![vec![false; self.w]; self.h];
        if max == 0.0 {
            return edges;
        }
        let m = |x: i64, y: i64| {
            if x < 0 || y < 0 || x >= w || y >= h {
                0.0
            } else {
                mag[y as usize][x as usize]
            }
        };
        let mut nms = vec![vec![0.0; self.w]; self.h];
        for y in 0..h {
            for x in 0..w {
                let v = m(x, y);
                let (a, c) = match bin[y as usize][x as usize] {
                    0 => (m(x - 1, y), m(x + 1, y)),
                    45 => (m(x - 1, y - 1), m(x + 1, y + 1)),
                    90 => (m(x, y - 1), m(x, y + 1)),
                    _ => (m(x + 1, y - 1), m(x - 1, y + 1)),
                };
                if v > 0.0 && v >= a && v >= c {
                    nms[y as usize][x as usize] = v;
                }
            }
        }
        let (low, high) = (p.low_ratio * max, p.high_ratio * max);
        for y in 0..self.h {
            for x in 0..self.w {
                edges[y][x] = nms[y][x] > 0.0 && nms[y][x] >= high;
            }
        }
        loop {
            let mut changed = false;
            for y in 0..h {
                for x in 0..w {
                    let v = nms[y as usize][x as usize];
                    if edges[y as usize][x as usize] || v <= 0.0 || v < low {
                        continue;
                    }
                    let touches = (-1..=1).any(|dy| {
                        (-1..=1).any(|dx| {
                            let (nx, ny) = (x + dx, y + dy);
                            nx >= 0 && ny >= 0 && nx < w && ny < h && edges[ny as usize][nx as usize]
                        })
                    });
                    if touches {
                        edges[y as usize][x as usize] = true;
                        changed = true;
                    }
                }
            }
            if !changed {
                return edges;
            }
        }
    }
}

/// Edge map of `img` as rows of booleans.
pub fn reference_canny(img: &LumaImage, params: &CannyParams) -> Vec<Vec<bool>> {
    let (w, h) = (img.width() as usize, img.height() as usize);
    let grid: Vec<Vec<f64>> = (0..h)
        .map(|y| (0..w).map(|x| img.get(x as u32, y as u32) as f64).collect())
        .collect();
    Reference { w, h }.run(&grid, params)
}

pub fn fixtures() -> Vec<(&'static str, LumaImage)> {
    vec![
        ("step", LumaImage::from_fn(48, 40, |x, _| if x < 24 { 0 } else { 255 }).unwrap()),
        ("ramp", LumaImage::from_fn(48, 40, |x, y| ((x * 5 + y * 2) % 256) as u8).unwrap()),
        (
            "disk",
            LumaImage::from_fn(48, 40, |x, y| {
                let (dx, dy) = (x as f64 - 23.3, y as f64 - 19.6);
                if dx * dx + dy * dy < 12.5 * 12.5 {
                    220
                } else {
                    35
                }
            })
            .unwrap(),
        ),
        ("checkerboard", LumaImage::from_fn(48, 40, |x, y| if (x / 6 + y / 6) % 2 == 0 { 30 } else { 210 }).unwrap()),
        ("uniform", LumaImage::from_fn(48, 40, |_, _| 117).unwrap()),
    ]
}
