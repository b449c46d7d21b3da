//! Brute-force SSIM: every 8×8 window recomputed from scratch with
//! two-pass mean and variance, plus synthetic fixture images.

#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use plc_core::raster::RasterImage;

fn reference_luma(img: &RasterImage) -> Vec<Vec<f64>> {
    (0..img.height())
        .map(|y| {
            (0..img.width())
                .map(|x| {
                    let [r, g, b] = img.pixel(x, y);
                    (0.299 * r as f64 + 0.587 * g as f64 + 0.114 * b as f64 + 0.5 + 1e-9).floor()
                })
                .collect()
        })
        .collect()
}

pub fn reference_ssim(a: &RasterImage, b: &RasterImage) -> f64 {
    let (la, lb) = (reference_luma(a), reference_luma(b));
    let (w, h) = (a.width() as usize, a.height() as usize);
    let c1 = (0.01f64 * 255.0).powi(2);
    let c2 = (0.03f64 * 255.0).powi(2);
    let mut scores = Vec::new();
    for y0 in 0..=h - 8 {
        for x0 in 0..=w - 8 {
            let xs: Vec<f64> = (y0..y0 + 8).flat_map(|y| (x0..x0 + 8).map(move |x| (x, y))).map(|(x, y)| la[y][x]).collect();
            let ys: Vec<f64> = (y0..y0 + 8).flat_map(|y| (x0..x0 + 8).map(move |x| (x, y))).map(|(x, y)| lb[y][x]).collect();
            let n = 64.0;
            let ma = xs.iter().sum::<f64>() / n;
            let mb = ys.iter().sum::<f64>() / n;
            let va = xs.iter().map(|v| (v - ma).powi(2)).sum::<f64>() / n;
            let vb = ys.iter().map(|v| (v - mb).powi(2)).sum::<f64>() / n;
            let cov = xs.iter().zip(&ys).map(|(p, q)| (p - ma) * (q - mb)).sum::<f64>() / n;
            scores.push(((2.0 * ma * mb + c1) * (2.0 * cov + c2)) / ((ma * ma + mb * mb + c1) * (va + vb + c2)));
        }
    }
    scores.iter().sum::<f64>() / scores.len() as f64
}

/// Smooth "natural" texture: a few sinusoids plus mild noise.
pub fn natural(w: u32, h: u32, seed: u64) -> RasterImage {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (fx, fy, ph): (f64, f64, f64) = (rng.gen_range(0.02..0.2), rng.gen_range(0.02..0.2), rng.gen_range(0.0..6.0));
    RasterImage::from_fn(w, h, |x, y| {
        let (xf, yf) = (x as f64, y as f64);
        let base = 128.0 + 60.0 * (fx * xf + ph).sin() + 40.0 * (fy * yf).cos() + 20.0 * ((xf + yf) * 0.07).sin();
        let n: f64 = rng.gen_range(-8.0..8.0);
        let v = (base + n).clamp(0.0, 255.0);
        [v as u8, (v * 0.8) as u8, (255.0 - v * 0.5) as u8]
    })
    .unwrap()
}

pub fn perturb(img: &RasterImage, amplitude: i32, seed: u64) -> RasterImage {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let px = img
        .pixels()
        .iter()
        .map(|&p| (p as i32 + rng.gen_range(-amplitude..=amplitude)).clamp(0, 255) as u8)
        .collect();
    RasterImage::new(img.width(), img.height(), px).unwrap()
}

pub fn invert(img: &RasterImage) -> RasterImage {
    RasterImage::new(img.width(), img.height(), img.pixels().iter().map(|p| 255 - p).collect()).unwrap()
}

pub fn fixture_pairs() -> Vec<(RasterImage, RasterImage)> {
    let mut pairs = Vec::new();
    for seed in 0..4u64 {
        let a = natural(37 + seed as u32 * 5, 29 + seed as u32 * 3, seed);
        pairs.push((a.clone(), perturb(&a, 5 + 10 * seed as i32, seed + 100)));
    }
    let a = natural(40, 32, 9);
    pairs.push((a.clone(), invert(&a)));
    pairs.push((a.clone(), a.mirror_horizontal()));
    pairs.push((natural(40, 32, 10), natural(40, 32, 11)));
    pairs.push((RasterImage::filled(16, 16, [0, 0, 0]).unwrap(), RasterImage::filled(16, 16, [255, 255, 255]).unwrap()));
    pairs.push((RasterImage::filled(8, 8, [90, 90, 90]).unwrap(), natural(8, 8, 12)));
    pairs.push((natural(64, 9, 13), natural(64, 9, 13)));
    pairs
}
