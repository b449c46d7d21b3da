//! Similarity metrics: windowed SSIM on luma, and embedding cosine
//! similarity with either a built-in gradient-histogram embedder or an
//! external embedding process speaking a line protocol over stdio.

use std::io::{BufRead, BufReader, Write};
use std::path::Path;
use std::process::{Child, ChildStdin, ChildStdout, Command, Stdio};

use thiserror::Error;

use crate::raster::{save_ppm, to_luma, RasterImage};

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("image {width}x{height} smaller than the {window}x{window} SSIM window")]
    ImageTooSmall { width: u32, height: u32, window: u32 },
    #[error("embedding provider: {0}")]
    Provider(String),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

/// Uniform-window SSIM settings. The defaults are the fixed comparison
/// settings; changing them makes scores incomparable.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SsimParams {
    pub window: u32,
    pub stride: u32,
    pub c1: f64,
    pub c2: f64,
}

impl Default for SsimParams {
    fn default() -> Self {
        Self {
            window: 8,
            stride: 1,
            c1: (0.01 * 255.0f64).powi(2),
            c2: (0.03 * 255.0f64).powi(2),
        }
    }
}

/// Summed-area tables over luma, luma² and the cross product, with a zero
/// first row and column. Sums are exact integers.
struct Integrals {
    stride: usize,
    a: Vec<u64>,
    b: Vec<u64>,
    aa: Vec<u64>,
    bb: Vec<u64>,
    ab: Vec<u64>,
}

impl Integrals {
    fn new(a: &[u8], b: &[u8], width: usize, height: usize) -> Self {
        let stride = width + 1;
        let n = stride * (height + 1);
        let mut t = Integrals {
            stride,
            a: vec![0; n],
            b: vec![0; n],
            aa: vec![0; n],
            bb: vec![0; n],
            ab: vec![0; n],
        };
        for y in 0..height {
            let mut row = [0u64; 5];
            for x in 0..width {
                let pa = a[y * width + x] as u64;
                let pb = b[y * width + x] as u64;
                row[0] += pa;
                row[1] += pb;
                row[2] += pa * pa;
                row[3] += pb * pb;
                row[4] += pa * pb;
                let i = (y + 1) * stride + x + 1;
                let up = y * stride + x + 1;
                t.a[i] = t.a[up] + row[0];
                t.b[i] = t.b[up] + row[1];
                t.aa[i] = t.aa[up] + row[2];
                t.bb[i] = t.bb[up] + row[3];
                t.ab[i] = t.ab[up] + row[4];
            }
        }
        t
    }

    fn rect(table: &[u64], stride: usize, x: usize, y: usize, w: usize, h: usize) -> u64 {
        let i = |xx: usize, yy: usize| table[yy * stride + xx];
        i(x + w, y + h) + i(x, y) - i(x + w, y) - i(x, y + h)
    }
}

/// SSIM of one window from its exact sums over `n` pixels.
#[inline]
#[allow(clippy::too_many_arguments)]
pub fn ssim_from_sums(n: f64, sa: f64, sb: f64, saa: f64, sbb: f64, sab: f64, c1: f64, c2: f64) -> f64 {
    let mu_a = sa / n;
    let mu_b = sb / n;
    let var_a = saa / n - mu_a * mu_a;
    let var_b = sbb / n - mu_b * mu_b;
    let cov = sab / n - mu_a * mu_b;
    ((2.0 * mu_a * mu_b + c1) * (2.0 * cov + c2)) / ((mu_a * mu_a + mu_b * mu_b + c1) * (var_a + var_b + c2))
}

/// Mean SSIM over all `window`×`window` windows (stride 1 by default) of
/// the two images' luma planes.
pub fn ssim(a: &RasterImage, b: &RasterImage, params: &SsimParams) -> Result<f64, MetricsError> {
    if (a.width(), a.height()) != (b.width(), b.height()) {
        return Err(MetricsError::DimensionMismatch(format!(
            "{}x{} vs {}x{}",
            a.width(),
            a.height(),
            b.width(),
            b.height()
        )));
    }
    let win = params.window;
    if a.width() < win || a.height() < win {
        return Err(MetricsError::ImageTooSmall {
            width: a.width(),
            height: a.height(),
            window: win,
        });
    }
    let (w, h) = (a.width() as usize, a.height() as usize);
    let la = to_luma(a);
    let lb = to_luma(b);
    let t = Integrals::new(la.samples(), lb.samples(), w, h);
    let win = win as usize;
    let step = params.stride.max(1) as usize;
    let n = (win * win) as f64;
    let mut total = 0.0;
    let mut count = 0usize;
    for y in (0..=h - win).step_by(step) {
        for x in (0..=w - win).step_by(step) {
            let s = |tab: &[u64]| Integrals::rect(tab, t.stride, x, y, win, win) as f64;
            total += ssim_from_sums(n, s(&t.a), s(&t.b), s(&t.aa), s(&t.bb), s(&t.ab), params.c1, params.c2);
            count += 1;
        }
    }
    Ok(total / count as f64)
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingVector {
    values: Vec<f64>,
}

impl EmbeddingVector {
    /// L2-normalizes `values`; fails on an all-zero or non-finite vector.
    pub fn normalized(values: Vec<f64>) -> Result<Self, MetricsError> {
        if values.is_empty() || values.iter().any(|v| !v.is_finite()) {
            return Err(MetricsError::Provider("embedding is empty or not finite".into()));
        }
        let norm = values.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm == 0.0 {
            return Err(MetricsError::Provider("embedding has zero norm".into()));
        }
        Ok(Self {
            values: values.into_iter().map(|v| v / norm).collect(),
        })
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

pub fn cosine_similarity(u: &EmbeddingVector, v: &EmbeddingVector) -> Result<f64, MetricsError> {
    if u.dim() != v.dim() {
        return Err(MetricsError::DimensionMismatch(format!("{} vs {}", u.dim(), v.dim())));
    }
    Ok(u.values.iter().zip(&v.values).map(|(a, b)| a * b).sum())
}

pub trait EmbeddingProvider {
    fn embed(&mut self, image: &RasterImage) -> Result<EmbeddingVector, MetricsError>;
}

pub const BUILTIN_SIZE: usize = 224;
pub const BUILTIN_DIM: usize = 384;
const BLOCKS: usize = 4;
const BINS: usize = 8;

/// Real-valued luma plane.
struct Plane {
    size: usize,
    data: Vec<f64>,
}

impl Plane {
    fn at(&self, x: i64, y: i64) -> f64 {
        let c = |v: i64| v.clamp(0, self.size as i64 - 1) as usize;
        self.data[c(y) * self.size + c(x)]
    }

    fn halve(&self) -> Plane {
        let size = self.size / 2;
        let mut data = Vec::with_capacity(size * size);
        for y in 0..size {
            for x in 0..size {
                let i = 2 * y * self.size + 2 * x;
                data.push((self.data[i] + self.data[i + 1] + self.data[i + self.size] + self.data[i + self.size + 1]) / 4.0);
            }
        }
        Plane { size, data }
    }
}

/// Bilinear resample of the image's luma to a `size`×`size` plane, with
/// pixel centers aligned and border clamping.
fn resize_luma(image: &RasterImage, size: usize) -> Plane {
    let luma = to_luma(image);
    let (sw, sh) = (luma.width() as usize, luma.height() as usize);
    let map = |dst: usize, src_len: usize| {
        let s = (dst as f64 + 0.5) * src_len as f64 / size as f64 - 0.5;
        let s = s.clamp(0.0, (src_len - 1) as f64);
        let i0 = s.floor() as usize;
        let i1 = (i0 + 1).min(src_len - 1);
        (i0, i1, s - i0 as f64)
    };
    let xs: Vec<_> = (0..size).map(|x| map(x, sw)).collect();
    let ys: Vec<_> = (0..size).map(|y| map(y, sh)).collect();
    let px = |x: usize, y: usize| luma.get(x as u32, y as u32) as f64;
    let mut data = Vec::with_capacity(size * size);
    for &(y0, y1, ty) in &ys {
        for &(x0, x1, tx) in &xs {
            let top = px(x0, y0) * (1.0 - tx) + px(x1, y0) * tx;
            let bottom = px(x0, y1) * (1.0 - tx) + px(x1, y1) * tx;
            data.push(top * (1.0 - ty) + bottom * ty);
        }
    }
    Plane { size, data }
}

/// 4×4 blocks of 8-bin, magnitude-weighted gradient orientation histograms
/// (orientation over the full circle), each block L2-normalized.
fn block_histograms(plane: &Plane) -> Vec<f64> {
    let block = plane.size / BLOCKS;
    let mut hist = vec![0.0; BLOCKS * BLOCKS * BINS];
    for y in 0..plane.size as i64 {
        for x in 0..plane.size as i64 {
            let p = |dx: i64, dy: i64| plane.at(x + dx, y + dy);
            let gx = (p(1, -1) + 2.0 * p(1, 0) + p(1, 1)) - (p(-1, -1) + 2.0 * p(-1, 0) + p(-1, 1));
            let gy = (p(-1, 1) + 2.0 * p(0, 1) + p(1, 1)) - (p(-1, -1) + 2.0 * p(0, -1) + p(1, -1));
            let mag = (gx * gx + gy * gy).sqrt();
            if mag == 0.0 {
                continue;
            }
            let angle = gy.atan2(gx).rem_euclid(std::f64::consts::TAU);
            let bin = ((angle / std::f64::consts::TAU * BINS as f64) as usize).min(BINS - 1);
            let b = (y as usize / block) * BLOCKS + x as usize / block;
            hist[b * BINS + bin] += mag;
        }
    }
    for chunk in hist.chunks_mut(BINS) {
        let norm = chunk.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm > 0.0 {
            chunk.iter_mut().for_each(|v| *v /= norm);
        }
    }
    hist
}

/// Deterministic 384-dimensional gradient-orientation embedding at three
/// scales (224, 112, 56). Images without any gradient map to the uniform
/// vector.
pub fn embed_builtin(image: &RasterImage) -> EmbeddingVector {
    let full = resize_luma(image, BUILTIN_SIZE);
    let half = full.halve();
    let quarter = half.halve();
    let mut values = Vec::with_capacity(BUILTIN_DIM);
    for plane in [&full, &half, &quarter] {
        values.extend(block_histograms(plane));
    }
    EmbeddingVector::normalized(values).unwrap_or_else(|_| EmbeddingVector {
        values: vec![1.0 / (BUILTIN_DIM as f64).sqrt(); BUILTIN_DIM],
    })
}

#[derive(Debug, Default, Clone, Copy)]
pub struct BuiltinEmbedder;

impl EmbeddingProvider for BuiltinEmbedder {
    fn embed(&mut self, image: &RasterImage) -> Result<EmbeddingVector, MetricsError> {
        Ok(embed_builtin(image))
    }
}

/// Parses one provider response line: `OK <dim> <v0> ... <vdim-1>` or
/// `ERR <message>`.
pub fn parse_response(line: &str) -> Result<EmbeddingVector, MetricsError> {
    let line = line.trim_end_matches(['\r', '\n']);
    if let Some(msg) = line.strip_prefix("ERR") {
        return Err(MetricsError::Provider(msg.trim().to_owned()));
    }
    let mut fields = line
        .strip_prefix("OK ")
        .ok_or_else(|| MetricsError::Provider(format!("malformed response: {line:.60}")))?
        .split_ascii_whitespace();
    let dim: usize = fields
        .next()
        .and_then(|d| d.parse().ok())
        .ok_or_else(|| MetricsError::Provider("missing dimension".into()))?;
    let values = fields
        .map(|f| f.parse::<f64>().map_err(|_| MetricsError::Provider(format!("bad value {f:?}"))))
        .collect::<Result<Vec<_>, _>>()?;
    if values.len() != dim {
        return Err(MetricsError::Provider(format!(
            "declared dimension {dim}, got {} values",
            values.len()
        )));
    }
    EmbeddingVector::normalized(values)
}

/// Spawned embedding process: one request line `EMBED <path>` per image,
/// one response line back. Requests are serialized.
pub struct ExternalEmbedder {
    child: Child,
    stdin: ChildStdin,
    stdout: BufReader<ChildStdout>,
    dim: Option<usize>,
}

impl ExternalEmbedder {
    /// Runs `command` through `sh -c`.
    pub fn spawn(command: &str) -> Result<Self, MetricsError> {
        let mut child = Command::new("sh")
            .arg("-c")
            .arg(command)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .spawn()
            .map_err(|e| MetricsError::Provider(format!("cannot start {command:?}: {e}")))?;
        let stdin = child.stdin.take().expect("piped stdin");
        let stdout = BufReader::new(child.stdout.take().expect("piped stdout"));
        Ok(Self {
            child,
            stdin,
            stdout,
            dim: None,
        })
    }

    pub fn embed_path(&mut self, path: &Path) -> Result<EmbeddingVector, MetricsError> {
        let path = path.to_str().ok_or_else(|| MetricsError::Provider("path is not UTF-8".into()))?;
        if path.contains('\n') {
            return Err(MetricsError::Provider("path contains a newline".into()));
        }
        writeln!(self.stdin, "EMBED {path}")?;
        self.stdin.flush()?;
        let mut line = String::new();
        if self.stdout.read_line(&mut line)? == 0 {
            return Err(MetricsError::Provider("provider closed its output".into()));
        }
        let v = parse_response(&line)?;
        match self.dim {
            Some(d) if d != v.dim() => {
                return Err(MetricsError::Provider(format!("dimension changed from {d} to {}", v.dim())))
            }
            _ => self.dim = Some(v.dim()),
        }
        Ok(v)
    }
}

impl EmbeddingProvider for ExternalEmbedder {
    /// Writes the image to a temporary PPM and asks the provider for it.
    fn embed(&mut self, image: &RasterImage) -> Result<EmbeddingVector, MetricsError> {
        let mut file = tempfile::Builder::new().suffix(".ppm").tempfile()?;
        file.write_all(&save_ppm(image))?;
        file.flush()?;
        self.embed_path(file.path())
    }
}

impl Drop for ExternalEmbedder {
    fn drop(&mut self) {
        let _ = self.child.kill();
        let _ = self.child.wait();
    }
}
