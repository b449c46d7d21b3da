//! Deterministic reconstruction of a bundle without any generative model:
//! bilinear color-grid base, nearest-neighbor edge overlay, salient patches
//! pasted on top.

use thiserror::Error;

use crate::bilevel::{decode_bitimage, BilevelError};
use crate::bundle::{Bundle, SectionTag};
use crate::colorgrid::{cell_span, decode_grid, ColorGrid, GridError};
use crate::raster::{BitImage, RasterError, RasterImage};
use crate::salient::{decode_section, SalientError};

pub const MID_GRAY: u8 = 128;

#[derive(Debug, Error)]
pub enum PreviewError {
    #[error("canny section: {0}")]
    Canny(#[from] BilevelError),
    #[error("color grid section: {0}")]
    Grid(#[from] GridError),
    #[error("salient section: {0}")]
    Salient(#[from] SalientError),
    #[error("invalid output size: {0}")]
    Size(#[from] RasterError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PreviewParams {
    pub edge_overlay_value: u8,
    /// Defaults to the bundle's original dimensions.
    pub output_size: Option<(u32, u32)>,
}

impl Default for PreviewParams {
    fn default() -> Self {
        Self {
            edge_overlay_value: 32,
            output_size: None,
        }
    }
}

/// Per output coordinate: the two grid cells to blend and the weight of
/// the second one.
fn axis_weights(cells: u32, len: u32) -> Vec<(usize, usize, f64)> {
    let centers: Vec<f64> = (0..cells)
        .map(|i| {
            let (a, b) = cell_span(i, cells, len);
            (a as f64 + b as f64) / 2.0
        })
        .collect();
    let last = cells as usize - 1;
    (0..len)
        .map(|p| {
            let c = p as f64 + 0.5;
            if c <= centers[0] {
                return (0, 0, 0.0);
            }
            if c >= centers[last] {
                return (last, last, 0.0);
            }
            // first center strictly greater than c
            let hi = centers.partition_point(|&v| v <= c);
            let lo = hi - 1;
            let t = (c - centers[lo]) / (centers[hi] - centers[lo]);
            (lo, hi, t)
        })
        .collect()
}

/// Bilinear upsample with cell centers at the centers of the floor
/// partition used by grid extraction; clamps beyond the outer centers.
pub fn upsample_grid(grid: &ColorGrid, width: u32, height: u32) -> Result<RasterImage, RasterError> {
    let wx = axis_weights(grid.grid_w(), width);
    let wy = axis_weights(grid.grid_h(), height);
    let gw = grid.grid_w() as usize;
    let cells = grid.cells();
    RasterImage::from_fn(width, height, |x, y| {
        let (x0, x1, tx) = wx[x as usize];
        let (y0, y1, ty) = wy[y as usize];
        let mut out = [0u8; 3];
        for (c, slot) in out.iter_mut().enumerate() {
            let v = |cx: usize, cy: usize| cells[cy * gw + cx][c] as f64;
            let top = v(x0, y0) * (1.0 - tx) + v(x1, y0) * tx;
            let bottom = v(x0, y1) * (1.0 - tx) + v(x1, y1) * tx;
            let value = top * (1.0 - ty) + bottom * ty;
            *slot = (value + 0.5).floor().clamp(0.0, 255.0) as u8;
        }
        out
    })
}

/// Replaces every pixel whose nearest-neighbor edge sample is set.
pub fn overlay_edges(canvas: &mut RasterImage, edges: &BitImage, value: u8) {
    let (w, h) = (canvas.width() as u64, canvas.height() as u64);
    let (ew, eh) = (edges.width() as u64, edges.height() as u64);
    for y in 0..h {
        let sy = (y * eh / h) as u32;
        for x in 0..w {
            let sx = (x * ew / w) as u32;
            if edges.get(sx, sy) {
                canvas.set_pixel(x as u32, y as u32, [value; 3]);
            }
        }
    }
}

pub fn preview_reconstruct(bundle: &Bundle, params: &PreviewParams) -> Result<RasterImage, PreviewError> {
    let (width, height) = params
        .output_size
        .unwrap_or((bundle.original_width, bundle.original_height));

    let mut canvas = match bundle.section(SectionTag::ColorGrid) {
        Some(bytes) => upsample_grid(&decode_grid(bytes)?, width, height)?,
        None => RasterImage::filled(width, height, [MID_GRAY; 3])?,
    };

    if let Some(bytes) = bundle.section(SectionTag::Canny) {
        let edges = decode_bitimage(bytes)?;
        overlay_edges(&mut canvas, &edges, params.edge_overlay_value);
    }

    if let Some(bytes) = bundle.section(SectionTag::Salient) {
        for region in decode_section(bytes)? {
            let patch = region.decode_patch()?;
            let r = region.rect;
            for py in 0..r.h {
                for px in 0..r.w {
                    let (x, y) = (r.x as u64 + px as u64, r.y as u64 + py as u64);
                    if x < width as u64 && y < height as u64 {
                        canvas.set_pixel(x as u32, y as u32, patch.pixel(px, py));
                    }
                }
            }
        }
    }
    Ok(canvas)
}
