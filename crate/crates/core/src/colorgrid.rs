//! Low-resolution color grid: cell-averaged colors plus a compact stream
//! encoding (raw RGB888 or a median-cut palette of at most 16 colors).

use thiserror::Error;

use crate::raster::RasterImage;

pub const HEADER_LEN: usize = 5;
pub const MODE_RAW: u8 = 0;
pub const MODE_PALETTE: u8 = 1;
pub const MAX_PALETTE: usize = 16;
/// Palette mode is only allowed when the mean squared RGB distance between
/// cells and their palette entries is at most this.
pub const MAX_PALETTE_MSE: f64 = 100.0;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum GridError {
    #[error("grid {grid_w}x{grid_h} larger than image {width}x{height}")]
    GridLargerThanImage {
        grid_w: u32,
        grid_h: u32,
        width: u32,
        height: u32,
    },
    #[error("grid dimensions must be between 1 and 65535, got {0}x{1}")]
    InvalidGridSize(u32, u32),
    #[error("bad color grid header: {0}")]
    BadHeader(String),
    #[error("unknown color grid mode {0}")]
    BadMode(u8),
    #[error("color grid payload truncated")]
    TruncatedPayload,
    #[error("bad palette: {0}")]
    BadPalette(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ColorGrid {
    grid_w: u32,
    grid_h: u32,
    cells: Vec<[u8; 3]>,
}

impl ColorGrid {
    pub fn new(grid_w: u32, grid_h: u32, cells: Vec<[u8; 3]>) -> Result<Self, GridError> {
        if !(1..=u16::MAX as u32).contains(&grid_w) || !(1..=u16::MAX as u32).contains(&grid_h) {
            return Err(GridError::InvalidGridSize(grid_w, grid_h));
        }
        if cells.len() != grid_w as usize * grid_h as usize {
            return Err(GridError::BadHeader(format!(
                "{} cells for a {grid_w}x{grid_h} grid",
                cells.len()
            )));
        }
        Ok(Self {
            grid_w,
            grid_h,
            cells,
        })
    }

    pub fn grid_w(&self) -> u32 {
        self.grid_w
    }

    pub fn grid_h(&self) -> u32 {
        self.grid_h
    }

    pub fn cells(&self) -> &[[u8; 3]] {
        &self.cells
    }

    pub fn cell(&self, i: u32, j: u32) -> [u8; 3] {
        self.cells[j as usize * self.grid_w as usize + i as usize]
    }

    pub fn mirror_horizontal(&self) -> Self {
        let cells = (0..self.grid_h)
            .flat_map(|j| (0..self.grid_w).rev().map(move |i| (i, j)))
            .map(|(i, j)| self.cell(i, j))
            .collect();
        Self {
            grid_w: self.grid_w,
            grid_h: self.grid_h,
            cells,
        }
    }
}

/// Pixel span `[start, end)` covered by cell `index` of `cells` along an
/// axis of length `len`.
#[inline]
pub fn cell_span(index: u32, cells: u32, len: u32) -> (u32, u32) {
    let start = (index as u64 * len as u64 / cells as u64) as u32;
    let end = ((index as u64 + 1) * len as u64 / cells as u64) as u32;
    (start, end)
}

/// Per-cell channel means over a floor-partitioned grid, rounded half up.
pub fn extract_grid(image: &RasterImage, grid_w: u32, grid_h: u32) -> Result<ColorGrid, GridError> {
    if grid_w == 0 || grid_h == 0 || grid_w > u16::MAX as u32 || grid_h > u16::MAX as u32 {
        return Err(GridError::InvalidGridSize(grid_w, grid_h));
    }
    let (width, height) = (image.width(), image.height());
    if grid_w > width || grid_h > height {
        return Err(GridError::GridLargerThanImage {
            grid_w,
            grid_h,
            width,
            height,
        });
    }
    let mut cells = Vec::with_capacity(grid_w as usize * grid_h as usize);
    for j in 0..grid_h {
        let (y0, y1) = cell_span(j, grid_h, height);
        for i in 0..grid_w {
            let (x0, x1) = cell_span(i, grid_w, width);
            let mut sum = [0u64; 3];
            for y in y0..y1 {
                for x in x0..x1 {
                    let p = image.pixel(x, y);
                    for c in 0..3 {
                        sum[c] += p[c] as u64;
                    }
                }
            }
            let n = (x1 - x0) as u64 * (y1 - y0) as u64;
            cells.push(sum.map(|s| ((2 * s + n) / (2 * n)) as u8));
        }
    }
    ColorGrid::new(grid_w, grid_h, cells)
}

fn dist2(a: [u8; 3], b: [u8; 3]) -> u32 {
    (0..3)
        .map(|c| {
            let d = a[c] as i32 - b[c] as i32;
            (d * d) as u32
        })
        .sum()
}

/// Median-cut quantization of `colors` to at most `max_colors` entries.
///
/// The box with the widest channel range is split at its median along that
/// channel; ties go to channel R, then G, then B, then the lowest box index.
/// Palette entries are box means rounded half up.
pub fn median_cut(colors: &[[u8; 3]], max_colors: usize) -> Vec<[u8; 3]> {
    if colors.is_empty() || max_colors == 0 {
        return Vec::new();
    }
    let mut boxes: Vec<Vec<[u8; 3]>> = vec![colors.to_vec()];
    while boxes.len() < max_colors {
        let mut best: Option<(u8, usize, usize)> = None; // (range, box, channel)
        for (b, colors) in boxes.iter().enumerate() {
            if colors.len() < 2 {
                continue;
            }
            for c in 0..3 {
                let lo = colors.iter().map(|p| p[c]).min().unwrap();
                let hi = colors.iter().map(|p| p[c]).max().unwrap();
                let range = hi - lo;
                let better = match best {
                    None => true,
                    Some((r, bb, bc)) => range > r || (range == r && (c, b) < (bc, bb)),
                };
                if better {
                    best = Some((range, b, c));
                }
            }
        }
        let Some((range, b, c)) = best else { break };
        if range == 0 {
            break;
        }
        let mut target = std::mem::take(&mut boxes[b]);
        target.sort_by_key(|p| (p[c], *p));
        let upper = target.split_off(target.len() / 2);
        boxes[b] = target;
        boxes.push(upper);
    }
    boxes
        .iter()
        .map(|colors| {
            let n = colors.len() as u64;
            let mut sum = [0u64; 3];
            for p in colors {
                for c in 0..3 {
                    sum[c] += p[c] as u64;
                }
            }
            sum.map(|s| ((2 * s + n) / (2 * n)) as u8)
        })
        .collect()
}

/// Index of the nearest palette entry (lowest index wins ties).
pub fn nearest(palette: &[[u8; 3]], color: [u8; 3]) -> usize {
    palette
        .iter()
        .enumerate()
        .min_by_key(|(i, p)| (dist2(**p, color), *i))
        .map(|(i, _)| i)
        .expect("non-empty palette")
}

fn header(grid: &ColorGrid, mode: u8) -> Vec<u8> {
    let mut out = Vec::with_capacity(HEADER_LEN + grid.cells.len() * 3);
    out.extend_from_slice(&(grid.grid_w as u16).to_be_bytes());
    out.extend_from_slice(&(grid.grid_h as u16).to_be_bytes());
    out.push(mode);
    out
}

pub fn encode_raw(grid: &ColorGrid) -> Vec<u8> {
    let mut out = header(grid, MODE_RAW);
    for cell in &grid.cells {
        out.extend_from_slice(cell);
    }
    out
}

/// Palette stream and its mean squared assignment error.
pub fn encode_palette(grid: &ColorGrid) -> (Vec<u8>, f64) {
    let palette = median_cut(&grid.cells, MAX_PALETTE);
    let indices: Vec<usize> = grid.cells.iter().map(|&c| nearest(&palette, c)).collect();
    let err: u64 = grid
        .cells
        .iter()
        .zip(&indices)
        .map(|(&c, &i)| dist2(c, palette[i]) as u64)
        .sum();
    let mse = err as f64 / grid.cells.len() as f64;

    let mut out = header(grid, MODE_PALETTE);
    out.push(palette.len() as u8);
    for p in &palette {
        out.extend_from_slice(p);
    }
    for pair in indices.chunks(2) {
        let hi = pair[0] as u8;
        let lo = pair.get(1).copied().unwrap_or(0) as u8;
        out.push(hi << 4 | lo);
    }
    (out, mse)
}

/// Picks the smaller of the raw and palette streams; palette only when its
/// error is within [`MAX_PALETTE_MSE`], raw on equal size.
pub fn encode_grid(grid: &ColorGrid) -> Vec<u8> {
    let raw = encode_raw(grid);
    let (palette, mse) = encode_palette(grid);
    if mse <= MAX_PALETTE_MSE && palette.len() < raw.len() {
        palette
    } else {
        raw
    }
}

pub fn decode_grid(bytes: &[u8]) -> Result<ColorGrid, GridError> {
    if bytes.len() < HEADER_LEN {
        return Err(GridError::BadHeader(format!(
            "need {HEADER_LEN} header bytes, got {}",
            bytes.len()
        )));
    }
    let grid_w = u16::from_be_bytes([bytes[0], bytes[1]]) as u32;
    let grid_h = u16::from_be_bytes([bytes[2], bytes[3]]) as u32;
    if grid_w == 0 || grid_h == 0 {
        return Err(GridError::BadHeader(format!("empty grid {grid_w}x{grid_h}")));
    }
    let n = grid_w as usize * grid_h as usize;
    let payload = &bytes[HEADER_LEN..];
    let cells = match bytes[4] {
        MODE_RAW => {
            if payload.len() < n * 3 {
                return Err(GridError::TruncatedPayload);
            }
            payload[..n * 3]
                .chunks_exact(3)
                .map(|c| [c[0], c[1], c[2]])
                .collect()
        }
        MODE_PALETTE => {
            let (&size, rest) = payload.split_first().ok_or(GridError::TruncatedPayload)?;
            let size = size as usize;
            if size == 0 || size > MAX_PALETTE {
                return Err(GridError::BadPalette(format!("palette size {size}")));
            }
            if rest.len() < size * 3 + n.div_ceil(2) {
                return Err(GridError::TruncatedPayload);
            }
            let palette: Vec<[u8; 3]> = rest[..size * 3]
                .chunks_exact(3)
                .map(|c| [c[0], c[1], c[2]])
                .collect();
            let packed = &rest[size * 3..];
            (0..n)
                .map(|k| {
                    let byte = packed[k / 2];
                    let idx = if k % 2 == 0 { byte >> 4 } else { byte & 0x0f } as usize;
                    palette
                        .get(idx)
                        .copied()
                        .ok_or_else(|| GridError::BadPalette(format!("index {idx} >= {size}")))
                })
                .collect::<Result<_, _>>()?
        }
        other => return Err(GridError::BadMode(other)),
    };
    ColorGrid::new(grid_w, grid_h, cells)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_image_gives_uniform_grid() {
        let img = RasterImage::filled(50, 37, [255, 0, 0]).unwrap();
        let g = extract_grid(&img, 8, 5).unwrap();
        assert!(g.cells().iter().all(|&c| c == [255, 0, 0]));
    }

    #[test]
    fn quadrants_map_to_cells() {
        let colors = [[10, 20, 30], [200, 0, 0], [0, 200, 0], [1, 2, 250]];
        let img = RasterImage::from_fn(4, 4, |x, y| colors[(y / 2 * 2 + x / 2) as usize]).unwrap();
        let g = extract_grid(&img, 2, 2).unwrap();
        assert_eq!(g.cells(), &colors);
    }

    #[test]
    fn floor_partition_on_odd_size() {
        assert_eq!(cell_span(0, 2, 3), (0, 1));
        assert_eq!(cell_span(1, 2, 3), (1, 3));
        let img = RasterImage::from_fn(3, 3, |x, y| [(x * 3 + y) as u8 * 10, 0, 0]).unwrap();
        let g = extract_grid(&img, 2, 2).unwrap();
        assert_eq!(g.cell(0, 0), [0, 0, 0]);
        // columns 1..3, rows 1..3: values 40, 50, 70, 80 -> mean 60
        assert_eq!(g.cell(1, 1), [60, 0, 0]);
    }

    #[test]
    fn means_round_half_up() {
        let img = RasterImage::from_fn(2, 1, |x, _| if x == 0 { [1, 0, 0] } else { [2, 1, 0] }).unwrap();
        let g = extract_grid(&img, 1, 1).unwrap();
        assert_eq!(g.cell(0, 0), [2, 1, 0]);
    }

    #[test]
    fn grid_larger_than_image() {
        let img = RasterImage::filled(4, 4, [0; 3]).unwrap();
        assert!(matches!(extract_grid(&img, 5, 2), Err(GridError::GridLargerThanImage { .. })));
    }

    #[test]
    fn raw_stream_size() {
        let g = ColorGrid::new(32, 32, (0..1024).map(|i| [i as u8, (i >> 2) as u8, 7]).collect()).unwrap();
        let raw = encode_raw(&g);
        assert_eq!(raw.len(), 5 + 3072);
        assert_eq!(raw[4], MODE_RAW);
        assert_eq!(decode_grid(&raw).unwrap(), g);
    }

    #[test]
    fn single_color_grid_uses_palette() {
        let g = ColorGrid::new(32, 32, vec![[12, 34, 56]; 1024]).unwrap();
        let bytes = encode_grid(&g);
        assert_eq!(bytes.len(), 521);
        assert_eq!(bytes[4], MODE_PALETTE);
        assert_eq!(bytes[5], 1);
        assert_eq!(decode_grid(&bytes).unwrap(), g);
    }

    #[test]
    fn gradient_grid_falls_back_to_raw() {
        let cells = (0..32u32)
            .flat_map(|j| (0..32u32).map(move |i| [(i * 8) as u8, (j * 8) as u8, ((i + j) * 4) as u8]))
            .collect();
        let g = ColorGrid::new(32, 32, cells).unwrap();
        let (_, mse) = encode_palette(&g);
        assert!(mse > MAX_PALETTE_MSE, "mse {mse}");
        let bytes = encode_grid(&g);
        assert_eq!(bytes[4], MODE_RAW);
    }

    #[test]
    fn median_cut_tie_breaking() {
        // equal R and G ranges: R wins; both halves are split at the median
        let colors = [[0, 0, 0], [10, 10, 0], [0, 10, 0], [10, 0, 0]];
        let p = median_cut(&colors, 2);
        assert_eq!(p, vec![[0, 5, 0], [10, 5, 0]]);
        assert_eq!(median_cut(&[[5, 5, 5]; 10], 16), vec![[5, 5, 5]]);
    }

    #[test]
    fn decode_errors() {
        let g = ColorGrid::new(4, 4, vec![[1, 2, 3]; 16]).unwrap();
        let bytes = encode_grid(&g);
        assert_eq!(bytes[4], MODE_PALETTE);
        assert_eq!(decode_grid(&bytes[..bytes.len() - 1]), Err(GridError::TruncatedPayload));
        assert_eq!(decode_grid(&bytes[..7]), Err(GridError::TruncatedPayload));
        assert!(matches!(decode_grid(&bytes[..3]), Err(GridError::BadHeader(_))));
        let mut bad = bytes.clone();
        bad[4] = 9;
        assert_eq!(decode_grid(&bad), Err(GridError::BadMode(9)));
        let mut bad_index = bytes.clone();
        *bad_index.last_mut().unwrap() = 0x11;
        assert!(matches!(decode_grid(&bad_index), Err(GridError::BadPalette(_))));
        let raw = encode_raw(&g);
        assert_eq!(decode_grid(&raw[..raw.len() - 2]), Err(GridError::TruncatedPayload));
    }

    #[test]
    fn mirror_commutes_with_extraction() {
        // floor partitions are mirror-symmetric when the grid divides the width
        let img = RasterImage::from_fn(40, 23, |x, y| [(x * 7) as u8, (y * 11) as u8, (x ^ y) as u8]).unwrap();
        for (gw, gh) in [(5, 3), (8, 16), (40, 23), (1, 1), (20, 7)] {
            let a = extract_grid(&img.mirror_horizontal(), gw, gh).unwrap();
            let b = extract_grid(&img, gw, gh).unwrap().mirror_horizontal();
            assert_eq!(a, b, "grid {gw}x{gh}");
        }
    }
}
