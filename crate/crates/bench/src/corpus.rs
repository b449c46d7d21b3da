//! Corpus discovery and the format adapter that turns served files
//! (JPEG, PNG, WebP, PPM) into `RasterImage`s.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use log::{debug, warn};
use plc_core::raster::{RasterError, RasterImage};
use plc_core::salient::{parse_regions, Rect};

use crate::BenchError;

pub const IMAGE_EXTENSIONS: [&str; 6] = ["ppm", "png", "jpg", "jpeg", "webp", "pnm"];
pub const CATEGORIES_FILE: &str = "categories.csv";
pub const UNCATEGORIZED: &str = "uncategorized";

/// Minimum long side and short side of the corpus resolution filter.
pub const RESOLUTION_FILTER_LONG: u32 = 512;
pub const RESOLUTION_FILTER_SHORT: u32 = 256;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CorpusEntry {
    /// File name relative to the corpus directory.
    pub id: String,
    pub path: PathBuf,
    pub category: String,
    /// On-disk size of the served file, the denominator of savings.
    pub original_bytes: u64,
    /// Zero when the header could not be read; the run records an error.
    pub width: u32,
    pub height: u32,
    /// Sibling `<stem>.regions`, if present.
    pub regions: Option<Vec<Rect>>,
}

impl CorpusEntry {
    pub fn prompt_path(&self) -> PathBuf {
        self.path.with_extension("txt")
    }
}

/// True when the image is at least 512×256 in either orientation.
pub fn passes_resolution_filter(width: u32, height: u32) -> bool {
    let (long, short) = if width >= height { (width, height) } else { (height, width) };
    long >= RESOLUTION_FILTER_LONG && short >= RESOLUTION_FILTER_SHORT
}

fn is_image(path: &Path) -> bool {
    path.extension()
        .and_then(|e| e.to_str())
        .map(|e| IMAGE_EXTENSIONS.contains(&e.to_ascii_lowercase().as_str()))
        .unwrap_or(false)
}

/// Reads `file,category` rows. A missing file yields an empty map.
pub fn load_categories(dir: &Path) -> Result<BTreeMap<String, String>, BenchError> {
    let path = dir.join(CATEGORIES_FILE);
    if !path.exists() {
        return Ok(BTreeMap::new());
    }
    let mut reader = csv::Reader::from_path(&path)?;
    let mut out = BTreeMap::new();
    for record in reader.records() {
        let record = record?;
        if let (Some(file), Some(category)) = (record.get(0), record.get(1)) {
            out.insert(file.trim().to_owned(), category.trim().to_owned());
        }
    }
    Ok(out)
}

/// Lists eligible images in `dir` (non-recursive) sorted by file name.
pub fn discover(dir: &Path, resolution_filter: bool) -> Result<Vec<CorpusEntry>, BenchError> {
    let categories = load_categories(dir)?;
    let mut paths: Vec<PathBuf> = std::fs::read_dir(dir)
        .map_err(|e| BenchError::Io(dir.to_path_buf(), e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_file() && is_image(p))
        .collect();
    paths.sort();

    let mut entries = Vec::new();
    for path in paths {
        let id = path.file_name().unwrap_or_default().to_string_lossy().into_owned();
        let original_bytes = std::fs::metadata(&path).map_err(|e| BenchError::Io(path.clone(), e))?.len();
        let (width, height) = match image::image_dimensions(&path) {
            Ok(d) => d,
            Err(e) => {
                warn!("{id}: cannot read dimensions: {e}");
                (0, 0)
            }
        };
        if resolution_filter && width > 0 && !passes_resolution_filter(width, height) {
            debug!("{id}: {width}x{height} below the corpus resolution filter");
            continue;
        }
        let regions_path = path.with_extension("regions");
        let regions = if regions_path.exists() {
            let text = std::fs::read_to_string(&regions_path).map_err(|e| BenchError::Io(regions_path.clone(), e))?;
            match parse_regions(&text) {
                Ok(r) => Some(r),
                Err(e) => {
                    warn!("{id}: ignoring malformed regions file: {e}");
                    None
                }
            }
        } else {
            None
        };
        let category = categories.get(&id).cloned().unwrap_or_else(|| UNCATEGORIZED.to_owned());
        entries.push(CorpusEntry {
            id,
            path,
            category,
            original_bytes,
            width,
            height,
            regions,
        });
    }
    Ok(entries)
}

#[derive(Debug, thiserror::Error)]
pub enum AdapterError {
    #[error("decode failed: {0}")]
    Decode(#[from] image::ImageError),
    #[error("image has transparent pixels")]
    Transparent,
    #[error(transparent)]
    Raster(#[from] RasterError),
}

/// Decodes any supported container into RGB. Images with any pixel whose
/// alpha is below 255 are rejected rather than flattened.
pub fn decode_image(bytes: &[u8]) -> Result<RasterImage, AdapterError> {
    let img = image::load_from_memory(bytes)?;
    if img.color().has_alpha() && img.to_rgba8().pixels().any(|p| p.0[3] != 255) {
        return Err(AdapterError::Transparent);
    }
    let rgb = img.into_rgb8();
    let (w, h) = rgb.dimensions();
    Ok(RasterImage::new(w, h, rgb.into_raw())?)
}

pub fn load_image(path: &Path) -> Result<RasterImage, BenchError> {
    let bytes = std::fs::read(path).map_err(|e| BenchError::Io(path.to_path_buf(), e))?;
    decode_image(&bytes).map_err(|e| BenchError::Adapter(path.to_path_buf(), e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use plc_core::raster::save_ppm;

    #[test]
    fn resolution_filter_either_orientation() {
        assert!(passes_resolution_filter(512, 256));
        assert!(passes_resolution_filter(256, 512));
        assert!(passes_resolution_filter(1000, 800));
        assert!(!passes_resolution_filter(511, 511));
        assert!(!passes_resolution_filter(512, 255));
        assert!(!passes_resolution_filter(64, 64));
    }

    #[test]
    fn ppm_decodes_exactly() {
        let img = RasterImage::from_fn(5, 3, |x, y| [x as u8 * 40, y as u8 * 80, 7]).unwrap();
        assert_eq!(decode_image(&save_ppm(&img)).unwrap(), img);
    }

    #[test]
    fn transparent_png_rejected() {
        let mut buf = std::io::Cursor::new(Vec::new());
        let rgba = image::RgbaImage::from_fn(4, 4, |x, _| image::Rgba([9, 9, 9, if x == 2 { 10 } else { 255 }]));
        rgba.write_to(&mut buf, image::ImageFormat::Png).unwrap();
        assert!(matches!(decode_image(buf.get_ref()), Err(AdapterError::Transparent)));

        let mut buf = std::io::Cursor::new(Vec::new());
        let opaque = image::RgbaImage::from_fn(4, 4, |_, _| image::Rgba([9, 8, 7, 255]));
        opaque.write_to(&mut buf, image::ImageFormat::Png).unwrap();
        assert_eq!(decode_image(buf.get_ref()).unwrap().pixel(3, 3), [9, 8, 7]);
    }

    #[test]
    fn discovery_is_sorted_and_reads_siblings() {
        let dir = tempfile::tempdir().unwrap();
        let img = RasterImage::filled(600, 300, [1, 2, 3]).unwrap();
        let small = RasterImage::filled(64, 64, [1, 2, 3]).unwrap();
        std::fs::write(dir.path().join("b.ppm"), save_ppm(&img)).unwrap();
        std::fs::write(dir.path().join("a.ppm"), save_ppm(&small)).unwrap();
        std::fs::write(dir.path().join("a.regions"), "0,0,64,64\n").unwrap();
        std::fs::write(dir.path().join("notes.md"), "x").unwrap();
        std::fs::write(dir.path().join(CATEGORIES_FILE), "file,category\nb.ppm,news\n").unwrap();

        let all = discover(dir.path(), false).unwrap();
        let ids: Vec<&str> = all.iter().map(|e| e.id.as_str()).collect();
        assert_eq!(ids, ["a.ppm", "b.ppm"]);
        assert_eq!(all[0].regions, Some(vec![Rect::new(0, 0, 64, 64)]));
        assert_eq!(all[0].category, UNCATEGORIZED);
        assert_eq!(all[1].category, "news");
        assert_eq!((all[1].width, all[1].height), (600, 300));
        assert_eq!(all[1].original_bytes, save_ppm(&img).len() as u64);

        let filtered = discover(dir.path(), true).unwrap();
        assert_eq!(filtered.len(), 1);
        assert_eq!(filtered[0].id, "b.ppm");
    }
}
