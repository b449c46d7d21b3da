//! Builds bundles from images according to one of four conditioning
//! strategies, each adding one more section on top of the previous one.

use std::path::{Path, PathBuf};

use log::warn;
use thiserror::Error;

use crate::bilevel::encode_bitimage;
use crate::bundle::{savings_report, Bundle, SavingsReport, Section, SectionTag};
use crate::colorgrid::{encode_grid, extract_grid, GridError};
use crate::edgemap::{canny, CannyParams, EdgeError};
use crate::raster::{to_luma, RasterImage};
use crate::salient::{crop_patch, encode_section, validate_regions, Rect, SalientError};

pub const MIN_DIMENSION: u32 = 64;
pub const MAX_PROMPT_BYTES: usize = 4096;

#[derive(Debug, Error)]
pub enum EncodeError {
    #[error("image {width}x{height} is below the {MIN_DIMENSION}x{MIN_DIMENSION} minimum")]
    ImageTooSmall { width: u32, height: u32 },
    #[error("prompt is empty")]
    EmptyPrompt,
    #[error("prompt is {0} bytes, limit is {MAX_PROMPT_BYTES}")]
    PromptTooLong(usize),
    #[error("salient strategy needs at least one region")]
    MissingRegions,
    #[error(transparent)]
    Edge(#[from] EdgeError),
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error(transparent)]
    Salient(#[from] SalientError),
    #[error(transparent)]
    Bundle(#[from] crate::bundle::BundleError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Strategy {
    PromptOnly,
    PromptCanny,
    PromptCannyColor,
    SalientFeatures,
}

impl Strategy {
    pub const ALL: [Strategy; 4] = [
        Strategy::PromptOnly,
        Strategy::PromptCanny,
        Strategy::PromptCannyColor,
        Strategy::SalientFeatures,
    ];

    /// Sections a bundle built with this strategy carries.
    pub fn sections(self) -> &'static [SectionTag] {
        use SectionTag::*;
        match self {
            Strategy::PromptOnly => &[Prompt],
            Strategy::PromptCanny => &[Prompt, Canny],
            Strategy::PromptCannyColor => &[Prompt, Canny, ColorGrid],
            Strategy::SalientFeatures => &[Prompt, Canny, ColorGrid, Salient],
        }
    }

    /// Short name used on the command line and in reports.
    pub fn as_str(self) -> &'static str {
        match self {
            Strategy::PromptOnly => "prompt",
            Strategy::PromptCanny => "canny",
            Strategy::PromptCannyColor => "canny-color",
            Strategy::SalientFeatures => "salient",
        }
    }

    fn has(self, tag: SectionTag) -> bool {
        self.sections().contains(&tag)
    }
}

impl std::fmt::Display for Strategy {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Strategy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Strategy::ALL
            .into_iter()
            .find(|st| st.as_str() == s)
            .ok_or_else(|| format!("unknown strategy {s:?} (expected prompt, canny, canny-color or salient)"))
    }
}

#[derive(Debug, Clone)]
pub struct EncodeConfig {
    pub strategy: Strategy,
    pub canny: CannyParams,
    pub grid_w: u32,
    pub grid_h: u32,
    pub salient_regions: Vec<Rect>,
    /// Reject over-long prompts instead of truncating them.
    pub strict_prompt: bool,
}

impl EncodeConfig {
    pub fn new(strategy: Strategy) -> Self {
        Self {
            strategy,
            canny: CannyParams::default(),
            grid_w: 32,
            grid_h: 32,
            salient_regions: Vec::new(),
            strict_prompt: false,
        }
    }

    pub fn with_regions(mut self, regions: Vec<Rect>) -> Self {
        self.salient_regions = regions;
        self
    }
}

/// Cuts `prompt` to at most [`MAX_PROMPT_BYTES`] on a character boundary.
/// In strict mode an over-long prompt is an error.
pub fn apply_prompt_policy(prompt: &str, strict: bool) -> Result<String, EncodeError> {
    if prompt.trim().is_empty() {
        return Err(EncodeError::EmptyPrompt);
    }
    if prompt.len() <= MAX_PROMPT_BYTES {
        return Ok(prompt.to_owned());
    }
    if strict {
        return Err(EncodeError::PromptTooLong(prompt.len()));
    }
    let mut end = MAX_PROMPT_BYTES;
    while !prompt.is_char_boundary(end) {
        end -= 1;
    }
    warn!("prompt truncated from {} to {end} bytes", prompt.len());
    Ok(prompt[..end].to_owned())
}

pub fn encode_image(
    image: &RasterImage,
    original_byte_size: u64,
    prompt: &str,
    config: &EncodeConfig,
) -> Result<(Bundle, SavingsReport), EncodeError> {
    let (width, height) = (image.width(), image.height());
    if width < MIN_DIMENSION || height < MIN_DIMENSION {
        return Err(EncodeError::ImageTooSmall { width, height });
    }
    let prompt = apply_prompt_policy(prompt, config.strict_prompt)?;
    let strategy = config.strategy;
    if strategy == Strategy::SalientFeatures && config.salient_regions.is_empty() {
        return Err(EncodeError::MissingRegions);
    }

    let mut sections = vec![Section::new(SectionTag::Prompt, prompt.into_bytes())];
    if strategy.has(SectionTag::Canny) {
        let edges = canny(&to_luma(image), &config.canny)?;
        sections.push(Section::new(SectionTag::Canny, encode_bitimage(&edges)));
    }
    if strategy.has(SectionTag::ColorGrid) {
        let grid = extract_grid(image, config.grid_w, config.grid_h)?;
        sections.push(Section::new(SectionTag::ColorGrid, encode_grid(&grid)));
    }
    if strategy.has(SectionTag::Salient) {
        let rects = validate_regions(&config.salient_regions, width, height)?;
        let regions = rects
            .into_iter()
            .map(|r| crop_patch(image, r))
            .collect::<Result<Vec<_>, _>>()?;
        sections.push(Section::new(SectionTag::Salient, encode_section(&regions)?));
    }

    let bundle = Bundle {
        original_width: width,
        original_height: height,
        original_byte_size,
        sections,
    };
    let report = savings_report(&bundle);
    if report.below_break_even {
        warn!(
            "bundle ({} B) is not smaller than the original ({} B); send the original instead",
            report.bundle_bytes, report.original_bytes
        );
    }
    Ok((bundle, report))
}

#[derive(Debug, Error)]
pub enum PromptError {
    #[error("prompt provider unavailable: {0}")]
    ProviderUnavailable(String),
    #[error("prompt provider returned an empty prompt")]
    EmptyPrompt,
    #[error("prompt is {0} bytes, limit is {MAX_PROMPT_BYTES}")]
    PromptTooLong(usize),
}

/// Source of text prompts describing an image (a captioning service, a
/// file on disk, ...).
pub trait PromptProvider {
    fn prompt(&self, image_bytes: &[u8], instruction: &str) -> Result<String, PromptError>;
}

/// Reads the prompt from a text file, ignoring the image and instruction.
#[derive(Debug, Clone)]
pub struct FilePromptProvider {
    path: PathBuf,
}

impl FilePromptProvider {
    pub fn new(path: impl Into<PathBuf>) -> Self {
        Self { path: path.into() }
    }

    /// Provider for the sibling `<stem>.txt` of an image path.
    pub fn sibling_of(image_path: &Path) -> Self {
        Self::new(image_path.with_extension("txt"))
    }

    pub fn path(&self) -> &Path {
        &self.path
    }
}

impl PromptProvider for FilePromptProvider {
    fn prompt(&self, _image_bytes: &[u8], _instruction: &str) -> Result<String, PromptError> {
        std::fs::read_to_string(&self.path)
            .map_err(|e| PromptError::ProviderUnavailable(format!("{}: {e}", self.path.display())))
    }
}

pub fn fetch_prompt(
    provider: &dyn PromptProvider,
    image_bytes: &[u8],
    instruction: &str,
    strict: bool,
) -> Result<String, PromptError> {
    let text = provider.prompt(image_bytes, instruction)?;
    match apply_prompt_policy(&text, strict) {
        Ok(p) => Ok(p),
        Err(EncodeError::PromptTooLong(n)) => Err(PromptError::PromptTooLong(n)),
        Err(_) => Err(PromptError::EmptyPrompt),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bilevel::decode_bitimage;
    use crate::colorgrid::{decode_grid, MODE_PALETTE};

    fn textured(w: u32, h: u32) -> RasterImage {
        RasterImage::from_fn(w, h, |x, y| {
            let on = ((x / 9) + (y / 7)) % 2 == 0;
            if on {
                [200, (x * 3) as u8, 40]
            } else {
                [20, 90, (y * 2) as u8]
            }
        })
        .unwrap()
    }

    #[test]
    fn strategies_emit_their_sections() {
        let img = textured(96, 80);
        for s in Strategy::ALL {
            let cfg = EncodeConfig::new(s).with_regions(vec![Rect::new(4, 4, 10, 10)]);
            let (b, r) = encode_image(&img, 50_000, "a test pattern", &cfg).unwrap();
            assert_eq!(b.tags(), s.sections());
            assert_eq!(r.bundle_bytes as usize, crate::bundle::pack(&b).unwrap().len());
        }
    }

    #[test]
    fn prompt_only_savings() {
        let img = textured(64, 64);
        let prompt = "p".repeat(300);
        let (b, r) = encode_image(&img, 200_000, &prompt, &EncodeConfig::new(Strategy::PromptOnly)).unwrap();
        assert_eq!(b.sections.len(), 1);
        assert_eq!(r.bundle_bytes, 23 + 9 + 300);
        assert!(r.savings >= 0.998);
    }

    #[test]
    fn full_image_salient_region_breaks_even_flag() {
        let img = textured(64, 64);
        let cfg = EncodeConfig::new(Strategy::SalientFeatures).with_regions(vec![Rect::new(0, 0, 64, 64)]);
        let (_, r) = encode_image(&img, 4_000, "pattern", &cfg).unwrap();
        assert!(r.savings < 0.0);
        assert!(r.below_break_even);
    }

    #[test]
    fn uniform_image_bundle_is_small() {
        for side in [64, 128, 256, 512] {
            let img = RasterImage::filled(side, side, [30, 140, 220]).unwrap();
            let (b, r) = encode_image(&img, 1 << 20, "a flat blue square", &EncodeConfig::new(Strategy::PromptCannyColor)).unwrap();
            let edges = decode_bitimage(b.section(SectionTag::Canny).unwrap()).unwrap();
            assert_eq!(edges.count_ones(), 0);
            assert_eq!(b.section(SectionTag::ColorGrid).unwrap()[4], MODE_PALETTE);
            assert_eq!(
                decode_grid(b.section(SectionTag::ColorGrid).unwrap()).unwrap().cells()[0],
                [30, 140, 220]
            );
            assert!(r.bundle_bytes < 700, "{side}: {} bytes", r.bundle_bytes);
        }
    }

    #[test]
    fn contract_errors() {
        let img = textured(64, 64);
        assert!(matches!(
            encode_image(&textured(63, 100), 1, "x", &EncodeConfig::new(Strategy::PromptOnly)),
            Err(EncodeError::ImageTooSmall { .. })
        ));
        assert!(matches!(
            encode_image(&img, 1, "  ", &EncodeConfig::new(Strategy::PromptOnly)),
            Err(EncodeError::EmptyPrompt)
        ));
        assert!(matches!(
            encode_image(&img, 1, "x", &EncodeConfig::new(Strategy::SalientFeatures)),
            Err(EncodeError::MissingRegions)
        ));
        let mut strict = EncodeConfig::new(Strategy::PromptOnly);
        strict.strict_prompt = true;
        assert!(matches!(
            encode_image(&img, 1, &"a".repeat(5000), &strict),
            Err(EncodeError::PromptTooLong(5000))
        ));
        let cfg = EncodeConfig::new(Strategy::SalientFeatures).with_regions(vec![Rect::new(60, 0, 5, 5)]);
        assert!(matches!(encode_image(&img, 1, "x", &cfg), Err(EncodeError::Salient(_))));
    }

    #[test]
    fn long_prompts_truncate_on_char_boundary() {
        let long = "é".repeat(3000); // 6000 bytes
        let p = apply_prompt_policy(&long, false).unwrap();
        assert_eq!(p.len(), MAX_PROMPT_BYTES);
        assert!(p.chars().all(|c| c == 'é'));
        let odd = format!("a{}", "é".repeat(3000));
        assert_eq!(apply_prompt_policy(&odd, false).unwrap().len(), MAX_PROMPT_BYTES - 1);
    }

    #[test]
    fn strategy_names_round_trip() {
        for s in Strategy::ALL {
            assert_eq!(s.as_str().parse::<Strategy>().unwrap(), s);
        }
        assert!("bogus".parse::<Strategy>().is_err());
    }

    struct Fixed(&'static str);

    impl PromptProvider for Fixed {
        fn prompt(&self, _: &[u8], _: &str) -> Result<String, PromptError> {
            Ok(self.0.to_owned())
        }
    }

    #[test]
    fn prompt_providers() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cat.txt");
        std::fs::write(&path, "a cat on a mat").unwrap();
        let p = FilePromptProvider::sibling_of(&dir.path().join("cat.jpg"));
        assert_eq!(fetch_prompt(&p, b"", "describe", false).unwrap(), "a cat on a mat");
        let missing = FilePromptProvider::new(dir.path().join("nope.txt"));
        assert!(matches!(
            fetch_prompt(&missing, b"", "describe", false),
            Err(PromptError::ProviderUnavailable(_))
        ));
        assert!(matches!(fetch_prompt(&Fixed(""), b"", "", false), Err(PromptError::EmptyPrompt)));
        assert_eq!(fetch_prompt(&Fixed("ok"), b"", "", false).unwrap(), "ok");
    }
}
