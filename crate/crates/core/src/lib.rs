//! Pseudo-lossy image transmission: instead of pixels, send a compact
//! bundle of conditioning inputs (a text prompt, a Canny edge map, a
//! low-resolution color grid and unmodified salient patches) from which a
//! receiver regenerates the image.
//!
//! The crate covers extraction, the bit-exact `.plcb` container, savings
//! accounting, a deterministic preview decoder and similarity metrics.

pub mod bilevel;
pub mod bundle;
pub mod colorgrid;
pub mod edgemap;
pub mod encoder;
pub mod metrics;
pub mod preview;
pub mod raster;
pub mod salient;

pub use bundle::{pack, savings_report, unpack, Bundle, BundleError, SavingsReport, Section, SectionTag};
pub use edgemap::{canny, CannyParams};
pub use encoder::{encode_image, EncodeConfig, EncodeError, Strategy};
pub use preview::{preview_reconstruct, PreviewParams};
pub use raster::{load_ppm, save_ppm, to_luma, BitImage, LumaImage, RasterImage};
