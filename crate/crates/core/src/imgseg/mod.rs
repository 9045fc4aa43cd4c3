//! Backdrop color segmentation: CIE Lab conversion, representative-color detection,
//! color-distance contrast, thresholding and morphological cleaning.

mod lab;
mod mask;
mod morphology;
mod pgm;
mod representative;
mod segment;
mod threshold;

pub use lab::{rgb_to_lab, LabImage};
pub use mask::{BinaryMask, Component, GrayRaster};
pub use morphology::{clean, clear_border, close, dilate, erode, fill_holes, open, CleanParams};
pub use pgm::{read_pgm, write_pgm};
pub use representative::{representative_colors, RepresentativeColors};
pub use segment::{distance_map, distance_raw, segment, SegmentOptions};
pub use threshold::{adaptive_threshold, binarize, binarize_and_clean, otsu_threshold, ThresholdMethod};

use std::path::PathBuf;

#[derive(Debug, thiserror::Error)]
pub enum SegError {
    #[error("channel histogram has a single cluster; supply a manual reference color")]
    SingleCluster,
    #[error("no foreground pixels remain after cleaning")]
    EmptyForeground,
    #[error("raster dimensions {width}x{height} do not match {len} values")]
    DimensionMismatch { width: usize, height: usize, len: usize },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("failed to read or write {path}: {msg}")]
    Io { path: PathBuf, msg: String },
    #[error("malformed PGM: {0}")]
    Pgm(String),
}

pub type Result<T> = std::result::Result<T, SegError>;
