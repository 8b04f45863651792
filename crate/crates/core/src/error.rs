use std::path::PathBuf;

use crate::grid::View;

/// Crate-wide error type. Every fallible operation returns `Result<T>`;
/// diagnostics carry enough context (op name, offending dimensions, file
/// offsets) to be actionable without a debugger.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{op}: shape mismatch, expected {expected}, got {got}")]
    ShapeMismatch {
        op: &'static str,
        expected: String,
        got: String,
    },

    #[error(
        "{op}: input {height}x{width} must have height and width divisible by {divisor} \
         (pad to {}x{})",
        height.div_ceil(*divisor) * divisor,
        width.div_ceil(*divisor) * divisor
    )]
    IndivisibleInput {
        op: &'static str,
        height: usize,
        width: usize,
        divisor: usize,
    },

    #[error("{op}: channel count {channels} must be even (probabilities come in pairs)")]
    OddChannels { op: &'static str, channels: usize },

    #[error("channel scale {scale} maps base width {base} to a non-integer channel count")]
    ChannelScale { scale: f64, base: usize },

    #[error("class-weight epsilon must be > 1 to bound 1/ln(eps + q), got {epsilon}")]
    InvalidEpsilon { epsilon: f64 },

    #[error("{op}: views differ, expected {expected:?}, got {got:?}")]
    ViewMismatch {
        op: &'static str,
        expected: View,
        got: View,
    },

    #[error("{op}: produced a non-finite value ({detail})")]
    NonFinite { op: &'static str, detail: String },

    #[error("crop {x},{y} {width}x{height} exceeds source bounds {src_width}x{src_height}")]
    CropOutOfBounds {
        x: usize,
        y: usize,
        width: usize,
        height: usize,
        src_width: usize,
        src_height: usize,
    },

    #[error("crop {width}x{height} must have dimensions divisible by {divisor} to stay network-compatible")]
    CropAlignment {
        width: usize,
        height: usize,
        divisor: usize,
    },

    #[error("backward: {msg}")]
    BackwardInvalid { msg: String },

    #[error("invalid configuration: {msg}")]
    Config { msg: String },

    #[error("scene is invalid: {msg}")]
    SceneInvalid { msg: String },

    #[error(
        "surfaces {first} and {second} share disparity {disparity} and overlap: \
         z-buffer visibility would be ambiguous"
    )]
    SceneAmbiguous {
        first: usize,
        second: usize,
        disparity: f64,
    },

    #[error("empty dataset: at least one sample is required")]
    EmptyDataset,

    #[error("PFM format error: {msg}")]
    PfmFormat { msg: String },

    #[error("PFM stores a 3-channel color payload (\"PF\"); only single-channel \"Pf\" maps are supported")]
    PfmColorUnsupported,

    #[error("mask {path}: pixel values must be 0 or 255, found {value}")]
    MaskFormat { path: PathBuf, value: u8 },

    #[error("checkpoint error at byte {offset}: {msg}")]
    CheckpointFormat { offset: usize, msg: String },

    #[error("unknown variant {name:?} (expected one of symmnet, mononet-l, mononet-r, siamesenet, alternet, halfnet, lrcnet)")]
    UnknownVariant { name: String },

    #[error("manifest {path}, line {line}: {msg}")]
    ManifestFormat {
        path: PathBuf,
        line: usize,
        msg: String,
    },

    #[error("referenced file does not exist: {path}")]
    MissingFile { path: PathBuf },

    #[error("{path}: {source}")]
    IoAt {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Image(#[from] image::ImageError),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub fn shape(op: &'static str, expected: impl Into<String>, got: impl Into<String>) -> Self {
        Error::ShapeMismatch {
            op,
            expected: expected.into(),
            got: got.into(),
        }
    }

    pub fn config(msg: impl Into<String>) -> Self {
        Error::Config { msg: msg.into() }
    }
}
