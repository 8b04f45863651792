//! Symmetric binocular occlusion detection from rectified stereo pairs.
//!
//! The crate covers the full desk-scale pipeline:
//!
//! - [`lrc`]: occlusion ground truth from left/right disparity consistency,
//!   plus aligned cropping that regenerates labels;
//! - [`net`]: the symmetric hourglass network and its ablation variants,
//!   built on the [`tensor`]/[`ops`]/[`tape`] reverse-mode core;
//! - [`loss`]: the class-balanced binocular cross-entropy and the disparity
//!   regression objective;
//! - [`trainer`]: seeded, bit-reproducible Adam training;
//! - [`metrics`]: precision/recall/F-score, PR curves, and the
//!   oracle/global threshold protocol;
//! - [`data`]: PNG/PFM/mask/manifest/checkpoint I/O and a synthetic stereo
//!   scene generator with an exact geometric visibility oracle.
//!
//! Everything numeric is generic over the scalar type; the [`Scalar`] trait
//! is implemented for `f32` (training speed) and `f64` (verification). The
//! aliases below pin the two concrete stacks.

pub mod data;
pub mod error;
pub mod grid;
pub mod loss;
pub mod lrc;
pub mod metrics;
pub mod net;
pub mod ops;
pub mod scalar;
pub mod tape;
pub mod tensor;
pub mod trainer;

pub use error::{Error, Result};
pub use scalar::Scalar;

/// Single-precision stack (the training default).
pub type Tensor32 = tensor::Tensor<f32>;
pub type Grid32 = grid::Grid<f32>;
pub type Network32 = net::Network<f32>;
pub type DisparityMap32 = lrc::DisparityMap<f32>;
pub type StereoSample32 = data::StereoSample<f32>;
pub type Prediction32 = net::Prediction<f32>;

/// Double-precision stack (oracle checks and gradient verification).
pub type Tensor64 = tensor::Tensor<f64>;
pub type Grid64 = grid::Grid<f64>;
pub type Network64 = net::Network<f64>;
pub type DisparityMap64 = lrc::DisparityMap<f64>;
pub type StereoSample64 = data::StereoSample<f64>;
pub type Prediction64 = net::Prediction<f64>;
