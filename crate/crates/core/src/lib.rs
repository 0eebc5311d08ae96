#![cfg_attr(not(feature = "std"), no_std)]

//! Corner-proposal object detection, framework free.
//!
//! The crate covers the whole inference path of a corner-keypoint detector
//! that enumerates corner pairs as proposals and re-scores them with two
//! region classifiers:
//!
//! - [`tensor`]: dense `f32` tensors and the `CPNT` byte codec
//! - [`geometry`]: boxes and IoU
//! - [`decode`]: heatmap peak extraction and corner training targets
//! - [`proposal`]: pair enumeration, RoIAlign and the two heads
//! - [`losses`]: the training objectives with analytic gradients
//! - [`postprocess`]: filtering, label assignment, score fusion, soft-NMS
//! - [`eval`]: AP / AR / AF metrics
//! - [`synth`]: synthetic scenes with planted features for closed-loop tests
//! - [`pipeline`]: everything above wired together for one image
//!
//! Everything here is pure computation over `alloc` containers. File IO,
//! JSON formats and the command-line front-end live in the `cpn` crate.

extern crate alloc;

pub mod config;
pub mod decode;
pub mod error;
pub mod eval;
pub mod geometry;
pub mod losses;
pub mod pipeline;
pub mod postprocess;
pub mod proposal;
pub mod synth;
pub mod tensor;

mod math;

pub use crate::config::PipelineConfig;
pub use crate::decode::{CornerKeypoint, CornerKind, HeatmapSet};
pub use crate::error::{Error, FormatError, Result};
pub use crate::geometry::{BBox, GroundTruth};
pub use crate::pipeline::{detect, ImageOutput};
pub use crate::postprocess::{Detection, LabelSource};
pub use crate::proposal::{FeatureMaps, HeadWeights, Proposal};
pub use crate::tensor::Tensor;

/// Spatial downscaling between the image plane and heatmap / feature grids.
pub const STRIDE: f32 = 4.0;
