use crate::error::{Error, Result};

/// Inference and training constants. Defaults are the standard operating
/// point.
#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    /// Keypoints kept per corner kind.
    pub k: usize,
    /// Objectness threshold applied at inference.
    pub objectness_threshold: f64,
    /// IoU that makes a proposal positive during training.
    pub iou_threshold: f64,
    pub alpha: f64,
    pub beta: f64,
    pub soft_nms_sigma: f64,
    pub soft_nms_prune: f64,
    pub top_k: usize,
    /// Category count; `None` takes it from the inputs.
    pub num_classes: Option<usize>,
    pub stride: f32,
    /// When false every proposal skips the objectness filter.
    pub use_binary_head: bool,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            k: 70,
            objectness_threshold: 0.2,
            iou_threshold: 0.7,
            alpha: 2.0,
            beta: 2.0,
            soft_nms_sigma: 0.5,
            soft_nms_prune: 0.001,
            top_k: 100,
            num_classes: None,
            stride: crate::STRIDE,
            use_binary_head: true,
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        let unit = |name: &str, v: f64| {
            if v > 0.0 && v < 1.0 {
                Ok(())
            } else {
                Err(Error::arg(alloc::format!("{name} = {v} must lie in (0, 1)")))
            }
        };
        unit("objectness_threshold", self.objectness_threshold)?;
        unit("iou_threshold", self.iou_threshold)?;
        unit("soft_nms_prune", self.soft_nms_prune)?;
        if self.k == 0 {
            return Err(Error::arg("k must be positive"));
        }
        if !(self.soft_nms_sigma > 0.0) {
            return Err(Error::arg("soft_nms_sigma must be positive"));
        }
        if !(self.alpha >= 0.0 && self.beta >= 0.0) {
            return Err(Error::arg("alpha and beta must be non-negative"));
        }
        if self.stride != crate::STRIDE {
            return Err(Error::arg(alloc::format!(
                "stride {} unsupported, grids are fixed at {}",
                self.stride,
                crate::STRIDE
            )));
        }
        if self.num_classes == Some(0) {
            return Err(Error::arg("num_classes must be positive"));
        }
        Ok(())
    }
}
