//! JSON documents: configs, detection dumps, ground truth and the corpus
//! manifest.

use cpn_core::synth::{CorpusConfig, SceneConfig};
use cpn_core::{BBox, PipelineConfig};
use serde::{Deserialize, Serialize};

/// One record of a detection (or proposal) dump.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionRecord {
    pub image_id: u64,
    pub category_id: u64,
    /// `[x, y, width, height]`
    pub bbox: [f64; 4],
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImageInfo {
    pub id: u64,
    pub width: usize,
    pub height: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub file_name: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Annotation {
    pub id: u64,
    pub image_id: u64,
    pub category_id: u64,
    pub bbox: [f64; 4],
    #[serde(default)]
    pub area: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Category {
    pub id: u64,
    pub name: String,
}

/// COCO-style ground truth.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct GroundTruthFile {
    pub images: Vec<ImageInfo>,
    pub annotations: Vec<Annotation>,
    #[serde(default)]
    pub categories: Vec<Category>,
}

/// Per-scene ground-truth fragment stored next to the tensors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneGt {
    pub image_id: u64,
    pub seed: u64,
    pub width: usize,
    pub height: usize,
    pub boxes: Vec<SceneBox>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneBox {
    pub class_id: usize,
    pub bbox: [f64; 4],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub seed: u64,
    pub num_classes: usize,
    /// `[height, width]`
    pub image_size: [usize; 2],
    pub scenes: Vec<ManifestEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub image_id: u64,
    pub dir: String,
    pub seed: u64,
    pub boxes: usize,
}

/// Detection config file; absent fields keep their defaults.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfigFile {
    pub k: Option<usize>,
    pub objectness_threshold: Option<f64>,
    pub iou_threshold: Option<f64>,
    pub alpha: Option<f64>,
    pub beta: Option<f64>,
    pub soft_nms_sigma: Option<f64>,
    pub soft_nms_prune: Option<f64>,
    pub top_k: Option<usize>,
    pub num_classes: Option<usize>,
    pub stride: Option<f32>,
    pub use_binary_head: Option<bool>,
}

impl PipelineConfigFile {
    pub fn resolve(&self) -> PipelineConfig {
        let d = PipelineConfig::default();
        PipelineConfig {
            k: self.k.unwrap_or(d.k),
            objectness_threshold: self.objectness_threshold.unwrap_or(d.objectness_threshold),
            iou_threshold: self.iou_threshold.unwrap_or(d.iou_threshold),
            alpha: self.alpha.unwrap_or(d.alpha),
            beta: self.beta.unwrap_or(d.beta),
            soft_nms_sigma: self.soft_nms_sigma.unwrap_or(d.soft_nms_sigma),
            soft_nms_prune: self.soft_nms_prune.unwrap_or(d.soft_nms_prune),
            top_k: self.top_k.unwrap_or(d.top_k),
            num_classes: self.num_classes.or(d.num_classes),
            stride: self.stride.unwrap_or(d.stride),
            use_binary_head: self.use_binary_head.unwrap_or(d.use_binary_head),
        }
    }
}

/// Synthetic-corpus config file.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthConfigFile {
    /// `[height, width]`
    pub image_size: Option<[usize; 2]>,
    pub num_classes: Option<usize>,
    pub min_boxes: Option<usize>,
    pub max_boxes: Option<usize>,
    pub min_side: Option<u32>,
    pub min_area: Option<f64>,
    pub max_area: Option<f64>,
    pub max_aspect: Option<f64>,
    pub noise: Option<f32>,
    pub peak_min: Option<f32>,
    pub k: Option<usize>,
    pub resample_budget: Option<u32>,
    pub regime_period: Option<usize>,
    pub crossed: Option<bool>,
}

impl SynthConfigFile {
    pub fn resolve(&self) -> CorpusConfig {
        let d = CorpusConfig::default();
        let s = &d.scene;
        CorpusConfig {
            scene: SceneConfig {
                image_size: self.image_size.map(|[h, w]| (h, w)).unwrap_or(s.image_size),
                num_classes: self.num_classes.unwrap_or(s.num_classes),
                min_boxes: self.min_boxes.unwrap_or(s.min_boxes),
                max_boxes: self.max_boxes.unwrap_or(s.max_boxes),
                min_side: self.min_side.unwrap_or(s.min_side),
                min_area: self.min_area.unwrap_or(s.min_area),
                max_area: self.max_area.unwrap_or(s.max_area),
                max_aspect: self.max_aspect.unwrap_or(s.max_aspect),
                regime: s.regime,
                noise: self.noise.unwrap_or(s.noise),
                peak_min: self.peak_min.unwrap_or(s.peak_min),
                k: self.k.unwrap_or(s.k),
                resample_budget: self.resample_budget.unwrap_or(s.resample_budget),
            },
            regime_period: self.regime_period.unwrap_or(d.regime_period),
            crossed: self.crossed.unwrap_or(d.crossed),
        }
    }
}

pub fn xywh(b: &BBox) -> [f64; 4] {
    b.to_xywh()
}

pub fn bbox_of(xywh: &[f64; 4]) -> cpn_core::Result<BBox> {
    let [x, y, w, h] = *xywh;
    BBox::from_xywh(x, y, w, h)
}
