//! One image through decode → pairs → RoIAlign → heads → filter → labels →
//! soft-NMS → top-k.

use alloc::vec::Vec;

use crate::config::PipelineConfig;
use crate::decode::{decode_corners, CornerKind, HeatmapSet};
use crate::error::{Error, Result};
use crate::postprocess::{assign_labels, filter_by_objectness, soft_nms, top_k_truncate, Detection};
use crate::proposal::{
    binary_head, class_head, enumerate_proposals, FeatureMaps, HeadWeights, Proposal, RoiSampler,
};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScoredProposal {
    pub proposal: Proposal,
    /// Binary-head objectness.
    pub objectness: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ImageOutput {
    pub detections: Vec<Detection>,
    /// Every enumerated proposal in enumeration order.
    pub proposals: Vec<ScoredProposal>,
    /// How many proposals passed the objectness filter.
    pub survived: usize,
}

fn check_inputs(
    hm: &HeatmapSet,
    feats: &FeatureMaps,
    weights: &HeadWeights,
    cfg: &PipelineConfig,
) -> Result<()> {
    cfg.validate()?;
    let (c, h, w) = hm.dims();
    if let Some(n) = cfg.num_classes {
        if n != c {
            return Err(Error::arg(alloc::format!(
                "config says {n} classes, heatmaps have {c}"
            )));
        }
    }
    if weights.num_classes() != c {
        return Err(Error::arg(alloc::format!(
            "class head has {} outputs, heatmaps have {c} classes",
            weights.num_classes()
        )));
    }
    if feats.grid() != (h, w) {
        return Err(Error::arg(alloc::format!(
            "feature grid {:?} differs from heatmap grid {:?}",
            feats.grid(),
            (h, w)
        )));
    }
    if feats.box_feat.shape()[0] != weights.box_channels() {
        return Err(Error::arg("box feature channels differ from the binary kernel"));
    }
    if feats.cat_feat.shape()[0] != weights.cat_channels() {
        return Err(Error::arg("category feature channels differ from the class kernel"));
    }
    Ok(())
}

/// Decode and score every proposal with the binary head.
pub fn score_proposals(
    hm: &HeatmapSet,
    feats: &FeatureMaps,
    weights: &HeadWeights,
    k: usize,
) -> Result<Vec<ScoredProposal>> {
    let tls = decode_corners(hm, CornerKind::TopLeft, k)?;
    let brs = decode_corners(hm, CornerKind::BottomRight, k)?;
    let (h, w) = feats.grid();
    enumerate_proposals(&tls, &brs)
        .into_iter()
        .map(|proposal| {
            let pooled = RoiSampler::new(&proposal.bbox, h, w).pool(&feats.box_feat)?;
            Ok(ScoredProposal {
                proposal,
                objectness: binary_head(&pooled, weights)?,
            })
        })
        .collect()
}

/// Class-head scores of one proposal.
pub fn classify(proposal: &Proposal, feats: &FeatureMaps, weights: &HeadWeights) -> Result<Vec<f64>> {
    let (h, w) = feats.grid();
    let pooled = RoiSampler::new(&proposal.bbox, h, w).pool(&feats.cat_feat)?;
    class_head(&pooled, weights)
}

pub fn detect(
    hm: &HeatmapSet,
    feats: &FeatureMaps,
    weights: &HeadWeights,
    cfg: &PipelineConfig,
) -> Result<ImageOutput> {
    check_inputs(hm, feats, weights, cfg)?;
    let proposals = score_proposals(hm, feats, weights, cfg.k)?;
    let survivors: Vec<usize> = if cfg.use_binary_head {
        let p: Vec<f64> = proposals.iter().map(|s| s.objectness).collect();
        filter_by_objectness(&p, cfg.objectness_threshold)
    } else {
        (0..proposals.len()).collect()
    };
    let mut candidates = Vec::with_capacity(survivors.len());
    for &m in &survivors {
        let prop = &proposals[m].proposal;
        let q = classify(prop, feats, weights)?;
        candidates.extend(assign_labels(prop, &q));
    }
    let suppressed = soft_nms(&candidates, cfg.soft_nms_sigma, cfg.soft_nms_prune);
    Ok(ImageOutput {
        detections: top_k_truncate(&suppressed, cfg.top_k),
        survived: survivors.len(),
        proposals,
    })
}
