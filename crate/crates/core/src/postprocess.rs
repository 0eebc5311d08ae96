//! Inference-time filtering and scoring of proposals.

use alloc::collections::BTreeMap;
use alloc::vec;
use alloc::vec::Vec;

use crate::geometry::BBox;
use crate::math;
use crate::proposal::Proposal;

/// Which classifier contributed a detection's class label.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LabelSource {
    /// The corner class, overruled by the class head.
    Corner,
    /// The class head's argmax, differing from the corner class.
    Head,
    /// Both agreed.
    Both,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Detection {
    pub bbox: BBox,
    pub class_id: usize,
    pub score: f64,
    pub source: LabelSource,
}

/// Indices `m` with `p[m] >= threshold`, in input order.
pub fn filter_by_objectness(p: &[f64], threshold: f64) -> Vec<usize> {
    p.iter()
        .enumerate()
        .filter(|(_, &pm)| pm >= threshold)
        .map(|(m, _)| m)
        .collect()
}

/// `(s1 + 0.5)(s2 + 0.5)` mapped affinely from `[0.25, 2.25]` onto `[0, 1]`.
pub fn fuse_scores(s1: f64, s2: f64) -> f64 {
    let raw = (s1 + 0.5) * (s2 + 0.5);
    ((raw - 0.25) / 2.0).clamp(0.0, 1.0)
}

/// Index of the largest entry; the first one on ties.
pub fn argmax(q: &[f64]) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (c, &v) in q.iter().enumerate() {
        if best.map_or(true, |(_, b)| v > b) {
            best = Some((c, v));
        }
    }
    best.map(|(c, _)| c)
}

/// One detection if the corner class and the class-head argmax agree,
/// otherwise two sharing the box (corner class first).
pub fn assign_labels(proposal: &Proposal, q: &[f64]) -> Vec<Detection> {
    let s1 = proposal.corner_score as f64;
    let corner = proposal.class_id;
    let head = argmax(q).unwrap_or(corner);
    let score_for = |c: usize| fuse_scores(s1, q.get(c).copied().unwrap_or(0.0));
    if head == corner {
        return vec![Detection {
            bbox: proposal.bbox,
            class_id: corner,
            score: score_for(corner),
            source: LabelSource::Both,
        }];
    }
    vec![
        Detection {
            bbox: proposal.bbox,
            class_id: corner,
            score: score_for(corner),
            source: LabelSource::Corner,
        },
        Detection {
            bbox: proposal.bbox,
            class_id: head,
            score: score_for(head),
            source: LabelSource::Head,
        },
    ]
}

/// Gaussian soft-NMS, run independently per class.
///
/// Repeatedly takes the highest remaining score (lowest input index on
/// ties), then multiplies each other remaining same-class score by
/// `exp(-iou² / sigma)` and drops those that fall below `prune`. Output is
/// grouped by ascending class, each group in selection order.
pub fn soft_nms(dets: &[Detection], sigma: f64, prune: f64) -> Vec<Detection> {
    let mut by_class: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (i, d) in dets.iter().enumerate() {
        by_class.entry(d.class_id).or_default().push(i);
    }
    let mut out = Vec::with_capacity(dets.len());
    for (_, idxs) in by_class {
        let mut pending: Vec<(usize, f64)> = idxs.iter().map(|&i| (i, dets[i].score)).collect();
        while !pending.is_empty() {
            let mut best = 0;
            for k in 1..pending.len() {
                let (i, s) = pending[k];
                let (bi, bs) = pending[best];
                if s > bs || (s == bs && i < bi) {
                    best = k;
                }
            }
            let (sel, sel_score) = pending.remove(best);
            let sel_box = dets[sel].bbox;
            out.push(Detection {
                score: sel_score,
                ..dets[sel]
            });
            pending.retain_mut(|(i, s)| {
                let iou = sel_box.iou(&dets[*i].bbox);
                *s *= math::exp(-(iou * iou) / sigma);
                *s >= prune
            });
        }
    }
    out
}

/// The `k` highest-scoring detections, descending, ties by input order.
pub fn top_k_truncate(dets: &[Detection], k: usize) -> Vec<Detection> {
    let mut order: Vec<usize> = (0..dets.len()).collect();
    order.sort_by(|&a, &b| dets[b].score.total_cmp(&dets[a].score).then(a.cmp(&b)));
    order.truncate(k);
    order.into_iter().map(|i| dets[i]).collect()
}
