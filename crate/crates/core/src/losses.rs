//! Training objectives: the corner focal and offset losses, the binary
//! proposal loss, the per-class proposal loss, and their sum.
//!
//! Every loss that is differentiated during training has a `*_with_grad`
//! variant returning the analytic gradient with respect to the predictions.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::geometry::{BBox, GroundTruth};
use crate::math;
use crate::tensor::Tensor;

/// Predictions are clamped to `[EPS, 1 - EPS]` before taking logs.
pub const EPS: f64 = 1e-7;
/// Focusing power of the corner focal loss.
pub const CORNER_FOCUS: i32 = 2;
/// Penalty-reduction power applied to `1 - target` on negative cells.
pub const CORNER_PENALTY: i32 = 4;

/// Max IoU of a proposal against all ground truths, overall and per class.
#[derive(Debug, Clone, PartialEq)]
pub struct ProposalLabel {
    pub iou_max: f64,
    pub class_iou_max: Vec<f64>,
}

impl ProposalLabel {
    pub fn assign(bbox: &BBox, gts: &[GroundTruth], num_classes: usize) -> Self {
        let mut class_iou_max = vec![0.0f64; num_classes];
        let mut iou_max = 0.0f64;
        for gt in gts {
            let v = bbox.iou(&gt.bbox);
            iou_max = iou_max.max(v);
            if let Some(slot) = class_iou_max.get_mut(gt.class_id) {
                *slot = slot.max(v);
            }
        }
        ProposalLabel {
            iou_max,
            class_iou_max,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossBreakdown {
    pub l_det_corner: f64,
    pub l_offset_corner: f64,
    pub l_prop: f64,
    pub l_class: f64,
    pub total: f64,
}

/// Unweighted sum of the four terms.
pub fn loss_total(
    l_det_corner: f64,
    l_offset_corner: f64,
    l_prop: f64,
    l_class: f64,
) -> Result<LossBreakdown> {
    for (name, v) in [
        ("l_det_corner", l_det_corner),
        ("l_offset_corner", l_offset_corner),
        ("l_prop", l_prop),
        ("l_class", l_class),
    ] {
        if !v.is_finite() {
            return Err(Error::arg(alloc::format!("{name} is not finite: {v}")));
        }
        if v < 0.0 {
            return Err(Error::arg(alloc::format!("{name} is negative: {v}")));
        }
    }
    Ok(LossBreakdown {
        l_det_corner,
        l_offset_corner,
        l_prop,
        l_class,
        total: l_det_corner + l_offset_corner + l_prop + l_class,
    })
}

fn check_open_unit(name: &str, vals: &[f64]) -> Result<()> {
    match vals.iter().position(|&v| !(v > 0.0 && v < 1.0)) {
        Some(i) => Err(Error::arg(alloc::format!(
            "{name}[{i}] = {} is outside (0, 1)",
            vals[i]
        ))),
        None => Ok(()),
    }
}

/// `(value, d value / d p)` of the focal term for one prediction.
///
/// Positive: `-(1-p)^γ ln p`. Negative: `-w p^γ ln(1-p)`.
fn focal_term(p: f64, positive: bool, gamma: f64, neg_weight: f64) -> (f64, f64) {
    let clamped = !(EPS..=1.0 - EPS).contains(&p);
    let p = p.clamp(EPS, 1.0 - EPS);
    let (v, g) = if positive {
        let q = 1.0 - p;
        let lp = math::ln(p);
        let v = -math::powf(q, gamma) * lp;
        let g = gamma * math::powf(q, gamma - 1.0) * lp - math::powf(q, gamma) / p;
        (v, g)
    } else {
        let l1 = math::ln(1.0 - p);
        let v = -neg_weight * math::powf(p, gamma) * l1;
        let g = -neg_weight * (gamma * math::powf(p, gamma - 1.0) * l1 - math::powf(p, gamma) / (1.0 - p));
        (v, g)
    };
    (v, if clamped { 0.0 } else { g })
}

/// Binary proposal loss over `M` objectness scores.
pub fn loss_prop(p: &[f64], labels: &[ProposalLabel], tau: f64, alpha: f64) -> Result<f64> {
    Ok(loss_prop_with_grad(p, labels, tau, alpha)?.0)
}

pub fn loss_prop_with_grad(
    p: &[f64],
    labels: &[ProposalLabel],
    tau: f64,
    alpha: f64,
) -> Result<(f64, Vec<f64>)> {
    if p.is_empty() {
        return Err(Error::arg("loss_prop needs at least one proposal"));
    }
    if p.len() != labels.len() {
        return Err(Error::arg("one label per proposal required"));
    }
    check_open_unit("p", p)?;
    let positives = labels.iter().filter(|l| l.iou_max >= tau).count();
    let norm = positives.max(1) as f64;
    let mut loss = 0.0;
    let mut grad = Vec::with_capacity(p.len());
    for (&pm, label) in p.iter().zip(labels) {
        let (v, g) = focal_term(pm, label.iou_max >= tau, alpha, 1.0);
        loss += v;
        grad.push(g / norm);
    }
    Ok((loss / norm, grad))
}

/// Per-class proposal loss; `q` is row-major `M̂ × C`.
pub fn loss_class(q: &[f64], num_classes: usize, labels: &[ProposalLabel], tau: f64, beta: f64) -> Result<f64> {
    Ok(loss_class_with_grad(q, num_classes, labels, tau, beta)?.0)
}

pub fn loss_class_with_grad(
    q: &[f64],
    num_classes: usize,
    labels: &[ProposalLabel],
    tau: f64,
    beta: f64,
) -> Result<(f64, Vec<f64>)> {
    if labels.is_empty() {
        return Err(Error::arg("loss_class needs at least one surviving proposal"));
    }
    if q.len() != labels.len() * num_classes {
        return Err(Error::arg(alloc::format!(
            "q has {} entries, expected {} x {}",
            q.len(),
            labels.len(),
            num_classes
        )));
    }
    if labels.iter().any(|l| l.class_iou_max.len() != num_classes) {
        return Err(Error::arg("per-class IoU vector length must equal C"));
    }
    check_open_unit("q", q)?;
    let positives = labels.iter().filter(|l| l.iou_max >= tau).count();
    let norm = positives.max(1) as f64;
    let mut loss = 0.0;
    let mut grad = Vec::with_capacity(q.len());
    for (row, label) in q.chunks_exact(num_classes).zip(labels) {
        for (&qc, &iou) in row.iter().zip(&label.class_iou_max) {
            let (v, g) = focal_term(qc, iou >= tau, beta, 1.0);
            loss += v;
            grad.push(g / norm);
        }
    }
    Ok((loss / norm, grad))
}

/// Penalty-reduced focal loss on corner heatmaps. Cells whose target is
/// exactly 1 are positives; the others are down-weighted by
/// `(1 - target)^4`. Normalized by the positive count (at least 1).
pub fn loss_corner_det(pred: &Tensor, target: &Tensor) -> Result<f64> {
    Ok(loss_corner_det_with_grad(pred, target)?.0)
}

pub fn loss_corner_det_with_grad(pred: &Tensor, target: &Tensor) -> Result<(f64, Vec<f64>)> {
    if pred.shape() != target.shape() {
        return Err(Error::Shape {
            what: "corner heatmap prediction",
            expected: target.shape().to_vec(),
            found: pred.shape().to_vec(),
        });
    }
    if let Some(t) = target.data().iter().find(|t| !(0.0..=1.0).contains(*t)) {
        return Err(Error::arg(alloc::format!("target value {t} outside [0, 1]")));
    }
    let p64: Vec<f64> = pred.data().iter().map(|&v| v as f64).collect();
    check_open_unit("pred", &p64)?;
    let positives = target.data().iter().filter(|&&t| t == 1.0).count();
    let norm = positives.max(1) as f64;
    let mut loss = 0.0;
    let mut grad = Vec::with_capacity(p64.len());
    for (&p, &t) in p64.iter().zip(target.data()) {
        let positive = t == 1.0;
        let weight = math::powf(1.0 - t as f64, CORNER_PENALTY as f64);
        let (v, g) = focal_term(p, positive, CORNER_FOCUS as f64, weight);
        loss += v;
        grad.push(g / norm);
    }
    Ok((loss / norm, grad))
}

fn smooth_l1(e: f64) -> f64 {
    let a = e.abs();
    if a < 1.0 {
        0.5 * e * e
    } else {
        a - 0.5
    }
}

/// Smooth-L1 offset loss over the masked `(row, col)` cells of `[2, H, W]`
/// offset maps, divided by the number of masked cells. Empty mask → 0.
pub fn loss_corner_offset(pred_off: &Tensor, target_off: &Tensor, mask: &[(usize, usize)]) -> Result<f64> {
    if pred_off.shape() != target_off.shape() {
        return Err(Error::Shape {
            what: "offset prediction",
            expected: target_off.shape().to_vec(),
            found: pred_off.shape().to_vec(),
        });
    }
    let (planes, h, w) = target_off.dims3()?;
    if planes != 2 {
        return Err(Error::arg("offset maps must have two planes"));
    }
    if mask.is_empty() {
        return Ok(0.0);
    }
    let mut sum = 0.0;
    for &(i, j) in mask {
        if i >= h || j >= w {
            return Err(Error::arg(alloc::format!("mask cell ({i}, {j}) outside {h}x{w}")));
        }
        for plane in 0..2 {
            let e = pred_off.at3(plane, i, j) as f64 - target_off.at3(plane, i, j) as f64;
            sum += smooth_l1(e);
        }
    }
    Ok(sum / mask.len() as f64)
}
