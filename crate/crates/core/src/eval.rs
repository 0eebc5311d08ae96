//! Detection metrics: COCO-style AP, coverage-based AR with area and
//! aspect-ratio buckets, and the false-discovery metric AF = 1 − ÃP over
//! low IoU thresholds.
//!
//! Values that have no eligible ground truth are `None` and are left out
//! of every average.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::geometry::BBox;
use crate::math;

/// At most this many detections per image and category enter AP.
pub const MAX_DETS: usize = 100;
/// Proposal budget for the recall table.
pub const MAX_PROPOSALS: usize = 1000;
/// Points of the interpolated precision-recall curve.
pub const RECALL_POINTS: usize = 101;

/// `0.50:0.05:0.95`
pub fn ap_thresholds() -> [f64; 10] {
    core::array::from_fn(|i| (50 + 5 * i) as f64 / 100.0)
}

/// `0.05:0.05:0.50`
pub fn af_thresholds() -> [f64; 10] {
    core::array::from_fn(|i| (5 + 5 * i) as f64 / 100.0)
}

/// A scored box: a detection or a proposal.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalDet {
    pub image_id: u64,
    pub category_id: u64,
    pub bbox: BBox,
    pub score: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalGt {
    pub image_id: u64,
    pub category_id: u64,
    pub bbox: BBox,
}

/// Box-area interval; `lo_open` selects `(lo, hi]` instead of `[lo, hi]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AreaRange {
    pub lo: f64,
    pub hi: f64,
    pub lo_open: bool,
}

impl AreaRange {
    pub const ALL: AreaRange = AreaRange::closed(0.0, f64::INFINITY);
    pub const SMALL: AreaRange = AreaRange::closed(0.0, 32.0 * 32.0);
    pub const MEDIUM: AreaRange = AreaRange::closed(32.0 * 32.0, 96.0 * 96.0);
    pub const LARGE: AreaRange = AreaRange::closed(96.0 * 96.0, f64::INFINITY);

    pub const fn closed(lo: f64, hi: f64) -> Self {
        AreaRange {
            lo,
            hi,
            lo_open: false,
        }
    }

    pub const fn left_open(lo: f64, hi: f64) -> Self {
        AreaRange {
            lo,
            hi,
            lo_open: true,
        }
    }

    pub fn contains(&self, area: f64) -> bool {
        let above = if self.lo_open { area > self.lo } else { area >= self.lo };
        above && area <= self.hi
    }
}

/// Recall-table area buckets: `(96², 200²]`, `(200², 300²]`, `(300², 400²]`, `(400², ∞)`.
pub fn recall_area_buckets() -> [AreaRange; 4] {
    let sq = |v: f64| v * v;
    [
        AreaRange::left_open(sq(96.0), sq(200.0)),
        AreaRange::left_open(sq(200.0), sq(300.0)),
        AreaRange::left_open(sq(300.0), sq(400.0)),
        AreaRange::left_open(sq(400.0), f64::INFINITY),
    ]
}

/// Aspect buckets `5:1 … 8:1`.
pub const ASPECT_BUCKETS: [u32; 4] = [5, 6, 7, 8];

/// Whether `max(w/h, h/w)` rounds to `ratio`.
pub fn in_aspect_bucket(bbox: &BBox, ratio: u32) -> bool {
    let a = bbox.aspect();
    a.is_finite() && math::round(a) == ratio as f64
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MatchResult {
    /// Per detection, the matched ground-truth index.
    pub det_match: Vec<Option<usize>>,
    pub gt_covered: Vec<bool>,
}

/// Greedy one-to-one matching of score-sorted detections to ground truths.
///
/// Each detection takes the unmatched ground truth with the highest IoU
/// `>= iou_thr`, the lowest index on ties.
pub fn match_greedy(dets: &[BBox], gts: &[BBox], iou_thr: f64) -> MatchResult {
    match_with_ignore(dets, gts, &vec![false; gts.len()], iou_thr)
}

/// As [`match_greedy`], but ignored ground truths are only taken when no
/// regular one qualifies.
pub fn match_with_ignore(dets: &[BBox], gts: &[BBox], gt_ignore: &[bool], iou_thr: f64) -> MatchResult {
    let mut gt_covered = vec![false; gts.len()];
    let mut det_match = Vec::with_capacity(dets.len());
    for d in dets {
        let mut best: Option<(usize, f64, bool)> = None;
        for (g, gt) in gts.iter().enumerate() {
            if gt_covered[g] {
                continue;
            }
            let iou = d.iou(gt);
            if iou < iou_thr {
                continue;
            }
            let better = match best {
                None => true,
                Some((_, b_iou, b_ign)) => {
                    (b_ign && !gt_ignore[g]) || (b_ign == gt_ignore[g] && iou > b_iou)
                }
            };
            if better {
                best = Some((g, iou, gt_ignore[g]));
            }
        }
        if let Some((g, _, _)) = best {
            gt_covered[g] = true;
        }
        det_match.push(best.map(|(g, _, _)| g));
    }
    let mut seen = vec![false; gts.len()];
    for g in det_match.iter().flatten() {
        assert!(!seen[*g], "ground truth {g} matched twice");
        seen[*g] = true;
    }
    MatchResult {
        det_match,
        gt_covered,
    }
}

/// Detections and ground truths bucketed by `(image, category)`.
struct Index<'a> {
    images: Vec<u64>,
    dets: BTreeMap<(u64, u64), Vec<&'a EvalDet>>,
    gts: BTreeMap<(u64, u64), Vec<&'a EvalGt>>,
    categories: BTreeSet<u64>,
}

impl<'a> Index<'a> {
    fn new(images: &[u64], dets: &'a [EvalDet], gts: &'a [EvalGt], max_dets: usize) -> Self {
        let mut images = images.to_vec();
        images.sort_unstable();
        images.dedup();
        let mut by_key: BTreeMap<(u64, u64), Vec<&EvalDet>> = BTreeMap::new();
        for d in dets {
            by_key.entry((d.image_id, d.category_id)).or_default().push(d);
        }
        for list in by_key.values_mut() {
            list.sort_by(|a, b| b.score.total_cmp(&a.score));
            list.truncate(max_dets);
        }
        let mut gt_key: BTreeMap<(u64, u64), Vec<&EvalGt>> = BTreeMap::new();
        for g in gts {
            gt_key.entry((g.image_id, g.category_id)).or_default().push(g);
        }
        Index {
            images,
            dets: by_key,
            gts: gt_key,
            categories: gts.iter().map(|g| g.category_id).collect(),
        }
    }
}

/// 101-point interpolated AP from detections in descending score order.
fn interpolated_ap(flags: &[bool], num_gt: usize) -> f64 {
    let mut tp = 0usize;
    let mut recall = Vec::with_capacity(flags.len());
    let mut precision = Vec::with_capacity(flags.len());
    for (n, &hit) in flags.iter().enumerate() {
        tp += hit as usize;
        recall.push(tp as f64 / num_gt as f64);
        precision.push(tp as f64 / (n + 1) as f64);
    }
    for i in (1..precision.len()).rev() {
        if precision[i] > precision[i - 1] {
            precision[i - 1] = precision[i];
        }
    }
    let mut sum = 0.0;
    for r in 0..RECALL_POINTS {
        let level = r as f64 / 100.0;
        let first = recall.partition_point(|&rc| rc < level);
        if first < precision.len() {
            sum += precision[first];
        }
    }
    sum / RECALL_POINTS as f64
}

/// AP per `[threshold][category]`; `None` where the category has no
/// ground truth inside `area`.
fn ap_table(index: &Index, thresholds: &[f64], area: AreaRange) -> Vec<Vec<Option<f64>>> {
    let mut table = vec![Vec::with_capacity(index.categories.len()); thresholds.len()];
    for &cat in &index.categories {
        // per threshold: (score, tp) of the non-ignored detections
        let mut scored: Vec<Vec<(f64, bool)>> = vec![Vec::new(); thresholds.len()];
        let mut num_gt = 0usize;
        for &img in &index.images {
            let dets = index.dets.get(&(img, cat)).map(Vec::as_slice).unwrap_or(&[]);
            let gts = index.gts.get(&(img, cat)).map(Vec::as_slice).unwrap_or(&[]);
            // regular ground truths first
            let mut order: Vec<usize> = (0..gts.len()).collect();
            order.sort_by_key(|&g| !area.contains(gts[g].bbox.area()));
            let gt_boxes: Vec<BBox> = order.iter().map(|&g| gts[g].bbox).collect();
            let gt_ignore: Vec<bool> = gt_boxes.iter().map(|b| !area.contains(b.area())).collect();
            num_gt += gt_ignore.iter().filter(|&&i| !i).count();
            let det_boxes: Vec<BBox> = dets.iter().map(|d| d.bbox).collect();
            for (t, &thr) in thresholds.iter().enumerate() {
                let m = match_with_ignore(&det_boxes, &gt_boxes, &gt_ignore, thr);
                for (d, matched) in dets.iter().zip(&m.det_match) {
                    let ignored = match matched {
                        Some(g) => gt_ignore[*g],
                        None => !area.contains(d.bbox.area()),
                    };
                    if !ignored {
                        scored[t].push((d.score, matched.is_some()));
                    }
                }
            }
        }
        for (t, mut list) in scored.into_iter().enumerate() {
            if num_gt == 0 {
                table[t].push(None);
                continue;
            }
            list.sort_by(|a, b| b.0.total_cmp(&a.0));
            let flags: Vec<bool> = list.iter().map(|&(_, hit)| hit).collect();
            table[t].push(Some(interpolated_ap(&flags, num_gt)));
        }
    }
    table
}

fn mean_defined<'a>(vals: impl IntoIterator<Item = &'a Option<f64>>) -> Option<f64> {
    let (mut sum, mut n) = (0.0, 0usize);
    for v in vals.into_iter().flatten() {
        sum += v;
        n += 1;
    }
    (n > 0).then(|| sum / n as f64)
}

/// AP averaged over `thresholds` and over categories with ground truth.
pub fn average_precision(
    images: &[u64],
    dets: &[EvalDet],
    gts: &[EvalGt],
    thresholds: &[f64],
    area: AreaRange,
) -> Option<f64> {
    let index = Index::new(images, dets, gts, MAX_DETS);
    let table = ap_table(&index, thresholds, area);
    mean_defined(table.iter().flatten())
}

/// AP at each threshold separately.
pub fn average_precision_per_threshold(
    images: &[u64],
    dets: &[EvalDet],
    gts: &[EvalGt],
    thresholds: &[f64],
    area: AreaRange,
) -> Vec<Option<f64>> {
    let index = Index::new(images, dets, gts, MAX_DETS);
    ap_table(&index, thresholds, area)
        .iter()
        .map(|row| mean_defined(row))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RecallConfig {
    pub max_dets: usize,
    pub class_agnostic: bool,
    pub area: AreaRange,
    pub aspect: Option<u32>,
}

impl RecallConfig {
    pub fn agnostic(max_dets: usize) -> Self {
        RecallConfig {
            max_dets,
            class_agnostic: true,
            area: AreaRange::ALL,
            aspect: None,
        }
    }
}

/// Fraction of in-range ground truths covered by at least one proposal of
/// IoU `>= t`, averaged over `t ∈ 0.50:0.05:0.95`.
pub fn average_recall(images: &[u64], proposals: &[EvalDet], gts: &[EvalGt], cfg: &RecallConfig) -> Option<f64> {
    let image_set: BTreeSet<u64> = images.iter().copied().collect();
    let mut per_image: BTreeMap<u64, Vec<&EvalDet>> = BTreeMap::new();
    for p in proposals {
        per_image.entry(p.image_id).or_default().push(p);
    }
    for list in per_image.values_mut() {
        list.sort_by(|a, b| b.score.total_cmp(&a.score));
        list.truncate(cfg.max_dets);
    }
    let thresholds = ap_thresholds();
    let mut covered = 0usize;
    let mut eligible = 0usize;
    for gt in gts {
        if !image_set.contains(&gt.image_id) || !cfg.area.contains(gt.bbox.area()) {
            continue;
        }
        if let Some(r) = cfg.aspect {
            if !in_aspect_bucket(&gt.bbox, r) {
                continue;
            }
        }
        eligible += 1;
        let best = per_image
            .get(&gt.image_id)
            .map(Vec::as_slice)
            .unwrap_or(&[])
            .iter()
            .filter(|p| cfg.class_agnostic || p.category_id == gt.category_id)
            .map(|p| p.bbox.iou(&gt.bbox))
            .fold(0.0f64, f64::max);
        covered += thresholds.iter().filter(|&&t| best >= t).count();
    }
    (eligible > 0).then(|| covered as f64 / (eligible * thresholds.len()) as f64)
}

/// AF pieces: ÃP per low threshold, and the derived rates.
#[derive(Debug, Clone, PartialEq)]
pub struct FalseDiscovery {
    pub ap_tilde: Vec<Option<f64>>,
    pub af: Option<f64>,
    pub af5: Option<f64>,
    pub af25: Option<f64>,
    pub af50: Option<f64>,
    pub af_small: Option<f64>,
    pub af_medium: Option<f64>,
    pub af_large: Option<f64>,
}

pub fn average_false_discovery(images: &[u64], dets: &[EvalDet], gts: &[EvalGt]) -> FalseDiscovery {
    let index = Index::new(images, dets, gts, MAX_DETS);
    let grid = af_thresholds();
    let ap_tilde: Vec<Option<f64>> = ap_table(&index, &grid, AreaRange::ALL)
        .iter()
        .map(|row| mean_defined(row))
        .collect();
    let complement = |v: Option<f64>| v.map(|a| 1.0 - a);
    let scale = |area| complement(mean_defined(ap_table(&index, &grid, area).iter().flatten()));
    FalseDiscovery {
        af: complement(mean_defined(&ap_tilde)),
        af5: complement(ap_tilde[0]),
        af25: complement(ap_tilde[4]),
        af50: complement(ap_tilde[9]),
        af_small: scale(AreaRange::SMALL),
        af_medium: scale(AreaRange::MEDIUM),
        af_large: scale(AreaRange::LARGE),
        ap_tilde,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub ap: Option<f64>,
    pub ap50: Option<f64>,
    pub ap75: Option<f64>,
    pub ap_small: Option<f64>,
    pub ap_medium: Option<f64>,
    pub ap_large: Option<f64>,
    pub ar_100: Option<f64>,
    pub ar_1000: Option<f64>,
    pub ar_area: [Option<f64>; 4],
    pub ar_aspect: [Option<f64>; 4],
    pub af: Option<f64>,
    pub af5: Option<f64>,
    pub af25: Option<f64>,
    pub af50: Option<f64>,
    pub af_small: Option<f64>,
    pub af_medium: Option<f64>,
    pub af_large: Option<f64>,
    /// ÃP at `0.05:0.05:0.50`, kept so AF can be re-derived.
    pub ap_tilde: Vec<Option<f64>>,
    /// Names of the fields that are undefined for this input.
    pub undefined: Vec<&'static str>,
}

impl EvalReport {
    pub fn fields(&self) -> Vec<(&'static str, Option<f64>)> {
        let mut out = vec![
            ("ap", self.ap),
            ("ap50", self.ap50),
            ("ap75", self.ap75),
            ("ap_small", self.ap_small),
            ("ap_medium", self.ap_medium),
            ("ap_large", self.ap_large),
            ("ar_100", self.ar_100),
            ("ar_1000", self.ar_1000),
        ];
        for (name, v) in ["ar_1+", "ar_2+", "ar_3+", "ar_4+"].into_iter().zip(self.ar_area) {
            out.push((name, v));
        }
        for (name, v) in ["ar_5:1", "ar_6:1", "ar_7:1", "ar_8:1"].into_iter().zip(self.ar_aspect) {
            out.push((name, v));
        }
        out.extend([
            ("af", self.af),
            ("af5", self.af5),
            ("af25", self.af25),
            ("af50", self.af50),
            ("af_small", self.af_small),
            ("af_medium", self.af_medium),
            ("af_large", self.af_large),
        ]);
        out
    }

    /// Re-derive AF from the stored ÃP grid and compare exactly.
    pub fn check_af_identity(&self) -> Result<()> {
        let derived = mean_defined(&self.ap_tilde).map(|m| 1.0 - m);
        if derived != self.af {
            return Err(Error::Invariant(alloc::format!(
                "AF {:?} differs from 1 - mean(ÃP) = {:?}",
                self.af,
                derived
            )));
        }
        Ok(())
    }
}

/// Every metric for one image set. `proposals` feed the recall columns;
/// without them the detections are used.
pub fn build_report(
    images: &[u64],
    dets: &[EvalDet],
    proposals: Option<&[EvalDet]>,
    gts: &[EvalGt],
) -> Result<EvalReport> {
    let known: BTreeSet<u64> = images.iter().copied().collect();
    let offenders: BTreeSet<u64> = dets
        .iter()
        .map(|d| d.image_id)
        .chain(proposals.unwrap_or(&[]).iter().map(|p| p.image_id))
        .chain(gts.iter().map(|g| g.image_id))
        .filter(|id| !known.contains(id))
        .collect();
    if !offenders.is_empty() {
        return Err(Error::InconsistentIds(offenders.into_iter().collect()));
    }

    let index = Index::new(images, dets, gts, MAX_DETS);
    let ap_grid = ap_thresholds();
    let all = ap_table(&index, &ap_grid, AreaRange::ALL);
    let per_t: Vec<Option<f64>> = all.iter().map(|row| mean_defined(row)).collect();
    let scale = |area| mean_defined(ap_table(&index, &ap_grid, area).iter().flatten());

    let props = proposals.unwrap_or(dets);
    let recall = |cfg: RecallConfig| average_recall(images, props, gts, &cfg);
    let buckets = recall_area_buckets();
    let ar_area = core::array::from_fn(|i| {
        recall(RecallConfig {
            area: buckets[i],
            ..RecallConfig::agnostic(MAX_PROPOSALS)
        })
    });
    let ar_aspect = core::array::from_fn(|i| {
        recall(RecallConfig {
            aspect: Some(ASPECT_BUCKETS[i]),
            ..RecallConfig::agnostic(MAX_PROPOSALS)
        })
    });
    let fd = average_false_discovery(images, dets, gts);

    let mut report = EvalReport {
        ap: mean_defined(all.iter().flatten()),
        ap50: per_t[0],
        ap75: per_t[5],
        ap_small: scale(AreaRange::SMALL),
        ap_medium: scale(AreaRange::MEDIUM),
        ap_large: scale(AreaRange::LARGE),
        ar_100: recall(RecallConfig::agnostic(MAX_DETS)),
        ar_1000: recall(RecallConfig::agnostic(MAX_PROPOSALS)),
        ar_area,
        ar_aspect,
        af: fd.af,
        af5: fd.af5,
        af25: fd.af25,
        af50: fd.af50,
        af_small: fd.af_small,
        af_medium: fd.af_medium,
        af_large: fd.af_large,
        ap_tilde: fd.ap_tilde,
        undefined: Vec::new(),
    };
    report.undefined = report
        .fields()
        .into_iter()
        .filter(|(_, v)| v.is_none())
        .map(|(name, _)| name)
        .collect();
    report.check_af_identity()?;
    Ok(report)
}
