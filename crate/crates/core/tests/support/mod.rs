//! Independent reference implementations and randomized suites shared by
//! the integration tests and the acceptance target.
//!
//! Each suite returns an [`Outcome`] instead of panicking so callers can
//! either assert on it or report it.

#![allow(dead_code)]

use cpn_core::decode::{decode_corners, local_max_suppress, CornerKind, HeatmapSet, PEAK_WINDOW};
use cpn_core::eval::{self, AreaRange, EvalDet, EvalGt, EvalReport};
use cpn_core::losses::{
    loss_class_with_grad, loss_corner_det_with_grad, loss_prop_with_grad, ProposalLabel,
};
use cpn_core::postprocess::{filter_by_objectness, fuse_scores, soft_nms};
use cpn_core::proposal::{enumerate_proposals, roi_align, POOL};
use cpn_core::{BBox, CornerKeypoint, Detection, LabelSource, Tensor};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, Default)]
pub struct Outcome {
    pub cases: usize,
    pub failures: usize,
    /// Largest observed error, where the suite measures one.
    pub worst: f64,
    pub first_failure: Option<String>,
}

impl Outcome {
    pub fn passed(&self) -> bool {
        self.cases > 0 && self.failures == 0
    }

    fn fail(&mut self, msg: impl FnOnce() -> String) {
        self.failures += 1;
        if self.first_failure.is_none() {
            self.first_failure = Some(msg());
        }
    }

    pub fn summary(&self) -> String {
        let mut s = format!("{} cases, {} failures, worst {:.3e}", self.cases, self.failures, self.worst);
        if let Some(f) = &self.first_failure {
            s.push_str(&format!("; first: {f}"));
        }
        s
    }
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn random_box<R: Rng>(rng: &mut R, lo: f32, hi: f32, max_side: f32) -> BBox {
    let x1 = rng.gen_range(lo..hi);
    let y1 = rng.gen_range(lo..hi);
    let w = rng.gen_range(0.0..max_side);
    let h = rng.gen_range(0.0..max_side);
    BBox::new(x1, y1, x1 + w, y1 + h).unwrap()
}

// ---------------------------------------------------------------- codec

pub fn tensor_roundtrip(cases: usize, seed: u64) -> Outcome {
    let mut rng = rng(seed);
    let mut out = Outcome::default();
    for case in 0..cases {
        let rank = rng.gen_range(1..=4);
        let shape: Vec<usize> = (0..rank).map(|_| rng.gen_range(1..=6)).collect();
        let n = shape.iter().product();
        let data: Vec<f32> = (0..n).map(|_| f32::from_bits(rng.gen())).collect();
        let t = Tensor::new(shape, data).unwrap();
        let bytes = t.encode();
        out.cases += 1;
        if bytes.len() != 5 + 4 * (1 + rank + n) {
            out.fail(|| format!("case {case}: encoded length {}", bytes.len()));
            continue;
        }
        match Tensor::decode(&bytes) {
            Ok(back)
                if back.shape() == t.shape()
                    && back.data().iter().zip(t.data()).all(|(a, b)| a.to_bits() == b.to_bits()) => {}
            other => out.fail(|| format!("case {case}: {other:?}")),
        }
    }
    out
}

// ------------------------------------------------------------ gradients

/// Central-difference check of an analytic gradient; returns the worst
/// relative error.
fn fd_worst(x: &[f64], analytic: &[f64], f: impl Fn(&[f64]) -> f64, step: f64) -> f64 {
    let mut worst = 0.0f64;
    let mut probe = x.to_vec();
    for i in 0..x.len() {
        probe[i] = x[i] + step;
        let up = f(&probe);
        probe[i] = x[i] - step;
        let down = f(&probe);
        probe[i] = x[i];
        let numeric = (up - down) / (2.0 * step);
        let scale = analytic[i].abs().max(numeric.abs());
        let err = (analytic[i] - numeric).abs();
        worst = worst.max(if scale > 1e-8 { err / scale } else { err });
    }
    worst
}

fn random_label<R: Rng>(rng: &mut R, classes: usize) -> ProposalLabel {
    let class_iou_max: Vec<f64> = (0..classes)
        .map(|_| if rng.gen_bool(0.4) { rng.gen_range(0.7..1.0) } else { rng.gen_range(0.0..0.7) })
        .collect();
    let iou_max = class_iou_max.iter().copied().fold(0.0, f64::max);
    ProposalLabel {
        iou_max,
        class_iou_max,
    }
}

pub const FD_STEP: f64 = 1e-3;
pub const FD_TOLERANCE: f64 = 1e-4;

/// `[loss_prop, loss_class, loss_corner_det]`
pub fn gradient_checks(cases: usize, seed: u64) -> [Outcome; 3] {
    let mut rng = rng(seed);
    let mut res: [Outcome; 3] = Default::default();
    for case in 0..cases {
        let m = rng.gen_range(1..=8);
        let labels: Vec<ProposalLabel> = (0..m).map(|_| random_label(&mut rng, 1)).collect();
        let p: Vec<f64> = (0..m).map(|_| rng.gen_range(0.1..0.9)).collect();
        let (_, g) = loss_prop_with_grad(&p, &labels, 0.7, 2.0).unwrap();
        let w = fd_worst(&p, &g, |x| loss_prop_with_grad(x, &labels, 0.7, 2.0).unwrap().0, FD_STEP);
        record(&mut res[0], case, w);

        let c = rng.gen_range(1..=4);
        let labels: Vec<ProposalLabel> = (0..m).map(|_| random_label(&mut rng, c)).collect();
        let q: Vec<f64> = (0..m * c).map(|_| rng.gen_range(0.1..0.9)).collect();
        let (_, g) = loss_class_with_grad(&q, c, &labels, 0.7, 2.0).unwrap();
        let w = fd_worst(&q, &g, |x| loss_class_with_grad(x, c, &labels, 0.7, 2.0).unwrap().0, FD_STEP);
        record(&mut res[1], case, w);

        let (h, wd) = (8, 8);
        let n = c * h * wd;
        let target: Vec<f32> = (0..n)
            .map(|_| if rng.gen_bool(0.05) { 1.0 } else { rng.gen_range(0.0..1.0) })
            .collect();
        let target = Tensor::new(vec![c, h, wd], target).unwrap();
        // f64 points that are exact in f32, so the f32 tensor sees the same
        // values the difference quotient assumes
        let pred: Vec<f64> = (0..n).map(|_| rng.gen_range(0.1f32..0.9) as f64).collect();
        let eval = |x: &[f64]| {
            let t = Tensor::new(vec![c, h, wd], x.iter().map(|&v| v as f32).collect()).unwrap();
            loss_corner_det_with_grad(&t, &target).unwrap()
        };
        let (_, g) = eval(&pred);
        // perturbed values are rounded to f32; use the realized step
        let mut worst = 0.0f64;
        let mut probe = pred.clone();
        for i in 0..n {
            let up = (pred[i] + FD_STEP) as f32 as f64;
            let down = (pred[i] - FD_STEP) as f32 as f64;
            probe[i] = up;
            let lu = eval(&probe).0;
            probe[i] = down;
            let ld = eval(&probe).0;
            probe[i] = pred[i];
            let numeric = (lu - ld) / (up - down);
            let scale = g[i].abs().max(numeric.abs());
            let err = (g[i] - numeric).abs();
            worst = worst.max(if scale > 1e-8 { err / scale } else { err });
        }
        record(&mut res[2], case, worst);
    }
    res
}

fn record(out: &mut Outcome, case: usize, worst: f64) {
    out.cases += 1;
    out.worst = out.worst.max(worst);
    if !(worst < FD_TOLERANCE) {
        out.fail(|| format!("case {case}: relative error {worst:.3e}"));
    }
}

// ------------------------------------------------------------- RoIAlign

/// Dense bilinear oracle: every grid node weighted by the tent kernel.
pub fn roi_align_dense(feat: &Tensor, b: &BBox) -> Vec<f64> {
    let (d, h, w) = feat.dims3().unwrap();
    let mut out = vec![0.0; d * POOL * POOL];
    if b.width() <= 0.0 || b.height() <= 0.0 {
        return out;
    }
    let bw = b.width() / 4.0 / POOL as f64;
    let bh = b.height() / 4.0 / POOL as f64;
    for ch in 0..d {
        for bi in 0..POOL {
            for bj in 0..POOL {
                let mut acc = 0.0;
                for sy in [0.25, 0.75] {
                    for sx in [0.25, 0.75] {
                        let y = b.y1 as f64 / 4.0 + (bi as f64 + sy) * bh;
                        let x = b.x1 as f64 / 4.0 + (bj as f64 + sx) * bw;
                        for r in 0..h {
                            let ky = (1.0 - (y - r as f64).abs()).max(0.0);
                            for c in 0..w {
                                let kx = (1.0 - (x - c as f64).abs()).max(0.0);
                                acc += ky * kx * feat.at3(ch, r, c) as f64;
                            }
                        }
                    }
                }
                out[(ch * POOL + bi) * POOL + bj] = acc / 4.0;
            }
        }
    }
    out
}

pub fn roi_align_oracle(cases: usize, seed: u64) -> Outcome {
    let mut rng = rng(seed);
    let mut out = Outcome::default();
    for case in 0..cases {
        let (d, h, w) = (rng.gen_range(1..=3), rng.gen_range(1..=12), rng.gen_range(1..=12));
        let data: Vec<f32> = (0..d * h * w).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let feat = Tensor::new(vec![d, h, w], data).unwrap();
        // boxes may hang over any edge of the map
        let span = 4.0 * h.max(w) as f32;
        let b = match case % 10 {
            0 => {
                let x = rng.gen_range(-8.0..span);
                BBox::new(x, x, x, x + 3.0).unwrap()
            }
            _ => random_box(&mut rng, -0.5 * span, span, span),
        };
        let got = roi_align(&feat, &b).unwrap();
        let want = roi_align_dense(&feat, &b);
        let err = got
            .data()
            .iter()
            .zip(&want)
            .map(|(&g, &w)| (g as f64 - w).abs())
            .fold(0.0, f64::max);
        out.cases += 1;
        out.worst = out.worst.max(err);
        if !(err <= 1e-5) {
            out.fail(|| format!("case {case}: {b:?} error {err:.3e}"));
        }
    }
    out
}

// ------------------------------------------------------------- soft-NMS

/// Naive reference: per class, scan for the maximum over alive entries,
/// then decay every other alive entry.
pub fn soft_nms_naive(dets: &[Detection], sigma: f64, prune: f64) -> Vec<Detection> {
    let mut classes: Vec<usize> = dets.iter().map(|d| d.class_id).collect();
    classes.sort_unstable();
    classes.dedup();
    let mut out = Vec::new();
    for class in classes {
        let mut score: Vec<f64> = dets.iter().map(|d| d.score).collect();
        let mut alive: Vec<bool> = dets.iter().map(|d| d.class_id == class).collect();
        loop {
            let mut best: Option<usize> = None;
            for i in 0..dets.len() {
                if alive[i] && best.map_or(true, |b| score[i] > score[b]) {
                    best = Some(i);
                }
            }
            let Some(b) = best else { break };
            alive[b] = false;
            out.push(Detection {
                score: score[b],
                ..dets[b]
            });
            for i in 0..dets.len() {
                if alive[i] {
                    let iou = dets[b].bbox.iou(&dets[i].bbox);
                    score[i] *= libm::exp(-(iou * iou) / sigma);
                    if score[i] < prune {
                        alive[i] = false;
                    }
                }
            }
        }
    }
    out
}

fn random_dets<R: Rng>(rng: &mut R, n: usize, classes: usize) -> Vec<Detection> {
    let mut dets = Vec::with_capacity(n);
    while dets.len() < n {
        // clustered boxes so suppression actually happens
        let b = if !dets.is_empty() && rng.gen_bool(0.5) {
            let base: &Detection = &dets[rng.gen_range(0..dets.len())];
            let j = |rng: &mut R| rng.gen_range(-6.0f32..6.0);
            let (x1, y1) = (base.bbox.x1 + j(rng), base.bbox.y1 + j(rng));
            BBox::new(x1, y1, x1 + base.bbox.width() as f32 + j(rng).abs(), y1 + base.bbox.height() as f32 + j(rng).abs())
                .unwrap()
        } else {
            random_box(rng, 0.0, 200.0, 80.0)
        };
        let score = if rng.gen_bool(0.2) {
            rng.gen_range(1..=5) as f64 / 10.0
        } else {
            rng.gen_range(0.0..1.0)
        };
        dets.push(Detection {
            bbox: b,
            class_id: rng.gen_range(0..classes),
            score,
            source: LabelSource::Both,
        });
    }
    dets
}

pub fn soft_nms_oracle(cases: usize, seed: u64) -> Outcome {
    let mut rng = rng(seed);
    let mut out = Outcome::default();
    for case in 0..cases {
        let n = rng.gen_range(0..=50);
        let classes = rng.gen_range(1..=3);
        let dets = random_dets(&mut rng, n, classes);
        let got = soft_nms(&dets, 0.5, 0.001);
        let want = soft_nms_naive(&dets, 0.5, 0.001);
        out.cases += 1;
        let same = got.len() == want.len()
            && got.iter().zip(&want).all(|(g, w)| {
                g.bbox == w.bbox && g.class_id == w.class_id && g.score.to_bits() == w.score.to_bits()
            });
        if !same {
            out.fail(|| format!("case {case}: {} vs {} detections", got.len(), want.len()));
        }
    }
    out
}

// ------------------------------------------------------------ evaluator

fn brute_match(dets: &[&EvalDet], gts: &[&EvalGt], ignore: &[bool], thr: f64) -> Vec<Option<usize>> {
    let mut taken = vec![false; gts.len()];
    dets.iter()
        .map(|d| {
            let mut cands: Vec<(bool, f64, usize)> = (0..gts.len())
                .filter(|&g| !taken[g])
                .map(|g| (ignore[g], d.bbox.iou(&gts[g].bbox), g))
                .filter(|&(_, iou, _)| iou >= thr)
                .collect();
            cands.sort_by(|a, b| a.0.cmp(&b.0).then(b.1.total_cmp(&a.1)).then(a.2.cmp(&b.2)));
            let m = cands.first().map(|c| c.2);
            if let Some(g) = m {
                taken[g] = true;
            }
            m
        })
        .collect()
}

fn top_by_score<'a>(mut v: Vec<&'a EvalDet>, k: usize) -> Vec<&'a EvalDet> {
    v.sort_by(|a, b| b.score.total_cmp(&a.score));
    v.truncate(k);
    v
}

/// AP of each category with ground truth in `area`, at one threshold.
fn brute_ap(images: &[u64], dets: &[EvalDet], gts: &[EvalGt], thr: f64, area: AreaRange) -> Vec<f64> {
    let mut cats: Vec<u64> = gts.iter().map(|g| g.category_id).collect();
    cats.sort_unstable();
    cats.dedup();
    let mut imgs = images.to_vec();
    imgs.sort_unstable();
    imgs.dedup();
    let mut out = Vec::new();
    for cat in cats {
        let mut npos = 0;
        let mut hits: Vec<(f64, bool)> = Vec::new();
        for &img in &imgs {
            let d = top_by_score(
                dets.iter().filter(|d| d.image_id == img && d.category_id == cat).collect(),
                eval::MAX_DETS,
            );
            let g_all: Vec<&EvalGt> = gts.iter().filter(|g| g.image_id == img && g.category_id == cat).collect();
            let mut g: Vec<&EvalGt> = g_all.iter().copied().filter(|g| area.contains(g.bbox.area())).collect();
            g.extend(g_all.iter().copied().filter(|g| !area.contains(g.bbox.area())));
            let ignore: Vec<bool> = g.iter().map(|g| !area.contains(g.bbox.area())).collect();
            npos += ignore.iter().filter(|i| !**i).count();
            for (det, m) in d.iter().zip(brute_match(&d, &g, &ignore, thr)) {
                let skip = match m {
                    Some(k) => ignore[k],
                    None => !area.contains(det.bbox.area()),
                };
                if !skip {
                    hits.push((det.score, m.is_some()));
                }
            }
        }
        if npos == 0 {
            continue;
        }
        hits.sort_by(|a, b| b.0.total_cmp(&a.0));
        let mut tp = 0;
        let pr: Vec<(f64, f64)> = hits
            .iter()
            .enumerate()
            .map(|(n, &(_, hit))| {
                tp += hit as usize;
                (tp as f64 / npos as f64, tp as f64 / (n + 1) as f64)
            })
            .collect();
        let mut sum = 0.0;
        for r in 0..=100 {
            let level = r as f64 / 100.0;
            sum += pr
                .iter()
                .filter(|(rc, _)| *rc >= level)
                .map(|(_, p)| *p)
                .fold(0.0, f64::max);
        }
        out.push(sum / 101.0);
    }
    out
}

fn mean(v: &[f64]) -> Option<f64> {
    (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
}

fn brute_ap_over(images: &[u64], dets: &[EvalDet], gts: &[EvalGt], thrs: &[f64], area: AreaRange) -> Option<f64> {
    let all: Vec<f64> = thrs
        .iter()
        .flat_map(|&t| brute_ap(images, dets, gts, t, area))
        .collect();
    mean(&all)
}

fn brute_ar(
    images: &[u64],
    props: &[EvalDet],
    gts: &[EvalGt],
    max_dets: usize,
    keep: impl Fn(&BBox) -> bool,
) -> Option<f64> {
    let mut hits = 0usize;
    let mut n = 0usize;
    for g in gts.iter().filter(|g| images.contains(&g.image_id) && keep(&g.bbox)) {
        let p = top_by_score(props.iter().filter(|p| p.image_id == g.image_id).collect(), max_dets);
        let best = p.iter().map(|p| p.bbox.iou(&g.bbox)).fold(0.0, f64::max);
        for i in 0..10 {
            n += 1;
            hits += (best >= (50 + 5 * i) as f64 / 100.0) as usize;
        }
    }
    (n > 0).then(|| hits as f64 / n as f64)
}

/// Brute-force counterpart of [`eval::build_report`], field by field in
/// [`EvalReport::fields`] order.
pub fn brute_report(
    images: &[u64],
    dets: &[EvalDet],
    props: Option<&[EvalDet]>,
    gts: &[EvalGt],
) -> Vec<(&'static str, Option<f64>)> {
    let ap_t: Vec<f64> = (0..10).map(|i| (50 + 5 * i) as f64 / 100.0).collect();
    let af_t: Vec<f64> = (0..10).map(|i| (5 + 5 * i) as f64 / 100.0).collect();
    let all = AreaRange::closed(0.0, f64::INFINITY);
    let small = AreaRange::closed(0.0, 1024.0);
    let medium = AreaRange::closed(1024.0, 9216.0);
    let large = AreaRange::closed(9216.0, f64::INFINITY);
    let props = props.unwrap_or(dets);
    let ap = |thrs: &[f64], area| brute_ap_over(images, dets, gts, thrs, area);
    let af = |thrs: &[f64], area| ap(thrs, area).map(|v| 1.0 - v);
    let sq = |v: f64| v * v;
    let area_bucket = |lo: f64, hi: f64| move |b: &BBox| b.area() > lo && b.area() <= hi;
    let aspect_bucket = |r: f64| move |b: &BBox| b.aspect().is_finite() && b.aspect().round() == r;
    vec![
        ("ap", ap(&ap_t, all)),
        ("ap50", ap(&ap_t[..1], all)),
        ("ap75", ap(&ap_t[5..6], all)),
        ("ap_small", ap(&ap_t, small)),
        ("ap_medium", ap(&ap_t, medium)),
        ("ap_large", ap(&ap_t, large)),
        ("ar_100", brute_ar(images, props, gts, 100, |_| true)),
        ("ar_1000", brute_ar(images, props, gts, 1000, |_| true)),
        ("ar_1+", brute_ar(images, props, gts, 1000, area_bucket(sq(96.0), sq(200.0)))),
        ("ar_2+", brute_ar(images, props, gts, 1000, area_bucket(sq(200.0), sq(300.0)))),
        ("ar_3+", brute_ar(images, props, gts, 1000, area_bucket(sq(300.0), sq(400.0)))),
        ("ar_4+", brute_ar(images, props, gts, 1000, area_bucket(sq(400.0), f64::INFINITY))),
        ("ar_5:1", brute_ar(images, props, gts, 1000, aspect_bucket(5.0))),
        ("ar_6:1", brute_ar(images, props, gts, 1000, aspect_bucket(6.0))),
        ("ar_7:1", brute_ar(images, props, gts, 1000, aspect_bucket(7.0))),
        ("ar_8:1", brute_ar(images, props, gts, 1000, aspect_bucket(8.0))),
        ("af", af(&af_t, all)),
        ("af5", af(&af_t[..1], all)),
        ("af25", af(&af_t[4..5], all)),
        ("af50", af(&af_t[9..], all)),
        ("af_small", af(&af_t, small)),
        ("af_medium", af(&af_t, medium)),
        ("af_large", af(&af_t, large)),
    ]
}

pub struct EvalInstance {
    pub images: Vec<u64>,
    pub dets: Vec<EvalDet>,
    pub props: Option<Vec<EvalDet>>,
    pub gts: Vec<EvalGt>,
}

pub fn random_eval_instance<R: Rng>(rng: &mut R) -> EvalInstance {
    let images: Vec<u64> = (0..rng.gen_range(1..=3)).map(|i| 10 + 3 * i).collect();
    let classes = rng.gen_range(1..=3u64);
    let ngt = rng.gen_range(0..=10);
    let gts: Vec<EvalGt> = (0..ngt)
        .map(|_| {
            let (w, h): (f32, f32) = match rng.gen_range(0..4) {
                0 => (rng.gen_range(4.0..40.0), rng.gen_range(4.0..40.0)),
                1 => (rng.gen_range(40.0..160.0), rng.gen_range(40.0..160.0)),
                2 => (rng.gen_range(100.0..500.0), rng.gen_range(100.0..500.0)),
                _ => {
                    let s = rng.gen_range(10.0..60.0);
                    (s * rng.gen_range(4.5..8.5), s)
                }
            };
            let (w, h) = if rng.gen_bool(0.5) { (w, h) } else { (h, w) };
            let (x, y) = (rng.gen_range(0.0..100.0f32), rng.gen_range(0.0..100.0f32));
            EvalGt {
                image_id: images[rng.gen_range(0..images.len())],
                category_id: rng.gen_range(0..classes),
                bbox: BBox::new(x, y, x + w, y + h).unwrap(),
            }
        })
        .collect();
    let make_dets = |n: usize, rng: &mut R| -> Vec<EvalDet> {
        (0..n)
            .map(|_| {
                let (image_id, bbox, category_id) = if !gts.is_empty() && rng.gen_bool(0.7) {
                    let g = &gts[rng.gen_range(0..gts.len())];
                    let s = rng.gen_range(0.0..0.6f32);
                    let (dw, dh) = (g.bbox.width() as f32 * s, g.bbox.height() as f32 * s);
                    let x1 = g.bbox.x1 + rng.gen_range(-dw..=dw) * 0.5;
                    let y1 = g.bbox.y1 + rng.gen_range(-dh..=dh) * 0.5;
                    let w = (g.bbox.width() as f32 + rng.gen_range(-dw..=dw)).max(1.0);
                    let h = (g.bbox.height() as f32 + rng.gen_range(-dh..=dh)).max(1.0);
                    let cat = if rng.gen_bool(0.8) { g.category_id } else { rng.gen_range(0..classes) };
                    (g.image_id, BBox::new(x1, y1, x1 + w, y1 + h).unwrap(), cat)
                } else {
                    (
                        images[rng.gen_range(0..images.len())],
                        random_box(rng, 0.0, 300.0, 200.0),
                        rng.gen_range(0..classes),
                    )
                };
                let score = if rng.gen_bool(0.3) {
                    rng.gen_range(1..=4) as f64 / 4.0
                } else {
                    rng.gen_range(0.0..1.0)
                };
                EvalDet {
                    image_id,
                    category_id,
                    bbox,
                    score,
                }
            })
            .collect()
    };
    let nd = rng.gen_range(0..=10);
    let dets = make_dets(nd, rng);
    let props = if rng.gen_bool(0.5) {
        let np = rng.gen_range(0..=10);
        Some(make_dets(np, rng))
    } else {
        None
    };
    EvalInstance {
        images,
        dets,
        props,
        gts,
    }
}

pub fn compare_report(report: &EvalReport, brute: &[(&'static str, Option<f64>)]) -> Result<f64, String> {
    let fields = report.fields();
    let mut worst = 0.0f64;
    for ((name, got), (bname, want)) in fields.iter().zip(brute) {
        assert_eq!(name, bname);
        match (got, want) {
            (Some(g), Some(w)) => {
                let e = (g - w).abs();
                worst = worst.max(e);
                if e > 1e-9 {
                    return Err(format!("{name}: {g} vs brute {w}"));
                }
            }
            (None, None) => {}
            _ => return Err(format!("{name}: {got:?} vs brute {want:?}")),
        }
    }
    if fields.len() != brute.len() {
        return Err("field count differs".into());
    }
    report.check_af_identity().map_err(|e| e.to_string())?;
    let direct = report
        .ap_tilde
        .iter()
        .flatten()
        .copied()
        .collect::<Vec<_>>();
    if let (Some(af), Some(m)) = (report.af, mean(&direct)) {
        if af != 1.0 - m {
            return Err(format!("AF {af} != 1 - mean(ÃP) {}", 1.0 - m));
        }
    }
    Ok(worst)
}

pub fn eval_oracle(cases: usize, seed: u64) -> Outcome {
    let mut rng = rng(seed);
    let mut out = Outcome::default();
    for case in 0..cases {
        let inst = random_eval_instance(&mut rng);
        let report = eval::build_report(&inst.images, &inst.dets, inst.props.as_deref(), &inst.gts).unwrap();
        let brute = brute_report(&inst.images, &inst.dets, inst.props.as_deref(), &inst.gts);
        out.cases += 1;
        match compare_report(&report, &brute) {
            Ok(w) => out.worst = out.worst.max(w),
            Err(e) => out.fail(|| format!("case {case}: {e}")),
        }
    }
    out
}

// ---------------------------------------------------------- enumeration

fn random_keypoints<R: Rng>(rng: &mut R, kind: CornerKind, n: usize) -> Vec<CornerKeypoint> {
    (0..n)
        .map(|_| {
            // coarse coordinates so equal x or y values are common
            let (row, col) = (rng.gen_range(0..16), rng.gen_range(0..16));
            CornerKeypoint {
                kind,
                class_id: rng.gen_range(0..3),
                x: col as f32 * 4.0 + if rng.gen_bool(0.5) { 0.0 } else { 2.0 },
                y: row as f32 * 4.0,
                score: rng.gen_range(0.0..1.0),
                row,
                col,
            }
        })
        .collect()
}

pub fn enumeration_oracle(cases: usize, seed: u64) -> Outcome {
    let mut rng = rng(seed);
    let mut out = Outcome::default();
    for case in 0..cases {
        let k = rng.gen_range(0..=70);
        let tls = random_keypoints(&mut rng, CornerKind::TopLeft, k);
        let brs = random_keypoints(&mut rng, CornerKind::BottomRight, k);
        let mut want = Vec::new();
        for t in &tls {
            for b in &brs {
                if t.class_id == b.class_id && t.x < b.x && t.y < b.y {
                    want.push((t.x, t.y, b.x, b.y, t.class_id, (t.score + b.score) / 2.0));
                }
            }
        }
        let got: Vec<_> = enumerate_proposals(&tls, &brs)
            .iter()
            .map(|p| (p.bbox.x1, p.bbox.y1, p.bbox.x2, p.bbox.y2, p.class_id, p.corner_score))
            .collect();
        out.cases += 1;
        if got != want || got.len() > tls.len() * brs.len() {
            out.fail(|| format!("case {case}: {} vs {} pairs", got.len(), want.len()));
        }
    }
    out
}

// ----------------------------------------------------------- properties

pub fn threshold_monotonicity(cases: usize, seed: u64) -> Outcome {
    let mut rng = rng(seed);
    let mut out = Outcome::default();
    for case in 0..cases {
        let p: Vec<f64> = (0..rng.gen_range(0..40)).map(|_| rng.gen_range(0.0..1.0)).collect();
        let a = rng.gen_range(0.0..1.0);
        let b = rng.gen_range(a..1.0);
        let (sa, sb) = (filter_by_objectness(&p, a), filter_by_objectness(&p, b));
        out.cases += 1;
        if !sb.iter().all(|i| sa.contains(i)) {
            out.fail(|| format!("case {case}: survivors at {b} not within those at {a}"));
        }
    }
    out
}

pub fn fuse_monotonicity(cases: usize, seed: u64) -> Outcome {
    let mut rng = rng(seed);
    let mut out = Outcome::default();
    for case in 0..cases {
        let s1 = rng.gen_range(1e-6..1.0 - 1e-3);
        let s2 = rng.gen_range(1e-6..1.0 - 1e-3);
        let d = rng.gen_range(1e-6..1e-3);
        let base = fuse_scores(s1, s2);
        let (up1, up2) = (fuse_scores(s1 + d, s2), fuse_scores(s1, s2 + d));
        out.cases += 1;
        let in_range = [base, up1, up2].iter().all(|v| (0.0..=1.0).contains(v));
        if !(up1 > base && up2 > base && in_range) {
            out.fail(|| format!("case {case}: s1 {s1} s2 {s2} d {d}"));
        }
    }
    out
}

pub fn soft_nms_non_increase(cases: usize, seed: u64) -> Outcome {
    let mut rng = rng(seed);
    let mut out = Outcome::default();
    for case in 0..cases {
        let n = rng.gen_range(0..=50);
        let mut dets = random_dets(&mut rng, n, 3);
        // make inputs identifiable by score
        for (i, d) in dets.iter_mut().enumerate() {
            d.score = (d.score + i as f64) / n.max(1) as f64;
        }
        let res = soft_nms(&dets, 0.5, 0.001);
        out.cases += 1;
        let ok = res.len() <= dets.len()
            && res.iter().all(|r| {
                dets.iter()
                    .any(|d| d.bbox == r.bbox && d.class_id == r.class_id && r.score <= d.score)
            });
        let single = if dets.len() == 1 { res == dets } else { true };
        if !(ok && single) {
            out.fail(|| format!("case {case}: a score grew or a box changed"));
        }
    }
    out
}

pub fn decode_ordering(cases: usize, seed: u64) -> Outcome {
    let mut rng = rng(seed);
    let mut out = Outcome::default();
    for case in 0..cases {
        let (c, h, w) = (rng.gen_range(1..=3), rng.gen_range(1..=10), rng.gen_range(1..=10));
        let mut hm = HeatmapSet::zeros(c, h, w).unwrap();
        for v in hm.tl_heat.data_mut() {
            *v = if rng.gen_bool(0.2) { rng.gen_range(1..4) as f32 / 4.0 } else { rng.gen_range(0.0..1.0) };
        }
        let k = rng.gen_range(1..=c * h * w);
        let kps = decode_corners(&hm, CornerKind::TopLeft, k).unwrap();
        let peaks = local_max_suppress(&hm.tl_heat, PEAK_WINDOW).unwrap();
        let key = |p: &CornerKeypoint| (p.class_id, p.row, p.col);
        let ordered = kps.windows(2).all(|pair| {
            pair[0].score > pair[1].score || (pair[0].score == pair[1].score && key(&pair[0]) < key(&pair[1]))
        });
        let are_peaks = kps
            .iter()
            .all(|p| p.score > 0.0 && peaks.at3(p.class_id, p.row, p.col) == p.score);
        let floor = kps.last().map_or(f32::INFINITY, |p| p.score);
        let selected = |ch: usize, i: usize, j: usize| kps.iter().any(|p| key(p) == (ch, i, j));
        let mut dominant = true;
        for ch in 0..c {
            for i in 0..h {
                for j in 0..w {
                    let v = peaks.at3(ch, i, j);
                    if v > floor && !selected(ch, i, j) {
                        dominant = false;
                    }
                }
            }
        }
        out.cases += 1;
        if !(ordered && are_peaks && dominant && kps.len() <= k) {
            out.fail(|| format!("case {case}: ordered {ordered} peaks {are_peaks} dominant {dominant}"));
        }
    }
    out
}
