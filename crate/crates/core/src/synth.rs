//! Synthetic scenes with planted heatmaps, features and head weights.
//!
//! Each scene is a handful of integer-aligned ground-truth boxes. The
//! oracle bundle turns it into pipeline inputs whose head responses are
//! known in closed form:
//!
//! - heatmaps are Gaussian corner splats, optionally max-combined with
//!   low-amplitude background noise that seeds spurious corners;
//! - box features carry one channel per anchor bin of the 7×7 grid, set to
//!   1 around that bin's sample points of every true box, and the planted
//!   binary kernel reads exactly those nine bins;
//! - category features are per-class indicators of the boxes' union, read
//!   out by a uniform class kernel.
//!
//! A true box therefore scores `sigmoid(6)` on the binary head, and a pair
//! whose sample points miss the templates scores near zero. Scenes that
//! happen to violate the thresholds are rejected and resampled.

use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::decode::{decode_corners, splat_corner, splat_radius, CornerKind, HeatmapSet};
use crate::error::{Error, Result};
use crate::geometry::{BBox, GroundTruth};
use crate::math;
use crate::postprocess::argmax;
use crate::proposal::{
    binary_head, class_head, enumerate_proposals, FeatureMaps, HeadWeights, RoiSampler, POOL,
};
use crate::tensor::Tensor;
use crate::STRIDE;

/// Pooled bins read by the planted binary head, one box channel each.
pub const ANCHOR_BINS: [(usize, usize); 9] = [
    (0, 0),
    (0, 3),
    (0, 6),
    (3, 0),
    (3, 3),
    (3, 6),
    (6, 0),
    (6, 3),
    (6, 6),
];
/// Logit scale of both planted heads.
pub const HEAD_GAIN: f32 = 12.0;
/// Minimum Chebyshev distance, in cells, between same-kind corners of
/// distinct boxes.
pub const CORNER_SEPARATION: usize = 3;
/// Noise is kept off cells this close to a true corner.
pub const NOISE_CLEARANCE: usize = 3;
/// Acceptance bounds checked by [`render_oracle`].
pub const TRUE_MIN_SCORE: f64 = 0.9;
pub const FALSE_MAX_SCORE: f64 = 0.1;

const NOISE_STREAM: u64 = 0x6e6f_6973_65;
const PLACE_ATTEMPTS: usize = 200;
const SCENE_ATTEMPTS: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Regime {
    /// Every box drawn from the general area / aspect ranges.
    Mixed,
    /// The first box has area above 400².
    Large,
    /// The first box has aspect ratio between 5:1 and 8:1.
    Elongated,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SceneConfig {
    /// `(height, width)` in pixels.
    pub image_size: (usize, usize),
    pub num_classes: usize,
    pub min_boxes: usize,
    pub max_boxes: usize,
    pub min_side: u32,
    pub min_area: f64,
    pub max_area: f64,
    pub max_aspect: f64,
    pub regime: Regime,
    /// Background noise amplitude; 0 disables it.
    pub noise: f32,
    /// Corner peaks are drawn from `[peak_min, 1]`.
    pub peak_min: f32,
    /// Decode width used when verifying a rendered scene.
    pub k: usize,
    pub resample_budget: u32,
}

impl Default for SceneConfig {
    fn default() -> Self {
        SceneConfig {
            image_size: (511, 511),
            num_classes: 3,
            min_boxes: 1,
            max_boxes: 6,
            min_side: 8,
            min_area: 16.0 * 16.0,
            max_area: 400.0 * 400.0,
            max_aspect: 8.0,
            regime: Regime::Mixed,
            noise: 0.05,
            peak_min: 1.0,
            k: 70,
            resample_budget: 64,
        }
    }
}

impl SceneConfig {
    /// Heatmap / feature grid `(rows, cols)`.
    pub fn grid(&self) -> (usize, usize) {
        grid_of(self.image_size)
    }

    /// Largest box coordinate that still maps inside the grid.
    fn max_coord(&self) -> u32 {
        let (gh, gw) = self.grid();
        let lim = |g: usize, img: usize| ((g - 1) * STRIDE as usize).min(img) as u32;
        lim(gh, self.image_size.0).min(lim(gw, self.image_size.1))
    }

    pub fn validate(&self) -> Result<()> {
        let (h, w) = self.image_size;
        if h < STRIDE as usize + 1 || w < STRIDE as usize + 1 {
            return Err(Error::arg("image too small for a stride-4 grid"));
        }
        if self.num_classes == 0 {
            return Err(Error::arg("num_classes must be positive"));
        }
        if self.min_boxes > self.max_boxes {
            return Err(Error::arg("min_boxes exceeds max_boxes"));
        }
        if self.min_side == 0 || !(self.min_area > 0.0 && self.min_area <= self.max_area) {
            return Err(Error::arg("empty box size range"));
        }
        if !(self.max_aspect >= 1.0) {
            return Err(Error::arg("max_aspect must be at least 1"));
        }
        if !(self.noise >= 0.0 && self.noise < 1.0) || !(self.peak_min > 0.0 && self.peak_min <= 1.0) {
            return Err(Error::arg("noise must be in [0, 1) and peak_min in (0, 1]"));
        }
        if self.k == 0 {
            return Err(Error::arg("k must be positive"));
        }
        let span = self.max_coord();
        let feasible = match self.regime {
            _ if span < self.min_side => false,
            Regime::Mixed => self.min_side as f64 * self.min_side as f64 <= self.max_area,
            Regime::Large => span > 401,
            Regime::Elongated => self.min_side * 5 <= span && self.max_aspect >= 5.0,
        };
        if !feasible && self.max_boxes > 0 {
            return Err(Error::arg(alloc::format!(
                "{:?} boxes do not fit a {}x{} image",
                self.regime,
                h,
                w
            )));
        }
        Ok(())
    }
}

fn grid_of((h, w): (usize, usize)) -> (usize, usize) {
    let s = STRIDE as usize;
    (h.div_ceil(s), w.div_ceil(s))
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scene {
    pub image_size: (usize, usize),
    pub num_classes: usize,
    pub gts: Vec<GroundTruth>,
    /// Corner peak height per box.
    pub peaks: Vec<f32>,
    pub noise: f32,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleBundle {
    pub heatmaps: HeatmapSet,
    pub features: FeatureMaps,
    pub weights: HeadWeights,
}

/// SplitMix64 finalizer over `seed` and a stream index.
pub fn derive_seed(seed: u64, stream: u64) -> u64 {
    let mut z = seed ^ stream.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn log_uniform<R: Rng>(rng: &mut R, lo: f64, hi: f64) -> f64 {
    if hi <= lo {
        return lo;
    }
    math::exp(rng.gen_range(math::ln(lo)..math::ln(hi)))
}

/// Box extent `(w, h)` for one draw, or `None` if it misses the regime.
fn sample_extent<R: Rng>(rng: &mut R, cfg: &SceneConfig, regime: Regime) -> Option<(u32, u32)> {
    let span = cfg.max_coord() as f64;
    let (area, aspect) = match regime {
        Regime::Mixed => (
            log_uniform(rng, cfg.min_area, cfg.max_area.min(span * span)),
            log_uniform(rng, 1.0, cfg.max_aspect),
        ),
        Regime::Large => {
            let area = log_uniform(rng, 401.0 * 401.0, span * span);
            (area, log_uniform(rng, 1.0, span * span / area))
        }
        Regime::Elongated => {
            let aspect = log_uniform(rng, 5.0, cfg.max_aspect.min(8.0) + 0.45);
            let lo = cfg.min_side as f64 * cfg.min_side as f64 * aspect;
            (log_uniform(rng, lo, (span * span / aspect).min(cfg.max_area).max(lo)), aspect)
        }
    };
    let long = math::round(math::sqrt(area * aspect)) as u32;
    let short = math::round(math::sqrt(area / aspect)) as u32;
    let (w, h) = if rng.gen_bool(0.5) { (long, short) } else { (short, long) };
    let fits = w >= cfg.min_side && h >= cfg.min_side && w as f64 <= span && h as f64 <= span;
    let ratio = w.max(h) as f64 / w.min(h).max(1) as f64;
    let ok = fits
        && match regime {
            Regime::Mixed => true,
            Regime::Large => w as f64 * h as f64 > 400.0 * 400.0,
            Regime::Elongated => ratio >= 5.0 && math::round(ratio) <= 8.0,
        };
    ok.then_some((w, h))
}

fn cell_of(x: f32, y: f32) -> (usize, usize) {
    ((y / STRIDE) as usize, (x / STRIDE) as usize)
}

fn chebyshev(a: (usize, usize), b: (usize, usize)) -> usize {
    a.0.abs_diff(b.0).max(a.1.abs_diff(b.1))
}

/// Same-kind corner cells of every pair of boxes are far enough apart.
pub fn corners_separated(boxes: &[BBox]) -> bool {
    boxes.iter().enumerate().all(|(i, a)| {
        boxes[i + 1..].iter().all(|b| {
            chebyshev(cell_of(a.x1, a.y1), cell_of(b.x1, b.y1)) >= CORNER_SEPARATION
                && chebyshev(cell_of(a.x2, a.y2), cell_of(b.x2, b.y2)) >= CORNER_SEPARATION
        })
    })
}

fn try_scene(rng: &mut ChaCha8Rng, cfg: &SceneConfig) -> Option<(Vec<GroundTruth>, Vec<f32>)> {
    let n = rng.gen_range(cfg.min_boxes..=cfg.max_boxes);
    let span = cfg.max_coord();
    let mut boxes: Vec<BBox> = Vec::with_capacity(n);
    let mut gts = Vec::with_capacity(n);
    let mut peaks = Vec::with_capacity(n);
    for i in 0..n {
        let regime = if i == 0 { cfg.regime } else { Regime::Mixed };
        let mut placed = false;
        for _ in 0..PLACE_ATTEMPTS {
            let Some((w, h)) = sample_extent(rng, cfg, regime) else {
                continue;
            };
            let x1 = rng.gen_range(0..=span - w);
            let y1 = rng.gen_range(0..=span - h);
            let bbox = BBox::new(x1 as f32, y1 as f32, (x1 + w) as f32, (y1 + h) as f32).ok()?;
            boxes.push(bbox);
            if corners_separated(&boxes) {
                placed = true;
                break;
            }
            boxes.pop();
        }
        if !placed {
            return None;
        }
        let class_id = rng.gen_range(0..cfg.num_classes);
        gts.push(GroundTruth::new(boxes[i], class_id, cfg.num_classes).ok()?);
        peaks.push(rng.gen_range(cfg.peak_min..=1.0));
    }
    Some((gts, peaks))
}

/// Draw a scene; deterministic in `seed`.
pub fn generate_scene(cfg: &SceneConfig, seed: u64) -> Result<Scene> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..SCENE_ATTEMPTS {
        if let Some((gts, peaks)) = try_scene(&mut rng, cfg) {
            return Ok(Scene {
                image_size: cfg.image_size,
                num_classes: cfg.num_classes,
                gts,
                peaks,
                noise: cfg.noise,
                seed,
            });
        }
    }
    Err(Error::arg("could not place the requested boxes with separated corners"))
}

/// Two same-class boxes crossing like an "X": one wide, one tall. Each
/// top-left corner pairs validly with each bottom-right corner, so corner
/// grouping alone yields four proposals for two objects. No noise.
pub fn generate_x_scene(cfg: &SceneConfig, seed: u64) -> Result<Scene> {
    cfg.validate()?;
    let span = cfg.max_coord();
    if span < 340 {
        return Err(Error::arg("image too small for a crossed pair"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let long = rng.gen_range(200..=320u32);
    let short = rng.gen_range(40..=72u32);
    let long2 = rng.gen_range(200..=320u32);
    let short2 = rng.gen_range(40..=72u32);
    let half = long.max(long2) / 2 + 24;
    let cx = rng.gen_range(half..=span - half);
    let cy = rng.gen_range(half..=span - half);
    let jitter = |rng: &mut ChaCha8Rng| rng.gen_range(0..=40u32);
    let (ax1, ay1) = (cx - long / 2 + jitter(&mut rng) - 20, cy - short / 2);
    let (bx1, by1) = (cx - short2 / 2, cy - long2 / 2 + jitter(&mut rng) - 20);
    let class_id = rng.gen_range(0..cfg.num_classes);
    let boxes = [
        BBox::new(ax1 as f32, ay1 as f32, (ax1 + long) as f32, (ay1 + short) as f32)?,
        BBox::new(bx1 as f32, by1 as f32, (bx1 + short2) as f32, (by1 + long2) as f32)?,
    ];
    let mut gts = Vec::with_capacity(2);
    let mut peaks = Vec::with_capacity(2);
    for b in boxes {
        gts.push(GroundTruth::new(b, class_id, cfg.num_classes)?);
        peaks.push(rng.gen_range(cfg.peak_min..=1.0));
    }
    Ok(Scene {
        image_size: cfg.image_size,
        num_classes: cfg.num_classes,
        gts,
        peaks,
        noise: 0.0,
        seed,
    })
}

/// Feature-coordinate sample points of one bin, as RoIAlign places them.
fn bin_samples(b: &BBox, bi: usize, bj: usize) -> [(f64, f64); 4] {
    let s = STRIDE as f64;
    let (x0, y0) = (b.x1 as f64 / s, b.y1 as f64 / s);
    let (bw, bh) = (b.width() / s / POOL as f64, b.height() / s / POOL as f64);
    let at = |fy: f64, fx: f64| (x0 + (bj as f64 + fx) * bw, y0 + (bi as f64 + fy) * bh);
    [at(0.25, 0.25), at(0.25, 0.75), at(0.75, 0.25), at(0.75, 0.75)]
}

fn render_heatmaps(scene: &Scene) -> Result<HeatmapSet> {
    let (gh, gw) = grid_of(scene.image_size);
    let c = scene.num_classes;
    let mut hm = HeatmapSet::zeros(c, gh, gw)?;
    for (gt, &peak) in scene.gts.iter().zip(&scene.peaks) {
        let b = gt.bbox;
        let r = splat_radius(b.width(), b.height());
        splat_corner(&mut hm, CornerKind::TopLeft, gt.class_id, b.x1, b.y1, r, peak)?;
        splat_corner(&mut hm, CornerKind::BottomRight, gt.class_id, b.x2, b.y2, r, peak)?;
    }
    if scene.noise <= 0.0 {
        return Ok(hm);
    }
    // Top-left noise leans to the upper left and bottom-right noise to the
    // lower right, so spurious corners mostly form valid pairs.
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(scene.seed, NOISE_STREAM));
    for kind in [CornerKind::TopLeft, CornerKind::BottomRight] {
        let corners: Vec<(usize, usize)> = scene
            .gts
            .iter()
            .map(|g| match kind {
                CornerKind::TopLeft => cell_of(g.bbox.x1, g.bbox.y1),
                CornerKind::BottomRight => cell_of(g.bbox.x2, g.bbox.y2),
            })
            .collect();
        let mut heat = hm.heat(kind).clone();
        for ch in 0..c {
            let plane = heat.plane_mut(ch);
            for i in 0..gh {
                for j in 0..gw {
                    let u: f32 = rng.gen();
                    if corners.iter().any(|&cc| chebyshev(cc, (i, j)) <= NOISE_CLEARANCE) {
                        continue;
                    }
                    let (fi, fj) = ((i as f32 + 0.5) / gh as f32, (j as f32 + 0.5) / gw as f32);
                    let weight = match kind {
                        CornerKind::TopLeft => (1.0 - fi) * (1.0 - fj),
                        CornerKind::BottomRight => fi * fj,
                    };
                    let v = scene.noise * u * weight;
                    let cell = &mut plane[i * gw + j];
                    if v > *cell {
                        *cell = v;
                    }
                }
            }
        }
        match kind {
            CornerKind::TopLeft => hm.tl_heat = heat,
            CornerKind::BottomRight => hm.br_heat = heat,
        }
    }
    Ok(hm)
}

fn paint_node(t: &mut Tensor, ch: usize, i: i64, j: i64) {
    let (_, h, w) = (t.shape()[0], t.shape()[1], t.shape()[2]);
    if i >= 0 && j >= 0 && (i as usize) < h && (j as usize) < w {
        t.set3(ch, i as usize, j as usize, 1.0);
    }
}

fn render_features(scene: &Scene) -> Result<FeatureMaps> {
    let (gh, gw) = grid_of(scene.image_size);
    let mut box_feat = Tensor::zeros(&[ANCHOR_BINS.len(), gh, gw])?;
    let mut cat_feat = Tensor::zeros(&[scene.num_classes, gh, gw])?;
    let s = STRIDE as f64;
    for gt in &scene.gts {
        let b = gt.bbox;
        for (a, &(bi, bj)) in ANCHOR_BINS.iter().enumerate() {
            for (x, y) in bin_samples(&b, bi, bj) {
                let (i0, j0) = (math::floor(y) as i64, math::floor(x) as i64);
                for (di, dj) in [(0, 0), (0, 1), (1, 0), (1, 1)] {
                    paint_node(&mut box_feat, a, i0 + di, j0 + dj);
                }
            }
        }
        let (i0, i1) = (math::floor(b.y1 as f64 / s) as i64, libm::ceil(b.y2 as f64 / s) as i64);
        let (j0, j1) = (math::floor(b.x1 as f64 / s) as i64, libm::ceil(b.x2 as f64 / s) as i64);
        for i in i0..=i1 {
            for j in j0..=j1 {
                paint_node(&mut cat_feat, gt.class_id, i, j);
            }
        }
    }
    FeatureMaps::new(box_feat, cat_feat)
}

/// Head weights that read the planted features.
pub fn planted_weights(num_classes: usize) -> Result<HeadWeights> {
    let d = ANCHOR_BINS.len();
    let mut bk = Tensor::zeros(&[1, d, POOL, POOL])?;
    for (a, &(bi, bj)) in ANCHOR_BINS.iter().enumerate() {
        bk.data_mut()[(a * POOL + bi) * POOL + bj] = HEAD_GAIN;
    }
    let bias = -(d as f32 - 0.5) * HEAD_GAIN;
    let mut ck = Tensor::zeros(&[num_classes, num_classes, POOL, POOL])?;
    let per_bin = HEAD_GAIN / (POOL * POOL) as f32;
    for c in 0..num_classes {
        let start = (c * num_classes + c) * POOL * POOL;
        ck.data_mut()[start..start + POOL * POOL].fill(per_bin);
    }
    HeadWeights::new(bk, bias, ck, vec![-HEAD_GAIN / 2.0; num_classes])
}

fn reject(msg: alloc::string::String) -> Error {
    Error::Invariant(alloc::format!("oracle check failed: {msg}"))
}

/// Build the pipeline inputs for `scene` and check the planted guarantees
/// at decode width `k`: every true corner is decoded exactly, every true
/// pair scores at least [`TRUE_MIN_SCORE`], every other pair at most
/// [`FALSE_MAX_SCORE`], and the class head's strict argmax inside each
/// true box is its class. A failed check is an [`Error::Invariant`].
pub fn render_oracle(scene: &Scene, k: usize) -> Result<OracleBundle> {
    let bundle = OracleBundle {
        heatmaps: render_heatmaps(scene)?,
        features: render_features(scene)?,
        weights: planted_weights(scene.num_classes)?,
    };
    let tls = decode_corners(&bundle.heatmaps, CornerKind::TopLeft, k)?;
    let brs = decode_corners(&bundle.heatmaps, CornerKind::BottomRight, k)?;
    for gt in &scene.gts {
        let b = gt.bbox;
        let has = |list: &[crate::CornerKeypoint], x: f32, y: f32| {
            list.iter().any(|c| c.class_id == gt.class_id && c.x == x && c.y == y)
        };
        if !has(&tls, b.x1, b.y1) || !has(&brs, b.x2, b.y2) {
            return Err(reject(alloc::format!("corners of {b:?} not decoded")));
        }
    }
    let (h, w) = bundle.features.grid();
    for prop in enumerate_proposals(&tls, &brs) {
        let pooled = RoiSampler::new(&prop.bbox, h, w).pool(&bundle.features.box_feat)?;
        let p = binary_head(&pooled, &bundle.weights)?;
        let is_true = scene
            .gts
            .iter()
            .any(|g| g.bbox == prop.bbox && g.class_id == prop.class_id);
        if is_true && p < TRUE_MIN_SCORE {
            return Err(reject(alloc::format!("true box {:?} scores {p}", prop.bbox)));
        }
        if !is_true && p > FALSE_MAX_SCORE {
            return Err(reject(alloc::format!("false pair {:?} scores {p}", prop.bbox)));
        }
    }
    for gt in &scene.gts {
        let pooled = RoiSampler::new(&gt.bbox, h, w).pool(&bundle.features.cat_feat)?;
        let q = class_head(&pooled, &bundle.weights)?;
        let best = argmax(&q);
        let unique = q
            .iter()
            .enumerate()
            .all(|(c, &v)| c == gt.class_id || v < q[gt.class_id]);
        if best != Some(gt.class_id) || !unique {
            return Err(reject(alloc::format!("class head misreads {:?}", gt.bbox)));
        }
    }
    Ok(bundle)
}

/// Draw scenes from `make` with derived seeds until one passes
/// [`render_oracle`].
pub fn resample<F>(seed: u64, k: usize, budget: u32, make: F) -> Result<(Scene, OracleBundle)>
where
    F: Fn(u64) -> Result<Scene>,
{
    for attempt in 0..budget {
        let scene = make(derive_seed(seed, attempt as u64))?;
        match render_oracle(&scene, k) {
            Ok(bundle) => return Ok((scene, bundle)),
            Err(Error::Invariant(_)) => continue,
            Err(e) => return Err(e),
        }
    }
    Err(Error::ResampleBudget { attempts: budget })
}

/// Corpus-level generation knobs.
#[derive(Debug, Clone, PartialEq)]
pub struct CorpusConfig {
    pub scene: SceneConfig,
    /// Of every `regime_period` scenes, one is forced large and one
    /// elongated; 0 disables forcing.
    pub regime_period: usize,
    /// Generate crossed pairs instead of general scenes.
    pub crossed: bool,
}

impl Default for CorpusConfig {
    fn default() -> Self {
        CorpusConfig {
            scene: SceneConfig::default(),
            regime_period: 5,
            crossed: false,
        }
    }
}

impl CorpusConfig {
    pub fn regime(&self, index: usize) -> Regime {
        match (self.regime_period, index % self.regime_period.max(1)) {
            (0, _) => self.scene.regime,
            (_, 0) => Regime::Large,
            (p, 1) if p > 1 => Regime::Elongated,
            _ => self.scene.regime,
        }
    }

    /// Scene `index` of the corpus seeded with `seed`, verified.
    pub fn scene(&self, seed: u64, index: usize) -> Result<(Scene, OracleBundle)> {
        let cfg = SceneConfig {
            regime: self.regime(index),
            ..self.scene.clone()
        };
        let base = derive_seed(seed, index as u64);
        if self.crossed {
            resample(base, cfg.k, cfg.resample_budget, |s| generate_x_scene(&cfg, s))
        } else {
            resample(base, cfg.k, cfg.resample_budget, |s| generate_scene(&cfg, s))
        }
    }
}
