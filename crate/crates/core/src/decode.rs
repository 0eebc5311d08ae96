//! Corner heatmaps to keypoints, and keypoints (ground truth) to heatmaps.

use alloc::vec;
use alloc::vec::Vec;
use core::cmp::Ordering;

use crate::error::{Error, Result};
use crate::geometry::GroundTruth;
use crate::math;
use crate::tensor::Tensor;
use crate::STRIDE;

/// Minimum IoU a displaced corner pair must keep; sizes the target splats.
pub const TARGET_MIN_OVERLAP: f64 = 0.7;
/// Neighbourhood used by peak extraction.
pub const PEAK_WINDOW: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CornerKind {
    TopLeft,
    BottomRight,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CornerKeypoint {
    pub kind: CornerKind,
    pub class_id: usize,
    pub x: f32,
    pub y: f32,
    pub score: f32,
    pub row: usize,
    pub col: usize,
}

/// Per-class corner heatmaps `[C, H, W]` and offset maps `[2, H, W]`
/// (x-offset plane, then y-offset plane).
#[derive(Debug, Clone, PartialEq)]
pub struct HeatmapSet {
    pub tl_heat: Tensor,
    pub br_heat: Tensor,
    pub tl_off: Tensor,
    pub br_off: Tensor,
}

impl HeatmapSet {
    pub fn new(tl_heat: Tensor, br_heat: Tensor, tl_off: Tensor, br_off: Tensor) -> Result<Self> {
        let (c, h, w) = tl_heat.dims3()?;
        let expect_heat = [c, h, w];
        let expect_off = [2, h, w];
        for (what, t, expect) in [
            ("br_heat", &br_heat, &expect_heat),
            ("tl_off", &tl_off, &expect_off),
            ("br_off", &br_off, &expect_off),
        ] {
            if t.shape() != expect {
                return Err(Error::Shape {
                    what,
                    expected: expect.to_vec(),
                    found: t.shape().to_vec(),
                });
            }
        }
        Ok(HeatmapSet {
            tl_heat,
            br_heat,
            tl_off,
            br_off,
        })
    }

    pub fn zeros(c: usize, h: usize, w: usize) -> Result<Self> {
        Ok(HeatmapSet {
            tl_heat: Tensor::zeros(&[c, h, w])?,
            br_heat: Tensor::zeros(&[c, h, w])?,
            tl_off: Tensor::zeros(&[2, h, w])?,
            br_off: Tensor::zeros(&[2, h, w])?,
        })
    }

    /// `(C, H, W)`.
    pub fn dims(&self) -> (usize, usize, usize) {
        let s = self.tl_heat.shape();
        (s[0], s[1], s[2])
    }

    pub fn heat(&self, kind: CornerKind) -> &Tensor {
        match kind {
            CornerKind::TopLeft => &self.tl_heat,
            CornerKind::BottomRight => &self.br_heat,
        }
    }

    pub fn offsets(&self, kind: CornerKind) -> &Tensor {
        match kind {
            CornerKind::TopLeft => &self.tl_off,
            CornerKind::BottomRight => &self.br_off,
        }
    }

    fn parts_mut(&mut self, kind: CornerKind) -> (&mut Tensor, &mut Tensor) {
        match kind {
            CornerKind::TopLeft => (&mut self.tl_heat, &mut self.tl_off),
            CornerKind::BottomRight => (&mut self.br_heat, &mut self.br_off),
        }
    }
}

/// Zero every cell that is not the maximum of its `window × window`
/// neighbourhood (clipped at the borders). Ties keep their value.
pub fn local_max_suppress(heat: &Tensor, window: usize) -> Result<Tensor> {
    if window == 0 || window % 2 == 0 {
        return Err(Error::arg(alloc::format!(
            "window must be odd and positive, got {window}"
        )));
    }
    let (c, h, w) = heat.dims3()?;
    let r = window / 2;
    let mut out = heat.clone();
    for ch in 0..c {
        let src = heat.plane(ch);
        let dst = out.plane_mut(ch);
        for i in 0..h {
            let (i0, i1) = (i.saturating_sub(r), (i + r).min(h - 1));
            for j in 0..w {
                let (j0, j1) = (j.saturating_sub(r), (j + r).min(w - 1));
                let v = src[i * w + j];
                let mut max = v;
                for ii in i0..=i1 {
                    for &n in &src[ii * w + j0..=ii * w + j1] {
                        if n > max {
                            max = n;
                        }
                    }
                }
                if v < max {
                    dst[i * w + j] = 0.0;
                }
            }
        }
    }
    Ok(out)
}

/// The `k` strongest peaks of one corner kind, jointly over all classes.
/// Cells with no positive heat are never peaks, so fewer than `k` corners
/// may come back.
///
/// Output is sorted by descending score; equal scores are ordered by
/// ascending `(class, row, col)`.
pub fn decode_corners(hm: &HeatmapSet, kind: CornerKind, k: usize) -> Result<Vec<CornerKeypoint>> {
    let (c, h, w) = hm.dims();
    let cells = c * h * w;
    if k > cells {
        return Err(Error::arg(alloc::format!(
            "K = {k} exceeds the {cells} heatmap cells"
        )));
    }
    if k == 0 {
        return Ok(Vec::new());
    }
    let peaks = local_max_suppress(hm.heat(kind), PEAK_WINDOW)?;
    let mut ranked: Vec<(f32, u32)> = peaks
        .data()
        .iter()
        .enumerate()
        .filter(|(_, &s)| s > 0.0)
        .map(|(idx, &s)| (s, idx as u32))
        .collect();
    let order = |a: &(f32, u32), b: &(f32, u32)| -> Ordering {
        b.0.total_cmp(&a.0).then(a.1.cmp(&b.1))
    };
    if k < ranked.len() {
        ranked.select_nth_unstable_by(k - 1, order);
        ranked.truncate(k);
    }
    ranked.sort_unstable_by(order);

    let off = hm.offsets(kind);
    Ok(ranked
        .into_iter()
        .map(|(score, idx)| {
            let idx = idx as usize;
            let (class_id, rem) = (idx / (h * w), idx % (h * w));
            let (row, col) = (rem / w, rem % w);
            CornerKeypoint {
                kind,
                class_id,
                x: (col as f32 + off.at3(0, row, col)) * STRIDE,
                y: (row as f32 + off.at3(1, row, col)) * STRIDE,
                score,
                row,
                col,
            }
        })
        .collect())
}

/// Corner-distance radius (in heatmap cells) that keeps IoU ≥ `min_overlap`
/// for a box of `height × width` cells. Follows the usual three-case bound
/// used for corner heatmap targets.
pub fn gaussian_radius(height: f64, width: f64, min_overlap: f64) -> f64 {
    let b1 = height + width;
    let c1 = width * height * (1.0 - min_overlap) / (1.0 + min_overlap);
    let r1 = (b1 + math::sqrt(b1 * b1 - 4.0 * c1)) / 2.0;

    let b2 = 2.0 * (height + width);
    let c2 = (1.0 - min_overlap) * width * height;
    let r2 = (b2 + math::sqrt(b2 * b2 - 16.0 * c2)) / 2.0;

    let a3 = 4.0 * min_overlap;
    let b3 = -2.0 * min_overlap * (height + width);
    let c3 = (min_overlap - 1.0) * width * height;
    let r3 = (b3 + math::sqrt(b3 * b3 - 4.0 * a3 * c3)) / 2.0;

    r1.min(r2).min(r3)
}

/// Integer splat radius for a box of the given pixel size.
pub fn splat_radius(box_w: f64, box_h: f64) -> usize {
    let w = libm::ceil(box_w / STRIDE as f64);
    let h = libm::ceil(box_h / STRIDE as f64);
    let r = math::floor(gaussian_radius(h, w, TARGET_MIN_OVERLAP));
    if r > 0.0 {
        r as usize
    } else {
        0
    }
}

/// Grid cell of an image-plane point and its fractional offsets, or an
/// error if it falls outside the `h × w` grid.
pub fn corner_cell(x: f32, y: f32, h: usize, w: usize) -> Result<(usize, usize, f32, f32)> {
    let (fx, fy) = (x / STRIDE, y / STRIDE);
    let (cx, cy) = (math::floorf(fx), math::floorf(fy));
    if !(fx >= 0.0 && fy >= 0.0 && (cx as usize) < w && (cy as usize) < h) {
        return Err(Error::arg(alloc::format!(
            "corner ({x}, {y}) maps outside the {h}x{w} grid"
        )));
    }
    Ok((cy as usize, cx as usize, fx - cx, fy - cy))
}

/// Paint an unnormalized Gaussian of the given peak height centred on the
/// corner's cell (element-wise max with what is there) and record the
/// corner's fractional offsets at that cell.
#[allow(clippy::too_many_arguments)]
pub fn splat_corner(
    hm: &mut HeatmapSet,
    kind: CornerKind,
    class_id: usize,
    x: f32,
    y: f32,
    radius: usize,
    peak: f32,
) -> Result<()> {
    let (c, h, w) = hm.dims();
    if class_id >= c {
        return Err(Error::arg(alloc::format!("class {class_id} outside [0, {c})")));
    }
    let (row, col, ox, oy) = corner_cell(x, y, h, w)?;
    let sigma = (2 * radius + 1) as f64 / 6.0;
    let denom = 2.0 * sigma * sigma;
    let (heat, off) = hm.parts_mut(kind);
    let (i0, i1) = (row.saturating_sub(radius), (row + radius).min(h - 1));
    let (j0, j1) = (col.saturating_sub(radius), (col + radius).min(w - 1));
    for i in i0..=i1 {
        let dy = i as f64 - row as f64;
        for j in j0..=j1 {
            let dx = j as f64 - col as f64;
            let v = if i == row && j == col {
                peak
            } else {
                (peak as f64 * math::exp(-(dx * dx + dy * dy) / denom)) as f32
            };
            if v > heat.at3(class_id, i, j) {
                heat.set3(class_id, i, j, v);
            }
        }
    }
    off.set3(0, row, col, ox);
    off.set3(1, row, col, oy);
    Ok(())
}

/// Training targets: one unit-peak splat per ground-truth corner on its
/// class channel, overlapping splats combined by element-wise max.
pub fn gaussian_targets(gts: &[GroundTruth], c: usize, h: usize, w: usize) -> Result<HeatmapSet> {
    let mut hm = HeatmapSet::zeros(c, h, w)?;
    for gt in gts {
        let b = gt.bbox;
        let radius = splat_radius(b.width(), b.height());
        splat_corner(&mut hm, CornerKind::TopLeft, gt.class_id, b.x1, b.y1, radius, 1.0)?;
        splat_corner(&mut hm, CornerKind::BottomRight, gt.class_id, b.x2, b.y2, radius, 1.0)?;
    }
    Ok(hm)
}

/// Cells where any class channel of `target` equals 1 (the positive corners).
pub fn positive_cells(target: &Tensor) -> Result<Vec<(usize, usize)>> {
    let (c, h, w) = target.dims3()?;
    let mut mask = vec![false; h * w];
    for ch in 0..c {
        for (m, &v) in mask.iter_mut().zip(target.plane(ch)) {
            *m |= v == 1.0;
        }
    }
    Ok(mask
        .iter()
        .enumerate()
        .filter(|(_, &m)| m)
        .map(|(idx, _)| (idx / w, idx % w))
        .collect())
}
