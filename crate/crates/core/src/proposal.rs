//! Corner pairs to proposals, region pooling, and the two scoring heads.

use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use crate::decode::{CornerKeypoint, CornerKind};
use crate::error::{Error, Result};
use crate::geometry::BBox;
use crate::math;
use crate::tensor::Tensor;
use crate::STRIDE;

/// Output grid of RoIAlign.
pub const POOL: usize = 7;
pub const BOX_CHANNELS: usize = 32;
pub const CAT_CHANNELS: usize = 256;
/// Initial head bias, `-ln((1 - π) / π)` for a prior π = 0.1.
pub const PRIOR_BIAS: f32 = -2.19;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Proposal {
    pub bbox: BBox,
    pub class_id: usize,
    /// Mean of the two corner scores.
    pub corner_score: f32,
    pub tl: CornerKeypoint,
    pub br: CornerKeypoint,
}

/// Every same-class pair whose top-left lies strictly above and left of
/// its bottom-right, in `(tl index, br index)` order.
pub fn enumerate_proposals(tls: &[CornerKeypoint], brs: &[CornerKeypoint]) -> Vec<Proposal> {
    let mut out = Vec::new();
    for tl in tls {
        debug_assert_eq!(tl.kind, CornerKind::TopLeft);
        for br in brs {
            debug_assert_eq!(br.kind, CornerKind::BottomRight);
            if tl.class_id == br.class_id && tl.x < br.x && tl.y < br.y {
                out.push(Proposal {
                    bbox: BBox {
                        x1: tl.x,
                        y1: tl.y,
                        x2: br.x,
                        y2: br.y,
                    },
                    class_id: tl.class_id,
                    corner_score: (tl.score + br.score) / 2.0,
                    tl: *tl,
                    br: *br,
                });
            }
        }
    }
    out
}

/// Box and category feature maps sharing the heatmap grid.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMaps {
    pub box_feat: Tensor,
    pub cat_feat: Tensor,
}

impl FeatureMaps {
    pub fn new(box_feat: Tensor, cat_feat: Tensor) -> Result<Self> {
        let (_, h, w) = box_feat.dims3()?;
        let (dc, hc, wc) = cat_feat.dims3()?;
        if (hc, wc) != (h, w) {
            return Err(Error::Shape {
                what: "cat_feat",
                expected: vec![dc, h, w],
                found: cat_feat.shape().to_vec(),
            });
        }
        Ok(FeatureMaps { box_feat, cat_feat })
    }

    pub fn grid(&self) -> (usize, usize) {
        let s = self.box_feat.shape();
        (s[1], s[2])
    }
}

/// Bilinear taps of the `POOL × POOL × 4` sample points for one box.
///
/// Sample points sit at the quarter points of each bin, in feature
/// coordinates (image pixels divided by the stride). Grid nodes outside
/// the map contribute zero.
#[derive(Debug, Clone)]
pub struct RoiSampler {
    /// Per bin, up to 16 `(flat index, weight)` taps; weights already
    /// include the 1/4 averaging over the bin's samples.
    taps: Vec<Vec<(usize, f64)>>,
    empty: bool,
}

impl RoiSampler {
    pub fn new(bbox: &BBox, h: usize, w: usize) -> Self {
        let empty = !(bbox.width() > 0.0 && bbox.height() > 0.0);
        let mut taps = vec![Vec::new(); POOL * POOL];
        if empty {
            return RoiSampler { taps, empty };
        }
        let s = STRIDE as f64;
        let (x0, y0) = (bbox.x1 as f64 / s, bbox.y1 as f64 / s);
        let (bw, bh) = (bbox.width() / s / POOL as f64, bbox.height() / s / POOL as f64);
        for (bin, bin_taps) in taps.iter_mut().enumerate() {
            let (bi, bj) = (bin / POOL, bin % POOL);
            for sy in [0.25, 0.75] {
                let y = y0 + (bi as f64 + sy) * bh;
                for sx in [0.25, 0.75] {
                    let x = x0 + (bj as f64 + sx) * bw;
                    push_bilinear(bin_taps, x, y, h, w, 0.25);
                }
            }
        }
        RoiSampler { taps, empty }
    }

    /// Pool `channels` of a `[D, H, W]` map into `[channels.len(), 7, 7]`.
    pub fn pool(&self, feat: &Tensor) -> Result<Tensor> {
        let (d, _, _) = feat.dims3()?;
        let mut out = Tensor::zeros(&[d, POOL, POOL])?;
        if self.empty {
            return Ok(out);
        }
        for ch in 0..d {
            let plane = feat.plane(ch);
            let dst = out.plane_mut(ch);
            for (bin, taps) in self.taps.iter().enumerate() {
                let mut acc = 0.0f64;
                for &(idx, wt) in taps {
                    acc += wt * plane[idx] as f64;
                }
                dst[bin] = acc as f32;
            }
        }
        Ok(out)
    }
}

fn push_bilinear(taps: &mut Vec<(usize, f64)>, x: f64, y: f64, h: usize, w: usize, scale: f64) {
    let (xf, yf) = (math::floor(x), math::floor(y));
    let (fx, fy) = (x - xf, y - yf);
    for (di, wy) in [(0i64, 1.0 - fy), (1, fy)] {
        let i = yf as i64 + di;
        if i < 0 || i >= h as i64 || wy == 0.0 {
            continue;
        }
        for (dj, wx) in [(0i64, 1.0 - fx), (1, fx)] {
            let j = xf as i64 + dj;
            if j < 0 || j >= w as i64 || wx == 0.0 {
                continue;
            }
            taps.push((i as usize * w + j as usize, scale * wy * wx));
        }
    }
}

/// RoIAlign of `box` (image pixels) over a `[D, H, W]` feature map into
/// `[D, 7, 7]`: each bin is the mean of 2×2 bilinear samples.
pub fn roi_align(feat: &Tensor, bbox: &BBox) -> Result<Tensor> {
    let (_, h, w) = feat.dims3()?;
    RoiSampler::new(bbox, h, w).pool(feat)
}

/// Weights of the binary (objectness) head and the C-way class head.
/// Each head is a single full-extent convolution over the pooled grid.
#[derive(Debug, Clone, PartialEq)]
pub struct HeadWeights {
    /// `[1, D_box, 7, 7]`
    pub binary_kernel: Tensor,
    pub binary_bias: f32,
    /// `[C, D_cat, 7, 7]`
    pub class_kernel: Tensor,
    /// length `C`
    pub class_bias: Vec<f32>,
}

impl HeadWeights {
    pub fn new(
        binary_kernel: Tensor,
        binary_bias: f32,
        class_kernel: Tensor,
        class_bias: Vec<f32>,
    ) -> Result<Self> {
        let bs = binary_kernel.shape();
        if bs.len() != 4 || bs[0] != 1 || bs[2] != POOL || bs[3] != POOL {
            return Err(Error::Shape {
                what: "binary_kernel",
                expected: vec![1, BOX_CHANNELS, POOL, POOL],
                found: bs.to_vec(),
            });
        }
        let cs = class_kernel.shape();
        if cs.len() != 4 || cs[2] != POOL || cs[3] != POOL {
            return Err(Error::Shape {
                what: "class_kernel",
                expected: vec![class_bias.len(), CAT_CHANNELS, POOL, POOL],
                found: cs.to_vec(),
            });
        }
        if cs[0] != class_bias.len() {
            return Err(Error::Shape {
                what: "class_bias",
                expected: vec![cs[0]],
                found: vec![class_bias.len()],
            });
        }
        Ok(HeadWeights {
            binary_kernel,
            binary_bias,
            class_kernel,
            class_bias,
        })
    }

    /// Untrained heads: small uniform kernels and every bias at
    /// [`PRIOR_BIAS`].
    pub fn initialized<R: Rng>(
        num_classes: usize,
        box_channels: usize,
        cat_channels: usize,
        rng: &mut R,
    ) -> Result<Self> {
        let mut bk = Tensor::zeros(&[1, box_channels, POOL, POOL])?;
        let scale = 1.0 / (box_channels * POOL * POOL) as f32;
        bk.data_mut()
            .iter_mut()
            .for_each(|v| *v = rng.gen_range(-scale..scale));
        let mut ck = Tensor::zeros(&[num_classes, cat_channels, POOL, POOL])?;
        let scale = 1.0 / (cat_channels * POOL * POOL) as f32;
        ck.data_mut()
            .iter_mut()
            .for_each(|v| *v = rng.gen_range(-scale..scale));
        Self::new(bk, PRIOR_BIAS, ck, vec![PRIOR_BIAS; num_classes])
    }

    pub fn num_classes(&self) -> usize {
        self.class_bias.len()
    }

    pub fn box_channels(&self) -> usize {
        self.binary_kernel.shape()[1]
    }

    pub fn cat_channels(&self) -> usize {
        self.class_kernel.shape()[1]
    }
}

fn open_unit(p: f64) -> f64 {
    p.clamp(f64::EPSILON, 1.0 - f64::EPSILON)
}

fn dot(a: &[f32], b: &[f32]) -> f64 {
    a.iter().zip(b).map(|(&x, &y)| x as f64 * y as f64).sum()
}

/// Objectness `sigmoid(<kernel, pooled> + bias)` of one pooled box feature.
pub fn binary_head(pooled: &Tensor, w: &HeadWeights) -> Result<f64> {
    let expected = &w.binary_kernel.shape()[1..];
    if pooled.shape() != expected {
        return Err(Error::Shape {
            what: "pooled box features",
            expected: expected.to_vec(),
            found: pooled.shape().to_vec(),
        });
    }
    let logit = dot(w.binary_kernel.data(), pooled.data()) + w.binary_bias as f64;
    Ok(open_unit(math::sigmoid(logit)))
}

/// Independent per-class sigmoids over one pooled category feature.
pub fn class_head(pooled: &Tensor, w: &HeadWeights) -> Result<Vec<f64>> {
    let expected = &w.class_kernel.shape()[1..];
    if pooled.shape() != expected {
        return Err(Error::Shape {
            what: "pooled category features",
            expected: expected.to_vec(),
            found: pooled.shape().to_vec(),
        });
    }
    let n = pooled.len();
    Ok(w.class_kernel
        .data()
        .chunks_exact(n)
        .zip(&w.class_bias)
        .map(|(k, &b)| open_unit(math::sigmoid(dot(k, pooled.data()) + b as f64)))
        .collect())
}
