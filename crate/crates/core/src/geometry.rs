//! Axis-aligned boxes in continuous image-plane pixels.
//!
//! Width is `x2 - x1` with no `+1` pixel convention.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BBox {
    pub x1: f32,
    pub y1: f32,
    pub x2: f32,
    pub y2: f32,
}

impl BBox {
    pub fn new(x1: f32, y1: f32, x2: f32, y2: f32) -> Result<Self> {
        let b = BBox { x1, y1, x2, y2 };
        if !b.is_valid() {
            return Err(Error::arg(alloc::format!("invalid box {b:?}")));
        }
        Ok(b)
    }

    /// `[x, y, width, height]` as used by the JSON interchange formats.
    pub fn from_xywh(x: f64, y: f64, w: f64, h: f64) -> Result<Self> {
        Self::new(x as f32, y as f32, (x + w) as f32, (y + h) as f32)
    }

    pub fn to_xywh(&self) -> [f64; 4] {
        let (x1, y1) = (self.x1 as f64, self.y1 as f64);
        [x1, y1, self.x2 as f64 - x1, self.y2 as f64 - y1]
    }

    pub fn is_valid(&self) -> bool {
        [self.x1, self.y1, self.x2, self.y2]
            .iter()
            .all(|v| v.is_finite())
            && self.x1 <= self.x2
            && self.y1 <= self.y2
    }

    pub fn width(&self) -> f64 {
        self.x2 as f64 - self.x1 as f64
    }

    pub fn height(&self) -> f64 {
        self.y2 as f64 - self.y1 as f64
    }

    pub fn area(&self) -> f64 {
        self.width() * self.height()
    }

    /// `max(w/h, h/w)`; infinite for degenerate boxes.
    pub fn aspect(&self) -> f64 {
        let (w, h) = (self.width(), self.height());
        if w <= 0.0 || h <= 0.0 {
            return f64::INFINITY;
        }
        if w > h {
            w / h
        } else {
            h / w
        }
    }

    pub fn intersection(&self, other: &BBox) -> f64 {
        let w = (self.x2.min(other.x2) as f64 - self.x1.max(other.x1) as f64).max(0.0);
        let h = (self.y2.min(other.y2) as f64 - self.y1.max(other.y1) as f64).max(0.0);
        w * h
    }

    /// Intersection over union in `[0, 1]`; zero when the union has no area.
    pub fn iou(&self, other: &BBox) -> f64 {
        let inter = self.intersection(other);
        let union = self.area() + other.area() - inter;
        if union <= 0.0 {
            return 0.0;
        }
        (inter / union).clamp(0.0, 1.0)
    }
}

pub fn iou(a: &BBox, b: &BBox) -> f64 {
    a.iou(b)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GroundTruth {
    pub bbox: BBox,
    pub class_id: usize,
}

impl GroundTruth {
    pub fn new(bbox: BBox, class_id: usize, num_classes: usize) -> Result<Self> {
        if class_id >= num_classes {
            return Err(Error::arg(alloc::format!(
                "class {class_id} outside [0, {num_classes})"
            )));
        }
        Ok(GroundTruth { bbox, class_id })
    }
}
