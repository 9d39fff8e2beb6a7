//! Axis-aligned box arithmetic in normalized image coordinates.

use std::ops::{Add, Sub};

use serde::{Deserialize, Serialize};

/// A point in normalized image-plane units. Offsets may be negative.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Point2 {
    pub x: f64,
    pub y: f64,
}

impl Point2 {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

}

impl Add for Point2 {
    type Output = Point2;

    fn add(self, other: Point2) -> Point2 {
        Point2::new(self.x + other.x, self.y + other.y)
    }
}

impl Sub for Point2 {
    type Output = Point2;

    fn sub(self, other: Point2) -> Point2 {
        Point2::new(self.x - other.x, self.y - other.y)
    }
}

/// Axis-aligned box `[x1, y1, x2, y2]`, serialized as a 4-element array.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(from = "[f64; 4]", into = "[f64; 4]")]
pub struct BBox {
    pub x1: f64,
    pub y1: f64,
    pub x2: f64,
    pub y2: f64,
}

impl From<[f64; 4]> for BBox {
    fn from(a: [f64; 4]) -> Self {
        BBox::new(a[0], a[1], a[2], a[3])
    }
}

impl From<BBox> for [f64; 4] {
    fn from(b: BBox) -> Self {
        [b.x1, b.y1, b.x2, b.y2]
    }
}

impl BBox {
    pub const fn new(x1: f64, y1: f64, x2: f64, y2: f64) -> Self {
        Self { x1, y1, x2, y2 }
    }

    /// Box of the given size centered on `c`.
    pub fn centered(c: Point2, w: f64, h: f64) -> Self {
        Self::new(c.x - w / 2.0, c.y - h / 2.0, c.x + w / 2.0, c.y + h / 2.0)
    }

    pub fn is_valid(&self) -> bool {
        [self.x1, self.y1, self.x2, self.y2].iter().all(|v| v.is_finite())
            && self.x1 <= self.x2
            && self.y1 <= self.y2
    }

    pub fn width(&self) -> f64 {
        (self.x2 - self.x1).max(0.0)
    }

    pub fn height(&self) -> f64 {
        (self.y2 - self.y1).max(0.0)
    }

    pub fn area(&self) -> f64 {
        self.width() * self.height()
    }

    pub fn center(&self) -> Point2 {
        center(self)
    }

    /// Grow each side by `frac` of the box extent (0.1 = 10% wider and taller).
    pub fn dilate(&self, frac: f64) -> Self {
        let dx = self.width() * frac / 2.0;
        let dy = self.height() * frac / 2.0;
        Self::new(self.x1 - dx, self.y1 - dy, self.x2 + dx, self.y2 + dy)
    }

    pub fn translate(&self, d: Point2) -> Self {
        Self::new(self.x1 + d.x, self.y1 + d.y, self.x2 + d.x, self.y2 + d.y)
    }

    /// Whether the box lies fully inside the unit frame.
    pub fn inside_unit_frame(&self) -> bool {
        self.x1 >= 0.0 && self.y1 >= 0.0 && self.x2 <= 1.0 && self.y2 <= 1.0
    }

    /// Shift (never shrink, unless larger than the frame) the box so it lies
    /// inside the unit frame.
    pub fn clamp_to_unit_frame(&self) -> Self {
        let w = self.width().min(1.0);
        let h = self.height().min(1.0);
        let x1 = self.x1.clamp(0.0, 1.0 - w);
        let y1 = self.y1.clamp(0.0, 1.0 - h);
        Self::new(x1, y1, x1 + w, y1 + h)
    }
}

/// Intersection over union. Degenerate boxes and zero unions give 0.
pub fn iou(a: &BBox, b: &BBox) -> f64 {
    let iw = (a.x2.min(b.x2) - a.x1.max(b.x1)).max(0.0);
    let ih = (a.y2.min(b.y2) - a.y1.max(b.y1)).max(0.0);
    let inter = iw * ih;
    let union = a.area() + b.area() - inter;
    if union <= 0.0 {
        0.0
    } else {
        (inter / union).clamp(0.0, 1.0)
    }
}

pub fn center(b: &BBox) -> Point2 {
    Point2::new((b.x1 + b.x2) / 2.0, (b.y1 + b.y2) / 2.0)
}

/// Greedy non-maximum suppression.
///
/// Returns the indices of the kept boxes, highest score first. Equal scores
/// are ordered by input index, so the earlier of two identical boxes wins.
pub fn nms_indices(dets: &[(BBox, f64)], iou_threshold: f64) -> Vec<usize> {
    let mut order: Vec<usize> = (0..dets.len()).collect();
    order.sort_by(|&i, &j| dets[j].1.total_cmp(&dets[i].1).then(i.cmp(&j)));

    let mut suppressed = vec![false; dets.len()];
    let mut keep = Vec::new();
    for (pos, &i) in order.iter().enumerate() {
        if suppressed[i] {
            continue;
        }
        keep.push(i);
        for &j in &order[pos + 1..] {
            if !suppressed[j] && iou(&dets[i].0, &dets[j].0) > iou_threshold {
                suppressed[j] = true;
            }
        }
    }
    keep
}

/// Greedy NMS returning the kept `(box, score)` pairs in kept order.
pub fn nms(dets: &[(BBox, f64)], iou_threshold: f64) -> Vec<(BBox, f64)> {
    nms_indices(dets, iou_threshold)
        .into_iter()
        .map(|i| dets[i])
        .collect()
}

/// Anything that carries a box and an objectness confidence.
pub trait Scored {
    fn bbox(&self) -> &BBox;
    fn confidence(&self) -> f64;
}

/// Drop proposals overlapping the person by more than `theta_h`, then keep the
/// `n_r` most confident. Returns indices into `props`.
pub fn filter_proposal_indices<P: Scored>(
    props: &[P],
    person: Option<&BBox>,
    theta_h: f64,
    n_r: usize,
) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..props.len())
        .filter(|&i| person.is_none_or(|h| iou(props[i].bbox(), h) <= theta_h))
        .collect();
    idx.sort_by(|&i, &j| {
        props[j]
            .confidence()
            .total_cmp(&props[i].confidence())
            .then(i.cmp(&j))
    });
    idx.truncate(n_r);
    idx
}

/// Owned variant of [`filter_proposal_indices`].
pub fn filter_proposals<P: Scored + Clone>(
    props: &[P],
    person: Option<&BBox>,
    theta_h: f64,
    n_r: usize,
) -> Vec<P> {
    filter_proposal_indices(props, person, theta_h, n_r)
        .into_iter()
        .map(|i| props[i].clone())
        .collect()
}
