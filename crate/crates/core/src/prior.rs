//! Action-conditional object spatial prior.
//!
//! For an action `a` the prior places an anchor at a softmax-weighted mix of
//! the person's keypoints, then scores each proposal by the density of its
//! center's offset from the anchor under a per-action diagonal Gaussian (or,
//! for the grid variant, a learned 3×3 table of cell probabilities).

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::diff::{Eval, Ops};
use crate::geometry::Point2;

/// Lower bound on the per-axis standard deviation.
pub const SIGMA_MIN: f64 = 1e-3;
/// Normalization guard for the grid variant.
pub const WEIGHT_EPS: f64 = 1e-12;
/// Grid spans offsets in `[-GRID_HALF_EXTENT, GRID_HALF_EXTENT]²`.
pub const GRID_HALF_EXTENT: f64 = 0.5;
pub const GRID_SIZE: usize = 3;
pub const GRID_CELLS: usize = GRID_SIZE * GRID_SIZE;
pub const DEFAULT_KEYPOINTS: usize = 13;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PriorVariant {
    /// Gaussian offset from a keypoint-weighted anchor.
    Normal,
    /// Learned 3×3 grid of offset probabilities around the anchor.
    Grid,
    /// Gaussian offset from the frame center; keypoints and person unused.
    Center,
}

impl fmt::Display for PriorVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PriorVariant::Normal => "normal",
            PriorVariant::Grid => "grid",
            PriorVariant::Center => "center",
        })
    }
}

impl FromStr for PriorVariant {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "normal" => Ok(PriorVariant::Normal),
            "grid" => Ok(PriorVariant::Grid),
            "center" => Ok(PriorVariant::Center),
            other => Err(format!("unknown prior variant `{other}`")),
        }
    }
}

/// Which Gaussian parameters receive gradient.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LearnMask {
    pub mu: bool,
    pub sigma: bool,
}

impl Default for LearnMask {
    fn default() -> Self {
        Self { mu: true, sigma: true }
    }
}

/// Non-learned settings that shape the prior computation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PriorSettings {
    pub variant: PriorVariant,
    pub learn: LearnMask,
    /// Normalize weights across the proposals of a frame.
    pub normalize: bool,
}

impl Default for PriorSettings {
    fn default() -> Self {
        Self {
            variant: PriorVariant::Normal,
            learn: LearnMask::default(),
            normalize: true,
        }
    }
}

/// Keypoint locations with per-point visibility.
///
/// Serialized as `[[x, y, visible], ...]` with `visible` 0 or 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(from = "Vec<[f64; 3]>", into = "Vec<[f64; 3]>")]
pub struct Keypoints {
    pub points: Vec<Point2>,
    pub visible: Vec<bool>,
}

impl Keypoints {
    pub fn all_visible(points: Vec<Point2>) -> Self {
        let visible = vec![true; points.len()];
        Self { points, visible }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn translate(&self, d: Point2) -> Self {
        Self {
            points: self.points.iter().map(|&p| p + d).collect(),
            visible: self.visible.clone(),
        }
    }
}

impl From<Vec<[f64; 3]>> for Keypoints {
    fn from(v: Vec<[f64; 3]>) -> Self {
        Self {
            points: v.iter().map(|p| Point2::new(p[0], p[1])).collect(),
            visible: v.iter().map(|p| p[2] > 0.5).collect(),
        }
    }
}

impl From<Keypoints> for Vec<[f64; 3]> {
    fn from(k: Keypoints) -> Self {
        k.points
            .iter()
            .zip(&k.visible)
            .map(|(p, &v)| [p.x, p.y, if v { 1.0 } else { 0.0 }])
            .collect()
    }
}

/// Borrowed parameters of one action's prior.
#[derive(Debug, Clone, Copy)]
pub struct ActionPrior<'a, T> {
    /// Unnormalized keypoint mixing weights, one per keypoint.
    pub key_logits: &'a [T],
    pub mu: [T; 2],
    pub log_sigma: [T; 2],
    /// Row-major 3×3 cell logits (grid variant).
    pub grid_logits: &'a [T],
}

/// Cell `(row, col)` of `offset` in the 3×3 grid over `[-0.5, 0.5]²`.
///
/// Rows follow `y` and columns follow `x`, both increasing, so row 0 is the
/// top of the image. The upper boundary belongs to the last cell.
pub fn grid_cell(offset: Point2) -> Option<(usize, usize)> {
    let index = |v: f64| -> Option<usize> {
        if !(-GRID_HALF_EXTENT..=GRID_HALF_EXTENT).contains(&v) {
            return None;
        }
        let cell = (v + GRID_HALF_EXTENT) / (2.0 * GRID_HALF_EXTENT / GRID_SIZE as f64);
        Some((cell.floor() as usize).min(GRID_SIZE - 1))
    };
    Some((index(offset.y)?, index(offset.x)?))
}

/// Anchor on the tape. Returns constants at `frame_center` for the center
/// variant, when keypoints are absent, or when none are visible.
pub fn anchor_with<A: Ops>(
    ops: &mut A,
    settings: &PriorSettings,
    prior: &ActionPrior<'_, A::V>,
    kps: Option<&Keypoints>,
    frame_center: Point2,
) -> [A::V; 2] {
    let fallback = |ops: &mut A| [ops.constant(frame_center.x), ops.constant(frame_center.y)];
    if settings.variant == PriorVariant::Center {
        return fallback(ops);
    }
    let Some(kps) = kps else {
        return fallback(ops);
    };
    let visible: Vec<usize> = (0..kps.len()).filter(|&i| kps.visible[i]).collect();
    if visible.is_empty() {
        return fallback(ops);
    }
    let logits: Vec<A::V> = visible.iter().map(|&i| prior.key_logits[i]).collect();
    let w = ops.softmax(&logits);
    let xs: Vec<f64> = visible.iter().map(|&i| kps.points[i].x).collect();
    let ys: Vec<f64> = visible.iter().map(|&i| kps.points[i].y).collect();
    [ops.weighted_sum_const(&w, &xs), ops.weighted_sum_const(&w, &ys)]
}

/// Per-proposal prior weights for proposal `centers` given an anchor.
pub fn weights_with<A: Ops>(
    ops: &mut A,
    settings: &PriorSettings,
    prior: &ActionPrior<'_, A::V>,
    anchor: [A::V; 2],
    centers: &[Point2],
) -> Vec<A::V> {
    assert!(!centers.is_empty(), "proposal weights need at least one proposal");
    match settings.variant {
        PriorVariant::Normal | PriorVariant::Center => {
            let log_d: Vec<A::V> = centers
                .iter()
                .map(|c| {
                    let nx = ops.scale(anchor[0], -1.0);
                    let dx = ops.add_const(nx, c.x);
                    let ny = ops.scale(anchor[1], -1.0);
                    let dy = ops.add_const(ny, c.y);
                    ops.log_gaussian2([dx, dy], prior.mu, prior.log_sigma)
                })
                .collect();
            if settings.normalize {
                // d_r / Σ d in the log domain so tiny densities never underflow
                ops.softmax(&log_d)
            } else {
                log_d.into_iter().map(|l| ops.exp(l)).collect()
            }
        }
        PriorVariant::Grid => {
            let cells = ops.softmax(prior.grid_logits);
            let a = Point2::new(ops.value(anchor[0]), ops.value(anchor[1]));
            let dens: Vec<Option<A::V>> = centers
                .iter()
                .map(|c| grid_cell(*c - a).map(|(r, col)| cells[r * GRID_SIZE + col]))
                .collect();
            let present: Vec<A::V> = dens.iter().flatten().copied().collect();
            if !settings.normalize {
                return dens
                    .into_iter()
                    .map(|d| d.unwrap_or_else(|| ops.constant(0.0)))
                    .collect();
            }
            if present.is_empty() {
                let u = 1.0 / centers.len() as f64;
                return centers.iter().map(|_| ops.constant(u)).collect();
            }
            let total = ops.sum(&present);
            let total = ops.add_const(total, WEIGHT_EPS);
            dens.into_iter()
                .map(|d| match d {
                    Some(d) => ops.div(d, total),
                    None => ops.constant(0.0),
                })
                .collect()
        }
    }
}

/// Anchor location for `prior` as a plain point.
pub fn anchor_location(
    settings: &PriorSettings,
    prior: &ActionPrior<'_, f64>,
    kps: Option<&Keypoints>,
    frame_center: Point2,
) -> Point2 {
    let a = anchor_with(&mut Eval, settings, prior, kps, frame_center);
    Point2::new(a[0], a[1])
}

/// Prior weights of proposals with the given centers.
pub fn proposal_weights(
    settings: &PriorSettings,
    prior: &ActionPrior<'_, f64>,
    anchor: Point2,
    centers: &[Point2],
) -> Vec<f64> {
    weights_with(&mut Eval, settings, prior, [anchor.x, anchor.y], centers)
}

/// Raw Gaussian density of an offset.
pub fn gaussian_density(offset: Point2, mu: [f64; 2], log_sigma: [f64; 2]) -> f64 {
    crate::diff::log_gaussian2_value([offset.x, offset.y], mu, log_sigma).exp()
}
