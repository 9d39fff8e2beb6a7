//! Synthetic scenes with a planted action-conditional object location.
//!
//! Each sample shows one stick-figure person. For action `a` the true object
//! sits at `keypoint[π*(a)] + N(μ*_a, σ*_a²)`; its proposal carries the
//! object's prototype feature. Distractor proposals are random boxes with a
//! shared background prototype, and optional context distractors carry a
//! per-object context prototype at a random location, so they co-occur with
//! the object class but are not spatially tied to the person. Actions may
//! share an object, in which case only where the object sits relative to the
//! person tells them apart.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{iou, BBox, Point2};
use crate::kv::{KvMap, KvWriter};
use crate::prior::{Keypoints, DEFAULT_KEYPOINTS, SIGMA_MIN};

use super::schema::{Dataset, Frame, GtBox, Proposal, Sample, TaskSpec};

/// Keypoint order of the stick-figure template.
pub const KEYPOINT_NAMES: [&str; DEFAULT_KEYPOINTS] = [
    "head",
    "left_shoulder",
    "right_shoulder",
    "left_elbow",
    "right_elbow",
    "left_wrist",
    "right_wrist",
    "left_hip",
    "right_hip",
    "left_knee",
    "right_knee",
    "left_ankle",
    "right_ankle",
];

const MAX_PLACEMENT_TRIES: usize = 100;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticConfig {
    pub n_actions: usize,
    pub n_objects: usize,
    /// Object involved in each action.
    pub action_object: Vec<usize>,
    pub feature_dim: usize,
    /// Background distractor proposals per frame.
    pub distractors: usize,
    /// Per-object context distractors per frame.
    pub context_distractors: usize,
    pub feature_noise: f64,
    pub train_per_action: usize,
    pub val_per_action: usize,
    pub test_per_action: usize,
    pub frames_per_clip: usize,
    /// Probability that a keypoint is marked invisible.
    pub keypoint_dropout: f64,
    pub planted_keypoints: Vec<usize>,
    pub planted_mu: Vec<Point2>,
    pub planted_sigma: Vec<f64>,
    pub object_size: (f64, f64),
    pub person_height: (f64, f64),
    pub seed: u64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        Self {
            n_actions: 4,
            n_objects: 4,
            action_object: vec![0, 1, 2, 3],
            feature_dim: 32,
            distractors: 8,
            context_distractors: 1,
            feature_noise: 0.1,
            train_per_action: 200,
            val_per_action: 25,
            test_per_action: 50,
            frames_per_clip: 1,
            keypoint_dropout: 0.0,
            // limb endpoints (right wrist, left ankle, left wrist, right
            // ankle); the head moves almost rigidly with the shoulders, so an
            // object tied to it cannot be told apart from one tied to them
            planted_keypoints: vec![6, 11, 5, 12],
            planted_mu: vec![
                Point2::new(0.06, 0.02),
                Point2::new(0.03, 0.05),
                Point2::new(-0.06, 0.01),
                Point2::new(-0.04, 0.05),
            ],
            planted_sigma: vec![0.015; 4],
            object_size: (0.06, 0.10),
            person_height: (0.35, 0.55),
            seed: 0,
        }
    }
}

fn parse_point(s: &str) -> Result<Point2> {
    let (x, y) = s
        .split_once(':')
        .ok_or_else(|| Error::Config(format!("expected x:y, got `{s}`")))?;
    let p = |v: &str| v.trim().parse::<f64>().map_err(|e| Error::Config(format!("`{v}`: {e}")));
    Ok(Point2::new(p(x)?, p(y)?))
}

impl SyntheticConfig {
    pub fn from_kv_text(text: &str) -> Result<Self> {
        let mut m = KvMap::parse(text)?;
        let d = Self::default();
        let mu_default: Vec<String> = d.planted_mu.iter().map(|p| format!("{}:{}", p.x, p.y)).collect();
        let cfg = Self {
            n_actions: m.take("n_actions", d.n_actions)?,
            n_objects: m.take("n_objects", d.n_objects)?,
            action_object: m.take_list("action_object", d.action_object)?,
            feature_dim: m.take("feature_dim", d.feature_dim)?,
            distractors: m.take("distractors", d.distractors)?,
            context_distractors: m.take("context_distractors", d.context_distractors)?,
            feature_noise: m.take("feature_noise", d.feature_noise)?,
            train_per_action: m.take("train_per_action", d.train_per_action)?,
            val_per_action: m.take("val_per_action", d.val_per_action)?,
            test_per_action: m.take("test_per_action", d.test_per_action)?,
            frames_per_clip: m.take("frames_per_clip", d.frames_per_clip)?,
            keypoint_dropout: m.take("keypoint_dropout", d.keypoint_dropout)?,
            planted_keypoints: m.take_list("planted_keypoints", d.planted_keypoints)?,
            planted_mu: m
                .take_list::<String>("planted_mu", mu_default)?
                .iter()
                .map(|s| parse_point(s))
                .collect::<Result<_>>()?,
            planted_sigma: m.take_list("planted_sigma", d.planted_sigma)?,
            object_size: (m.take("object_size_min", d.object_size.0)?, m.take("object_size_max", d.object_size.1)?),
            person_height: (
                m.take("person_height_min", d.person_height.0)?,
                m.take("person_height_max", d.person_height.1)?,
            ),
            seed: m.take("seed", d.seed)?,
        };
        m.finish()?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_kv_text(&self) -> String {
        let mu: Vec<String> = self.planted_mu.iter().map(|p| format!("{}:{}", p.x, p.y)).collect();
        KvWriter::default()
            .put("n_actions", self.n_actions)
            .put("n_objects", self.n_objects)
            .put_list("action_object", &self.action_object)
            .put("feature_dim", self.feature_dim)
            .put("distractors", self.distractors)
            .put("context_distractors", self.context_distractors)
            .put("feature_noise", self.feature_noise)
            .put("train_per_action", self.train_per_action)
            .put("val_per_action", self.val_per_action)
            .put("test_per_action", self.test_per_action)
            .put("frames_per_clip", self.frames_per_clip)
            .put("keypoint_dropout", self.keypoint_dropout)
            .put_list("planted_keypoints", &self.planted_keypoints)
            .put_list("planted_mu", &mu)
            .put_list("planted_sigma", &self.planted_sigma)
            .put("object_size_min", self.object_size.0)
            .put("object_size_max", self.object_size.1)
            .put("person_height_min", self.person_height.0)
            .put("person_height_max", self.person_height.1)
            .put("seed", self.seed)
            .finish()
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.n_actions == 0 || self.n_objects == 0 || self.feature_dim == 0 || self.frames_per_clip == 0 {
            return bad("n_actions, n_objects, feature_dim and frames_per_clip must be positive".into());
        }
        for (name, len) in [
            ("action_object", self.action_object.len()),
            ("planted_keypoints", self.planted_keypoints.len()),
            ("planted_mu", self.planted_mu.len()),
            ("planted_sigma", self.planted_sigma.len()),
        ] {
            if len != self.n_actions {
                return bad(format!("{name} has {len} entries for {} actions", self.n_actions));
            }
        }
        if let Some(o) = self.action_object.iter().find(|&&o| o >= self.n_objects) {
            return bad(format!("action_object entry {o} >= n_objects {}", self.n_objects));
        }
        if let Some(k) = self.planted_keypoints.iter().find(|&&k| k >= DEFAULT_KEYPOINTS) {
            return bad(format!("planted keypoint {k} outside the 13-point template"));
        }
        if self.planted_sigma.iter().any(|&s| s.is_nan() || s < SIGMA_MIN) {
            return bad(format!("planted_sigma must be >= {SIGMA_MIN}"));
        }
        if self.feature_noise < 0.0 || !(0.0..=1.0).contains(&self.keypoint_dropout) {
            return bad("feature_noise must be >= 0 and keypoint_dropout in [0, 1]".into());
        }
        if !(self.object_size.0 > 0.0 && self.object_size.0 <= self.object_size.1 && self.object_size.1 < 1.0) {
            return bad("object size range must satisfy 0 < min <= max < 1".into());
        }
        if !(self.person_height.0 > 0.0 && self.person_height.0 <= self.person_height.1 && self.person_height.1 < 1.0) {
            return bad("person height range must satisfy 0 < min <= max < 1".into());
        }
        Ok(())
    }

    pub fn task(&self) -> TaskSpec {
        TaskSpec {
            actions: (0..self.n_actions).map(|a| format!("action_{a}")).collect(),
            objects: (0..self.n_objects).map(|o| format!("object_{o}")).collect(),
            action_object: self.action_object.clone(),
            num_keypoints: DEFAULT_KEYPOINTS,
            feature_dim: self.feature_dim,
        }
    }
}

/// Unit-norm random directions with pairwise cosine below 0.5.
#[derive(Debug, Clone, PartialEq)]
pub struct Prototypes {
    pub objects: Vec<Vec<f64>>,
    pub background: Vec<f64>,
    pub context: Vec<Vec<f64>>,
    pub person: Vec<f64>,
}

fn unit_vector(dim: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..dim).map(|_| StandardNormal.sample(rng)).collect();
        let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if n > 1e-9 {
            return v.into_iter().map(|x| x / n).collect();
        }
    }
}

fn cosine(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

impl Prototypes {
    fn generate(cfg: &SyntheticConfig, rng: &mut ChaCha8Rng) -> Self {
        let total = 2 * cfg.n_objects + 2;
        let mut vs: Vec<Vec<f64>> = Vec::with_capacity(total);
        let mut tries = 0;
        while vs.len() < total {
            let v = unit_vector(cfg.feature_dim, rng);
            tries += 1;
            // low dimensions cannot always honor the separation; take what we get
            if tries > 1000 || vs.iter().all(|u| cosine(u, &v) < 0.5) {
                vs.push(v);
            }
        }
        let person = vs.pop().unwrap();
        let context = vs.split_off(cfg.n_objects + 1);
        let background = vs.pop().unwrap();
        Self { objects: vs, background, context, person }
    }
}

/// Joint angles and placement of one person; jittered frame to frame.
#[derive(Debug, Clone)]
struct Pose {
    height: f64,
    lean: f64,
    head: f64,
    upper_arm: [f64; 2],
    forearm: [f64; 2],
    thigh: [f64; 2],
    shin: [f64; 2],
    pelvis: Point2,
}

fn dir(angle: f64) -> Point2 {
    // angle 0 points down the image
    Point2::new(angle.sin(), angle.cos())
}

fn along(p: Point2, angle: f64, len: f64) -> Point2 {
    let d = dir(angle);
    Point2::new(p.x + d.x * len, p.y + d.y * len)
}

impl Pose {
    fn random(cfg: &SyntheticConfig, rng: &mut ChaCha8Rng) -> Self {
        let u = |rng: &mut ChaCha8Rng, a: f64, b: f64| rng.random_range(a..b);
        let height = u(rng, cfg.person_height.0, cfg.person_height.1 + 1e-12);
        Self {
            height,
            lean: u(rng, -0.3, 0.3),
            head: u(rng, -0.6, 0.6),
            // left limbs swing to negative x, right limbs to positive x
            upper_arm: [u(rng, -2.6, 0.4), u(rng, -0.4, 2.6)],
            forearm: [u(rng, -2.0, 1.0), u(rng, -1.0, 2.0)],
            thigh: [u(rng, -0.7, 0.3), u(rng, -0.3, 0.7)],
            shin: [u(rng, -0.4, 0.9), u(rng, -0.9, 0.4)],
            pelvis: Point2::new(0.0, 0.0),
        }
    }

    fn keypoints_relative(&self) -> Vec<Point2> {
        let h = self.height;
        let origin = Point2::new(0.0, 0.0);
        let up = PI + self.lean;
        let neck = along(origin, up, 0.30 * h);
        let head = along(neck, up + self.head, 0.13 * h);
        let across = Point2::new(self.lean.cos(), -self.lean.sin());
        let shoulder = |s: f64| Point2::new(neck.x + s * 0.10 * h * across.x, neck.y + s * 0.10 * h * across.y);
        let ls = shoulder(-1.0);
        let rs = shoulder(1.0);
        let le = along(ls, self.upper_arm[0], 0.17 * h);
        let re = along(rs, self.upper_arm[1], 0.17 * h);
        let lw = along(le, self.upper_arm[0] + self.forearm[0], 0.15 * h);
        let rw = along(re, self.upper_arm[1] + self.forearm[1], 0.15 * h);
        let lh = Point2::new(-0.07 * h, 0.0);
        let rh = Point2::new(0.07 * h, 0.0);
        let lk = along(lh, self.thigh[0], 0.23 * h);
        let rk = along(rh, self.thigh[1], 0.23 * h);
        let la = along(lk, self.thigh[0] + self.shin[0], 0.23 * h);
        let ra = along(rk, self.thigh[1] + self.shin[1], 0.23 * h);
        vec![head, ls, rs, le, re, lw, rw, lh, rh, lk, rk, la, ra]
    }

    fn keypoints(&self) -> Vec<Point2> {
        self.keypoints_relative().into_iter().map(|p| p + self.pelvis).collect()
    }

    /// Place the pelvis so the figure plus `margin` fits in the frame.
    fn place(&mut self, margin: f64, rng: &mut ChaCha8Rng) {
        let rel = self.keypoints_relative();
        let (min_x, max_x) = rel.iter().fold((f64::MAX, f64::MIN), |(a, b), p| (a.min(p.x), b.max(p.x)));
        let (min_y, max_y) = rel.iter().fold((f64::MAX, f64::MIN), |(a, b), p| (a.min(p.y), b.max(p.y)));
        let axis = |rng: &mut ChaCha8Rng, lo: f64, hi: f64| {
            let (a, b) = (margin - lo, 1.0 - margin - hi);
            if a < b {
                rng.random_range(a..b)
            } else {
                (a + b) / 2.0
            }
        };
        self.pelvis = Point2::new(axis(rng, min_x, max_x), axis(rng, min_y, max_y));
    }

    fn jitter(&self, rng: &mut ChaCha8Rng) -> Self {
        let n = Normal::new(0.0, 0.05).unwrap();
        let step = Normal::new(0.0, 0.005).unwrap();
        let mut p = self.clone();
        p.lean += n.sample(rng);
        p.head += n.sample(rng);
        for k in 0..2 {
            p.upper_arm[k] += n.sample(rng);
            p.forearm[k] += n.sample(rng);
            p.thigh[k] += n.sample(rng);
            p.shin[k] += n.sample(rng);
        }
        p.pelvis = Point2::new(p.pelvis.x + step.sample(rng), p.pelvis.y + step.sample(rng));
        p
    }
}

fn bounding_box(points: &[Point2]) -> BBox {
    let (mut x1, mut y1, mut x2, mut y2) = (f64::MAX, f64::MAX, f64::MIN, f64::MIN);
    for p in points {
        x1 = x1.min(p.x);
        y1 = y1.min(p.y);
        x2 = x2.max(p.x);
        y2 = y2.max(p.y);
    }
    BBox::new(x1, y1, x2, y2)
}

struct Generator<'a> {
    cfg: &'a SyntheticConfig,
    protos: Prototypes,
    noise: Option<Normal<f64>>,
}

impl Generator<'_> {
    fn feature(&self, proto: &[f64], rng: &mut ChaCha8Rng) -> Vec<f64> {
        match &self.noise {
            Some(n) => proto.iter().map(|v| v + n.sample(rng)).collect(),
            None => proto.to_vec(),
        }
    }

    fn random_box(&self, avoid: &BBox, rng: &mut ChaCha8Rng) -> BBox {
        let (lo, hi) = (self.cfg.object_size.0, self.cfg.object_size.1 * 1.5);
        let mut b = BBox::default();
        for _ in 0..MAX_PLACEMENT_TRIES {
            let w = rng.random_range(lo..=hi.min(0.9));
            let h = rng.random_range(lo..=hi.min(0.9));
            let x = rng.random_range(0.0..=1.0 - w);
            let y = rng.random_range(0.0..=1.0 - h);
            b = BBox::new(x, y, x + w, y + h);
            if iou(&b, avoid) < 0.1 {
                break;
            }
        }
        b
    }

    /// Object box at the planted keypoint plus a sampled offset.
    fn object_box(&self, a: usize, kps: &[Point2], offset: Point2, size: (f64, f64)) -> BBox {
        let anchor = kps[self.cfg.planted_keypoints[a]];
        BBox::centered(anchor + offset, size.0, size.1)
    }

    fn sample(&self, id: String, a: usize, rng: &mut ChaCha8Rng) -> Sample {
        let cfg = self.cfg;
        let mu = cfg.planted_mu[a];
        let sigma = cfg.planted_sigma[a];
        let size = (
            rng.random_range(cfg.object_size.0..=cfg.object_size.1),
            rng.random_range(cfg.object_size.0..=cfg.object_size.1),
        );

        let mut pose = Pose::random(cfg, rng);
        pose.place(0.12, rng);
        let mut poses = vec![pose];
        for _ in 1..cfg.frames_per_clip {
            let next = poses.last().unwrap().jitter(rng);
            poses.push(next);
        }

        // one offset per clip, re-drawn while any frame's box leaves the frame
        let offset_dist = [Normal::new(mu.x, sigma).unwrap(), Normal::new(mu.y, sigma).unwrap()];
        let all_kps: Vec<Vec<Point2>> = poses.iter().map(|p| p.keypoints()).collect();
        let mut offset = mu;
        let mut placed = false;
        for _ in 0..MAX_PLACEMENT_TRIES {
            offset = Point2::new(offset_dist[0].sample(rng), offset_dist[1].sample(rng));
            if all_kps.iter().all(|k| self.object_box(a, k, offset, size).inside_unit_frame()) {
                placed = true;
                break;
            }
        }

        let o = cfg.action_object[a];
        let mut frames = Vec::with_capacity(cfg.frames_per_clip);
        let mut gts = Vec::with_capacity(cfg.frames_per_clip);
        let mut static_boxes: Option<Vec<BBox>> = None;
        for (t, kps) in all_kps.iter().enumerate() {
            let mut obj = self.object_box(a, kps, offset, size);
            if !placed {
                obj = obj.clamp_to_unit_frame();
            }
            let n_extra = cfg.distractors + cfg.context_distractors;
            let boxes = match &static_boxes {
                Some(prev) => prev
                    .iter()
                    .map(|b| {
                        let d = Point2::new(rng.random_range(-0.005..0.005), rng.random_range(-0.005..0.005));
                        b.translate(d).clamp_to_unit_frame()
                    })
                    .collect(),
                None => (0..n_extra).map(|_| self.random_box(&obj, rng)).collect::<Vec<_>>(),
            };
            static_boxes = Some(boxes.clone());

            let mut proposals = Vec::with_capacity(1 + n_extra);
            proposals.push(Proposal {
                bbox: obj,
                confidence: rng.random_range(0.2..1.0),
                feature: self.feature(&self.protos.objects[o], rng),
            });
            for (i, b) in boxes.into_iter().enumerate() {
                let proto = if i < cfg.context_distractors {
                    &self.protos.context[o]
                } else {
                    &self.protos.background
                };
                proposals.push(Proposal {
                    bbox: b,
                    confidence: rng.random_range(0.2..1.0),
                    feature: self.feature(proto, rng),
                });
            }
            let visible: Vec<bool> = (0..kps.len())
                .map(|_| cfg.keypoint_dropout == 0.0 || rng.random::<f64>() >= cfg.keypoint_dropout)
                .collect();
            frames.push(Frame {
                proposals,
                person_box: Some(bounding_box(kps).dilate(0.1)),
                person_feature: Some(self.feature(&self.protos.person, rng)),
                keypoints: Some(Keypoints { points: kps.clone(), visible }),
            });
            gts.push(GtBox { object: o, bbox: obj, frame: t });
        }
        Sample { id, frames, actions: vec![a], gt_boxes: Some(gts) }
    }
}

/// Generated splits plus the prototypes used to build them.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticData {
    pub train: Dataset,
    pub val: Dataset,
    pub test: Dataset,
    pub prototypes: Prototypes,
}

/// Generate train/val/test splits; deterministic in `cfg.seed`.
pub fn generate_synthetic(cfg: &SyntheticConfig) -> Result<SyntheticData> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let protos = Prototypes::generate(cfg, &mut rng);
    let noise = (cfg.feature_noise > 0.0).then(|| Normal::new(0.0, cfg.feature_noise).unwrap());
    let g = Generator { cfg, protos, noise };
    let task = cfg.task();
    let mut split = |name: &str, per_action: usize| {
        let mut samples = Vec::with_capacity(per_action * cfg.n_actions);
        for i in 0..per_action {
            for a in 0..cfg.n_actions {
                samples.push(g.sample(format!("{name}-{a}-{i:04}"), a, &mut rng));
            }
        }
        Dataset { task: task.clone(), samples }
    };
    let train = split("train", cfg.train_per_action);
    let val = split("val", cfg.val_per_action);
    let test = split("test", cfg.test_per_action);
    Ok(SyntheticData { train, val, test, prototypes: g.protos })
}
