//! Finite-difference check of the full training loss on random two-frame
//! problems, reported per parameter group.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::Serialize;

use crate::diff::grad_check_coords;
use crate::geometry::{BBox, Point2};
use crate::model::{
    assign_supervised, hidden_preactivations, unit_gradient, unit_loss_value, Dims, FrameSupervision, Group,
    LossConfig, LossStyle, Params, TrainUnit, UnitFrame,
};
use crate::prior::{Keypoints, LearnMask, PriorSettings, PriorVariant};
use crate::temporal::link_tubelets;

/// Central-difference step.
pub const FD_STEP: f64 = 1e-5;
/// Smallest first-layer pre-activation magnitude accepted in a problem.
pub const KINK_MARGIN: f64 = 1e-3;

const DIMS: Dims = Dims { n_actions: 3, n_objects: 3, n_keypoints: 5, feature_dim: 8, hidden: 6 };
const FRAMES: usize = 2;
const PROPOSALS: usize = 4;

/// A random loss problem: parameters, one unit, and its supervision.
#[derive(Debug, Clone)]
pub struct Problem {
    pub params: Params<f64>,
    pub unit: TrainUnit,
    pub supervision: Vec<FrameSupervision>,
}

fn normal_vec(n: usize, scale: f64, rng: &mut ChaCha8Rng) -> Vec<f64> {
    (0..n)
        .map(|_| {
            let z: f64 = StandardNormal.sample(rng);
            scale * z
        })
        .collect()
}

fn random_box(around: Point2, rng: &mut ChaCha8Rng) -> BBox {
    let jitter = Normal::new(0.0, 0.08).unwrap();
    let c = Point2::new(around.x + jitter.sample(rng), around.y + jitter.sample(rng));
    let (w, h) = (rng.random_range(0.05..0.2), rng.random_range(0.05..0.2));
    BBox::centered(c, w, h).clamp_to_unit_frame()
}

fn draw(rng: &mut ChaCha8Rng) -> Problem {
    let mut params = Params::init(DIMS, 0.2, rng);
    for g in [Group::KeyLogits, Group::GridLogits] {
        let v = normal_vec(params.group(g).len(), 1.0, rng);
        params.group_mut(g).copy_from_slice(&v);
    }
    let mu = normal_vec(params.group(Group::Mu).len(), 0.05, rng);
    params.group_mut(Group::Mu).copy_from_slice(&mu);
    for v in params.group_mut(Group::LogSigma) {
        *v = rng.random_range(0.08f64..0.3).ln();
    }

    let base: Vec<Point2> =
        (0..DIMS.n_keypoints).map(|_| Point2::new(rng.random_range(0.3..0.7), rng.random_range(0.3..0.7))).collect();
    let mut frames = Vec::with_capacity(FRAMES);
    let mut linkable = Vec::with_capacity(FRAMES);
    for t in 0..FRAMES {
        let step = Point2::new(0.01 * t as f64, -0.01 * t as f64);
        let points: Vec<Point2> = base.iter().map(|p| *p + step).collect();
        let mut visible = vec![true; points.len()];
        visible[rng.random_range(0..points.len())] = t == 0;
        let boxes: Vec<BBox> = (0..PROPOSALS).map(|r| random_box(points[r % points.len()], rng)).collect();
        linkable.push(boxes.iter().map(|b| (*b, rng.random_range(0.1..1.0))).collect::<Vec<_>>());
        frames.push(UnitFrame {
            features: (0..PROPOSALS).map(|_| normal_vec(DIMS.feature_dim, 1.0, rng)).collect(),
            boxes,
            person_feature: Some(normal_vec(DIMS.feature_dim, 1.0, rng)),
            keypoints: Some(Keypoints { points, visible }),
        });
    }
    let tubelets = link_tubelets(&linkable, 1.0, 3).into_iter().map(|t| t.indices).collect();
    let mut actions: Vec<usize> = (0..DIMS.n_actions).filter(|_| rng.random_bool(0.5)).collect();
    if actions.is_empty() {
        actions.push(rng.random_range(0..DIMS.n_actions));
    }
    let unit = TrainUnit {
        frames,
        tubelets,
        actions,
        action_object: (0..DIMS.n_actions).map(|_| rng.random_range(0..DIMS.n_objects)).collect(),
        n_actions: DIMS.n_actions,
    };
    let gt = vec![(rng.random_range(0..DIMS.n_objects), unit.frames[0].boxes[1])];
    let picks = assign_supervised(&unit.frames[0].boxes, &gt, rng);
    Problem { params, unit, supervision: vec![FrameSupervision { frame: 0, picks }] }
}

fn clear_of_kinks(p: &Problem) -> bool {
    let ok = |g: Group, x: &[f64]| hidden_preactivations(&p.params, g, x).iter().all(|z| z.abs() > KINK_MARGIN);
    p.unit.frames.iter().all(|f| {
        f.features.iter().all(|x| ok(Group::ObjectHead, x) && ok(Group::ProposalActionHead, x))
            && f.person_feature.as_ref().is_none_or(|x| ok(Group::PersonActionHead, x))
    })
}

/// Seeded random problem whose ReLUs all sit clear of their kink.
pub fn random_problem(seed: u64) -> Problem {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    loop {
        let p = draw(&mut rng);
        if clear_of_kinks(&p) {
            return p;
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct GroupError {
    pub group: &'static str,
    pub max_rel_error: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct CaseReport {
    pub name: String,
    pub groups: Vec<GroupError>,
}

#[derive(Debug, Clone, Serialize)]
pub struct GradcheckReport {
    pub seed: u64,
    pub cases: Vec<CaseReport>,
    pub max_rel_error: f64,
}

impl GradcheckReport {
    /// Worst error per group across cases.
    pub fn per_group(&self) -> Vec<(&'static str, f64)> {
        Group::ALL
            .iter()
            .filter_map(|g| {
                let errs: Vec<f64> = self
                    .cases
                    .iter()
                    .flat_map(|c| c.groups.iter().filter(|e| e.group == g.name()).map(|e| e.max_rel_error))
                    .collect();
                (!errs.is_empty()).then(|| (g.name(), errs.into_iter().fold(0.0, f64::max)))
            })
            .collect()
    }
}

const HEADS: [Group; 3] = [Group::ObjectHead, Group::PersonActionHead, Group::ProposalActionHead];

fn cases() -> Vec<(&'static str, LossConfig, Vec<Group>)> {
    let base = LossConfig { alpha_sup: 0.7, ..LossConfig::default() };
    let prior = |variant, normalize| PriorSettings { variant, learn: LearnMask::default(), normalize };
    let mut normal = vec![Group::KeyLogits, Group::Mu, Group::LogSigma];
    normal.extend(HEADS);
    // keypoint logits only move the grid anchor, which is piecewise constant
    let mut grid = vec![Group::GridLogits];
    grid.extend(HEADS);
    vec![
        ("normal", base, normal.clone()),
        (
            "normal_unnormalized_sigmoid",
            LossConfig { prior: prior(PriorVariant::Normal, false), style: LossStyle::SigmoidBce, ..base },
            normal,
        ),
        ("grid", LossConfig { prior: prior(PriorVariant::Grid, true), ..base }, grid),
    ]
}

/// Check the analytic gradient of every case on the problem drawn from `seed`.
pub fn gradcheck(seed: u64) -> crate::Result<GradcheckReport> {
    let p = random_problem(seed);
    let mut reports = Vec::new();
    let mut worst: f64 = 0.0;
    for (name, cfg, groups) in cases() {
        let (_, analytic) = unit_gradient(&p.params, &cfg, &p.unit, &p.supervision)?;
        let f = |x: &[f64]| {
            let params = Params { dims: DIMS, data: x.to_vec() };
            unit_loss_value(&params, &cfg, &p.unit, &p.supervision).unwrap_or(f64::NAN)
        };
        let mut errs = Vec::new();
        for g in groups {
            let coords: Vec<usize> = DIMS.range(g).collect();
            let r = grad_check_coords(f, &p.params.data, &analytic, &coords, FD_STEP);
            worst = worst.max(r.max_rel_error);
            errs.push(GroupError { group: g.name(), max_rel_error: r.max_rel_error });
        }
        reports.push(CaseReport { name: name.to_string(), groups: errs });
    }
    Ok(GradcheckReport { seed, cases: reports, max_rel_error: worst })
}
