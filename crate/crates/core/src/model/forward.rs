//! The per-sample training graph: heads, prior weights, tubelet pooling and
//! the loss terms, assembled against any [`Ops`] backend.

use serde::{Deserialize, Serialize};

use crate::diff::{Ops, Tape};
use crate::error::Result;
use crate::geometry::{BBox, Point2};
use crate::prior::{anchor_with, weights_with, Keypoints, PriorSettings, PriorVariant};

use super::heads::mlp_forward;
use super::loss::{
    action_logits_with, class_probs, loss_act_with, loss_obj_with, loss_supervised_with, HyperWeights, LossStyle,
    SupervisedPick,
};
use super::params::{Group, Params};

pub const FRAME_CENTER: Point2 = Point2::new(0.5, 0.5);

/// Settings of the loss that are not learned.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossConfig {
    pub prior: PriorSettings,
    pub weights: HyperWeights,
    pub style: LossStyle,
    /// Weight of the supervised term when ground truth is revealed.
    pub alpha_sup: f64,
}

impl Default for LossConfig {
    fn default() -> Self {
        Self {
            prior: PriorSettings::default(),
            weights: HyperWeights::default(),
            style: LossStyle::Paper,
            alpha_sup: 1.0,
        }
    }
}

/// One sampled frame after proposal filtering.
#[derive(Debug, Clone, PartialEq)]
pub struct UnitFrame {
    pub boxes: Vec<BBox>,
    pub features: Vec<Vec<f64>>,
    pub person_feature: Option<Vec<f64>>,
    pub keypoints: Option<Keypoints>,
}

impl UnitFrame {
    pub fn centers(&self, idx: impl IntoIterator<Item = usize>) -> Vec<Point2> {
        idx.into_iter().map(|i| self.boxes[i].center()).collect()
    }
}

/// A training instance ready for the loss: sampled frames, linked tubelets
/// (`tubelets[τ][t]` indexes `frames[t]`), and the weak labels.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainUnit {
    pub frames: Vec<UnitFrame>,
    pub tubelets: Vec<Vec<usize>>,
    pub actions: Vec<usize>,
    pub action_object: Vec<usize>,
    pub n_actions: usize,
}

/// Supervised targets for one frame of a unit.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameSupervision {
    pub frame: usize,
    pub picks: Vec<SupervisedPick>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossParts<V> {
    pub obj: V,
    pub act: V,
    pub sup: Option<V>,
    pub total: V,
}

struct HeadCache<V> {
    object: Vec<Vec<Option<Vec<V>>>>,
    action: Vec<Vec<Option<Vec<V>>>>,
}

impl<V: Copy> HeadCache<V> {
    fn new(unit: &TrainUnit) -> Self {
        let empty = || unit.frames.iter().map(|f| vec![None; f.boxes.len()]).collect();
        Self { object: empty(), action: empty() }
    }

    fn object<A: Ops<V = V>>(&mut self, ops: &mut A, params: &Params<V>, unit: &TrainUnit, t: usize, r: usize) -> Vec<V> {
        if self.object[t][r].is_none() {
            let m = params.mlp(Group::ObjectHead);
            self.object[t][r] = Some(mlp_forward(ops, &m, &unit.frames[t].features[r]));
        }
        self.object[t][r].clone().unwrap()
    }

    fn action<A: Ops<V = V>>(&mut self, ops: &mut A, params: &Params<V>, unit: &TrainUnit, t: usize, r: usize) -> Vec<V> {
        if self.action[t][r].is_none() {
            let m = params.mlp(Group::ProposalActionHead);
            self.action[t][r] = Some(mlp_forward(ops, &m, &unit.frames[t].features[r]));
        }
        self.action[t][r].clone().unwrap()
    }
}

fn pool<A: Ops>(ops: &mut A, rows: &[Vec<A::V>]) -> Vec<A::V> {
    if rows.len() == 1 {
        return rows[0].clone();
    }
    (0..rows[0].len())
        .map(|c| {
            let col: Vec<A::V> = rows.iter().map(|r| r[c]).collect();
            ops.mean(&col)
        })
        .collect()
}

/// Prior weights `w[a][τ]` for every action and tubelet: per-frame weights
/// over the tubelet proposals in that frame, averaged across frames.
pub fn tubelet_weights<A: Ops>(ops: &mut A, params: &Params<A::V>, settings: &PriorSettings, unit: &TrainUnit) -> Vec<Vec<A::V>> {
    let n_frames = unit.frames.len();
    (0..unit.n_actions)
        .map(|a| {
            let prior = params.action_prior(a);
            let per_frame: Vec<Vec<A::V>> = (0..n_frames)
                .map(|t| {
                    let frame = &unit.frames[t];
                    let kps = match settings.variant {
                        PriorVariant::Center => None,
                        _ => frame.keypoints.as_ref(),
                    };
                    let anchor = anchor_with(ops, settings, &prior, kps, FRAME_CENTER);
                    let centers = frame.centers(unit.tubelets.iter().map(|tb| tb[t]));
                    weights_with(ops, settings, &prior, anchor, &centers)
                })
                .collect();
            (0..unit.tubelets.len())
                .map(|tau| {
                    if n_frames == 1 {
                        per_frame[0][tau]
                    } else {
                        let xs: Vec<A::V> = per_frame.iter().map(|w| w[tau]).collect();
                        ops.mean(&xs)
                    }
                })
                .collect()
        })
        .collect()
}

/// Loss terms of one unit.
pub fn unit_loss<A: Ops>(
    ops: &mut A,
    params: &Params<A::V>,
    cfg: &LossConfig,
    unit: &TrainUnit,
    supervision: &[FrameSupervision],
) -> Result<LossParts<A::V>> {
    let mut cache = HeadCache::new(unit);
    let n_frames = unit.frames.len();

    // pooled object / proposal-action scores per tubelet
    let mut obj_probs = Vec::with_capacity(unit.tubelets.len());
    let mut act_scores = Vec::with_capacity(unit.tubelets.len());
    for tb in &unit.tubelets {
        let o: Vec<Vec<A::V>> = (0..n_frames).map(|t| cache.object(ops, params, unit, t, tb[t])).collect();
        let s = pool(ops, &o);
        obj_probs.push(class_probs(ops, &s, cfg.style));
        let a: Vec<Vec<A::V>> = (0..n_frames).map(|t| cache.action(ops, params, unit, t, tb[t])).collect();
        act_scores.push(pool(ops, &a));
    }

    let weights = tubelet_weights(ops, params, &cfg.prior, unit);

    let objects: Vec<usize> = unit.actions.iter().map(|&a| unit.action_object[a]).collect();
    let gt_weights: Vec<Vec<A::V>> = unit.actions.iter().map(|&a| weights[a].clone()).collect();
    let obj = loss_obj_with(ops, &obj_probs, &gt_weights, &objects)?;

    let person_head = params.mlp(Group::PersonActionHead);
    let zeros = vec![0.0; person_head.dims.input];
    let person_rows: Vec<Vec<A::V>> = unit
        .frames
        .iter()
        .map(|f| {
            let feat = match (cfg.prior.variant, &f.person_feature) {
                (PriorVariant::Center, _) | (_, None) => &zeros,
                (_, Some(x)) => x,
            };
            mlp_forward(ops, &person_head, feat)
        })
        .collect();
    let person = pool(ops, &person_rows);
    let logits = action_logits_with(ops, &person, &act_scores, &weights);
    let mut labels = vec![0.0; unit.n_actions];
    for &a in &unit.actions {
        labels[a] = 1.0;
    }
    let act = loss_act_with(ops, &logits, &labels, cfg.style);

    let sup = if supervision.is_empty() {
        None
    } else {
        let per_frame: Vec<A::V> = supervision
            .iter()
            .filter(|s| !s.picks.is_empty())
            .map(|s| {
                let probs: Vec<Vec<A::V>> = s
                    .picks
                    .iter()
                    .map(|p| {
                        let scores = cache.object(ops, params, unit, s.frame, p.proposal);
                        class_probs(ops, &scores, cfg.style)
                    })
                    .collect();
                loss_supervised_with(ops, &probs, &s.picks)
            })
            .collect();
        if per_frame.is_empty() {
            None
        } else {
            Some(ops.mean(&per_frame))
        }
    };

    let wo = ops.scale(obj, cfg.weights.alpha_o);
    let wa = ops.scale(act, cfg.weights.alpha_a);
    let mut total = ops.add(wo, wa);
    if let Some(s) = sup {
        let ws = ops.scale(s, cfg.alpha_sup);
        total = ops.add(total, ws);
    }
    Ok(LossParts { obj, act, sup, total })
}

/// Loss values and the gradient of the total loss with respect to every
/// parameter. Gaussian groups frozen by the learn mask get zero gradient.
pub fn unit_gradient(
    params: &Params<f64>,
    cfg: &LossConfig,
    unit: &TrainUnit,
    supervision: &[FrameSupervision],
) -> Result<(LossParts<f64>, Vec<f64>)> {
    let mut tape = Tape::with_capacity(params.data.len() * 4, params.data.len() * 16);
    let vars = Params { dims: params.dims, data: tape.leaves(&params.data) };
    let parts = unit_loss(&mut tape, &vars, cfg, unit, supervision)?;
    let g = tape.backward(parts.total);
    let mut grad = g.of(&vars.data);
    mask_gradient(&mut grad, params, cfg);
    let value = |v| tape.value(v);
    Ok((
        LossParts {
            obj: value(parts.obj),
            act: value(parts.act),
            sup: parts.sup.map(value),
            total: value(parts.total),
        },
        grad,
    ))
}

pub fn mask_gradient(grad: &mut [f64], params: &Params<f64>, cfg: &LossConfig) {
    let d = params.dims;
    if !cfg.prior.learn.mu {
        grad[d.range(Group::Mu)].fill(0.0);
    }
    if !cfg.prior.learn.sigma {
        grad[d.range(Group::LogSigma)].fill(0.0);
    }
}

/// Total loss on plain values.
pub fn unit_loss_value(params: &Params<f64>, cfg: &LossConfig, unit: &TrainUnit, supervision: &[FrameSupervision]) -> Result<f64> {
    Ok(unit_loss(&mut crate::diff::Eval, params, cfg, unit, supervision)?.total)
}
