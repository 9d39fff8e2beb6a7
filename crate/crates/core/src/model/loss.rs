//! Object, action, combined, and supervised classification losses.

use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::diff::{Eval, Ops};
use crate::error::{Error, Result};
use crate::geometry::{iou, BBox};

/// Floor applied inside every logarithm.
pub const LOG_FLOOR: f64 = 1e-12;
/// IoU at or above which a proposal is a supervised positive.
pub const SUPERVISED_POS_IOU: f64 = 0.45;
/// Maximum negatives per positive in the supervised loss.
pub const SUPERVISED_NEG_RATIO: usize = 5;

/// How class scores become probabilities before the binary cross-entropy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum LossStyle {
    /// Softmax across classes, then BCE against each class target.
    #[default]
    Paper,
    /// Independent sigmoid per class, then BCE.
    SigmoidBce,
}

impl fmt::Display for LossStyle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            LossStyle::Paper => "paper",
            LossStyle::SigmoidBce => "sigmoid_bce",
        })
    }
}

impl FromStr for LossStyle {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "paper" => Ok(LossStyle::Paper),
            "sigmoid_bce" => Ok(LossStyle::SigmoidBce),
            other => Err(format!("unknown loss style `{other}`")),
        }
    }
}

/// Weights of the object and action terms in the combined loss.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HyperWeights {
    pub alpha_o: f64,
    pub alpha_a: f64,
}

impl Default for HyperWeights {
    fn default() -> Self {
        Self { alpha_o: 2.0, alpha_a: 1.0 }
    }
}

pub fn class_probs<A: Ops>(ops: &mut A, scores: &[A::V], style: LossStyle) -> Vec<A::V> {
    match style {
        LossStyle::Paper => ops.softmax(scores),
        LossStyle::SigmoidBce => scores.iter().map(|&s| ops.sigmoid(s)).collect(),
    }
}

/// `−(1/n) Σ_c [y_c log p_c + (1−y_c) log(1−p_c)]` for binary targets.
pub fn bce<A: Ops>(ops: &mut A, probs: &[A::V], targets: &[f64]) -> A::V {
    debug_assert_eq!(probs.len(), targets.len());
    let mut terms = Vec::with_capacity(probs.len());
    for (&p, &y) in probs.iter().zip(targets) {
        if y != 0.0 {
            let l = ops.ln_clamped(p, LOG_FLOOR);
            terms.push(ops.scale(l, y));
        }
        if y != 1.0 {
            let neg = ops.scale(p, -1.0);
            let q = ops.add_const(neg, 1.0);
            let l = ops.ln_clamped(q, LOG_FLOOR);
            terms.push(ops.scale(l, 1.0 - y));
        }
    }
    let s = ops.sum(&terms);
    ops.scale(s, -1.0 / probs.len() as f64)
}

pub fn one_hot(n: usize, k: usize) -> Vec<f64> {
    let mut v = vec![0.0; n];
    v[k] = 1.0;
    v
}

/// Prior-weighted object loss.
///
/// `probs[r]` are the class probabilities of proposal `r`; `weights[i][r]`
/// the prior weight of proposal `r` under the `i`-th labeled action, whose
/// object is `objects[i]`. Per action the loss is
/// `(1/n_r) Σ_r w_r · BCE(P(·|r), onehot(o_a))`; actions are averaged.
pub fn loss_obj_with<A: Ops>(ops: &mut A, probs: &[Vec<A::V>], weights: &[Vec<A::V>], objects: &[usize]) -> Result<A::V> {
    if objects.is_empty() {
        return Err(Error::NoActionLabel);
    }
    let n_r = probs.len();
    let n_o = probs.first().map_or(0, |p| p.len());
    let mut per_action = Vec::with_capacity(objects.len());
    for (w, &o) in weights.iter().zip(objects) {
        let target = one_hot(n_o, o);
        let losses: Vec<A::V> = probs.iter().map(|p| bce(ops, p, &target)).collect();
        let weighted = ops.dot(w, &losses);
        per_action.push(ops.scale(weighted, 1.0 / n_r as f64));
    }
    Ok(ops.mean(&per_action))
}

/// Combined action scores `s(a) = s_H(a) + Σ_r w^a_r s_O(r; a)`.
///
/// `person[a]`, `proposal[r][a]`, `weights[a][r]`.
pub fn action_logits_with<A: Ops>(ops: &mut A, person: &[A::V], proposal: &[Vec<A::V>], weights: &[Vec<A::V>]) -> Vec<A::V> {
    (0..person.len())
        .map(|a| {
            let col: Vec<A::V> = proposal.iter().map(|row| row[a]).collect();
            let s = ops.dot(&weights[a], &col);
            ops.add(person[a], s)
        })
        .collect()
}

pub fn loss_act_with<A: Ops>(ops: &mut A, logits: &[A::V], labels: &[f64], style: LossStyle) -> A::V {
    let p = class_probs(ops, logits, style);
    bce(ops, &p, labels)
}

/// Which proposals enter the supervised loss and with what target.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SupervisedPick {
    pub proposal: usize,
    /// Matched object class, `None` for a background negative.
    pub object: Option<usize>,
}

/// Label proposals against ground truth and sample negatives.
///
/// Positives have IoU ≥ 0.45 with some ground-truth box and take the class
/// of the best-overlapping box (ties to the lower class index). At most five
/// negatives per positive are drawn from the rest; with no positives, up to
/// five negatives are drawn.
pub fn assign_supervised<R: Rng>(proposals: &[BBox], gts: &[(usize, BBox)], rng: &mut R) -> Vec<SupervisedPick> {
    let mut positives = Vec::new();
    let mut negatives = Vec::new();
    for (r, b) in proposals.iter().enumerate() {
        let best = gts
            .iter()
            .map(|(o, g)| (iou(b, g), *o))
            .filter(|(v, _)| *v >= SUPERVISED_POS_IOU)
            .max_by(|x, y| x.0.total_cmp(&y.0).then(y.1.cmp(&x.1)));
        match best {
            Some((_, o)) => positives.push(SupervisedPick { proposal: r, object: Some(o) }),
            None => negatives.push(r),
        }
    }
    let quota = if positives.is_empty() {
        SUPERVISED_NEG_RATIO
    } else {
        SUPERVISED_NEG_RATIO * positives.len()
    };
    negatives.shuffle(rng);
    negatives.truncate(quota);
    negatives.sort_unstable();
    positives.extend(negatives.into_iter().map(|r| SupervisedPick { proposal: r, object: None }));
    positives
}

/// Mean BCE over the picked proposals; `probs[i]` belongs to `picks[i]`.
pub fn loss_supervised_with<A: Ops>(ops: &mut A, probs: &[Vec<A::V>], picks: &[SupervisedPick]) -> A::V {
    let n_o = probs.first().map_or(0, |p| p.len());
    let terms: Vec<A::V> = probs
        .iter()
        .zip(picks)
        .map(|(p, pick)| {
            let target = match pick.object {
                Some(o) => one_hot(n_o, o),
                None => vec![0.0; n_o],
            };
            bce(ops, p, &target)
        })
        .collect();
    ops.mean(&terms)
}

/// Object loss on plain values. `weights[i]` pairs with `gt_actions[i]`.
pub fn loss_obj(probs: &[Vec<f64>], weights: &[Vec<f64>], action_object: &[usize], gt_actions: &[usize]) -> Result<f64> {
    let objects: Vec<usize> = gt_actions.iter().map(|&a| action_object[a]).collect();
    loss_obj_with(&mut Eval, probs, weights, &objects)
}

pub fn action_logits(person: &[f64], proposal: &[Vec<f64>], weights: &[Vec<f64>]) -> Vec<f64> {
    action_logits_with(&mut Eval, person, proposal, weights)
}

pub fn loss_act(logits: &[f64], labels: &[f64], style: LossStyle) -> f64 {
    loss_act_with(&mut Eval, logits, labels, style)
}

pub fn loss_total(l_obj: f64, l_act: f64, hw: &HyperWeights) -> f64 {
    hw.alpha_o * l_obj + hw.alpha_a * l_act
}

/// Supervised loss on plain probabilities of every proposal.
pub fn loss_supervised<R: Rng>(probs: &[Vec<f64>], proposals: &[BBox], gts: &[(usize, BBox)], rng: &mut R) -> f64 {
    let picks = assign_supervised(proposals, gts, rng);
    let rows: Vec<Vec<f64>> = picks.iter().map(|p| probs[p.proposal].clone()).collect();
    loss_supervised_with(&mut Eval, &rows, &picks)
}

#[cfg(test)]
#[allow(clippy::approx_constant)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::LN_2;

    #[test]
    fn loss_obj_hand_value() {
        let l = loss_obj(&[vec![0.5, 0.5]], &[vec![1.0]], &[0], &[0]).unwrap();
        assert!((l - LN_2).abs() < 1e-12);
        assert!((l - 0.6931).abs() < 1e-4);
    }

    #[test]
    fn loss_obj_perfect_prediction() {
        let l = loss_obj(&[vec![1.0, 0.0]], &[vec![1.0]], &[0], &[0]).unwrap();
        assert!(l.abs() < 1e-12);
    }

    #[test]
    fn loss_obj_needs_a_label() {
        assert!(matches!(loss_obj(&[vec![0.5, 0.5]], &[], &[0], &[]), Err(Error::NoActionLabel)));
    }

    #[test]
    fn duplicated_proposal_halves_loss() {
        let p = vec![0.7, 0.3];
        let one = loss_obj(std::slice::from_ref(&p), &[vec![1.0]], &[0], &[0]).unwrap();
        let two = loss_obj(&[p.clone(), p], &[vec![0.5, 0.5]], &[0], &[0]).unwrap();
        assert!((two - one / 2.0).abs() < 1e-15);
    }

    #[test]
    fn action_logit_cases() {
        let person = [1.0, -2.0];
        let props = vec![vec![4.0, 1.0], vec![0.0, 3.0]];
        let zero = action_logits(&person, &props, &[vec![0.0, 0.0], vec![0.0, 0.0]]);
        assert_eq!(zero, vec![1.0, -2.0]);
        let s = action_logits(&person, &props, &[vec![0.25, 0.75], vec![0.0, 1.0]]);
        assert_eq!(s, vec![2.0, 1.0]);
        let single = action_logits(&[0.5], &[vec![1.5]], &[vec![1.0]]);
        assert_eq!(single, vec![2.0]);
    }

    #[test]
    fn loss_act_cases() {
        assert!(loss_act(&[3.7], &[1.0], LossStyle::Paper).abs() < 1e-15);
        let l = loss_act(&[0.2, 0.2], &[1.0, 0.0], LossStyle::Paper);
        assert!((l - LN_2).abs() < 1e-12);
        let lower = loss_act(&[0.9, 0.2], &[1.0, 0.0], LossStyle::Paper);
        assert!(lower < l);
    }

    #[test]
    fn loss_total_cases() {
        let hw = HyperWeights::default();
        assert!((loss_total(0.6931, 0.6931, &hw) - 2.0793).abs() < 1e-4);
        assert!((loss_total(LN_2, LN_2, &hw) - 2.0794).abs() < 1e-4);
        assert_eq!(loss_total(0.3, 0.7, &HyperWeights { alpha_o: 0.0, alpha_a: 1.0 }), 0.7);
        assert_eq!(loss_total(0.3, 0.7, &HyperWeights { alpha_o: 1.0, alpha_a: 0.0 }), 0.3);
    }

    #[test]
    fn losses_stay_finite_at_saturation() {
        let l = loss_obj(&[vec![0.0, 1.0]], &[vec![1.0]], &[0], &[0]).unwrap();
        assert!(l.is_finite() && l > 0.0);
        let s = loss_act(&[-1e6, 1e6], &[1.0, 0.0], LossStyle::SigmoidBce);
        assert!(s.is_finite() && s > 0.0);
    }

    #[test]
    fn supervised_assignment_rules() {
        let gt = BBox::new(0.1, 0.1, 0.3, 0.3);
        let mut props = vec![gt];
        for i in 0..20 {
            let x = 0.4 + 0.02 * i as f64;
            props.push(BBox::new(x, 0.5, x + 0.1, 0.6));
        }
        props.push(BBox::new(0.1, 0.1, 0.3, 0.31));
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let picks = assign_supervised(&props, &[(2, gt)], &mut rng);
        let pos: Vec<_> = picks.iter().filter(|p| p.object.is_some()).collect();
        assert_eq!(pos.len(), 2);
        assert!(pos.iter().all(|p| p.object == Some(2)));
        assert_eq!(picks.len() - pos.len(), 10);
    }

    #[test]
    fn supervised_threshold_and_fallback() {
        let gt = BBox::new(0.0, 0.0, 1.0, 1.0);
        let near = BBox::new(0.0, 0.0, 1.0, 0.44); // IoU 0.44
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let picks = assign_supervised(&[near], &[(0, gt)], &mut rng);
        assert_eq!(picks, vec![SupervisedPick { proposal: 0, object: None }]);

        let props: Vec<BBox> = (0..8).map(|i| BBox::new(2.0 + i as f64, 2.0, 2.5 + i as f64, 2.5)).collect();
        let picks = assign_supervised(&props, &[(0, gt)], &mut rng);
        assert_eq!(picks.len(), 5);
    }

    #[test]
    fn supervised_ties_prefer_lower_class() {
        let b = BBox::new(0.0, 0.0, 1.0, 1.0);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let picks = assign_supervised(&[b], &[(3, b), (1, b)], &mut rng);
        assert_eq!(picks[0].object, Some(1));
    }
}
