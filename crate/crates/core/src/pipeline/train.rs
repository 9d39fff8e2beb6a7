//! Minibatch training with Adam, per-epoch validation, and best-checkpoint
//! retention.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{Dataset, InferenceSample};
use crate::diff::AdamState;
use crate::error::{Error, Result};
use crate::eval::evaluate;
use crate::model::{unit_gradient, Dims, Group, LossParts, Params};
use crate::prior::SIGMA_MIN;

use super::checkpoint::Checkpoint;
use super::config::TrainConfig;
use super::infer::{infer, InferSettings};
use super::prepare::{mix_seed, prepare_units, revealed_units, supervision_for};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    pub epoch: usize,
    /// Mean total loss over the epoch's units.
    pub loss: f64,
    pub obj: f64,
    pub act: f64,
    /// Mean supervised term over units that had one.
    pub sup: Option<f64>,
    pub val_map: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub checkpoint: Checkpoint,
    pub log: Vec<EpochLog>,
    pub skipped: usize,
}

pub fn dims_for(ds: &Dataset, cfg: &TrainConfig) -> Dims {
    Dims {
        n_actions: ds.task.n_actions(),
        n_objects: ds.task.n_objects(),
        n_keypoints: ds.task.num_keypoints,
        feature_dim: ds.task.feature_dim,
        hidden: cfg.hidden,
    }
}

pub fn infer_settings(cfg: &TrainConfig) -> InferSettings {
    InferSettings { style: cfg.loss_style, nms_iou: cfg.nms_iou, score_threshold: cfg.score_threshold }
}

/// Keep every `σ` at or above the floor.
pub fn clamp_sigma(params: &mut Params<f64>) {
    let floor = SIGMA_MIN.ln();
    for v in params.group_mut(Group::LogSigma) {
        if *v < floor {
            *v = floor;
        }
    }
}

const PRIOR_GROUPS: [Group; 4] = [Group::KeyLogits, Group::Mu, Group::LogSigma, Group::GridLogits];

/// Per-parameter multipliers giving the prior groups `prior_lr`.
pub fn lr_scales(dims: Dims, cfg: &TrainConfig) -> Vec<f64> {
    let mut s = vec![1.0; dims.n_params()];
    for g in PRIOR_GROUPS {
        s[dims.range(g)].fill(cfg.prior_lr / cfg.lr);
    }
    s
}

/// mAP of `params` on `ds`.
pub fn validation_map(params: &Params<f64>, ds: &Dataset, cfg: &TrainConfig) -> f64 {
    let samples: Vec<InferenceSample> = ds.samples.iter().map(InferenceSample::from).collect();
    let dets = infer(params, &samples, &infer_settings(cfg));
    evaluate(&dets, ds, &cfg.eval_settings()).map
}

/// Train on `train`; when `val` is given the checkpoint with the best
/// validation mAP is kept (earliest on ties), otherwise the last one.
pub fn train(cfg: &TrainConfig, train: &Dataset, val: Option<&Dataset>) -> Result<TrainOutcome> {
    cfg.validate()?;
    train.validate()?;
    if let Some(v) = val {
        v.validate()?;
        if v.task != train.task {
            return Err(Error::Task("validation task differs from training task".into()));
        }
    }
    let dims = dims_for(train, cfg);
    let loss_cfg = cfg.loss_config();
    let units = prepare_units(train, cfg);
    let skipped = train.samples.len() - units.len();
    if units.is_empty() {
        return Err(Error::Task("no usable training samples".into()));
    }
    let revealed = revealed_units(&units, cfg.rho, cfg.seed);

    let mut params = Params::init(dims, cfg.init_sigma, &mut ChaCha8Rng::seed_from_u64(mix_seed(&[cfg.seed, 1])));
    let mut adam = AdamState::new(params.data.len(), cfg.lr).with_lr_scale(lr_scales(dims, cfg))?;
    let mut order: Vec<usize> = (0..units.len()).collect();
    let mut log = Vec::with_capacity(cfg.epochs);
    let mut best: Option<Checkpoint> = None;

    for epoch in 1..=cfg.epochs {
        order.shuffle(&mut ChaCha8Rng::seed_from_u64(mix_seed(&[cfg.seed, 2, epoch as u64])));
        adam.lr = cfg.lr * cfg.lr_schedule.factor(epoch, cfg.epochs);
        let mut sums = (0.0, 0.0, 0.0, 0.0, 0usize);
        for batch in order.chunks(cfg.batch_size) {
            let results: Vec<Result<(LossParts<f64>, Vec<f64>)>> = batch
                .par_iter()
                .map(|&i| {
                    let sup = if revealed[i] { supervision_for(&units[i], cfg.seed, epoch, i) } else { Vec::new() };
                    unit_gradient(&params, &loss_cfg, &units[i].unit, &sup)
                })
                .collect();
            let mut grad = vec![0.0; params.data.len()];
            for r in results {
                let (parts, g) = r?;
                for (acc, v) in grad.iter_mut().zip(&g) {
                    *acc += v;
                }
                sums.0 += parts.total;
                sums.1 += parts.obj;
                sums.2 += parts.act;
                if let Some(s) = parts.sup {
                    sums.3 += s;
                    sums.4 += 1;
                }
            }
            let scale = 1.0 / batch.len() as f64;
            grad.iter_mut().for_each(|v| *v *= scale);
            if epoch <= cfg.prior_warmup {
                for g in PRIOR_GROUPS {
                    grad[dims.range(g)].fill(0.0);
                }
            }
            adam.step(&mut params.data, &grad)?;
            clamp_sigma(&mut params);
        }
        let n = units.len() as f64;
        let val_map = val.map(|v| validation_map(&params, v, cfg));
        let entry = EpochLog {
            epoch,
            loss: sums.0 / n,
            obj: sums.1 / n,
            act: sums.2 / n,
            sup: (sums.4 > 0).then(|| sums.3 / sums.4 as f64),
            val_map,
        };
        log::info!(
            "epoch {epoch}: loss {:.5} obj {:.5} act {:.5}{}",
            entry.loss,
            entry.obj,
            entry.act,
            val_map.map_or(String::new(), |m| format!(" val_map {m:.4}"))
        );
        log.push(entry);
        let better = match (&best, val_map) {
            (None, _) | (_, None) => true,
            (Some(b), Some(m)) => m > b.val_map.unwrap_or(f64::NEG_INFINITY),
        };
        if better {
            best = Some(Checkpoint::new(cfg, epoch, val_map, &params, adam.clone()));
        }
    }
    Ok(TrainOutcome { checkpoint: best.expect("at least one epoch"), log, skipped })
}
