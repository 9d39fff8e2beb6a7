//! Training configuration, read from and written to flat `key = value` text.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::eval::EvalSettings;
use crate::kv::{KvMap, KvWriter};
use crate::model::{HyperWeights, LossConfig, LossStyle};
use crate::prior::{LearnMask, PriorSettings, PriorVariant};

/// Learning-rate schedule over epochs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum LrSchedule {
    Constant,
    /// Half-cosine from the base rate at epoch 1 down to zero after the last.
    #[default]
    Cosine,
}

impl fmt::Display for LrSchedule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            LrSchedule::Constant => "constant",
            LrSchedule::Cosine => "cosine",
        })
    }
}

impl FromStr for LrSchedule {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "constant" => Ok(LrSchedule::Constant),
            "cosine" => Ok(LrSchedule::Cosine),
            other => Err(format!("unknown lr schedule `{other}`")),
        }
    }
}

impl LrSchedule {
    /// Multiplier of the base rate during `epoch` (1-based) of `epochs`.
    pub fn factor(self, epoch: usize, epochs: usize) -> f64 {
        match self {
            LrSchedule::Constant => 1.0,
            LrSchedule::Cosine => 0.5 * (1.0 + (PI * (epoch - 1) as f64 / epochs as f64).cos()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    /// Learning rate of the prior parameters (keypoint/grid logits, μ, log σ).
    pub prior_lr: f64,
    /// Leading epochs during which the prior stays frozen at its
    /// initialization while the heads train.
    pub prior_warmup: usize,
    pub lr_schedule: LrSchedule,
    pub alpha_o: f64,
    pub alpha_a: f64,
    pub alpha_sup: f64,
    /// Proposals overlapping the person box with IoU above this are dropped.
    pub theta_h: f64,
    /// Proposals kept per frame after filtering.
    pub n_r: usize,
    /// Frames sampled per clip.
    pub n_frames: usize,
    pub prior: PriorVariant,
    pub learn_mu: bool,
    pub learn_sigma: bool,
    pub normalize_prior: bool,
    pub loss_style: LossStyle,
    /// Fraction of training samples whose boxes are revealed.
    pub rho: f64,
    /// Weight of the overlap term when linking tubelets.
    pub lambda: f64,
    /// Tubelets linked per clip.
    pub k: usize,
    pub nms_iou: f64,
    pub score_threshold: f64,
    pub hidden: usize,
    pub init_sigma: f64,
    pub ap_iou: f64,
    pub corloc_iou: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        let hw = HyperWeights::default();
        Self {
            epochs: 50,
            batch_size: 4,
            lr: 1e-3,
            prior_lr: 1e-2,
            prior_warmup: 5,
            lr_schedule: LrSchedule::Cosine,
            alpha_o: hw.alpha_o,
            alpha_a: hw.alpha_a,
            alpha_sup: 1.0,
            theta_h: 0.5,
            n_r: 32,
            n_frames: 8,
            prior: PriorVariant::Normal,
            learn_mu: true,
            learn_sigma: true,
            normalize_prior: true,
            loss_style: LossStyle::Paper,
            rho: 0.0,
            lambda: 1.0,
            k: 16,
            nms_iou: 0.5,
            score_threshold: 0.05,
            hidden: 16,
            init_sigma: 0.5,
            ap_iou: 0.5,
            corloc_iou: 0.5,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn from_kv_text(text: &str) -> Result<Self> {
        let mut m = KvMap::parse(text)?;
        let d = Self::default();
        let cfg = Self {
            epochs: m.take("epochs", d.epochs)?,
            batch_size: m.take("batch_size", d.batch_size)?,
            lr: m.take("lr", d.lr)?,
            prior_lr: m.take("prior_lr", d.prior_lr)?,
            prior_warmup: m.take("prior_warmup", d.prior_warmup)?,
            lr_schedule: m.take("lr_schedule", d.lr_schedule)?,
            alpha_o: m.take("alpha_o", d.alpha_o)?,
            alpha_a: m.take("alpha_a", d.alpha_a)?,
            alpha_sup: m.take("alpha_sup", d.alpha_sup)?,
            theta_h: m.take("theta_h", d.theta_h)?,
            n_r: m.take("n_r", d.n_r)?,
            n_frames: m.take("n_frames", d.n_frames)?,
            prior: m.take("prior", d.prior)?,
            learn_mu: m.take("learn_mu", d.learn_mu)?,
            learn_sigma: m.take("learn_sigma", d.learn_sigma)?,
            normalize_prior: m.take("normalize_prior", d.normalize_prior)?,
            loss_style: m.take("loss_style", d.loss_style)?,
            rho: m.take("rho", d.rho)?,
            lambda: m.take("lambda", d.lambda)?,
            k: m.take("k", d.k)?,
            nms_iou: m.take("nms_iou", d.nms_iou)?,
            score_threshold: m.take("score_threshold", d.score_threshold)?,
            hidden: m.take("hidden", d.hidden)?,
            init_sigma: m.take("init_sigma", d.init_sigma)?,
            ap_iou: m.take("ap_iou", d.ap_iou)?,
            corloc_iou: m.take("corloc_iou", d.corloc_iou)?,
            seed: m.take("seed", d.seed)?,
        };
        m.finish()?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Canonical text form; every key, fixed order.
    pub fn to_kv_text(&self) -> String {
        KvWriter::default()
            .put("epochs", self.epochs)
            .put("batch_size", self.batch_size)
            .put("lr", self.lr)
            .put("prior_lr", self.prior_lr)
            .put("prior_warmup", self.prior_warmup)
            .put("lr_schedule", self.lr_schedule)
            .put("alpha_o", self.alpha_o)
            .put("alpha_a", self.alpha_a)
            .put("alpha_sup", self.alpha_sup)
            .put("theta_h", self.theta_h)
            .put("n_r", self.n_r)
            .put("n_frames", self.n_frames)
            .put("prior", self.prior)
            .put("learn_mu", self.learn_mu)
            .put("learn_sigma", self.learn_sigma)
            .put("normalize_prior", self.normalize_prior)
            .put("loss_style", self.loss_style)
            .put("rho", self.rho)
            .put("lambda", self.lambda)
            .put("k", self.k)
            .put("nms_iou", self.nms_iou)
            .put("score_threshold", self.score_threshold)
            .put("hidden", self.hidden)
            .put("init_sigma", self.init_sigma)
            .put("ap_iou", self.ap_iou)
            .put("corloc_iou", self.corloc_iou)
            .put("seed", self.seed)
            .finish()
    }

    /// Hex SHA-256 of the canonical text.
    pub fn hash(&self) -> String {
        hash_text(&self.to_kv_text())
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.to_string()));
        if [self.epochs, self.batch_size, self.n_r, self.n_frames, self.k, self.hidden].contains(&0) {
            return bad("epochs, batch_size, n_r, n_frames, k and hidden must be >= 1");
        }
        if !(0.0..=1.0).contains(&self.rho) {
            return bad("rho must lie in [0, 1]");
        }
        let positive = [self.lr, self.prior_lr, self.init_sigma];
        if positive.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
            return bad("lr, prior_lr and init_sigma must be positive");
        }
        let finite_nonneg = [self.alpha_o, self.alpha_a, self.alpha_sup, self.lambda];
        if finite_nonneg.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return bad("alpha_o, alpha_a, alpha_sup and lambda must be finite and >= 0");
        }
        let unit = [self.theta_h, self.nms_iou, self.score_threshold, self.ap_iou, self.corloc_iou];
        if unit.iter().any(|v| !(0.0..=1.0).contains(v)) {
            return bad("theta_h, nms_iou, score_threshold, ap_iou and corloc_iou must lie in [0, 1]");
        }
        Ok(())
    }

    pub fn loss_config(&self) -> LossConfig {
        LossConfig {
            prior: PriorSettings {
                variant: self.prior,
                learn: LearnMask { mu: self.learn_mu, sigma: self.learn_sigma },
                normalize: self.normalize_prior,
            },
            weights: HyperWeights { alpha_o: self.alpha_o, alpha_a: self.alpha_a },
            style: self.loss_style,
            alpha_sup: self.alpha_sup,
        }
    }

    pub fn eval_settings(&self) -> EvalSettings {
        EvalSettings { ap_iou: self.ap_iou, corloc_iou: self.corloc_iou }
    }
}

pub fn hash_text(text: &str) -> String {
    Sha256::digest(text.as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
}
