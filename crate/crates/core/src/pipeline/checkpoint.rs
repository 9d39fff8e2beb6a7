//! JSON checkpoints: named parameter arrays, optimizer state, and the exact
//! configuration text with its hash.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::diff::AdamState;
use crate::error::{Error, Result};
use crate::model::{Dims, Group, Params};

use super::config::{hash_text, TrainConfig};

pub const CHECKPOINT_FORMAT: &str = "wsod-checkpoint/1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format: String,
    pub config_hash: String,
    /// Canonical `key = value` text of the training config.
    pub config: String,
    /// Epoch (1-based) the parameters come from.
    pub epoch: usize,
    pub val_map: Option<f64>,
    pub dims: Dims,
    pub params: BTreeMap<String, Vec<f64>>,
    pub adam: AdamState,
}

impl Checkpoint {
    pub fn new(cfg: &TrainConfig, epoch: usize, val_map: Option<f64>, params: &Params<f64>, adam: AdamState) -> Self {
        let config = cfg.to_kv_text();
        Self {
            format: CHECKPOINT_FORMAT.to_string(),
            config_hash: hash_text(&config),
            config,
            epoch,
            val_map,
            dims: params.dims,
            params: Group::ALL.iter().map(|&g| (g.name().to_string(), params.group(g).to_vec())).collect(),
            adam,
        }
    }

    pub fn params(&self) -> Result<Params<f64>> {
        let mut p = Params::zeros(self.dims);
        for g in Group::ALL {
            let src = self
                .params
                .get(g.name())
                .ok_or_else(|| Error::Checkpoint(format!("missing parameter group `{}`", g.name())))?;
            let dst = p.group_mut(g);
            if src.len() != dst.len() {
                return Err(Error::Checkpoint(format!("group `{}` has {} values, expected {}", g.name(), src.len(), dst.len())));
            }
            dst.copy_from_slice(src);
        }
        Ok(p)
    }

    pub fn config(&self) -> Result<TrainConfig> {
        TrainConfig::from_kv_text(&self.config)
    }

    fn check(&self) -> Result<()> {
        if self.format != CHECKPOINT_FORMAT {
            return Err(Error::Checkpoint(format!("unknown format `{}`", self.format)));
        }
        if hash_text(&self.config) != self.config_hash {
            return Err(Error::Checkpoint("config hash does not match the stored config".into()));
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("checkpoint serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str, origin: &str) -> Result<Self> {
        let c: Self = serde_json::from_str(text).map_err(|e| Error::Json { path: origin.to_string(), source: e })?;
        c.check()?;
        c.params()?;
        Ok(c)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_json()).map_err(|e| Error::Io { path: path.display().to_string(), source: e })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::Io { path: path.display().to_string(), source: e })?;
        Self::from_json(&text, &path.display().to_string())
    }
}
