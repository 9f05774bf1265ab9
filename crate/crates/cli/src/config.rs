//! Effective settings: defaults, overridden by `--config`, overridden by flags.

use std::path::Path;

use anyhow::{Context, Result};
use qtrack_core::losses::LossWeights;
use qtrack_core::metrics::DEFAULT_MATCH_IOU;
use qtrack_core::tracker::{TrackerConfig, DEFAULT_IOU_FLOOR};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Association {
    Query,
    Iou,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub tracker: TrackerConfig,
    pub association: Association,
    pub iou_floor: f64,
    pub match_iou: f64,
    pub min_frames: usize,
    pub weights: LossWeights,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            tracker: TrackerConfig::default(),
            association: Association::Query,
            iou_floor: DEFAULT_IOU_FLOOR,
            match_iou: DEFAULT_MATCH_IOU,
            min_frames: 1,
            weights: LossWeights::default(),
        }
    }
}

pub fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("cannot parse {}", path.display()))
}

impl RunConfig {
    pub fn load(path: Option<&Path>) -> Result<Self> {
        match path {
            Some(p) => read_json(p),
            None => Ok(RunConfig::default()),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.tracker.validate()?;
        self.weights.validate()?;
        for (name, v) in [("iou_floor", self.iou_floor), ("match_iou", self.match_iou)] {
            anyhow::ensure!((0.0..=1.0).contains(&v), "{name} {v} outside [0, 1]");
        }
        Ok(())
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("config serializes")
    }
}
