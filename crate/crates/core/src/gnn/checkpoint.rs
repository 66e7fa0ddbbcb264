//! Checkpoint document:
//! `{schema_version, model_config, train_config, norm_stats, weights}` with
//! weights keyed by tensor name as nested arrays.

use std::collections::BTreeMap;
use std::path::Path;

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::NormStats;

use super::model::{GnnModel, ModelConfig, Weights};
use super::train::TrainConfig;

pub const CHECKPOINT_SCHEMA_VERSION: &str = "1";

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
enum WeightArray {
    Matrix(Vec<Vec<f64>>),
    Vector(Vec<f64>),
}

#[derive(Debug, Serialize, Deserialize)]
struct CheckpointDocument {
    schema_version: String,
    model_config: ModelConfig,
    train_config: Option<TrainConfig>,
    norm_stats: NormStats,
    weights: BTreeMap<String, WeightArray>,
}

impl GnnModel {
    pub fn to_checkpoint_json(&self) -> String {
        let weights = self
            .weights
            .tensors()
            .into_iter()
            .map(|(name, t)| {
                let arr = match t.ndim() {
                    2 => WeightArray::Matrix(t.outer_iter().map(|r| r.iter().copied().collect()).collect()),
                    _ => WeightArray::Vector(t.iter().copied().collect()),
                };
                (name, arr)
            })
            .collect();
        let doc = CheckpointDocument {
            schema_version: CHECKPOINT_SCHEMA_VERSION.to_string(),
            model_config: self.config.clone(),
            train_config: self.train_config.clone(),
            norm_stats: self.norm_stats.clone(),
            weights,
        };
        serde_json::to_string(&doc).expect("checkpoint serializes")
    }

    pub fn from_checkpoint_json(text: &str) -> Result<Self> {
        let value: serde_json::Value = serde_json::from_str(text).map_err(|e| Error::Parse {
            location: format!("line {} column {}", e.line(), e.column()),
            message: e.to_string(),
        })?;
        let found = value.get("schema_version").and_then(|v| v.as_str()).unwrap_or("<missing>");
        if found != CHECKPOINT_SCHEMA_VERSION {
            return Err(Error::VersionMismatch {
                expected: CHECKPOINT_SCHEMA_VERSION.to_string(),
                found: found.to_string(),
            });
        }
        let doc: CheckpointDocument = serde_json::from_value(value).map_err(|e| Error::Parse {
            location: "checkpoint".into(),
            message: e.to_string(),
        })?;
        doc.model_config.validate()?;
        doc.norm_stats.check()?;
        let mut weights = Weights::zeros(&doc.model_config);
        let mut stored = doc.weights;
        for (name, mut t) in weights.tensors_mut() {
            let arr = stored
                .remove(&name)
                .ok_or_else(|| Error::Shape(format!("checkpoint is missing tensor {name}")))?;
            let shape = t.shape().to_vec();
            let loaded = match arr {
                WeightArray::Matrix(rows) if shape.len() == 2 => {
                    let flat: Vec<f64> = rows.iter().flatten().copied().collect();
                    if rows.len() != shape[0] || rows.iter().any(|r| r.len() != shape[1]) {
                        return Err(Error::Shape(format!("tensor {name} does not have shape {shape:?}")));
                    }
                    Array2::from_shape_vec((shape[0], shape[1]), flat)
                        .map_err(|e| Error::Shape(e.to_string()))?
                        .into_dyn()
                }
                WeightArray::Vector(v) if shape.len() == 1 && v.len() == shape[0] => Array1::from(v).into_dyn(),
                _ => return Err(Error::Shape(format!("tensor {name} does not have shape {shape:?}"))),
            };
            t.assign(&loaded);
        }
        if let Some(extra) = stored.keys().next() {
            return Err(Error::Shape(format!("unexpected tensor {extra} in checkpoint")));
        }
        if !weights.all_finite() {
            return Err(Error::NonFinite("checkpoint weights".into()));
        }
        Ok(GnnModel {
            config: doc.model_config,
            weights,
            norm_stats: doc.norm_stats,
            train_config: doc.train_config,
        })
    }

    pub fn save_checkpoint(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_checkpoint_json()).map_err(|e| Error::io(path, e))
    }

    pub fn load_checkpoint(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_checkpoint_json(&text)
    }
}
