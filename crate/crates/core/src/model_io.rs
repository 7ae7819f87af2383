//! Versioned JSON container for trained models.
//!
//! ```json
//! {"format": "wallreg-model", "version": 1, "regressor": "knn", "model": {...}}
//! ```
//!
//! Floats are written with shortest round-trip formatting, so loading a saved
//! model gives back the same bits.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::global::{GlobalModel, GlobalSpec};
use crate::pointwise::{PointwiseModel, PointwiseSpec};

pub const MODEL_FORMAT: &str = "wallreg-model";
pub const MODEL_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum TrainedModel {
    Pointwise {
        spec: PointwiseSpec,
        model: PointwiseModel,
    },
    Global {
        spec: GlobalSpec,
        model: GlobalModel,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub format: String,
    pub version: u32,
    pub regressor: String,
    pub model: TrainedModel,
}

impl ModelFile {
    pub fn new(regressor: impl Into<String>, model: TrainedModel) -> Self {
        ModelFile {
            format: MODEL_FORMAT.into(),
            version: MODEL_VERSION,
            regressor: regressor.into(),
            model,
        }
    }
}

pub fn save_model(file: &ModelFile, path: &Path) -> Result<()> {
    let text = serde_json::to_string(file)?;
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn load_model(path: &Path) -> Result<ModelFile> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let header: serde_json::Value = serde_json::from_str(&text).map_err(|e| Error::Schema {
        path: path.to_path_buf(),
        reason: e.to_string(),
    })?;
    let schema = |reason: String| Error::Schema {
        path: path.to_path_buf(),
        reason,
    };
    match header.get("format").and_then(|v| v.as_str()) {
        Some(MODEL_FORMAT) => {}
        other => return Err(schema(format!("format tag {other:?}, expected {MODEL_FORMAT:?}"))),
    }
    match header.get("version").and_then(|v| v.as_u64()) {
        Some(v) if v == u64::from(MODEL_VERSION) => {}
        other => return Err(schema(format!("unsupported model version {other:?}"))),
    }
    serde_json::from_value(header).map_err(|e| schema(e.to_string()))
}
