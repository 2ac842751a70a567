//! Versioned JSON checkpoints.
//!
//! Parameters are stored as shortest-round-trip decimal strings, so a
//! save/load cycle reproduces the exact f64 bits and re-saving a loaded
//! checkpoint is byte-identical.

use super::{CfgnnModel, ModelDims, ModelError, TrainConfig, Variant};
use crate::filters::BasisKind;
use serde::{Deserialize, Serialize};
use std::io::{Read, Write};

pub const CHECKPOINT_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format_version: u32,
    pub variant: Variant,
    pub dims: ModelDims,
    pub basis_kind: BasisKind,
    pub seed: u64,
    pub class_names: Vec<String>,
    pub train_config: TrainConfig,
    pub theta: Vec<f64>,
}

impl Checkpoint {
    pub fn from_model(model: &CfgnnModel, class_names: &[String], config: &TrainConfig, seed: u64) -> Self {
        Checkpoint {
            format_version: CHECKPOINT_FORMAT_VERSION,
            variant: model.variant(),
            dims: *model.dims(),
            basis_kind: model.basis_kind(),
            seed,
            class_names: class_names.to_vec(),
            train_config: config.clone(),
            theta: model.theta().to_vec(),
        }
    }

    pub fn into_model(self) -> Result<(CfgnnModel, Vec<String>, TrainConfig, u64), ModelError> {
        if self.format_version != CHECKPOINT_FORMAT_VERSION {
            return Err(ModelError::Incompatible(format!(
                "checkpoint format {} (expected {CHECKPOINT_FORMAT_VERSION})",
                self.format_version
            )));
        }
        if self.class_names.len() != self.dims.num_classes {
            return Err(ModelError::Incompatible("class name count disagrees with dims".into()));
        }
        let model = CfgnnModel::from_parts(self.variant, self.dims, self.basis_kind, self.theta)?;
        Ok((model, self.class_names, self.train_config, self.seed))
    }
}

pub fn save_checkpoint<W: Write>(checkpoint: &Checkpoint, mut writer: W) -> Result<(), ModelError> {
    let text = serde_json::to_string_pretty(checkpoint)?;
    writer.write_all(text.as_bytes())?;
    writer.write_all(b"\n")?;
    Ok(())
}

pub fn load_checkpoint<R: Read>(mut reader: R) -> Result<Checkpoint, ModelError> {
    let mut text = String::new();
    reader.read_to_string(&mut text)?;
    Ok(serde_json::from_str(&text)?)
}
