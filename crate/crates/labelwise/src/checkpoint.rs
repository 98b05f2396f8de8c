//! Trained models as a single JSON document.

use std::path::Path;

use labelwise_core::ordinal::{Head, Model, TrainConfig};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::files::{read_json, write_json_pretty};
use crate::SCHEMA_VERSION;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub schema_version: u32,
    pub config: TrainConfig,
    /// Mean training loss per epoch.
    pub history: Vec<f64>,
    pub model: Model,
}

impl Checkpoint {
    pub fn new(model: Model, config: TrainConfig, history: Vec<f64>) -> Self {
        Checkpoint {
            schema_version: SCHEMA_VERSION,
            config,
            history,
            model,
        }
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut finite = true;
        self.model.visit_params(|v, _| finite &= v.is_finite());
        if !finite {
            return Err(Error::Invalid("model has non-finite parameters".into()));
        }
        write_json_pretty(path, self)
    }

    pub fn load(path: &Path) -> Result<Checkpoint> {
        let ck: Checkpoint = read_json(path)?;
        if ck.schema_version > SCHEMA_VERSION {
            return Err(Error::SchemaVersion {
                found: ck.schema_version,
                supported: SCHEMA_VERSION,
            });
        }
        for head in ck.model.heads() {
            check_head(head).map_err(|why| Error::record(path.display().to_string(), "model", why))?;
        }
        Ok(ck)
    }
}

fn check_head(h: &Head) -> std::result::Result<(), String> {
    let (outputs, thresholds) = (h.kind.outputs(), h.kind.thresholds());
    let ok = h.hidden_weights.len() == h.input_dim * h.hidden_dim
        && h.hidden_bias.len() == h.hidden_dim
        && h.output_weights.len() == outputs * h.hidden_dim
        && h.output_bias.len() == outputs
        && h.thresholds.len() == thresholds;
    if ok {
        Ok(())
    } else {
        Err(format!("{} head parameter shapes do not match its dimensions", h.kind.name()))
    }
}
