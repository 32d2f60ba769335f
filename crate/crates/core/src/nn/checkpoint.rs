//! Model checkpoints as JSON.
//!
//! ```json
//! {
//!   "format": "pidispatch-model",
//!   "version": 1,
//!   "variant": "pi-cnn",
//!   "model": {
//!     "input_channels": 1, "input_length": 11, "seed": 42,
//!     "layers": [
//!       { "type": "conv1d", "in_channels": 1, "out_channels": 16, "kernel_size": 3,
//!         "weights": [...], "biases": [...] },
//!       { "type": "relu" },
//!       { "type": "maxpool", "window": 2, "stride": 2 },
//!       { "type": "flatten" },
//!       { "type": "dense", "inputs": 64, "outputs": 5, "weights": [...], "biases": [...] }
//!     ]
//!   }
//! }
//! ```
//!
//! Weight arrays are row-major (`[out][in][kernel]` for convolutions,
//! `[out][in]` for dense layers). Floats use shortest round-trip formatting, so
//! loading a saved checkpoint reproduces the parameters bit for bit.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::model::Model;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format: String,
    pub version: u32,
    pub variant: String,
    pub model: Model,
}

impl Checkpoint {
    pub const FORMAT: &'static str = "pidispatch-model";
    pub const VERSION: u32 = 1;

    pub fn new(variant: impl Into<String>, model: Model) -> Self {
        Checkpoint {
            format: Self::FORMAT.to_string(),
            version: Self::VERSION,
            variant: variant.into(),
            model,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let ck: Checkpoint = serde_json::from_str(text)?;
        if ck.format != Self::FORMAT || ck.version != Self::VERSION {
            return Err(Error::Config(format!("unsupported checkpoint format {} v{}", ck.format, ck.version)));
        }
        ck.model.validate()?;
        if !ck.model.is_finite() {
            return Err(Error::Numerical("checkpoint holds non-finite parameters".into()));
        }
        Ok(ck)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }
}
