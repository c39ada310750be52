//! Self-describing JSON checkpoints.

use std::fs;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::inference::Thresholds;
use crate::model::Model;
use crate::params::Parameters;
use crate::training::TrainConfig;

pub const FORMAT_VERSION: u32 = 1;

/// Position of a ChaCha8 stream, enough to resume it exactly.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RngState {
    pub seed: [u8; 32],
    pub stream: u64,
    /// Decimal string; JSON numbers cannot hold a u128 portably.
    pub word_pos: String,
}

impl RngState {
    pub fn capture(rng: &ChaCha8Rng) -> Self {
        RngState {
            seed: rng.get_seed(),
            stream: rng.get_stream(),
            word_pos: rng.get_word_pos().to_string(),
        }
    }

    pub fn restore(&self) -> Result<ChaCha8Rng> {
        let pos: u128 = self
            .word_pos
            .parse()
            .map_err(|_| Error::InvalidArgument(format!("bad rng word_pos `{}`", self.word_pos)))?;
        let mut rng = ChaCha8Rng::from_seed(self.seed);
        rng.set_stream(self.stream);
        rng.set_word_pos(pos);
        Ok(rng)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format_version: u32,
    pub model: Model,
    pub train_config: TrainConfig,
    pub thresholds: Thresholds,
    pub epoch: usize,
    pub rng: RngState,
    /// Redundant listing of every tensor name and shape, checked on load.
    pub tensor_index: Vec<(String, (usize, usize))>,
}

impl Checkpoint {
    pub fn new(
        model: Model,
        train_config: TrainConfig,
        thresholds: Thresholds,
        epoch: usize,
        rng: RngState,
    ) -> Self {
        let tensor_index = tensor_index(&model);
        Checkpoint {
            format_version: FORMAT_VERSION,
            model,
            train_config,
            thresholds,
            epoch,
            rng,
            tensor_index,
        }
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let json = serde_json::to_string(self)?;
        fs::write(path, json).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let value: serde_json::Value = serde_json::from_str(&text).map_err(|e| Error::Parse {
            path: path.to_owned(),
            message: e.to_string(),
        })?;
        let found = value
            .get("format_version")
            .and_then(serde_json::Value::as_u64)
            .unwrap_or(0) as u32;
        if found != FORMAT_VERSION {
            return Err(Error::CheckpointVersion {
                found,
                expected: FORMAT_VERSION,
            });
        }
        let ckpt: Checkpoint = serde_json::from_value(value).map_err(|e| Error::Parse {
            path: path.to_owned(),
            message: e.to_string(),
        })?;
        if ckpt.tensor_index != tensor_index(&ckpt.model) {
            return Err(Error::Parse {
                path: path.to_owned(),
                message: "tensor index does not match stored parameters".into(),
            });
        }
        Ok(ckpt)
    }
}

fn tensor_index(model: &Model) -> Vec<(String, (usize, usize))> {
    let mut index = Vec::new();
    model.visit(&mut |name, m| index.push((name.to_owned(), m.shape())));
    index
}
