//! Checkpoint container.
//!
//! Layout (integers little-endian):
//!
//! ```text
//! magic     8 bytes   "GINETCK\0"
//! version   u32       CHECKPOINT_VERSION
//! digest    64 bytes  ASCII hex SHA-256 of the model and training configs
//! meta_len  u64
//! meta      JSON      { model, train, norm, best_val_loss, epoch, params: [{name, shape}] }
//! values    f64 for every parameter entry, in `params` order
//! ```

use std::io::{Read, Write};
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::TrainConfig;
use crate::data::dataset::{read_f64, read_u32, read_u64};
use crate::data::NormStats;
use crate::digest::digest_of;
use crate::error::{Error, Result};
use crate::model::{GiNet, GiNetConfig};
use crate::tensor::ParamStore;

pub const CHECKPOINT_MAGIC: &[u8; 8] = b"GINETCK\0";
pub const CHECKPOINT_VERSION: u32 = 1;

/// SHA-256 of the model and training configuration pair.
pub fn config_digest(model: &GiNetConfig, train: &TrainConfig) -> Result<String> {
    digest_of(&(model, train))
}

#[derive(Debug, Clone)]
pub struct Checkpoint {
    pub model: GiNet,
    pub params: ParamStore,
    pub train: TrainConfig,
    pub norm: NormStats,
    pub best_val_loss: f64,
    /// Epoch (1-based) whose parameters are stored.
    pub epoch: usize,
}

#[derive(Serialize, Deserialize)]
struct ParamInfo {
    name: String,
    shape: Vec<usize>,
}

#[derive(Serialize, Deserialize)]
struct Meta {
    model: GiNetConfig,
    train: TrainConfig,
    norm: NormStats,
    best_val_loss: f64,
    epoch: usize,
    params: Vec<ParamInfo>,
}

impl Checkpoint {
    pub fn config_digest(&self) -> Result<String> {
        config_digest(&self.model.config, &self.train)
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let meta = Meta {
            model: self.model.config.clone(),
            train: self.train.clone(),
            norm: self.norm,
            best_val_loss: self.best_val_loss,
            epoch: self.epoch,
            params: self
                .params
                .iter()
                .map(|(name, t)| ParamInfo {
                    name: name.to_string(),
                    shape: t.shape().to_vec(),
                })
                .collect(),
        };
        let json = serde_json::to_vec(&meta).map_err(|e| Error::Format(e.to_string()))?;
        let mut out = Vec::with_capacity(84 + json.len() + 8 * self.params.numel());
        out.extend_from_slice(CHECKPOINT_MAGIC);
        out.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
        out.extend_from_slice(self.config_digest()?.as_bytes());
        out.extend_from_slice(&(json.len() as u64).to_le_bytes());
        out.extend_from_slice(&json);
        for (_, t) in self.params.iter() {
            for v in t.data() {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = bytes;
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic).map_err(|_| Error::Format("truncated header".into()))?;
        if &magic != CHECKPOINT_MAGIC {
            return Err(Error::Format("not a checkpoint file (bad magic)".into()));
        }
        let version = read_u32(&mut r)?;
        if version != CHECKPOINT_VERSION {
            return Err(Error::Format(format!("unsupported checkpoint version {version}")));
        }
        let mut digest = [0u8; 64];
        r.read_exact(&mut digest).map_err(|_| Error::Format("truncated header".into()))?;
        let meta_len = read_u64(&mut r)? as usize;
        if r.len() < meta_len {
            return Err(Error::Format("truncated metadata".into()));
        }
        let meta: Meta = serde_json::from_slice(&r[..meta_len]).map_err(|e| Error::Format(e.to_string()))?;
        r = &r[meta_len..];
        let expected = config_digest(&meta.model, &meta.train)?;
        if digest != expected.as_bytes() {
            return Err(Error::Format("config digest does not match the stored configuration".into()));
        }

        // rebuild the parameter layout, then overwrite every value
        let mut params = ParamStore::new();
        let model = GiNet::new(meta.model, &mut params, &mut ChaCha8Rng::seed_from_u64(0))?;
        if params.len() != meta.params.len() {
            return Err(Error::Format(format!(
                "checkpoint lists {} parameters, model expects {}",
                meta.params.len(),
                params.len()
            )));
        }
        for (id, info) in params.ids().collect::<Vec<_>>().into_iter().zip(&meta.params) {
            if params.name(id) != info.name || params.get(id).shape() != info.shape.as_slice() {
                return Err(Error::Format(format!("parameter {} does not match the model layout", info.name)));
            }
            for v in params.get_mut(id).data_mut() {
                *v = read_f64(&mut r)?;
            }
        }
        if !r.is_empty() {
            return Err(Error::Format(format!("{} trailing bytes", r.len())));
        }
        Ok(Checkpoint {
            model,
            params,
            train: meta.train,
            norm: meta.norm,
            best_val_loss: meta.best_val_loss,
            epoch: meta.epoch,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::File::create(path)?.write_all(&self.to_bytes()?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_bytes(&std::fs::read(path)?)
    }
}
