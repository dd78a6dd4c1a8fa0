//! JSON checkpoint container.
//!
//! Layout (version 1):
//!
//! ```text
//! {
//!   "format": "molrl-checkpoint",
//!   "version": 1,
//!   "config_hash": "<sha256 hex of the resolved config>",
//!   "params": [ { "name": "...", "shape": [rows, cols], "values": [...] }, ... ],
//!   "optimizer": null | { Adam state },
//!   "meta": { "key": "value", ... }
//! }
//! ```
//!
//! Floats are written with shortest round-trip formatting, so a save/load
//! cycle is bit-exact.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::optim::Adam;
use super::params::ParamStore;
use super::tensor::Tensor;
use super::NnError;

pub const FORMAT: &str = "molrl-checkpoint";
pub const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NamedTensor {
    pub name: String,
    pub shape: Vec<usize>,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format: String,
    pub version: u32,
    pub config_hash: String,
    pub params: Vec<NamedTensor>,
    pub optimizer: Option<Adam>,
    pub meta: BTreeMap<String, String>,
}

fn ck(msg: impl ToString) -> NnError {
    NnError::Checkpoint(msg.to_string())
}

impl Checkpoint {
    pub fn from_store(store: &ParamStore, config_hash: &str, optimizer: Option<&Adam>) -> Self {
        let params = store
            .iter()
            .map(|(name, t)| NamedTensor {
                name: name.to_string(),
                shape: t.shape(),
                values: t.data.clone(),
            })
            .collect();
        Self {
            format: FORMAT.to_string(),
            version: VERSION,
            config_hash: config_hash.to_string(),
            params,
            optimizer: optimizer.cloned(),
            meta: BTreeMap::new(),
        }
    }

    /// Copies values into a store with the same names and shapes.
    pub fn restore_into(&self, store: &mut ParamStore) -> Result<(), NnError> {
        if self.params.len() != store.len() {
            return Err(ck(format!(
                "checkpoint has {} tensors, model has {}",
                self.params.len(),
                store.len()
            )));
        }
        for nt in &self.params {
            let id = store.find(&nt.name).ok_or_else(|| ck(format!("unknown parameter {}", nt.name)))?;
            let t = store.get_mut(id);
            if nt.shape != t.shape() || nt.values.len() != t.len() {
                return Err(ck(format!("shape mismatch for {}: {:?} vs {:?}", nt.name, nt.shape, t.shape())));
            }
            *t = Tensor::from_vec(t.rows, t.cols, nt.values.clone());
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("checkpoint serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, NnError> {
        let c: Checkpoint = serde_json::from_str(text).map_err(ck)?;
        if c.format != FORMAT {
            return Err(ck(format!("not a checkpoint (format {:?})", c.format)));
        }
        if c.version != VERSION {
            return Err(ck(format!("unsupported version {}", c.version)));
        }
        for nt in &c.params {
            if nt.shape.len() != 2 || nt.shape[0] * nt.shape[1] != nt.values.len() {
                return Err(ck(format!("tensor {} has inconsistent shape", nt.name)));
            }
        }
        Ok(c)
    }

    pub fn save(&self, path: &Path) -> Result<(), NnError> {
        std::fs::write(path, self.to_json()).map_err(|e| ck(format!("{}: {e}", path.display())))
    }

    pub fn load(path: &Path) -> Result<Self, NnError> {
        let text = std::fs::read_to_string(path).map_err(|e| ck(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }
}
