use std::fs;
use std::path::Path;

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use super::{Dense, DenseNet, NnError};

const FORMAT: &str = "advfair-densenet";
const VERSION: u32 = 1;

/// JSON container for one network plus the settings that produced it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkCheckpoint {
    pub format: String,
    pub version: u32,
    pub role: String,
    pub dims: Vec<usize>,
    /// `weights[l][i][o]`: layer `l`, input unit `i`, output unit `o`.
    pub weights: Vec<Vec<Vec<f64>>>,
    pub biases: Vec<Vec<f64>>,
    pub seed: u64,
    pub config: serde_json::Value,
}

impl NetworkCheckpoint {
    pub fn from_net(net: &DenseNet, role: &str, seed: u64, config: serde_json::Value) -> Self {
        NetworkCheckpoint {
            format: FORMAT.to_string(),
            version: VERSION,
            role: role.to_string(),
            dims: net.dims().to_vec(),
            weights: net
                .layers()
                .iter()
                .map(|l| l.weights.outer_iter().map(|r| r.to_vec()).collect())
                .collect(),
            biases: net.layers().iter().map(|l| l.bias.to_vec()).collect(),
            seed,
            config,
        }
    }

    /// Rebuilds the network, rejecting any shape inconsistency.
    pub fn to_net(&self) -> Result<DenseNet, NnError> {
        if self.format != FORMAT || self.version != VERSION {
            return Err(NnError::Format(format!("unsupported checkpoint {} v{}", self.format, self.version)));
        }
        if self.dims.len() != self.weights.len() + 1 || self.weights.len() != self.biases.len() {
            return Err(NnError::Format("layer count does not match dims".to_string()));
        }
        let mut layers = Vec::with_capacity(self.weights.len());
        for (l, (w, b)) in self.weights.iter().zip(&self.biases).enumerate() {
            let (fan_in, fan_out) = (self.dims[l], self.dims[l + 1]);
            if w.len() != fan_in || w.iter().any(|row| row.len() != fan_out) || b.len() != fan_out {
                return Err(NnError::Format(format!("layer {l} is not {fan_in}x{fan_out}")));
            }
            let flat: Vec<f64> = w.iter().flatten().copied().collect();
            layers.push(Dense {
                weights: Array2::from_shape_vec((fan_in, fan_out), flat).expect("checked shape"),
                bias: Array1::from(b.clone()),
            });
        }
        let net = DenseNet::from_layers(layers)?;
        if net.dims() != self.dims.as_slice() {
            return Err(NnError::Format("dims do not chain".to_string()));
        }
        Ok(net)
    }

    pub fn save(&self, path: &Path) -> Result<(), NnError> {
        let text = serde_json::to_string_pretty(self).map_err(|e| NnError::Format(e.to_string()))?;
        fs::write(path, text)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, NnError> {
        let text = fs::read_to_string(path)?;
        serde_json::from_str(&text).map_err(|e| NnError::Format(e.to_string()))
    }
}
