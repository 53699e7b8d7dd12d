//! Versioned JSON save/load for [`Mlp`] models.

use super::{Activation, Mlp};
use crate::numerics::Mat;
use crate::{Error, Result};
use serde::{Deserialize, Serialize};

const FORMAT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct MlpDocument {
    format_version: u32,
    dims: Vec<usize>,
    activation: Activation,
    /// Row-major weight matrices, one per layer.
    weights: Vec<Vec<f64>>,
    biases: Vec<Vec<f64>>,
    seed: u64,
}

impl Mlp {
    pub fn to_json(&self) -> String {
        let doc = MlpDocument {
            format_version: FORMAT_VERSION,
            dims: self.dims.clone(),
            activation: self.activation,
            weights: self.weights.iter().map(|w| w.data().to_vec()).collect(),
            biases: self.biases.clone(),
            seed: self.seed,
        };
        serde_json::to_string(&doc).expect("Mlp serialization cannot fail")
    }

    pub fn from_json(text: &str) -> Result<Mlp> {
        let doc: MlpDocument =
            serde_json::from_str(text).map_err(|e| Error::ModelFormat(e.to_string()))?;
        if doc.format_version != FORMAT_VERSION {
            return Err(Error::ModelFormat(format!(
                "unsupported format version {} (expected {FORMAT_VERSION})",
                doc.format_version
            )));
        }
        if doc.dims.len() < 2 || doc.weights.len() != doc.dims.len() - 1 {
            return Err(Error::ModelFormat("layer count mismatch".into()));
        }
        let mut weights = Vec::new();
        for (l, data) in doc.weights.into_iter().enumerate() {
            weights.push(
                Mat::from_rows(doc.dims[l + 1], doc.dims[l], data)
                    .map_err(|e| Error::ModelFormat(e.to_string()))?,
            );
        }
        for (l, b) in doc.biases.iter().enumerate() {
            if b.len() != doc.dims[l + 1] {
                return Err(Error::ModelFormat(format!("bias length mismatch at layer {l}")));
            }
        }
        Ok(Mlp {
            dims: doc.dims,
            weights,
            biases: doc.biases,
            activation: doc.activation,
            seed: doc.seed,
        })
    }
}
