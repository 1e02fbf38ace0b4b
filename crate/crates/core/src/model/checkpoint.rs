use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::numeric::Tensor;
use crate::{Error, Result};

use super::{ModelConfig, ModelParams};

/// JSON side of a checkpoint. The parameters live in a sibling `.bin`
/// file: every tensor in manifest order, row-major, little-endian `f64`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub config: ModelConfig,
    pub param_names: Vec<String>,
    pub shapes: Vec<[usize; 2]>,
    pub seed: u64,
    pub step: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub manifest: Manifest,
    pub params: ModelParams,
}

fn blob_path(manifest: &Path) -> PathBuf {
    manifest.with_extension("bin")
}

/// Writes `<path>` (manifest) and `<path>` with a `.bin` extension (blob).
pub fn save_checkpoint(path: &Path, params: &ModelParams, seed: u64, step: u64) -> Result<()> {
    let manifest = Manifest {
        config: params.config.clone(),
        param_names: params.names.clone(),
        shapes: params.tensors.iter().map(Tensor::shape).collect(),
        seed,
        step,
    };
    let json = serde_json::to_string_pretty(&manifest).map_err(|e| Error::Data(e.to_string()))?;
    fs::write(path, json + "\n").map_err(|e| Error::io(format!("writing {}", path.display()), e))?;
    let mut blob = Vec::with_capacity(params.count() * 8);
    for t in &params.tensors {
        for x in t.data() {
            blob.extend_from_slice(&x.to_le_bytes());
        }
    }
    let bp = blob_path(path);
    fs::write(&bp, blob).map_err(|e| Error::io(format!("writing {}", bp.display()), e))
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
    let manifest: Manifest =
        serde_json::from_str(&text).map_err(|e| Error::Data(format!("{}: {e}", path.display())))?;
    let bp = blob_path(path);
    let blob = fs::read(&bp).map_err(|e| Error::io(format!("reading {}", bp.display()), e))?;
    if manifest.param_names.len() != manifest.shapes.len() {
        return Err(Error::Data("manifest names and shapes differ in length".into()));
    }
    let total: usize = manifest.shapes.iter().map(|[r, c]| r * c).sum();
    if blob.len() != total * 8 {
        return Err(Error::Data(format!("blob holds {} bytes, manifest needs {}", blob.len(), total * 8)));
    }
    let mut values = blob.chunks_exact(8).map(|b| f64::from_le_bytes(b.try_into().expect("8-byte chunk")));
    let tensors = manifest
        .shapes
        .iter()
        .map(|&[r, c]| Tensor::from_vec(r, c, values.by_ref().take(r * c).collect()))
        .collect::<std::result::Result<Vec<_>, _>>()
        .map_err(|e| Error::Data(e.to_string()))?;
    let params = ModelParams { config: manifest.config.clone(), names: manifest.param_names.clone(), tensors };
    params.check().map_err(|e| Error::Data(e.to_string()))?;
    Ok(Checkpoint { manifest, params })
}
