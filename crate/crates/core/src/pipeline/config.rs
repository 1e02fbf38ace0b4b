use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::model::ModelConfig;
use crate::noise::{DatasetConfig, NoiseModel, Sample};
use crate::{Error, Result};

/// Which per-qubit value the model is trained and scored against.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LabelSource {
    Zne,
    #[default]
    Exact,
}

impl LabelSource {
    pub fn name(self) -> &'static str {
        match self {
            LabelSource::Zne => "zne",
            LabelSource::Exact => "exact",
        }
    }

    pub fn value(self, sample: &Sample, qubit: usize) -> Option<f64> {
        match self {
            LabelSource::Zne => sample.label_zne.get(qubit),
            LabelSource::Exact => sample.label_exact.get(qubit),
        }
    }
}

impl fmt::Display for LabelSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for LabelSource {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "zne" => Ok(LabelSource::Zne),
            "exact" => Ok(LabelSource::Exact),
            _ => Err(Error::Config(format!("unknown label source `{s}` (expected zne or exact)"))),
        }
    }
}

/// `[data]`: where the dataset lives plus the generator settings used by
/// `gen-data`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default)]
pub struct DataSection {
    pub path: Option<PathBuf>,
    #[serde(flatten)]
    pub generator: DatasetConfig,
}

/// `[train]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub n_train: usize,
    pub n_val: usize,
    pub label: LabelSource,
    pub lr_grid: Vec<f64>,
    pub max_epochs: usize,
    /// Validation checks without improvement before a run stops.
    pub patience: usize,
    /// Seeds parameter initialization and the per-epoch shuffle.
    pub seed: u64,
    /// Seeds the train/validation partition; kept apart from `seed` so
    /// that runs with different seeds share one split.
    pub split_seed: u64,
    /// Epochs between validation checks.
    pub eval_every: usize,
    /// Ridge penalty of the descriptor baseline.
    pub ridge_lambda: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            n_train: 100,
            n_val: 400,
            label: LabelSource::Exact,
            lr_grid: vec![1e-2, 3e-3, 1e-3],
            max_epochs: 500,
            patience: 20,
            seed: 0,
            split_seed: 0,
            eval_every: 1,
            ridge_lambda: 1e-3,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.to_string()));
        if self.n_train == 0 || self.n_val == 0 {
            return bad("n_train and n_val must be at least 1");
        }
        if self.lr_grid.is_empty() || self.lr_grid.iter().any(|&lr| !(lr.is_finite() && lr > 0.0)) {
            return bad("lr_grid must hold at least one positive learning rate");
        }
        if self.max_epochs == 0 || self.patience == 0 || self.eval_every == 0 {
            return bad("max_epochs, patience and eval_every must be at least 1");
        }
        if !(self.ridge_lambda.is_finite() && self.ridge_lambda > 0.0) {
            return bad("ridge_lambda must be positive");
        }
        Ok(())
    }
}

/// The whole TOML file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub data: DataSection,
    pub noise: NoiseModel,
    pub model: ModelConfig,
    pub train: TrainConfig,
}

impl PipelineConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: PipelineConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read config {}: {e}", path.display())))?;
        Self::from_toml_str(&text).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    /// Generator settings with the `[noise]` section applied.
    pub fn dataset_config(&self) -> DatasetConfig {
        DatasetConfig { noise: self.noise, ..self.data.generator.clone() }
    }

    pub fn validate(&self) -> Result<()> {
        self.dataset_config().validate()?;
        self.model.validate()?;
        self.train.validate()
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_gives_defaults() {
        let cfg = PipelineConfig::from_toml_str("").unwrap();
        assert_eq!(cfg, PipelineConfig::default());
        assert_eq!(cfg.train.lr_grid, vec![1e-2, 3e-3, 1e-3]);
        assert_eq!((cfg.train.patience, cfg.train.max_epochs), (20, 500));
        assert_eq!((cfg.train.n_train, cfg.train.n_val), (100, 400));
    }

    #[test]
    fn sections_parse() {
        let text = r#"
[data]
path = "data.jsonl"
n_qubits = 4
circuits_total = 20
trotter_steps = { min = 2, max = 3 }

[noise]
p1 = 0.0
p2 = 0.02

[model]
d_model = 8
n_heads = 2
variant = "GCNBackbone"

[train]
label = "zne"
lr_grid = [0.01]
patience = 3
"#;
        let cfg = PipelineConfig::from_toml_str(text).unwrap();
        assert_eq!(cfg.data.path.as_deref(), Some(Path::new("data.jsonl")));
        assert_eq!(cfg.data.generator.n_qubits, 4);
        assert_eq!(cfg.dataset_config().noise.p2, 0.02);
        assert_eq!(cfg.model.variant, crate::model::Variant::GcnBackbone);
        assert_eq!(cfg.train.label, LabelSource::Zne);
    }

    #[test]
    fn round_trips_through_toml() {
        let mut cfg = PipelineConfig::default();
        cfg.train.seed = 9;
        cfg.data.path = Some("x.jsonl".into());
        assert_eq!(PipelineConfig::from_toml_str(&cfg.to_toml_string()).unwrap(), cfg);
    }

    #[test]
    fn bad_values_are_config_errors() {
        for text in [
            "[train]\npatience = 0",
            "[train]\nlr_grid = []",
            "[train]\nridge_lambda = 0.0",
            "[model]\nd_model = 10\nn_heads = 4",
            "[noise]\np1 = 2.0\np2 = 0.0",
            "[train]\nbogus = 1",
            "[train]\nlabel = \"shots\"",
        ] {
            let err = PipelineConfig::from_toml_str(text).unwrap_err();
            assert_eq!(err.exit_code(), 2, "{text}: {err}");
        }
    }
}
