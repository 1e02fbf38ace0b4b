//! Dual-path masked graph-attention regressor with an MLP head, plus the
//! three ablation variants.
//!
//! Nodes are embedded once; a local path attends only within the measured
//! qubit's lightcone and a global path attends over the whole graph. Each
//! path stacks post-norm transformer blocks with its own weights. The local
//! path is mean-pooled over the lightcone, the global path over all nodes,
//! and both are concatenated with the descriptor and fed to an MLP whose
//! output is squashed by `tanh`.

mod checkpoint;
mod forward;
mod input;

use std::fmt;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::features::descriptor_len;
use crate::graph::GraphError;
use crate::features::FeatureError;
use crate::numeric::{NumericError, Tensor};

pub use checkpoint::{load_checkpoint, save_checkpoint, Checkpoint, Manifest};
pub use forward::{
    forward, forward_on, loss_and_grads, loss_and_grads_on, model_gradient_check, predict_batch, LocalEvaluation,
};
pub use input::{attention_masks, node_features, prepare_circuit, AttentionMasks, PreparedCircuit, NODE_FEATURES};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("invalid model config: {0}")]
    Config(String),
    #[error("graph has {n} nodes, above the limit of {max}")]
    TooManyNodes { n: usize, max: usize },
    #[error("input mismatch: {0}")]
    Mismatch(String),
    #[error(transparent)]
    Numeric(#[from] NumericError),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Feature(#[from] FeatureError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize, Default)]
pub enum Variant {
    #[default]
    Full,
    #[serde(rename = "GCNBackbone")]
    GcnBackbone,
    NoGlobal,
    NoLightcone,
}

impl Variant {
    pub const ALL: [Variant; 4] = [Variant::Full, Variant::GcnBackbone, Variant::NoGlobal, Variant::NoLightcone];

    pub fn name(self) -> &'static str {
        match self {
            Variant::Full => "Full",
            Variant::GcnBackbone => "GCNBackbone",
            Variant::NoGlobal => "NoGlobal",
            Variant::NoLightcone => "NoLightcone",
        }
    }

    pub fn has_global(self) -> bool {
        self != Variant::NoGlobal
    }

    pub fn n_paths(self) -> usize {
        if self.has_global() {
            2
        } else {
            1
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Variant {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let norm: String = s.chars().filter(|c| c.is_ascii_alphanumeric()).collect::<String>().to_ascii_lowercase();
        match norm.as_str() {
            "full" => Ok(Variant::Full),
            "gcnbackbone" | "gcn" => Ok(Variant::GcnBackbone),
            "noglobal" => Ok(Variant::NoGlobal),
            "nolightcone" => Ok(Variant::NoLightcone),
            _ => Err(format!("unknown variant `{s}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelConfig {
    pub d_model: usize,
    pub n_heads: usize,
    pub n_layers: usize,
    pub d_ff: usize,
    pub mlp_hidden: Vec<usize>,
    pub variant: Variant,
    pub max_nodes: usize,
    /// Descriptor length, `89 + number of measured qubits`.
    pub descriptor_dim: usize,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            d_model: 64,
            n_heads: 4,
            n_layers: 3,
            d_ff: 128,
            mlp_hidden: vec![128, 64],
            variant: Variant::Full,
            max_nodes: 2048,
            descriptor_dim: descriptor_len(6),
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<(), ModelError> {
        let bad = |m: String| Err(ModelError::Config(m));
        if self.d_model == 0 || self.n_heads == 0 || self.d_model % self.n_heads != 0 {
            return bad(format!("d_model {} must be a positive multiple of n_heads {}", self.d_model, self.n_heads));
        }
        if self.n_layers == 0 || self.d_ff == 0 || self.max_nodes == 0 {
            return bad("n_layers, d_ff and max_nodes must be positive".into());
        }
        if self.mlp_hidden.contains(&0) {
            return bad("MLP hidden widths must be positive".into());
        }
        if self.descriptor_dim <= descriptor_len(0) {
            return bad(format!("descriptor_dim {} leaves no qubit one-hot", self.descriptor_dim));
        }
        Ok(())
    }

    pub fn head_input_dim(&self) -> usize {
        self.variant.n_paths() * self.d_model + self.descriptor_dim
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) struct AttnBlock {
    pub wq: usize,
    pub bq: usize,
    pub wk: usize,
    pub bk: usize,
    pub wv: usize,
    pub bv: usize,
    pub wo: usize,
    pub bo: usize,
    pub ln1_g: usize,
    pub ln1_b: usize,
    pub w1: usize,
    pub b1: usize,
    pub w2: usize,
    pub b2: usize,
    pub ln2_g: usize,
    pub ln2_b: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Layer {
    Attention(AttnBlock),
    Gcn { w: usize, ln_g: usize, ln_b: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Init {
    Xavier,
    Zeros,
    Ones,
}

/// Parameter order, names, shapes and roles for a configuration.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Layout {
    pub names: Vec<String>,
    pub shapes: Vec<[usize; 2]>,
    init: Vec<Init>,
    pub embed_w: usize,
    pub embed_b: usize,
    pub local: Vec<Layer>,
    pub global: Option<Vec<Layer>>,
    pub mlp: Vec<(usize, usize)>,
}

impl Layout {
    pub fn new(cfg: &ModelConfig) -> Self {
        let mut l = Layout {
            names: Vec::new(),
            shapes: Vec::new(),
            init: Vec::new(),
            embed_w: 0,
            embed_b: 0,
            local: Vec::new(),
            global: None,
            mlp: Vec::new(),
        };
        let d = cfg.d_model;
        l.embed_w = l.add("embed.w", [NODE_FEATURES, d], Init::Xavier);
        l.embed_b = l.add("embed.b", [1, d], Init::Zeros);
        l.local = l.path("local", cfg);
        if cfg.variant.has_global() {
            l.global = Some(l.path("global", cfg));
        }
        let mut width = cfg.head_input_dim();
        for (i, &h) in cfg.mlp_hidden.iter().enumerate() {
            let w = l.add(&format!("mlp.{i}.w"), [width, h], Init::Xavier);
            let b = l.add(&format!("mlp.{i}.b"), [1, h], Init::Zeros);
            l.mlp.push((w, b));
            width = h;
        }
        let w = l.add("head.w", [width, 1], Init::Xavier);
        let b = l.add("head.b", [1, 1], Init::Zeros);
        l.mlp.push((w, b));
        l
    }

    fn add(&mut self, name: &str, shape: [usize; 2], init: Init) -> usize {
        self.names.push(name.to_string());
        self.shapes.push(shape);
        self.init.push(init);
        self.names.len() - 1
    }

    fn path(&mut self, prefix: &str, cfg: &ModelConfig) -> Vec<Layer> {
        let (d, f) = (cfg.d_model, cfg.d_ff);
        (0..cfg.n_layers)
            .map(|i| {
                let p = format!("{prefix}.{i}");
                if cfg.variant == Variant::GcnBackbone {
                    return Layer::Gcn {
                        w: self.add(&format!("{p}.gcn.w"), [d, d], Init::Xavier),
                        ln_g: self.add(&format!("{p}.ln.g"), [1, d], Init::Ones),
                        ln_b: self.add(&format!("{p}.ln.b"), [1, d], Init::Zeros),
                    };
                }
                let mut x = |n: &str, s: [usize; 2], init| self.add(&format!("{p}.{n}"), s, init);
                Layer::Attention(AttnBlock {
                    wq: x("attn.wq", [d, d], Init::Xavier),
                    bq: x("attn.bq", [1, d], Init::Zeros),
                    wk: x("attn.wk", [d, d], Init::Xavier),
                    bk: x("attn.bk", [1, d], Init::Zeros),
                    wv: x("attn.wv", [d, d], Init::Xavier),
                    bv: x("attn.bv", [1, d], Init::Zeros),
                    wo: x("attn.wo", [d, d], Init::Xavier),
                    bo: x("attn.bo", [1, d], Init::Zeros),
                    ln1_g: x("ln1.g", [1, d], Init::Ones),
                    ln1_b: x("ln1.b", [1, d], Init::Zeros),
                    w1: x("ff.w1", [d, f], Init::Xavier),
                    b1: x("ff.b1", [1, f], Init::Zeros),
                    w2: x("ff.w2", [f, d], Init::Xavier),
                    b2: x("ff.b2", [1, d], Init::Zeros),
                    ln2_g: x("ln2.g", [1, d], Init::Ones),
                    ln2_b: x("ln2.b", [1, d], Init::Zeros),
                })
            })
            .collect()
    }
}

/// Closed-form parameter count.
pub fn param_count(cfg: &ModelConfig) -> usize {
    let (d, f) = (cfg.d_model, cfg.d_ff);
    let embed = NODE_FEATURES * d + d;
    let layer = match cfg.variant {
        Variant::GcnBackbone => d * d + 2 * d,
        _ => 4 * (d * d + d) + 2 * (2 * d) + (d * f + f) + (f * d + d),
    };
    let encoder = cfg.variant.n_paths() * cfg.n_layers * layer;
    let mut head = 0;
    let mut width = cfg.head_input_dim();
    for &h in &cfg.mlp_hidden {
        head += width * h + h;
        width = h;
    }
    head += width + 1;
    embed + encoder + head
}

/// Named parameter tensors of one model instance.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub config: ModelConfig,
    pub names: Vec<String>,
    pub tensors: Vec<Tensor>,
}

impl ModelParams {
    /// Xavier-uniform weights, zero biases, unit layer-norm gains.
    pub fn init(config: &ModelConfig, seed: u64) -> Result<Self, ModelError> {
        config.validate()?;
        let layout = Layout::new(config);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let tensors = layout
            .shapes
            .iter()
            .zip(&layout.init)
            .map(|(&[r, c], init)| match init {
                Init::Xavier => Tensor::xavier_uniform(r, c, &mut rng),
                Init::Zeros => Tensor::zeros(r, c),
                Init::Ones => Tensor::filled(r, c, 1.0),
            })
            .collect();
        Ok(ModelParams { config: config.clone(), names: layout.names, tensors })
    }

    pub fn count(&self) -> usize {
        self.tensors.iter().map(Tensor::len).sum()
    }

    pub fn get(&self, name: &str) -> Option<&Tensor> {
        self.names.iter().position(|n| n == name).map(|i| &self.tensors[i])
    }

    pub(crate) fn layout(&self) -> Layout {
        Layout::new(&self.config)
    }

    /// Checks names and shapes against the layout of `config`.
    pub fn check(&self) -> Result<(), ModelError> {
        let layout = self.layout();
        if layout.names != self.names {
            return Err(ModelError::Mismatch("parameter names differ from the config layout".into()));
        }
        for ((n, s), t) in layout.names.iter().zip(&layout.shapes).zip(&self.tensors) {
            if t.shape() != *s {
                return Err(ModelError::Mismatch(format!("{n}: shape {:?}, expected {s:?}", t.shape())));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn closed_form_matches_instance() {
        for variant in Variant::ALL {
            for hidden in [vec![], vec![128, 64], vec![7]] {
                let cfg = ModelConfig { variant, mlp_hidden: hidden, ..ModelConfig::default() };
                let p = ModelParams::init(&cfg, 0).unwrap();
                assert_eq!(p.count(), param_count(&cfg), "{variant} {:?}", cfg.mlp_hidden);
                p.check().unwrap();
            }
        }
    }

    #[test]
    fn default_count() {
        assert_eq!(param_count(&ModelConfig::default()), 238_529);
    }

    #[test]
    fn linear_head_degenerate() {
        let cfg = ModelConfig { mlp_hidden: vec![], ..ModelConfig::default() };
        let with_mlp = ModelConfig::default();
        let head_only = (2 * cfg.d_model + cfg.descriptor_dim) + 1;
        let mlp = 223 * 128 + 128 + 128 * 64 + 64 + 64 + 1;
        assert_eq!(param_count(&cfg) - head_only, param_count(&with_mlp) - mlp);
    }

    #[test]
    fn doubling_ff_width() {
        let base = ModelConfig::default();
        let wide = ModelConfig { d_ff: 2 * base.d_ff, ..base.clone() };
        let per_block = 2 * base.d_model * base.d_ff + base.d_ff;
        assert_eq!(param_count(&wide) - param_count(&base), per_block * base.n_layers * 2);
    }

    #[test]
    fn variant_shapes() {
        let full = ModelParams::init(&ModelConfig::default(), 1).unwrap();
        let nl = ModelParams::init(&ModelConfig { variant: Variant::NoLightcone, ..ModelConfig::default() }, 1).unwrap();
        assert_eq!(full.names, nl.names);
        assert_eq!(full.tensors, nl.tensors);
        let ng = ModelParams::init(&ModelConfig { variant: Variant::NoGlobal, ..ModelConfig::default() }, 1).unwrap();
        assert!(ng.names.iter().all(|n| !n.starts_with("global.")));
        assert_eq!(ng.get("mlp.0.w").unwrap().shape(), [64 + 95, 128]);
        assert_eq!(full.get("mlp.0.w").unwrap().shape(), [2 * 64 + 95, 128]);
        let gcn = ModelParams::init(&ModelConfig { variant: Variant::GcnBackbone, ..ModelConfig::default() }, 1).unwrap();
        assert_eq!(gcn.get("global.2.gcn.w").unwrap().shape(), [64, 64]);
    }

    #[test]
    fn config_validation() {
        assert!(ModelConfig { n_heads: 5, ..ModelConfig::default() }.validate().is_err());
        assert!(ModelConfig { descriptor_dim: 89, ..ModelConfig::default() }.validate().is_err());
        assert!(ModelConfig::default().validate().is_ok());
    }

    #[test]
    fn variant_names_round_trip() {
        for v in Variant::ALL {
            assert_eq!(v.name().parse::<Variant>().unwrap(), v);
            let json = serde_json::to_string(&v).unwrap();
            assert_eq!(json, format!("\"{}\"", v.name()));
        }
        assert_eq!("no_global".parse::<Variant>().unwrap(), Variant::NoGlobal);
    }
}
