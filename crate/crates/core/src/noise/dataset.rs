use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::{
    fold_circuit, sample_shots, simulate, simulate_exact, zne_extrapolate, Expectations, Extrapolation, NoiseError,
    NoiseModel, NoiseScale, MAX_SIM_QUBITS,
};
use crate::circuit::{generate_tfim, transpile, CanonicalCircuit, Circuit, TfimConfig};

/// Closed interval used for randomized dataset parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Range<T> {
    pub min: T,
    pub max: T,
}

impl<T> Range<T> {
    pub const fn new(min: T, max: T) -> Self {
        Range { min, max }
    }
}

impl Range<f64> {
    fn draw(&self, rng: &mut ChaCha8Rng) -> f64 {
        if self.min == self.max {
            self.min
        } else {
            rng.random_range(self.min..=self.max)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScalingMethod {
    /// Multiply depolarizing probabilities by λ.
    #[default]
    Analog,
    /// Fold gates; every factor must be an odd integer.
    Folding,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DatasetConfig {
    pub n_qubits: usize,
    pub circuits_total: usize,
    pub trotter_steps: Range<usize>,
    pub coupling: Range<f64>,
    pub field: Range<f64>,
    pub dt: Range<f64>,
    pub angle_jitter: f64,
    #[serde(skip)]
    pub noise: NoiseModel,
    pub zne_factors: Vec<f64>,
    pub extrapolation: Extrapolation,
    pub scaling: ScalingMethod,
    /// Finite-shot estimates instead of exact expectations.
    pub shots: Option<u64>,
    pub seed: u64,
}

impl Default for DatasetConfig {
    fn default() -> Self {
        DatasetConfig {
            n_qubits: 6,
            circuits_total: 500,
            trotter_steps: Range::new(1, 10),
            coupling: Range::new(0.5, 1.5),
            field: Range::new(0.2, 0.6),
            dt: Range::new(0.05, 0.15),
            angle_jitter: 0.0,
            noise: NoiseModel::default(),
            zne_factors: vec![1.0, 2.0, 3.0],
            extrapolation: Extrapolation::Linear,
            scaling: ScalingMethod::Analog,
            shots: None,
            seed: 0,
        }
    }
}

impl DatasetConfig {
    pub fn validate(&self) -> Result<(), NoiseError> {
        let bad = |m: String| Err(NoiseError::InvalidConfig(m));
        self.noise.validate()?;
        if self.n_qubits == 0 || self.n_qubits > MAX_SIM_QUBITS {
            return bad(format!("n_qubits must be in 1..={MAX_SIM_QUBITS}, got {}", self.n_qubits));
        }
        if self.circuits_total == 0 {
            return bad("circuits_total must be at least 1".into());
        }
        if self.trotter_steps.min == 0 || self.trotter_steps.min > self.trotter_steps.max {
            return bad(format!("invalid trotter_steps range {:?}", self.trotter_steps));
        }
        for (name, r) in [("coupling", self.coupling), ("field", self.field), ("dt", self.dt)] {
            if !(r.min.is_finite() && r.max.is_finite() && r.min <= r.max) {
                return bad(format!("invalid {name} range {r:?}"));
            }
        }
        if self.dt.min <= 0.0 {
            return bad("dt must be positive".into());
        }
        if self.zne_factors.len() < 2 {
            return bad("need at least two zne_factors".into());
        }
        if self.zne_factors[0] != 1.0 || self.zne_factors.windows(2).any(|w| w[0] >= w[1]) {
            return bad("zne_factors must be strictly ascending and start at 1".into());
        }
        if self.scaling == ScalingMethod::Folding
            && self.zne_factors.iter().any(|&f| f.fract() != 0.0 || (f as usize) % 2 == 0)
        {
            return bad("folding needs odd integer zne_factors".into());
        }
        if self.shots == Some(0) {
            return Err(NoiseError::NoShots);
        }
        Ok(())
    }

    /// Per-circuit generator: independent of build order.
    fn circuit_rng(&self, circuit_id: usize) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(circuit_id as u64);
        rng
    }
}

/// Per-qubit values, serialized as `{"q0": v, "q1": v, ...}`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct QubitValues(pub BTreeMap<usize, f64>);

impl QubitValues {
    pub fn get(&self, qubit: usize) -> Option<f64> {
        self.0.get(&qubit).copied()
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.0.iter().map(|(&q, &v)| (q, v))
    }
}

impl From<Expectations> for QubitValues {
    fn from(e: Expectations) -> Self {
        QubitValues(e)
    }
}

impl Serialize for QubitValues {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_map(self.0.iter().map(|(q, v)| (format!("q{q}"), v)))
    }
}

impl<'de> Deserialize<'de> for QubitValues {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let raw = BTreeMap::<String, f64>::deserialize(d)?;
        raw.into_iter()
            .map(|(k, v)| {
                k.strip_prefix('q')
                    .and_then(|n| n.parse::<usize>().ok())
                    .map(|q| (q, v))
                    .ok_or_else(|| D::Error::custom(format!("bad qubit key `{k}`")))
            })
            .collect::<Result<_, _>>()
            .map(QubitValues)
    }
}

/// One labeled circuit.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub circuit_id: usize,
    pub trotter_steps: usize,
    pub circuit: Circuit,
    pub noisy: QubitValues,
    pub label_zne: QubitValues,
    pub label_exact: QubitValues,
    /// Materialized descriptor vectors keyed by qubit, when requested.
    pub descriptor: Option<BTreeMap<usize, Vec<f64>>>,
}

#[derive(Serialize, Deserialize)]
struct SampleRecord {
    circuit_id: usize,
    trotter_steps: usize,
    circuit: CanonicalCircuit,
    noisy: QubitValues,
    label_zne: QubitValues,
    label_exact: QubitValues,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    descriptor: Option<BTreeMap<String, Vec<f64>>>,
}

impl Sample {
    pub fn to_json_line(&self) -> String {
        let rec = SampleRecord {
            circuit_id: self.circuit_id,
            trotter_steps: self.trotter_steps,
            circuit: self.circuit.to_canonical(),
            noisy: self.noisy.clone(),
            label_zne: self.label_zne.clone(),
            label_exact: self.label_exact.clone(),
            descriptor: self
                .descriptor
                .as_ref()
                .map(|d| d.iter().map(|(q, v)| (format!("q{q}"), v.clone())).collect()),
        };
        serde_json::to_string(&rec).expect("sample serializes")
    }

    pub fn from_json_line(line: &str) -> Result<Self, String> {
        let rec: SampleRecord = serde_json::from_str(line).map_err(|e| e.to_string())?;
        let circuit = Circuit::try_from(rec.circuit).map_err(|e| e.to_string())?;
        let descriptor = match rec.descriptor {
            None => None,
            Some(d) => Some(
                d.into_iter()
                    .map(|(k, v)| {
                        k.strip_prefix('q')
                            .and_then(|n| n.parse().ok())
                            .map(|q| (q, v))
                            .ok_or_else(|| format!("bad qubit key `{k}`"))
                    })
                    .collect::<Result<_, _>>()?,
            ),
        };
        let sample = Sample {
            circuit_id: rec.circuit_id,
            trotter_steps: rec.trotter_steps,
            circuit,
            noisy: rec.noisy,
            label_zne: rec.label_zne,
            label_exact: rec.label_exact,
            descriptor,
        };
        sample.check()?;
        Ok(sample)
    }

    /// Value maps must cover exactly the measured qubits; noisy values are
    /// physical.
    pub fn check(&self) -> Result<(), String> {
        let keys: Vec<usize> = {
            let mut k = self.circuit.measured_qubits();
            k.sort_unstable();
            k
        };
        for (name, m) in [("noisy", &self.noisy), ("label_zne", &self.label_zne), ("label_exact", &self.label_exact)] {
            let have: Vec<usize> = m.0.keys().copied().collect();
            if have != keys {
                return Err(format!("circuit {}: {name} keys {have:?} != measured {keys:?}", self.circuit_id));
            }
            if m.0.values().any(|v| !v.is_finite()) {
                return Err(format!("circuit {}: non-finite {name} value", self.circuit_id));
            }
        }
        if self.noisy.0.values().any(|v| v.abs() > 1.0) {
            return Err(format!("circuit {}: noisy value outside [-1, 1]", self.circuit_id));
        }
        Ok(())
    }
}

fn scaled_values(
    cfg: &DatasetConfig,
    circuit: &Circuit,
    factor: f64,
) -> Result<Expectations, NoiseError> {
    match cfg.scaling {
        ScalingMethod::Analog => simulate(circuit, &cfg.noise, NoiseScale::new(factor)?, &circuit.measured),
        ScalingMethod::Folding => {
            let folded = fold_circuit(circuit, factor as usize)?;
            simulate(&folded, &cfg.noise, NoiseScale::UNIT, &folded.measured)
        }
    }
}

/// Generates and labels one circuit of the dataset.
pub fn build_sample(cfg: &DatasetConfig, circuit_id: usize) -> Result<Sample, NoiseError> {
    let mut rng = cfg.circuit_rng(circuit_id);
    let steps = rng.random_range(cfg.trotter_steps.min..=cfg.trotter_steps.max);
    let coupling = cfg.coupling.draw(&mut rng);
    let field = cfg.field.draw(&mut rng);
    let dt = cfg.dt.draw(&mut rng);
    let jitter_seed: u64 = rng.random();
    let shot_seed: u64 = rng.random();
    let tfim = TfimConfig { n_qubits: cfg.n_qubits, trotter_steps: steps, coupling, field, dt, angle_jitter: cfg.angle_jitter };
    let circuit = transpile(&generate_tfim(&tfim, jitter_seed)?)?;

    let mut points = Vec::with_capacity(cfg.zne_factors.len());
    for (i, &factor) in cfg.zne_factors.iter().enumerate() {
        let mut values = scaled_values(cfg, &circuit, factor)?;
        if let Some(shots) = cfg.shots {
            values = sample_shots(&values, shots, shot_seed.wrapping_add(i as u64))?;
        }
        points.push(values);
    }
    let noisy = points[0].clone();
    let label_zne: Expectations = circuit
        .measured_qubits()
        .into_iter()
        .map(|q| {
            let pts: Vec<(f64, f64)> = cfg.zne_factors.iter().zip(&points).map(|(&l, v)| (l, v[&q])).collect();
            zne_extrapolate(&pts, cfg.extrapolation).map(|v| (q, v))
        })
        .collect::<Result<_, _>>()?;
    let label_exact = simulate_exact(&circuit, &circuit.measured)?;
    Ok(Sample {
        circuit_id,
        trotter_steps: steps,
        circuit,
        noisy: noisy.into(),
        label_zne: label_zne.into(),
        label_exact: label_exact.into(),
        descriptor: None,
    })
}

/// Builds `cfg.circuits_total` samples with ids `0..circuits_total`.
/// Each circuit draws from its own stream of the seeded generator, so the
/// result does not depend on build order.
pub fn build_dataset(cfg: &DatasetConfig) -> Result<Vec<Sample>, NoiseError> {
    cfg.validate()?;
    (0..cfg.circuits_total).map(|id| build_sample(cfg, id)).collect()
}

pub fn write_dataset(path: &Path, samples: &[Sample]) -> std::io::Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    for s in samples {
        writeln!(w, "{}", s.to_json_line())?;
    }
    w.flush()
}

pub fn read_dataset(path: &Path) -> Result<Vec<Sample>, String> {
    let f = File::open(path).map_err(|e| format!("{}: {e}", path.display()))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(f).lines().enumerate() {
        let line = line.map_err(|e| format!("{}: {e}", path.display()))?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(Sample::from_json_line(&line).map_err(|e| format!("{}:{}: {e}", path.display(), i + 1))?);
    }
    Ok(out)
}
