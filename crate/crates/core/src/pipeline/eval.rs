use std::collections::BTreeMap;
use std::path::Path;

use super::config::LabelSource;
use super::report::{fmt_f64, CsvTable};
use super::ridge::ridge_predictions;
use super::split::Split;
use crate::features::descriptor_len;
use crate::model::{forward_on, LocalEvaluation, ModelParams, PreparedCircuit};
use crate::noise::Sample;
use crate::numeric::Tape;
use crate::{Error, Result};

/// Methods scored by [`evaluate`], in output order.
pub const METHODS: [&str; 3] = ["qagt", "baseline", "unmitigated"];

#[derive(Debug, Clone, PartialEq)]
pub struct QubitStats {
    pub method: String,
    pub qubit: usize,
    pub mae: f64,
    /// Sample standard deviation of the absolute error (0 for one sample).
    pub sd: f64,
    pub n_samples: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepStats {
    pub method: String,
    pub trotter_steps: usize,
    /// Mean of `prediction − label`.
    pub mean_signed_error: f64,
    pub n_samples: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MethodStats {
    pub method: String,
    pub mae: f64,
    pub n_samples: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub label: LabelSource,
    pub per_qubit: Vec<QubitStats>,
    pub per_step: Vec<StepStats>,
    pub overall: Vec<MethodStats>,
}

/// Label of every (circuit, qubit) in `samples`.
pub fn labels_for(samples: &[Sample], source: LabelSource) -> Result<BTreeMap<(usize, usize), f64>> {
    let mut out = BTreeMap::new();
    for s in samples {
        let values = match source {
            LabelSource::Zne => &s.label_zne,
            LabelSource::Exact => &s.label_exact,
        };
        for (q, v) in values.iter() {
            if out.insert((s.circuit_id, q), v).is_some() {
                return Err(Error::Data(format!("circuit id {} appears twice", s.circuit_id)));
            }
        }
    }
    Ok(out)
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

fn sample_sd(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let m = mean(xs);
    (xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (xs.len() - 1) as f64).sqrt()
}

impl EvalReport {
    /// Scores each named prediction map against `label` over the measured
    /// qubits of `samples`.
    pub fn from_predictions(
        samples: &[&Sample],
        label: LabelSource,
        methods: &[(&str, &BTreeMap<(usize, usize), f64>)],
    ) -> Result<Self> {
        let mut per_qubit = Vec::new();
        let mut per_step = Vec::new();
        let mut overall = Vec::new();
        for &(method, preds) in methods {
            let mut by_qubit: BTreeMap<usize, Vec<f64>> = BTreeMap::new();
            let mut by_step: BTreeMap<usize, Vec<f64>> = BTreeMap::new();
            let mut all = Vec::new();
            for s in samples {
                for q in s.circuit.measured_qubits() {
                    let y = label
                        .value(s, q)
                        .ok_or_else(|| Error::Data(format!("circuit {} has no {label} label for qubit {q}", s.circuit_id)))?;
                    let p = *preds
                        .get(&(s.circuit_id, q))
                        .ok_or_else(|| Error::Data(format!("{method}: no prediction for circuit {} qubit {q}", s.circuit_id)))?;
                    by_qubit.entry(q).or_default().push((p - y).abs());
                    by_step.entry(s.trotter_steps).or_default().push(p - y);
                    all.push((p - y).abs());
                }
            }
            for (qubit, errs) in by_qubit {
                per_qubit.push(QubitStats { method: method.into(), qubit, mae: mean(&errs), sd: sample_sd(&errs), n_samples: errs.len() });
            }
            for (trotter_steps, errs) in by_step {
                per_step.push(StepStats {
                    method: method.into(),
                    trotter_steps,
                    mean_signed_error: mean(&errs),
                    n_samples: errs.len(),
                });
            }
            overall.push(MethodStats { method: method.into(), mae: if all.is_empty() { 0.0 } else { mean(&all) }, n_samples: all.len() });
        }
        Ok(EvalReport { label, per_qubit, per_step, overall })
    }

    pub fn mae(&self, method: &str) -> Option<f64> {
        self.overall.iter().find(|m| m.method == method).map(|m| m.mae)
    }

    pub fn qubit_mae(&self, method: &str) -> Vec<(usize, f64)> {
        self.per_qubit.iter().filter(|r| r.method == method).map(|r| (r.qubit, r.mae)).collect()
    }

    pub fn per_qubit_table(&self) -> CsvTable {
        let mut t = CsvTable::new(["method", "qubit", "mae", "sd", "n_samples"]);
        for r in &self.per_qubit {
            t.push([r.method.clone(), r.qubit.to_string(), fmt_f64(r.mae), fmt_f64(r.sd), r.n_samples.to_string()]);
        }
        t
    }

    pub fn per_step_table(&self) -> CsvTable {
        let mut t = CsvTable::new(["method", "trotter_steps", "mean_signed_error", "n_samples"]);
        for r in &self.per_step {
            t.push([r.method.clone(), r.trotter_steps.to_string(), fmt_f64(r.mean_signed_error), r.n_samples.to_string()]);
        }
        t
    }

    /// Writes `per_qubit.csv` and `per_step.csv` into `dir`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        self.per_qubit_table().write(&dir.join("per_qubit.csv"))?;
        self.per_step_table().write(&dir.join("per_step.csv"))
    }
}

/// Scores the model, the ridge baseline (fit on the train side of `split`)
/// and the raw noisy values on the validation side of `split`.
pub fn evaluate(
    params: &ModelParams,
    samples: &[Sample],
    prepared: &[PreparedCircuit],
    split: &Split,
    label: LabelSource,
    ridge_lambda: f64,
) -> Result<EvalReport> {
    if samples.len() != prepared.len() {
        return Err(Error::Data("samples and prepared circuits differ in count".into()));
    }
    if let Some(c) = prepared.first() {
        let want = descriptor_len(c.qubits.len());
        if params.config.descriptor_dim != want {
            return Err(Error::Data(format!(
                "checkpoint expects descriptors of length {}, dataset yields {want}",
                params.config.descriptor_dim
            )));
        }
    }
    let labels = labels_for(samples, label)?;
    let train: Vec<&PreparedCircuit> = split.train.iter().map(|&i| &prepared[i]).collect();
    let eval: Vec<&PreparedCircuit> = split.val.iter().map(|&i| &prepared[i]).collect();
    let eval_samples: Vec<&Sample> = split.val.iter().map(|&i| &samples[i]).collect();

    let mut model = BTreeMap::new();
    let mut tape = Tape::new();
    for c in &eval {
        let pred = forward_on(&mut tape, params, c, LocalEvaluation::Gathered)?;
        for (&q, y) in c.qubits.iter().zip(pred) {
            model.insert((c.circuit_id, q), y);
        }
    }
    let baseline = ridge_predictions(&train, &labels, &eval, ridge_lambda)?;
    let noisy: BTreeMap<(usize, usize), f64> =
        eval_samples.iter().flat_map(|s| s.noisy.iter().map(|(q, v)| ((s.circuit_id, q), v))).collect();
    EvalReport::from_predictions(
        &eval_samples,
        label,
        &[(METHODS[0], &model), (METHODS[1], &baseline), (METHODS[2], &noisy)],
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::noise::{build_dataset, DatasetConfig, NoiseModel};

    fn data(noise: NoiseModel) -> Vec<Sample> {
        let cfg = DatasetConfig { n_qubits: 3, circuits_total: 6, trotter_steps: crate::noise::Range::new(1, 2), noise, ..Default::default() };
        build_dataset(&cfg).unwrap()
    }

    #[test]
    fn perfect_predictions_score_zero() {
        let samples = data(NoiseModel::default());
        let labels = labels_for(&samples, LabelSource::Exact).unwrap();
        let refs: Vec<&Sample> = samples.iter().collect();
        let r = EvalReport::from_predictions(&refs, LabelSource::Exact, &[("qagt", &labels)]).unwrap();
        assert!(r.per_qubit.iter().all(|q| q.mae == 0.0 && q.sd == 0.0 && q.n_samples == 6));
        assert!(r.per_step.iter().all(|s| s.mean_signed_error == 0.0));
        assert_eq!(r.per_step.iter().map(|s| s.n_samples).sum::<usize>(), 18);
    }

    #[test]
    fn noiseless_unmitigated_is_exact() {
        let samples = data(NoiseModel::NOISELESS);
        let refs: Vec<&Sample> = samples.iter().collect();
        let noisy: BTreeMap<_, _> = samples.iter().flat_map(|s| s.noisy.iter().map(|(q, v)| ((s.circuit_id, q), v))).collect();
        let r = EvalReport::from_predictions(&refs, LabelSource::Exact, &[("unmitigated", &noisy)]).unwrap();
        assert!(r.per_qubit.iter().all(|q| q.mae < 1e-12));
    }

    #[test]
    fn signed_and_absolute_errors() {
        let samples = data(NoiseModel::default());
        let refs: Vec<&Sample> = samples.iter().collect();
        let shifted: BTreeMap<_, _> =
            labels_for(&samples, LabelSource::Zne).unwrap().into_iter().map(|(k, v)| (k, v - 0.25)).collect();
        let r = EvalReport::from_predictions(&refs, LabelSource::Zne, &[("x", &shifted)]).unwrap();
        assert!(r.per_step.iter().all(|s| (s.mean_signed_error + 0.25).abs() < 1e-12));
        assert!((r.mae("x").unwrap() - 0.25).abs() < 1e-12);
        assert!(r.per_qubit.iter().all(|q| q.sd < 1e-12));
    }

    #[test]
    fn missing_prediction_is_data_error() {
        let samples = data(NoiseModel::default());
        let refs: Vec<&Sample> = samples.iter().collect();
        let err = EvalReport::from_predictions(&refs, LabelSource::Exact, &[("x", &BTreeMap::new())]).unwrap_err();
        assert_eq!(err.exit_code(), 3);
    }

    #[test]
    fn csv_headers() {
        let r = EvalReport { label: LabelSource::Exact, per_qubit: vec![], per_step: vec![], overall: vec![] };
        assert_eq!(r.per_qubit_table().to_csv_string(), "method,qubit,mae,sd,n_samples\n");
        assert_eq!(r.per_step_table().to_csv_string(), "method,trotter_steps,mean_signed_error,n_samples\n");
    }
}
