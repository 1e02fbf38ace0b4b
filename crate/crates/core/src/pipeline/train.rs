use std::collections::BTreeMap;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::config::PipelineConfig;
use super::eval::labels_for;
use super::report::{fmt_f64, CsvTable};
use super::split::{split_circuits, Split};
use crate::features::descriptor_len;
use crate::model::{forward_on, loss_and_grads_on, prepare_circuit, LocalEvaluation, ModelConfig, ModelParams, PreparedCircuit};
use crate::noise::Sample;
use crate::numeric::{Adam, AdamConfig, Tape};
use crate::{Error, Result};

/// One line of the training log. `val_mse` is absent on epochs without a
/// validation check.
#[derive(Debug, Clone, PartialEq)]
pub struct LogRow {
    pub epoch: usize,
    pub lr: f64,
    pub train_mse: f64,
    pub val_mse: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    /// Parameters at the best validation check of the best learning rate.
    pub params: ModelParams,
    pub best_lr: f64,
    pub best_val_mse: f64,
    pub best_epoch: usize,
    /// Adam steps taken up to the kept parameters.
    pub steps: u64,
    pub split: Split,
    pub log: Vec<LogRow>,
}

impl TrainOutcome {
    pub fn log_table(&self) -> CsvTable {
        let mut t = CsvTable::new(["epoch", "lr", "train_mse", "val_mse"]);
        for r in &self.log {
            t.push([r.epoch.to_string(), fmt_f64(r.lr), fmt_f64(r.train_mse), r.val_mse.map(fmt_f64).unwrap_or_default()]);
        }
        t
    }

    pub fn write_log(&self, path: &Path) -> Result<()> {
        self.log_table().write(path)
    }
}

/// Graphs, lightcones and descriptors for every sample, in sample order.
pub fn prepare_all(samples: &[Sample]) -> Result<Vec<PreparedCircuit>> {
    samples
        .iter()
        .map(|s| prepare_circuit(s.circuit_id, &s.circuit, &s.noisy.0).map_err(Into::into))
        .collect()
}

/// The model config with its descriptor width taken from the data.
pub(crate) fn fitted_model_config(model: &ModelConfig, prepared: &[PreparedCircuit]) -> Result<ModelConfig> {
    let m = prepared.first().map(|c| c.qubits.len()).unwrap_or(0);
    if prepared.iter().any(|c| c.qubits.len() != m) {
        return Err(Error::Data("circuits measure different numbers of qubits".into()));
    }
    Ok(ModelConfig { descriptor_dim: descriptor_len(m), ..model.clone() })
}

fn targets(c: &PreparedCircuit, labels: &BTreeMap<(usize, usize), f64>) -> Result<Vec<f64>> {
    c.qubits
        .iter()
        .map(|&q| {
            labels
                .get(&(c.circuit_id, q))
                .copied()
                .ok_or_else(|| Error::Data(format!("no label for circuit {} qubit {q}", c.circuit_id)))
        })
        .collect()
}

/// Mean squared error over every (circuit, qubit) of `circuits`.
pub(crate) fn mean_squared_error(
    tape: &mut Tape,
    params: &ModelParams,
    circuits: &[&PreparedCircuit],
    labels: &BTreeMap<(usize, usize), f64>,
) -> Result<f64> {
    let (mut sum, mut n) = (0.0, 0usize);
    for c in circuits {
        let pred = forward_on(tape, params, c, LocalEvaluation::Gathered)?;
        for (p, y) in pred.iter().zip(targets(c, labels)?) {
            sum += (p - y) * (p - y);
            n += 1;
        }
    }
    Ok(sum / n.max(1) as f64)
}

struct RunResult {
    params: ModelParams,
    val_mse: f64,
    epoch: usize,
    steps: u64,
}

#[allow(clippy::too_many_arguments)]
fn run_lr(
    cfg: &PipelineConfig,
    model: &ModelConfig,
    lr: f64,
    stream: u64,
    train: &[&PreparedCircuit],
    val: &[&PreparedCircuit],
    labels: &BTreeMap<(usize, usize), f64>,
    log: &mut Vec<LogRow>,
    observer: &mut dyn FnMut(&LogRow),
) -> Result<RunResult> {
    let tc = &cfg.train;
    let mut params = ModelParams::init(model, tc.seed)?;
    let mut adam = Adam::new(AdamConfig::with_lr(lr));
    let mut rng = ChaCha8Rng::seed_from_u64(tc.seed);
    rng.set_stream(stream);
    let train_targets: Vec<Vec<f64>> = train.iter().map(|c| targets(c, labels)).collect::<Result<_>>()?;
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut tape = Tape::new();
    let mut best: Option<RunResult> = None;
    let mut since_best = 0;
    for epoch in 1..=tc.max_epochs {
        order.shuffle(&mut rng);
        let (mut sq, mut n) = (0.0, 0usize);
        for &i in &order {
            let diag = |e: Error| match e {
                Error::Numeric(m) => Error::Numeric(format!(
                    "lr {lr}, epoch {epoch}, circuit {}: {m}",
                    train[i].circuit_id
                )),
                other => other,
            };
            let (loss, grads) = loss_and_grads_on(&mut tape, &params, train[i], &train_targets[i]).map_err(|e| diag(e.into()))?;
            adam.step(&mut params.tensors, &grads).map_err(|e| diag(e.into()))?;
            sq += loss * train_targets[i].len() as f64;
            n += train_targets[i].len();
        }
        let train_mse = sq / n.max(1) as f64;
        if !train_mse.is_finite() {
            return Err(Error::Numeric(format!("lr {lr}, epoch {epoch}: training loss is not finite")));
        }
        let check = epoch % tc.eval_every == 0 || epoch == tc.max_epochs;
        let val_mse = if check { Some(mean_squared_error(&mut tape, &params, val, labels)?) } else { None };
        let row = LogRow { epoch, lr, train_mse, val_mse };
        observer(&row);
        log.push(row);
        let Some(v) = val_mse else { continue };
        if best.as_ref().is_none_or(|b| v < b.val_mse) {
            best = Some(RunResult { params: params.clone(), val_mse: v, epoch, steps: adam.steps() });
            since_best = 0;
        } else {
            since_best += 1;
            if since_best >= tc.patience {
                break;
            }
        }
    }
    Ok(best.expect("the final epoch always runs a validation check"))
}

/// Trains once per learning rate of the grid, early-stopping each run on
/// validation MSE, and keeps the run with the lowest validation MSE (the
/// first one on ties). Deterministic in `cfg`.
pub fn train(cfg: &PipelineConfig, samples: &[Sample], prepared: &[PreparedCircuit]) -> Result<TrainOutcome> {
    train_observed(cfg, samples, prepared, &mut |_| {})
}

/// [`train`] with a callback after every epoch.
pub fn train_observed(
    cfg: &PipelineConfig,
    samples: &[Sample],
    prepared: &[PreparedCircuit],
    observer: &mut dyn FnMut(&LogRow),
) -> Result<TrainOutcome> {
    cfg.validate()?;
    if samples.len() != prepared.len() {
        return Err(Error::Data("samples and prepared circuits differ in count".into()));
    }
    let tc = &cfg.train;
    let split = split_circuits(samples.len(), tc.n_train, tc.n_val, tc.split_seed)?;
    let model = fitted_model_config(&cfg.model, prepared)?;
    let labels = labels_for(samples, tc.label)?;
    let train: Vec<&PreparedCircuit> = split.train.iter().map(|&i| &prepared[i]).collect();
    let val: Vec<&PreparedCircuit> = split.val.iter().map(|&i| &prepared[i]).collect();
    let mut log = Vec::new();
    let mut best: Option<(f64, RunResult)> = None;
    for (k, &lr) in tc.lr_grid.iter().enumerate() {
        let run = run_lr(cfg, &model, lr, k as u64 + 1, &train, &val, &labels, &mut log, observer)?;
        if best.as_ref().is_none_or(|(_, b)| run.val_mse < b.val_mse) {
            best = Some((lr, run));
        }
    }
    let (best_lr, run) = best.expect("lr grid is non-empty");
    Ok(TrainOutcome {
        params: run.params,
        best_lr,
        best_val_mse: run.val_mse,
        best_epoch: run.epoch,
        steps: run.steps,
        split,
        log,
    })
}
