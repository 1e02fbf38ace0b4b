use std::collections::BTreeMap;
use std::path::Path;

use super::config::PipelineConfig;
use super::eval::{EvalReport, METHODS};
use super::report::{fmt_f64, CsvTable};
use super::train::{train_observed, LogRow};
use crate::model::{forward_on, LocalEvaluation, PreparedCircuit, Variant};
use crate::noise::Sample;
use crate::numeric::Tape;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct AblationRow {
    pub variant: Variant,
    pub seed: u64,
    /// Validation MAE over every (circuit, qubit).
    pub total_mae: f64,
    pub per_qubit: Vec<(usize, f64)>,
}

/// Trains every variant once per seed on the same data and split and
/// scores each on the validation circuits. Rows are variant-major.
pub fn ablate(
    cfg: &PipelineConfig,
    samples: &[Sample],
    prepared: &[PreparedCircuit],
    variants: &[Variant],
    seeds: &[u64],
    observer: &mut dyn FnMut(Variant, u64, &LogRow),
) -> Result<Vec<AblationRow>> {
    if seeds.is_empty() || variants.is_empty() {
        return Err(Error::Config("ablation needs at least one variant and one seed".into()));
    }
    let mut rows = Vec::with_capacity(variants.len() * seeds.len());
    for &variant in variants {
        for &seed in seeds {
            let mut run_cfg = cfg.clone();
            run_cfg.model.variant = variant;
            run_cfg.train.seed = seed;
            let out = train_observed(&run_cfg, samples, prepared, &mut |r| observer(variant, seed, r))?;
            let mut preds = BTreeMap::new();
            let mut tape = Tape::new();
            for &i in &out.split.val {
                let c = &prepared[i];
                for (&q, y) in c.qubits.iter().zip(forward_on(&mut tape, &out.params, c, LocalEvaluation::Gathered)?) {
                    preds.insert((c.circuit_id, q), y);
                }
            }
            let val: Vec<&Sample> = out.split.val.iter().map(|&i| &samples[i]).collect();
            let report = EvalReport::from_predictions(&val, cfg.train.label, &[(METHODS[0], &preds)])?;
            rows.push(AblationRow {
                variant,
                seed,
                total_mae: report.mae(METHODS[0]).unwrap_or(0.0),
                per_qubit: report.qubit_mae(METHODS[0]),
            });
        }
    }
    Ok(rows)
}

pub(crate) fn ablation_table(rows: &[AblationRow]) -> CsvTable {
    let qubits: Vec<usize> = rows.first().map(|r| r.per_qubit.iter().map(|&(q, _)| q).collect()).unwrap_or_default();
    let mut header = vec!["variant".to_string(), "seed".into(), "total_mae".into()];
    header.extend(qubits.iter().map(|q| format!("mae_q{q}")));
    let mut t = CsvTable::new(header);
    for r in rows {
        let mut line = vec![r.variant.name().to_string(), r.seed.to_string(), fmt_f64(r.total_mae)];
        line.extend(qubits.iter().map(|q| {
            r.per_qubit.iter().find(|(k, _)| k == q).map(|&(_, v)| fmt_f64(v)).unwrap_or_default()
        }));
        t.push(line);
    }
    t
}

pub fn write_ablation_csv(path: &Path, rows: &[AblationRow]) -> Result<()> {
    ablation_table(rows).write(path)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn table_layout() {
        let rows = vec![
            AblationRow { variant: Variant::Full, seed: 0, total_mae: 0.5, per_qubit: vec![(0, 0.25), (1, 0.75)] },
            AblationRow { variant: Variant::GcnBackbone, seed: 3, total_mae: 0.125, per_qubit: vec![(0, 0.125), (1, 0.125)] },
        ];
        assert_eq!(
            ablation_table(&rows).to_csv_string(),
            "variant,seed,total_mae,mae_q0,mae_q1\nFull,0,0.5,0.25,0.75\nGCNBackbone,3,0.125,0.125,0.125\n"
        );
    }
}
