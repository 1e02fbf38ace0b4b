use std::path::Path;

use super::report::{fmt_f64, CsvTable};
use crate::{Error, Result};

/// Circuit executions of one mitigation strategy at `m` noise levels.
#[derive(Debug, Clone, PartialEq)]
pub struct CostModelRow {
    pub method: &'static str,
    pub m: u64,
    pub total_executions: u64,
    /// Executions relative to ZNE at the same `m`.
    pub relative_cost: f64,
}

/// ZNE runs every test circuit at `m` noise levels (`m · n_test`); the
/// learned mimic runs only the training circuits at `m` levels and every
/// test circuit once (`m · n_train + n_test`).
pub fn cost_model(m: u64, n_train: u64, n_test: u64) -> Result<[CostModelRow; 2]> {
    if m < 2 {
        return Err(Error::Config(format!("need at least two noise levels, got m = {m}")));
    }
    if n_train == 0 || n_test == 0 {
        return Err(Error::Config("n_train and n_test must be at least 1".into()));
    }
    let zne = m
        .checked_mul(n_test)
        .ok_or_else(|| Error::Config("execution count overflows".into()))?;
    let mimic = m
        .checked_mul(n_train)
        .and_then(|x| x.checked_add(n_test))
        .ok_or_else(|| Error::Config("execution count overflows".into()))?;
    Ok([
        CostModelRow { method: "zne", m, total_executions: zne, relative_cost: 1.0 },
        CostModelRow { method: "qagt", m, total_executions: mimic, relative_cost: mimic as f64 / zne as f64 },
    ])
}

/// `n_train / n_test` at which both strategies cost the same: `(m − 1)/m`.
pub fn break_even_ratio(m: u64) -> f64 {
    (m - 1) as f64 / m as f64
}

/// Whether the mimic is strictly cheaper, decided in integers.
pub fn mimic_is_cheaper(m: u64, n_train: u64, n_test: u64) -> bool {
    (m as u128) * (n_train as u128) < (m as u128 - 1) * (n_test as u128)
}

pub fn write_cost_csv(path: &Path, rows: &[CostModelRow]) -> Result<()> {
    cost_table(rows).write(path)
}

pub(crate) fn cost_table(rows: &[CostModelRow]) -> CsvTable {
    let mut t = CsvTable::new(["method", "m", "total_executions", "relative_cost"]);
    for r in rows {
        t.push([r.method.to_string(), r.m.to_string(), r.total_executions.to_string(), fmt_f64(r.relative_cost)]);
    }
    t
}
