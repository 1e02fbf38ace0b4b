//! Training, evaluation, ablation and reporting on top of the model.
//!
//! Every command reads one TOML file with `[data]`, `[noise]`, `[model]`
//! and `[train]` sections; missing keys take their defaults. All outputs
//! are CSV files with a header row and a fixed column order.

mod ablate;
mod config;
mod cost;
mod eval;
mod report;
mod ridge;
mod split;
mod stats;
mod train;

pub use ablate::{ablate, write_ablation_csv, AblationRow};
pub use config::{DataSection, LabelSource, PipelineConfig, TrainConfig};
pub use cost::{break_even_ratio, cost_model, mimic_is_cheaper, write_cost_csv, CostModelRow};
pub use eval::{evaluate, labels_for, EvalReport, MethodStats, QubitStats, StepStats, METHODS};
pub use report::{fmt_f64, CsvTable};
pub use ridge::{ridge_predictions, RidgeModel};
pub use split::{split_circuits, Split};
pub use stats::{lightcone_stats, load_circuits, write_lightcone_csv, CircuitLocality};
pub use train::{prepare_all, train, train_observed, LogRow, TrainOutcome};
