//! `qagt`: generate TFIM datasets, train and evaluate the graph-attention
//! mitigator, and produce the ablation, baseline, lightcone and cost tables.

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand};

use qagt::features::circuit_descriptors;
use qagt::model::{load_checkpoint, param_count, save_checkpoint, Variant};
use qagt::noise::{build_dataset, read_dataset, write_dataset, Sample};
use qagt::pipeline::{
    ablate, break_even_ratio, cost_model, evaluate, labels_for, lightcone_stats, load_circuits, prepare_all,
    ridge_predictions, split_circuits, train_observed, write_ablation_csv, write_cost_csv, write_lightcone_csv,
    EvalReport, PipelineConfig,
};
use qagt::{Error, Result};

#[derive(Parser)]
#[command(name = "qagt", version, about = "Graph-attention quantum error mitigation at desk scale")]
struct Cli {
    /// Overrides the seed of the command (dataset seed for gen-data,
    /// training seed otherwise).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// TOML file with [data], [noise], [model] and [train] sections.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Directory for every file a command writes.
    #[arg(long, global = true, default_value = ".")]
    out_dir: PathBuf,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a labeled TFIM dataset and write it as JSONL.
    GenData {
        /// Output file; defaults to [data].path, then <out-dir>/dataset.jsonl.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Store each circuit's descriptor vectors in the dataset.
        #[arg(long)]
        materialize_features: bool,
    },
    /// Train over the learning-rate grid and keep the best checkpoint.
    Train {
        #[arg(long)]
        data: Option<PathBuf>,
    },
    /// Score a checkpoint, the ridge baseline and the noisy values.
    Eval {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        data: Option<PathBuf>,
    },
    /// Train each variant for several seeds and tabulate validation MAE.
    Ablate {
        #[arg(long)]
        data: Option<PathBuf>,
        /// Comma-separated subset of Full, GCNBackbone, NoGlobal, NoLightcone.
        #[arg(long, value_delimiter = ',')]
        variants: Option<Vec<Variant>>,
        #[arg(long, default_value_t = 5)]
        n_seeds: u64,
    },
    /// Fit the ridge baseline only and score it with the noisy values.
    Baseline {
        #[arg(long)]
        data: Option<PathBuf>,
    },
    /// Lightcone locality metrics of a dataset, a QASM file or a directory
    /// of QASM files.
    LightconeStats { path: PathBuf },
    /// Circuit-execution counts of ZNE versus the learned mimic.
    CostModel {
        /// Noise levels; repeat for several rows.
        #[arg(long = "m", default_values_t = [2u64, 3])]
        m: Vec<u64>,
        #[arg(long, default_value_t = 100)]
        n_train: u64,
        #[arg(long, default_value_t = 400)]
        n_test: u64,
    },
    /// Print the parameter count of the configured model.
    ParamCount,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn load_config(cli: &Cli) -> Result<PipelineConfig> {
    match &cli.config {
        Some(p) => PipelineConfig::load(p),
        None => Ok(PipelineConfig::default()),
    }
}

fn dataset_path(cfg: &PipelineConfig, flag: &Option<PathBuf>) -> Result<PathBuf> {
    flag.clone()
        .or_else(|| cfg.data.path.clone())
        .ok_or_else(|| Error::Config("no dataset given: pass --data or set [data].path".into()))
}

fn load_samples(path: &Path) -> Result<Vec<Sample>> {
    let samples = read_dataset(path).map_err(Error::Data)?;
    if samples.is_empty() {
        return Err(Error::Data(format!("{} holds no circuits", path.display())));
    }
    Ok(samples)
}

fn ensure_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(format!("creating {}", dir.display()), e))
}

fn run(cli: Cli) -> Result<()> {
    let mut cfg = load_config(&cli)?;
    ensure_dir(&cli.out_dir)?;
    let out = cli.out_dir.as_path();
    match &cli.command {
        Command::GenData { out: path, materialize_features } => {
            if let Some(s) = cli.seed {
                cfg.data.generator.seed = s;
            }
            let path = path.clone().or_else(|| cfg.data.path.clone()).unwrap_or_else(|| out.join("dataset.jsonl"));
            let t = Instant::now();
            let mut samples = build_dataset(&cfg.dataset_config())?;
            if *materialize_features {
                for s in &mut samples {
                    s.descriptor = Some(circuit_descriptors(&s.circuit, &s.noisy.0)?);
                }
            }
            write_dataset(&path, &samples).map_err(|e| Error::io(format!("writing {}", path.display()), e))?;
            eprintln!("wrote {} circuits to {} in {:.1}s", samples.len(), path.display(), t.elapsed().as_secs_f64());
        }
        Command::Train { data } => {
            if let Some(s) = cli.seed {
                cfg.train.seed = s;
            }
            let samples = load_samples(&dataset_path(&cfg, data)?)?;
            let prepared = prepare_all(&samples)?;
            let outcome = train_observed(&cfg, &samples, &prepared, &mut |r| {
                if let Some(v) = r.val_mse {
                    eprintln!("lr {:e} epoch {:>4}  train_mse {:.6}  val_mse {:.6}", r.lr, r.epoch, r.train_mse, v);
                }
            })?;
            outcome.write_log(&out.join("train_log.csv"))?;
            save_checkpoint(&out.join("checkpoint.json"), &outcome.params, cfg.train.seed, outcome.steps)?;
            println!(
                "best lr {:e}, epoch {}, val_mse {:.6}; checkpoint in {}",
                outcome.best_lr,
                outcome.best_epoch,
                outcome.best_val_mse,
                out.join("checkpoint.json").display()
            );
        }
        Command::Eval { checkpoint, data } => {
            let ck = load_checkpoint(checkpoint)?;
            let samples = load_samples(&dataset_path(&cfg, data)?)?;
            let prepared = prepare_all(&samples)?;
            let tc = &cfg.train;
            let split = split_circuits(samples.len(), tc.n_train, tc.n_val, tc.split_seed)?;
            let report = evaluate(&ck.params, &samples, &prepared, &split, tc.label, tc.ridge_lambda)?;
            report.write(out)?;
            print_overall(&report);
        }
        Command::Ablate { data, variants, n_seeds } => {
            if *n_seeds == 0 {
                return Err(Error::Config("--n-seeds must be at least 1".into()));
            }
            let samples = load_samples(&dataset_path(&cfg, data)?)?;
            let prepared = prepare_all(&samples)?;
            let variants = variants.clone().unwrap_or_else(|| Variant::ALL.to_vec());
            let base = cli.seed.unwrap_or(cfg.train.seed);
            let seeds: Vec<u64> = (0..*n_seeds).map(|k| base + k).collect();
            let rows = ablate(&cfg, &samples, &prepared, &variants, &seeds, &mut |v, s, r| {
                if let Some(val) = r.val_mse {
                    eprintln!("{v} seed {s} lr {:e} epoch {:>4}  val_mse {val:.6}", r.lr, r.epoch);
                }
            })?;
            write_ablation_csv(&out.join("ablation.csv"), &rows)?;
            for r in &rows {
                println!("{:<12} seed {:<4} total_mae {:.6}", r.variant.name(), r.seed, r.total_mae);
            }
        }
        Command::Baseline { data } => {
            let samples = load_samples(&dataset_path(&cfg, data)?)?;
            let prepared = prepare_all(&samples)?;
            let tc = &cfg.train;
            let split = split_circuits(samples.len(), tc.n_train, tc.n_val, tc.split_seed)?;
            let labels = labels_for(&samples, tc.label)?;
            let train: Vec<_> = split.train.iter().map(|&i| &prepared[i]).collect();
            let val: Vec<_> = split.val.iter().map(|&i| &prepared[i]).collect();
            let baseline = ridge_predictions(&train, &labels, &val, tc.ridge_lambda)?;
            let val_samples: Vec<&Sample> = split.val.iter().map(|&i| &samples[i]).collect();
            let noisy = val_samples.iter().flat_map(|s| s.noisy.iter().map(|(q, v)| ((s.circuit_id, q), v))).collect();
            let report = EvalReport::from_predictions(&val_samples, tc.label, &[("baseline", &baseline), ("unmitigated", &noisy)])?;
            report.per_qubit_table().write(&out.join("baseline_per_qubit.csv"))?;
            report.per_step_table().write(&out.join("baseline_per_step.csv"))?;
            print_overall(&report);
        }
        Command::LightconeStats { path } => {
            let stats = lightcone_stats(&load_circuits(path)?)?;
            write_lightcone_csv(&out.join("lightcone_stats.csv"), &stats)?;
            let k = stats.len() as f64;
            let mean = |f: &dyn Fn(&qagt::graph::LocalityReport) -> f64| stats.iter().map(|s| f(&s.report)).sum::<f64>() / k;
            println!("circuits: {}", stats.len());
            println!("mean coverage:           {:.4}", mean(&|r| r.mean_coverage()));
            println!("mean internal edge frac: {:.4}", mean(&|r| r.mean_internal_frac()));
            println!("mean boundary ratio:     {:.4}", mean(&|r| r.mean_boundary()));
        }
        Command::CostModel { m, n_train, n_test } => {
            let mut rows = Vec::new();
            for &mi in m {
                rows.extend(cost_model(mi, *n_train, *n_test)?);
            }
            write_cost_csv(&out.join("cost_model.csv"), &rows)?;
            for r in &rows {
                println!("{:<5} m={} executions={} relative_cost={}", r.method, r.m, r.total_executions, r.relative_cost);
            }
            for &mi in m {
                println!("m={mi}: break-even n_train/n_test = {}", break_even_ratio(mi));
            }
        }
        Command::ParamCount => {
            println!("{}", param_count(&cfg.model));
        }
    }
    Ok(())
}

fn print_overall(report: &EvalReport) {
    for m in &report.overall {
        println!("{:<12} mae {:.6} over {} samples", m.method, m.mae, m.n_samples);
    }
}
