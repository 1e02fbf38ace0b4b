use std::path::Path;
use std::process::{Command, Output};

const SMALL: &str = r#"
[data]
n_qubits = 3
circuits_total = 12
trotter_steps = { min = 1, max = 3 }

[model]
d_model = 8
n_heads = 2
d_ff = 16
mlp_hidden = [16, 8]

[train]
n_train = 4
n_val = 8
lr_grid = [0.01]
max_epochs = 3
"#;

fn qagt(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qagt")).current_dir(dir).args(args).output().expect("running qagt")
}

fn ok(out: &Output) -> String {
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn header(path: &Path) -> String {
    std::fs::read_to_string(path).unwrap().lines().next().unwrap().to_string()
}

#[test]
fn full_workflow_on_a_small_dataset() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    std::fs::write(d.join("small.toml"), SMALL).unwrap();
    let cfg = ["--config", "small.toml"];

    ok(&qagt(d, &[&cfg[..], &["gen-data", "--out", "data.jsonl", "--materialize-features"]].concat()));
    assert_eq!(std::fs::read_to_string(d.join("data.jsonl")).unwrap().lines().count(), 12);

    ok(&qagt(d, &[&cfg[..], &["--out-dir", "run", "train", "--data", "data.jsonl"]].concat()));
    assert_eq!(header(&d.join("run/train_log.csv")), "epoch,lr,train_mse,val_mse");
    assert!(d.join("run/checkpoint.json").exists() && d.join("run/checkpoint.bin").exists());

    let eval = ok(&qagt(
        d,
        &[&cfg[..], &["--out-dir", "run", "eval", "--checkpoint", "run/checkpoint.json", "--data", "data.jsonl"]].concat(),
    ));
    assert!(eval.contains("qagt") && eval.contains("baseline") && eval.contains("unmitigated"));
    assert_eq!(header(&d.join("run/per_qubit.csv")), "method,qubit,mae,sd,n_samples");
    assert_eq!(header(&d.join("run/per_step.csv")), "method,trotter_steps,mean_signed_error,n_samples");

    ok(&qagt(d, &[&cfg[..], &["--out-dir", "base", "baseline", "--data", "data.jsonl"]].concat()));
    assert!(d.join("base/baseline_per_qubit.csv").exists());

    ok(&qagt(
        d,
        &[&cfg[..], &["--out-dir", "abl", "ablate", "--data", "data.jsonl", "--variants", "Full,NoGlobal", "--n-seeds", "2"]]
            .concat(),
    ));
    let abl = std::fs::read_to_string(d.join("abl/ablation.csv")).unwrap();
    assert_eq!(abl.lines().next().unwrap(), "variant,seed,total_mae,mae_q0,mae_q1,mae_q2");
    assert_eq!(abl.lines().count(), 1 + 4);

    ok(&qagt(d, &["--out-dir", "lc", "lightcone-stats", "data.jsonl"]));
    let lc = std::fs::read_to_string(d.join("lc/lightcone_stats.csv")).unwrap();
    assert!(lc.lines().last().unwrap().starts_with("corpus,summary,"));
}

#[test]
fn training_is_reproducible_through_the_cli() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    std::fs::write(d.join("small.toml"), SMALL).unwrap();
    ok(&qagt(d, &["--config", "small.toml", "gen-data", "--out", "data.jsonl"]));
    for run in ["a", "b"] {
        ok(&qagt(d, &["--config", "small.toml", "--seed", "7", "--out-dir", run, "train", "--data", "data.jsonl"]));
    }
    for f in ["train_log.csv", "checkpoint.json", "checkpoint.bin"] {
        assert_eq!(std::fs::read(d.join("a").join(f)).unwrap(), std::fs::read(d.join("b").join(f)).unwrap(), "{f}");
    }
}

#[test]
fn cost_model_prints_the_table() {
    let dir = tempfile::tempdir().unwrap();
    let out = ok(&qagt(dir.path(), &["cost-model"]));
    assert!(out.contains("executions=800") && out.contains("executions=600") && out.contains("executions=700"));
    assert!(out.contains("m=3: break-even n_train/n_test = 0.6666666666666666"));
    let csv = std::fs::read_to_string(dir.path().join("cost_model.csv")).unwrap();
    assert_eq!(csv.lines().next(), Some("method,m,total_executions,relative_cost"));
}

#[test]
fn default_param_count() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(ok(&qagt(dir.path(), &["param-count"])).trim(), "238529");
}

#[test]
fn lightcone_stats_on_the_qasm_corpus() {
    let corpus = concat!(env!("CARGO_MANIFEST_DIR"), "/../core/tests/corpus");
    let dir = tempfile::tempdir().unwrap();
    let out = ok(&qagt(dir.path(), &["lightcone-stats", corpus]));
    assert!(out.starts_with("circuits: "));
    let csv = std::fs::read_to_string(dir.path().join("lightcone_stats.csv")).unwrap();
    assert_eq!(csv.lines().next(), Some("circuit,qubit,n_nodes,coverage,internal_frac,boundary,mean_jaccard"));
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let code = |args: &[&str]| qagt(d, args).status.code();

    assert_eq!(code(&["cost-model", "--m", "1"]), Some(2));
    assert_eq!(code(&["--config", "missing.toml", "param-count"]), Some(2));
    std::fs::write(d.join("bad.toml"), "[train]\npatience = 0\n").unwrap();
    assert_eq!(code(&["--config", "bad.toml", "param-count"]), Some(2));
    assert_eq!(code(&["train"]), Some(2));

    assert_eq!(code(&["train", "--data", "missing.jsonl"]), Some(3));
    std::fs::write(d.join("junk.jsonl"), "{not json}\n").unwrap();
    assert_eq!(code(&["eval", "--checkpoint", "nope.json", "--data", "junk.jsonl"]), Some(3));
    assert_eq!(code(&["baseline", "--data", "junk.jsonl"]), Some(3));
    std::fs::write(d.join("broken.qasm"), "OPENQASM 2.0;\nqreg q[1];\nfoo q[0];\n").unwrap();
    assert_eq!(code(&["lightcone-stats", "broken.qasm"]), Some(3));
}
