use std::path::Path;

use super::report::{fmt_f64, CsvTable};
use crate::circuit::{parse_circuit, transpile, Circuit};
use crate::graph::{all_lightcones, build_graph, locality_metrics, LocalityReport};
use crate::noise::read_dataset;
use crate::{Error, Result};

/// Locality metrics of one named circuit.
#[derive(Debug, Clone, PartialEq)]
pub struct CircuitLocality {
    pub name: String,
    pub report: LocalityReport,
}

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::io(format!("reading {}", path.display()), e))
}

/// Loads circuits from a dataset (`.jsonl`), a directory of `.qasm` files
/// (sorted by file name) or a single QASM file.
pub fn load_circuits(path: &Path) -> Result<Vec<(String, Circuit)>> {
    if path.is_dir() {
        let mut files: Vec<_> = std::fs::read_dir(path)
            .map_err(|e| Error::io(format!("listing {}", path.display()), e))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "qasm"))
            .collect();
        files.sort();
        if files.is_empty() {
            return Err(Error::Data(format!("no .qasm files in {}", path.display())));
        }
        return files
            .into_iter()
            .map(|p| {
                let name = p.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
                let c = parse_circuit(&read(&p)?).map_err(|e| Error::Data(format!("{}: {e}", p.display())))?;
                Ok((name, c))
            })
            .collect();
    }
    if path.extension().is_some_and(|x| x == "jsonl") {
        let samples = read_dataset(path).map_err(Error::Data)?;
        return Ok(samples.into_iter().map(|s| (format!("c{}", s.circuit_id), s.circuit)).collect());
    }
    let name = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    let c = parse_circuit(&read(path)?).map_err(|e| Error::Data(format!("{}: {e}", path.display())))?;
    Ok(vec![(name, c)])
}

/// Builds each circuit's graph (lowering to native gates first when
/// needed) and measures its lightcones.
pub fn lightcone_stats(circuits: &[(String, Circuit)]) -> Result<Vec<CircuitLocality>> {
    circuits
        .iter()
        .map(|(name, c)| {
            let native = if c.is_native() { c.clone() } else { transpile(c)? };
            let g = build_graph(&native)?;
            let report = locality_metrics(&g, &all_lightcones(&g))?;
            Ok(CircuitLocality { name: name.clone(), report })
        })
        .collect()
}

fn opt(x: Option<f64>) -> String {
    x.map(fmt_f64).unwrap_or_default()
}

/// Per-qubit rows of every circuit, a `summary` row per circuit with the
/// means, and a final `corpus` row averaging the circuit summaries. The
/// Jaccard column is filled on summary rows only and left empty when
/// fewer than two qubits are measured.
pub(crate) fn lightcone_table(stats: &[CircuitLocality]) -> CsvTable {
    let mut t = CsvTable::new(["circuit", "qubit", "n_nodes", "coverage", "internal_frac", "boundary", "mean_jaccard"]);
    let mut sums = [0.0; 3];
    let mut jac = (0.0, 0usize);
    for s in stats {
        let r = &s.report;
        for q in &r.per_qubit {
            t.push([
                s.name.clone(),
                format!("q{}", q.qubit),
                r.n_nodes.to_string(),
                fmt_f64(q.coverage),
                fmt_f64(q.internal_frac),
                fmt_f64(q.boundary),
                String::new(),
            ]);
        }
        let means = [r.mean_coverage(), r.mean_internal_frac(), r.mean_boundary()];
        let j = r.mean_pairwise_jaccard();
        t.push([
            s.name.clone(),
            "summary".into(),
            r.n_nodes.to_string(),
            fmt_f64(means[0]),
            fmt_f64(means[1]),
            fmt_f64(means[2]),
            opt(j),
        ]);
        for (a, m) in sums.iter_mut().zip(means) {
            *a += m;
        }
        if let Some(j) = j {
            jac.0 += j;
            jac.1 += 1;
        }
    }
    if !stats.is_empty() {
        let k = stats.len() as f64;
        let nodes = stats.iter().map(|s| s.report.n_nodes as f64).sum::<f64>() / k;
        t.push([
            "corpus".to_string(),
            "summary".into(),
            fmt_f64(nodes),
            fmt_f64(sums[0] / k),
            fmt_f64(sums[1] / k),
            fmt_f64(sums[2] / k),
            opt((jac.1 > 0).then(|| jac.0 / jac.1 as f64)),
        ]);
    }
    t
}

pub fn write_lightcone_csv(path: &Path, stats: &[CircuitLocality]) -> Result<()> {
    lightcone_table(stats).write(path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::{Basis, GateKind};

    fn chain() -> Circuit {
        let mut c = Circuit::new(1);
        c.push(GateKind::Sx, &[0], None);
        c.push(GateKind::Rz, &[0], Some(0.3));
        c.measure(0, Basis::Z);
        c
    }

    #[test]
    fn single_qubit_chain_covers_everything() {
        let s = lightcone_stats(&[("a".into(), chain())]).unwrap();
        let t = lightcone_table(&s);
        assert_eq!(t.rows[0], ["a", "q0", "3", "1", "1", "0", ""]);
        assert_eq!(t.rows[1], ["a", "summary", "3", "1", "1", "0", ""]);
        assert_eq!(t.rows[2], ["corpus", "summary", "3", "1", "1", "0", ""]);
    }

    #[test]
    fn corpus_of_identical_circuits_matches_one() {
        let mut c = Circuit::new(3);
        c.push(GateKind::Ecr, &[0, 1], None);
        c.push(GateKind::Sx, &[2], None);
        c.push(GateKind::Ecr, &[1, 2], None);
        c.measure(0, Basis::Z);
        c.measure(2, Basis::X);
        let one = lightcone_table(&lightcone_stats(&[("x".into(), c.clone())]).unwrap());
        let many = lightcone_table(&lightcone_stats(&vec![("x".to_string(), c); 4]).unwrap());
        let last = |t: &CsvTable| t.rows.last().unwrap()[2..].to_vec();
        assert_eq!(last(&one), last(&many));
        assert_eq!(one.rows[2][2..], last(&one)[..]);
    }

    #[test]
    fn logical_circuits_are_lowered() {
        let mut c = Circuit::new(2);
        c.push(GateKind::Rx, &[0], Some(0.2));
        c.push(GateKind::Rzz, &[0, 1], Some(0.4));
        c.measure(1, Basis::Z);
        let s = lightcone_stats(&[("l".into(), c)]).unwrap();
        assert_eq!(s[0].report.n_nodes, 5 + 13 + 1);
    }
}
