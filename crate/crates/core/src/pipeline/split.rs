use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::{Error, Result};

/// Positions into the sample list, each side sorted ascending.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Split {
    pub train: Vec<usize>,
    pub val: Vec<usize>,
}

/// Partitions `n_samples` circuits into disjoint train and validation
/// sets. Whole circuits move together, so no circuit contributes qubits to
/// both sides. Circuits beyond `n_train + n_val` are left out.
pub fn split_circuits(n_samples: usize, n_train: usize, n_val: usize, seed: u64) -> Result<Split> {
    if n_train + n_val > n_samples {
        return Err(Error::Data(format!(
            "dataset holds {n_samples} circuits, split needs {n_train} + {n_val}"
        )));
    }
    let mut order: Vec<usize> = (0..n_samples).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut train = order[..n_train].to_vec();
    let mut val = order[n_train..n_train + n_val].to_vec();
    train.sort_unstable();
    val.sort_unstable();
    Ok(Split { train, val })
}
