use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};

use super::{Expectations, NoiseError};

/// Replaces exact expectations by finite-shot estimates: each qubit draws
/// `Binomial(shots, (1 + ⟨P⟩)/2)` and maps the frequency back to `[−1, 1]`.
pub fn sample_shots(expectations: &Expectations, shots: u64, seed: u64) -> Result<Expectations, NoiseError> {
    if shots == 0 {
        return Err(NoiseError::NoShots);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    expectations
        .iter()
        .map(|(&q, &v)| {
            let p = ((1.0 + v) / 2.0).clamp(0.0, 1.0);
            let dist = Binomial::new(shots, p).map_err(|_| NoiseError::InvalidPoint(shots as f64, v))?;
            let k = dist.sample(&mut rng) as f64;
            Ok((q, 2.0 * k / shots as f64 - 1.0))
        })
        .collect()
}
