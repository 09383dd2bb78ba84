use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

pub const DEFAULT_RESAMPLES: usize = 10_000;

/// Paired bootstrap over documents: the fraction of resamples whose mean
/// difference `a - b` is not positive. Exact ties count half.
pub fn bootstrap_significance(a: &[f64], b: &[f64], resamples: usize, seed: u64) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::invalid(format!(
            "paired scores differ in length: {} vs {}",
            a.len(),
            b.len()
        )));
    }
    if a.len() < 2 {
        return Err(Error::invalid("bootstrap needs at least 2 documents"));
    }
    if resamples == 0 {
        return Err(Error::invalid("bootstrap needs at least one resample"));
    }
    let diff: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let n = diff.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut losses = 0.0;
    for _ in 0..resamples {
        let sum: f64 = (0..n).map(|_| diff[rng.gen_range(0..n)]).sum();
        if sum < 0.0 {
            losses += 1.0;
        } else if sum == 0.0 {
            losses += 0.5;
        }
    }
    Ok(losses / resamples as f64)
}
