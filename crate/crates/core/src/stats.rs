//! Poisson sampling and parametric-bootstrap machinery shared by the
//! counting simulations.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use rayon::prelude::*;

use crate::error::{Error, Result};

/// Draws one Poisson count; a non-positive mean always yields zero, so
/// probability-0 outcomes never produce counts.
pub fn sample_poisson<R: Rng>(rng: &mut R, mean: f64) -> f64 {
    if mean <= 0.0 {
        return 0.0;
    }
    let dist = Poisson::new(mean).expect("mean checked positive");
    // rand_distr 0.4 returns -1 when the mean is so small that exp(-mean)
    // rounds to 1; a zero count is the correct draw there
    dist.sample(rng).max(0.0)
}

/// Deterministic per-task seed derivation (splitmix64 over seed ⊕ index),
/// so parallel resamples are independent of scheduling order.
pub fn derive_seed(seed: u64, index: u64) -> u64 {
    let mut z = seed.wrapping_add(0x9E3779B97F4A7C15u64.wrapping_mul(index.wrapping_add(1)));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58476D1CE4E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D049BB133111EB);
    z ^ (z >> 31)
}

pub fn seeded_rng(seed: u64) -> ChaCha8Rng {
    use rand::SeedableRng;
    ChaCha8Rng::seed_from_u64(seed)
}

/// Mean and sample standard deviation.
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    let mean = values.iter().sum::<f64>() / n as f64;
    if n < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (mean, var.sqrt())
}

/// Parametric bootstrap over grouped counts: each count is resampled as
/// Poisson(count), the functional is re-evaluated per resample, and the
/// per-output mean and sample standard deviation are returned.
///
/// Resamples run in parallel; each draws from its own derived seed, so the
/// result is independent of the reduction order.
pub fn poisson_bootstrap_multi<F>(
    counts: &[Vec<f64>],
    functional: F,
    n_resamples: usize,
    seed: u64,
) -> Result<Vec<(f64, f64)>>
where
    F: Fn(&[Vec<f64>]) -> Result<Vec<f64>> + Sync,
{
    if n_resamples < 2 {
        return Err(Error::ParameterOutOfRange {
            name: "n_resamples",
            value: n_resamples as f64,
            min: 2.0,
            max: f64::INFINITY,
        });
    }
    let samples: Vec<Vec<f64>> = (0..n_resamples)
        .into_par_iter()
        .map(|b| {
            let mut rng = seeded_rng(derive_seed(seed, b as u64));
            let resampled: Vec<Vec<f64>> = counts
                .iter()
                .map(|group| group.iter().map(|&c| sample_poisson(&mut rng, c)).collect())
                .collect();
            functional(&resampled).map_err(|e| Error::BootstrapResample {
                index: b,
                source: Box::new(e),
            })
        })
        .collect::<Result<_>>()?;

    let n_outputs = samples.first().map_or(0, Vec::len);
    let mut out = Vec::with_capacity(n_outputs);
    for k in 0..n_outputs {
        let column: Vec<f64> = samples.iter().map(|s| s[k]).collect();
        out.push(mean_std(&column));
    }
    Ok(out)
}
