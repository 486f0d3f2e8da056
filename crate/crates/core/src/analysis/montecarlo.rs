//! Empirical chance-constraint satisfaction.
//!
//! Draws are split into fixed-size batches; batch `b` uses ChaCha8 stream
//! `b` under the caller's seed, so results do not depend on thread count
//! or completion order.

use rayon::prelude::*;

use super::AnalysisError;
use crate::distributions::sampling::Sampler;
use crate::models::{ModelError, PerturbationDistribution, PerturbationSpec};
use crate::stats::ReturnStatistics;

const BATCH: usize = 1 << 16;

/// Fraction of draws with `mu0' x + sum shift_j x_j Z_j >= tau`.
pub fn monte_carlo_validate(
    weights: &[f64],
    stats: &ReturnStatistics,
    spec: &PerturbationSpec,
    tau: f64,
    samples: usize,
    seed: u64,
) -> Result<f64, AnalysisError> {
    let n = stats.num_assets();
    for found in [weights.len(), spec.len()] {
        if found != n {
            return Err(ModelError::DimensionMismatch { expected: n, found }.into());
        }
    }
    if samples == 0 {
        return Err(AnalysisError::NoSamples);
    }
    let base = stats.expected_return(weights);
    let hits: usize = batches(samples)
        .into_par_iter()
        .map(|(b, len)| {
            let mut draw = perturbation_draw(weights, spec, seed, b as u64);
            (0..len).filter(|_| base + draw() >= tau).count()
        })
        .sum();
    Ok(hits as f64 / samples as f64)
}

/// Draws of `sum shift_j x_j Z_j`, in batch order.
pub fn sample_perturbation_sums(
    weights: &[f64],
    spec: &PerturbationSpec,
    samples: usize,
    seed: u64,
) -> Vec<f64> {
    batches(samples)
        .into_par_iter()
        .flat_map_iter(|(b, len)| {
            let mut draw = perturbation_draw(weights, spec, seed, b as u64);
            (0..len).map(move |_| draw()).collect::<Vec<_>>()
        })
        .collect()
}

/// `3 sqrt(beta (1 - beta) / samples)`: three binomial standard errors.
pub fn one_sided_sampling_bound(beta: f64, samples: usize) -> f64 {
    3.0 * (beta * (1.0 - beta) / samples as f64).sqrt()
}

fn batches(samples: usize) -> Vec<(usize, usize)> {
    (0..samples.div_ceil(BATCH))
        .map(|b| (b, BATCH.min(samples - b * BATCH)))
        .collect()
}

fn perturbation_draw<'a>(
    weights: &'a [f64],
    spec: &'a PerturbationSpec,
    seed: u64,
    stream: u64,
) -> impl FnMut() -> f64 + 'a {
    let mut sampler = Sampler::new(seed, stream);
    let coefficients: Vec<f64> = spec
        .shifts()
        .iter()
        .zip(weights)
        .map(|(s, x)| s * x)
        .collect();
    move || match spec.distribution() {
        PerturbationDistribution::Normal { means, stddevs } => coefficients
            .iter()
            .zip(means.iter().zip(stddevs))
            .map(|(c, (m, s))| c * sampler.normal(*m, *s))
            .sum(),
        PerturbationDistribution::Exponential { rates } => coefficients
            .iter()
            .zip(rates)
            .map(|(c, r)| c * sampler.exponential(*r))
            .sum(),
    }
}
