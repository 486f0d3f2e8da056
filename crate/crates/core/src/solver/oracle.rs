//! Exhaustive lattice search over the simplex, used as an independent
//! reference for the iterative solver on small problems.

use rayon::prelude::*;

use super::{Solution, SolverError, Status};
use crate::models::PortfolioModel;
use crate::stats::ReturnStatistics;

pub const MAX_ORACLE_ASSETS: usize = 4;

/// Evaluates every point `k / N` of the simplex lattice with `N = round(1/step)`
/// and returns the lowest-risk point whose constraint slack is `>= 0`.
///
/// Ties keep the first point in lexicographic lattice order.
pub fn grid_oracle(model: &PortfolioModel, step: f64) -> Result<Solution, SolverError> {
    let n = model.num_assets();
    if n > MAX_ORACLE_ASSETS {
        return Err(SolverError::TooManyAssets {
            max: MAX_ORACLE_ASSETS,
            found: n,
        });
    }
    if !(step > 0.0 && step <= 1.0) {
        return Err(SolverError::ConfigInvalid(format!(
            "grid step {step} not in (0, 1]"
        )));
    }
    let resolution = (1.0 / step).round().max(1.0) as usize;

    if n == 1 {
        let x = vec![1.0];
        let slack = model.constraint_slack(&x)?;
        let risk = model.objective(&x)?;
        let status = if slack >= 0.0 {
            Status::Converged
        } else {
            Status::Infeasible
        };
        return Ok(Solution {
            weights: x,
            risk,
            status,
            return_slack: slack,
            starts_used: 1,
            best_start_index: 0,
        });
    }

    // Partition on the first coordinate; each slice scans the remaining
    // coordinates sequentially in lexicographic order.
    let best = (0..=resolution)
        .into_par_iter()
        .map(|first| scan_slice(model, n, resolution, first))
        .collect::<Result<Vec<_>, SolverError>>()?
        .into_iter()
        .flatten()
        .fold(None::<Candidate>, |acc, c| match acc {
            Some(a) if a.risk <= c.risk => Some(a),
            _ => Some(c),
        });

    Ok(match best {
        Some(c) => Solution {
            weights: c.x,
            risk: c.risk,
            status: Status::Converged,
            return_slack: c.slack,
            starts_used: 1,
            best_start_index: 0,
        },
        None => Solution::infeasible(1),
    })
}

struct Candidate {
    x: Vec<f64>,
    risk: f64,
    slack: f64,
}

fn scan_slice(
    model: &PortfolioModel,
    n: usize,
    resolution: usize,
    first: usize,
) -> Result<Option<Candidate>, SolverError> {
    let scale = resolution as f64;
    let mut counts = vec![0usize; n];
    counts[0] = first;
    let mut best: Option<Candidate> = None;
    let mut x = vec![0.0; n];
    let mut visit = |counts: &[usize]| -> Result<(), SolverError> {
        for (xi, &c) in x.iter_mut().zip(counts) {
            *xi = c as f64 / scale;
        }
        let risk = model.objective(&x)?;
        if best.as_ref().is_some_and(|b| b.risk <= risk) {
            return Ok(());
        }
        let slack = model.constraint_slack(&x)?;
        if slack >= 0.0 {
            best = Some(Candidate {
                x: x.clone(),
                risk,
                slack,
            });
        }
        Ok(())
    };
    compositions(&mut counts, 1, resolution - first, &mut visit)?;
    Ok(best)
}

/// Visits every assignment of `remaining` units to `counts[position..]`,
/// with the last coordinate absorbing the rest.
fn compositions<F>(
    counts: &mut [usize],
    position: usize,
    remaining: usize,
    visit: &mut F,
) -> Result<(), SolverError>
where
    F: FnMut(&[usize]) -> Result<(), SolverError>,
{
    if position == counts.len() - 1 {
        counts[position] = remaining;
        return visit(counts);
    }
    for c in 0..=remaining {
        counts[position] = c;
        compositions(counts, position + 1, remaining - c, visit)?;
    }
    Ok(())
}

/// Bound on `||grad (1/2 x' Sigma x)||_2 = ||Sigma x||_2` over the simplex:
/// the largest column norm of `Sigma`, attained at a vertex.
pub fn objective_lipschitz_bound(stats: &ReturnStatistics) -> f64 {
    let n = stats.num_assets();
    (0..n)
        .map(|j| {
            (0..n)
                .map(|i| stats.sigma[i][j].powi(2))
                .sum::<f64>()
                .sqrt()
        })
        .fold(0.0, f64::max)
}
