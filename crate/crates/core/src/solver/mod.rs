//! Minimization of portfolio risk over the long-only simplex subject to one
//! return constraint.
//!
//! The constraint is handled by an augmented Lagrangian (method of
//! multipliers for a single inequality). Each subproblem is solved by
//! projected gradient with Armijo backtracking; the simplex projection keeps
//! `sum x = 1` and `x >= 0` exact. The nonconvex exponential variant is
//! solved from several deterministic starts and the best feasible result is
//! kept; infeasible starts are first pulled toward the most robust portfolio
//! until the constraint holds, because the exponential slack is flat where
//! its CDF saturates.

mod oracle;
mod simplex;

pub use oracle::{grid_oracle, objective_lipschitz_bound, MAX_ORACLE_ASSETS};
pub use simplex::{maximize_on_simplex, project_to_simplex};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::distributions::sampling::Sampler;
use crate::models::{max_guaranteed_return, ModelError, PortfolioModel, Variant};
use simplex::projected_gradient;

/// Slack above which a returned point counts as feasible.
pub const FEASIBILITY_TOLERANCE: f64 = 1e-6;
const INITIAL_PENALTY: f64 = 10.0;
const MAX_PENALTY: f64 = 1e12;
const MAX_OUTER_ITERATIONS: usize = 200;
const STALL_LIMIT: usize = 5;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolverError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("invalid solver configuration: {0}")]
    ConfigInvalid(String),
    #[error("grid oracle supports at most {max} assets, got {found}")]
    TooManyAssets { max: usize, found: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverConfig {
    /// Threshold on the projected-gradient residual and constraint violation.
    pub tolerance: f64,
    /// Cap on projected-gradient iterations per subproblem.
    pub max_iterations: usize,
    /// Starts for the nonconvex variant, besides the nominal warm start.
    pub multistart_count: usize,
    pub rng_seed: u64,
    /// Factor applied to the penalty when the violation stalls.
    pub penalty_growth: f64,
    /// Lattice resolution of the grid oracle.
    pub grid_step: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            tolerance: 1e-8,
            max_iterations: 10_000,
            multistart_count: 16,
            rng_seed: 42,
            penalty_growth: 10.0,
            grid_step: 1e-3,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<(), SolverError> {
        if !(self.tolerance > 0.0 && self.tolerance.is_finite()) {
            return Err(SolverError::ConfigInvalid(format!(
                "tolerance {} must be positive",
                self.tolerance
            )));
        }
        if self.max_iterations == 0 {
            return Err(SolverError::ConfigInvalid(
                "max_iterations must be >= 1".into(),
            ));
        }
        if self.multistart_count == 0 {
            return Err(SolverError::ConfigInvalid(
                "multistart_count must be >= 1".into(),
            ));
        }
        if !(self.penalty_growth > 1.0 && self.penalty_growth.is_finite()) {
            return Err(SolverError::ConfigInvalid(format!(
                "penalty_growth {} must exceed 1",
                self.penalty_growth
            )));
        }
        if !(self.grid_step > 0.0 && self.grid_step < 1.0) {
            return Err(SolverError::ConfigInvalid(format!(
                "grid_step {} must lie in (0, 1)",
                self.grid_step
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Converged,
    Infeasible,
    NotConverged,
}

impl Status {
    pub fn as_str(&self) -> &'static str {
        match self {
            Status::Converged => "converged",
            Status::Infeasible => "infeasible",
            Status::NotConverged => "not_converged",
        }
    }
}

/// Result of a solve. Infeasible solutions carry no weights and NaN risk.
#[derive(Debug, Clone, PartialEq)]
pub struct Solution {
    pub weights: Vec<f64>,
    pub risk: f64,
    pub status: Status,
    pub return_slack: f64,
    pub starts_used: usize,
    pub best_start_index: usize,
}

impl Solution {
    pub(crate) fn infeasible(starts_used: usize) -> Self {
        Self {
            weights: Vec::new(),
            risk: f64::NAN,
            status: Status::Infeasible,
            return_slack: f64::NAN,
            starts_used,
            best_start_index: 0,
        }
    }

    pub fn is_converged(&self) -> bool {
        self.status == Status::Converged
    }
}

struct Run {
    x: Vec<f64>,
    risk: f64,
    slack: f64,
    converged: bool,
}

/// Solves `model` over the simplex.
///
/// Targets above the model's feasible return range yield
/// [`Status::Infeasible`] rather than an error.
pub fn solve(model: &PortfolioModel, config: &SolverConfig) -> Result<Solution, SolverError> {
    config.validate()?;
    let n = model.num_assets();
    let (anchor, tau_max) = max_guaranteed_return(model)?;
    if model.tau() > tau_max + 1e-9 * tau_max.abs().max(1.0) {
        return Ok(Solution::infeasible(0));
    }

    let starts = if model.variant().is_convex() {
        vec![vec![1.0 / n as f64; n]]
    } else {
        nonconvex_starts(model, config)?
            .into_iter()
            .map(|s| restore_feasibility(model, s, &anchor))
            .collect::<Result<Vec<_>, _>>()?
    };

    let runs = starts
        .par_iter()
        .map(|start| augmented_lagrangian(model, start, config))
        .collect::<Result<Vec<Run>, SolverError>>()?;

    let tie = |risk: f64| config.tolerance * risk.abs().max(1.0);
    let mut best: Option<usize> = None;
    for (i, run) in runs.iter().enumerate() {
        if run.slack < -FEASIBILITY_TOLERANCE || !run.risk.is_finite() {
            continue;
        }
        match best {
            Some(b) if run.risk >= runs[b].risk - tie(runs[b].risk) => {}
            _ => best = Some(i),
        }
    }

    let (index, status) = match best {
        Some(b) => {
            let status = if runs[b].converged {
                Status::Converged
            } else {
                Status::NotConverged
            };
            (b, status)
        }
        None => {
            let least_violating = runs
                .iter()
                .enumerate()
                .max_by(|a, b| a.1.slack.total_cmp(&b.1.slack).then(b.0.cmp(&a.0)))
                .map(|(i, _)| i)
                .unwrap_or(0);
            (least_violating, Status::NotConverged)
        }
    };
    let run = &runs[index];
    Ok(Solution {
        weights: run.x.clone(),
        risk: run.risk,
        status,
        return_slack: run.slack,
        starts_used: runs.len(),
        best_start_index: index,
    })
}

/// Nominal optimum (when it exists), centroid, vertices, then seeded
/// uniform simplex samples, truncated to `multistart_count` plus the warm
/// start.
fn nonconvex_starts(
    model: &PortfolioModel,
    config: &SolverConfig,
) -> Result<Vec<Vec<f64>>, SolverError> {
    let n = model.num_assets();
    let mut starts = Vec::with_capacity(config.multistart_count + 1);
    let nominal = PortfolioModel::new(model.stats().clone(), model.tau(), Variant::Nominal)?;
    let warm = solve(&nominal, config)?;
    if warm.status == Status::Converged {
        starts.push(warm.weights);
    }

    let mut seeded = Vec::with_capacity(config.multistart_count);
    seeded.push(vec![1.0 / n as f64; n]);
    for i in 0..n {
        seeded.push((0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect());
    }
    let mut sampler = Sampler::new(config.rng_seed, 0);
    while seeded.len() < config.multistart_count {
        let draws: Vec<f64> = (0..n).map(|_| sampler.exponential(1.0)).collect();
        let total: f64 = draws.iter().sum();
        seeded.push(draws.iter().map(|d| d / total).collect());
    }
    seeded.truncate(config.multistart_count);
    starts.extend(seeded);
    Ok(starts)
}

/// Moves an infeasible start toward `anchor` (the most robust portfolio)
/// until the constraint holds, by bisection on the connecting segment.
///
/// Where the CDF saturates the slack is flat and carries no gradient, so
/// multiplier updates alone cannot leave that region.
fn restore_feasibility(
    model: &PortfolioModel,
    start: Vec<f64>,
    anchor: &[f64],
) -> Result<Vec<f64>, ModelError> {
    if model.constraint_slack(&start)? >= 0.0 || model.constraint_slack(anchor)? < 0.0 {
        return Ok(start);
    }
    let blend = |t: f64| -> Vec<f64> {
        start
            .iter()
            .zip(anchor)
            .map(|(s, a)| (1.0 - t) * s + t * a)
            .collect()
    };
    let (mut lo, mut hi) = (0.0, 1.0);
    for _ in 0..50 {
        let mid = 0.5 * (lo + hi);
        if model.constraint_slack(&blend(mid))? >= 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(project_to_simplex(&blend(hi)))
}

/// Method of multipliers for `min f(x)` s.t. `g(x) >= 0`, `x` in the simplex.
fn augmented_lagrangian(
    model: &PortfolioModel,
    start: &[f64],
    config: &SolverConfig,
) -> Result<Run, SolverError> {
    let tol = config.tolerance;
    let mut x = project_to_simplex(start);
    let mut multiplier = 0.0;
    let mut penalty = INITIAL_PENALTY;
    let mut previous_violation = f64::INFINITY;
    let mut best_violation = f64::INFINITY;
    let mut stalled = 0;
    let mut converged = false;

    for _ in 0..MAX_OUTER_ITERATIONS {
        let mut failure: Option<ModelError> = None;
        let outcome = projected_gradient(
            |point| match merit(model, point, multiplier, penalty) {
                Ok(v) => v,
                Err(e) => {
                    failure.get_or_insert(e);
                    (f64::NAN, vec![0.0; point.len()])
                }
            },
            &x,
            tol,
            config.max_iterations,
        );
        if let Some(e) = failure {
            return Err(e.into());
        }
        x = outcome.x;
        let slack = model.constraint_slack(&x)?;
        let violation = (-slack).max(0.0);
        let next_multiplier = (multiplier - penalty * slack).max(0.0);
        let complementarity = (next_multiplier * slack).abs();
        let multiplier_shift = (next_multiplier - multiplier).abs();
        multiplier = next_multiplier;
        if outcome.converged
            && violation <= tol
            && complementarity <= tol
            && multiplier_shift <= tol.sqrt() * multiplier.max(1.0)
        {
            converged = true;
            break;
        }
        if violation > 0.25 * previous_violation {
            penalty = (penalty * config.penalty_growth).min(MAX_PENALTY);
        }
        previous_violation = violation;
        // Give up once the penalty is maxed out and the violation has
        // stopped improving: the start is stuck where the slack is flat.
        if violation < best_violation {
            best_violation = violation;
            stalled = 0;
        } else if penalty >= MAX_PENALTY {
            stalled += 1;
            if stalled >= STALL_LIMIT {
                break;
            }
        }
    }

    let slack = model.constraint_slack(&x)?;
    Ok(Run {
        risk: model.objective(&x)?,
        converged: converged && slack >= -FEASIBILITY_TOLERANCE,
        slack,
        x,
    })
}

/// `f(x) + penalty/2 * max(0, multiplier/penalty - g(x))^2` and its gradient.
fn merit(
    model: &PortfolioModel,
    x: &[f64],
    multiplier: f64,
    penalty: f64,
) -> Result<(f64, Vec<f64>), ModelError> {
    let risk = model.objective(x)?;
    let mut grad = model.objective_gradient(x)?;
    let slack = model.constraint_slack(x)?;
    let shortfall = (multiplier / penalty - slack).max(0.0);
    if shortfall > 0.0 {
        let slack_grad = model.slack_gradient(x)?;
        for (g, sg) in grad.iter_mut().zip(slack_grad) {
            *g -= penalty * shortfall * sg;
        }
    }
    Ok((risk + 0.5 * penalty * shortfall * shortfall, grad))
}
