//! Chance-constrained robust mean-variance portfolio optimization.
//!
//! The pipeline runs from price history to validated robust portfolios:
//!
//! * [`stats`] turns a price CSV into percentage returns, an expected-return
//!   vector and a population covariance matrix.
//! * [`distributions`] provides the error function and its inverse, the
//!   moments of weighted normal sums, and the density / CDF of positively
//!   weighted sums of independent exponentials.
//! * [`models`] expresses the nominal Markowitz problem and its two
//!   deterministic robust counterparts as an objective plus a single
//!   return-constraint slack (`>= 0` is feasible).
//! * [`solver`] minimizes over the long-only simplex with an augmented
//!   Lagrangian / projected-gradient scheme, and ships an exhaustive lattice
//!   oracle for small problems.
//! * [`analysis`] sweeps efficient frontiers, builds dissimilarity matrices
//!   and estimates chance-constraint satisfaction by Monte Carlo.
//! * [`io`] and [`cli`] define the file formats and the command-line tool.

// `!(x > 0.0)` is used deliberately so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
// Matrix code reads more clearly with explicit index loops.
#![allow(clippy::needless_range_loop)]

pub mod analysis;
pub mod cli;
pub mod distributions;
pub mod fixtures;
pub mod io;
pub mod models;
pub mod solver;
pub mod stats;

pub use analysis::{
    dissimilarity_matrix, monte_carlo_validate, sweep_frontier, AnalysisError, DissimilarityMatrix,
    Frontier, FrontierPoint,
};
pub use distributions::{
    erf, erf_inv, hypoexp_cdf, hypoexp_pdf, weighted_normal_params, DistributionError,
    WeightedExponentialSum, WeightedNormalSum,
};
pub use models::{ModelError, PerturbationDistribution, PerturbationSpec, PortfolioModel, Variant};
pub use solver::{
    grid_oracle, project_to_simplex, solve, Solution, SolverConfig, SolverError, Status,
};
pub use stats::{
    compute_returns, estimate_statistics, load_prices, PriceSeries, ReturnMatrix, ReturnStatistics,
    StatsError,
};
