//! Frontier sweeps, model dissimilarity and Monte Carlo validation.

mod montecarlo;

pub use montecarlo::{monte_carlo_validate, one_sided_sampling_bound, sample_perturbation_sums};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::models::{ModelError, PortfolioModel};
use crate::solver::{solve, SolverConfig, SolverError, Status};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AnalysisError {
    #[error("target returns must be strictly increasing (position {0})")]
    UnsortedTaus(usize),
    #[error("risk vectors differ in length: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("{0} labels for {1} risk vectors")]
    LabelMismatch(usize, usize),
    #[error("non-finite risk in vector `{0}`")]
    NonFiniteRisk(String),
    #[error("need at least one sample")]
    NoSamples,
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Solver(#[from] SolverError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct FrontierPoint {
    pub tau: f64,
    /// Empty for infeasible points.
    pub weights: Vec<f64>,
    pub risk: f64,
    pub status: Status,
}

/// Minimal risk at each target return, in increasing target order.
#[derive(Debug, Clone, PartialEq)]
pub struct Frontier {
    pub model_tag: String,
    pub points: Vec<FrontierPoint>,
}

impl Frontier {
    pub fn taus(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.tau).collect()
    }

    pub fn risks(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.risk).collect()
    }
}

/// Solves `template` independently at every target return in `taus`.
///
/// The template's own target is ignored. Points are solved in parallel and
/// returned in input order; infeasible targets are kept with their status.
pub fn sweep_frontier(
    template: &PortfolioModel,
    taus: &[f64],
    config: &SolverConfig,
) -> Result<Frontier, AnalysisError> {
    if let Some(i) = taus.windows(2).position(|w| !(w[1] > w[0])) {
        return Err(AnalysisError::UnsortedTaus(i + 1));
    }
    config.validate()?;
    let points = taus
        .par_iter()
        .map(|&tau| {
            let model = template.with_tau(tau)?;
            let sol = solve(&model, config)?;
            Ok(FrontierPoint {
                tau,
                weights: sol.weights,
                risk: sol.risk,
                status: sol.status,
            })
        })
        .collect::<Result<Vec<_>, AnalysisError>>()?;
    Ok(Frontier {
        model_tag: template.variant().tag().to_owned(),
        points,
    })
}

/// Pairwise Euclidean distances between risk vectors on a common grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DissimilarityMatrix {
    pub labels: Vec<String>,
    #[serde(rename = "matrix")]
    pub d: Vec<Vec<f64>>,
}

impl DissimilarityMatrix {
    pub fn get(&self, p: usize, q: usize) -> f64 {
        self.d[p][q]
    }
}

pub fn dissimilarity_matrix(
    risk_vectors: &[Vec<f64>],
    labels: &[String],
) -> Result<DissimilarityMatrix, AnalysisError> {
    if labels.len() != risk_vectors.len() {
        return Err(AnalysisError::LabelMismatch(
            labels.len(),
            risk_vectors.len(),
        ));
    }
    if let Some(first) = risk_vectors.first() {
        for v in risk_vectors {
            if v.len() != first.len() {
                return Err(AnalysisError::LengthMismatch(first.len(), v.len()));
            }
        }
    }
    for (v, label) in risk_vectors.iter().zip(labels) {
        if v.iter().any(|r| !r.is_finite()) {
            return Err(AnalysisError::NonFiniteRisk(label.clone()));
        }
    }
    let k = risk_vectors.len();
    let mut d = vec![vec![0.0; k]; k];
    for p in 0..k {
        for q in p + 1..k {
            let dist = risk_vectors[p]
                .iter()
                .zip(&risk_vectors[q])
                .map(|(a, b)| (a - b).powi(2))
                .sum::<f64>()
                .sqrt();
            d[p][q] = dist;
            d[q][p] = dist;
        }
    }
    Ok(DissimilarityMatrix {
        labels: labels.to_vec(),
        d,
    })
}
