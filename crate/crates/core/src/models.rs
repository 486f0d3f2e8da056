//! The nominal Markowitz problem and its two chance-constrained robust
//! counterparts.
//!
//! Every variant shares the objective `1/2 x' Sigma x` over the long-only
//! simplex and differs only in the return constraint, which is exposed as a
//! slack that is nonnegative exactly when the constraint holds:
//!
//! * nominal: `mu0' x - tau`
//! * normal perturbations: `mu0' x + sum shift_j m_j x_j
//!   + sqrt(2) erfinv(1 - 2 beta) sqrt(sum (s_j shift_j x_j)^2) - tau`
//! * exponential perturbations: `(1 - beta) - P(Y <= tau - mu0' x)` with
//!   `Y = sum shift_j x_j Z_j`, `Z_j ~ Exp(lambda_j)`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::distributions::{hypoexp_cdf, try_erf_inv, DistributionError, WeightedExponentialSum};
use crate::stats::ReturnStatistics;

/// Terms with `shift_j * x_j` below this are dropped from the exponential sum.
pub const ZERO_WEIGHT_THRESHOLD: f64 = 1e-9;
/// Central finite-difference step for the exponential slack gradient.
pub const FD_STEP: f64 = 1e-6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("invalid model: {0}")]
    InvalidModel(String),
    #[error(transparent)]
    Distribution(#[from] DistributionError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PerturbationDistribution {
    Normal { means: Vec<f64>, stddevs: Vec<f64> },
    Exponential { rates: Vec<f64> },
}

/// Per-asset basic shifts (the nonzero entry of each shift vector) and the
/// distribution of the perturbations multiplying them.
#[derive(Debug, Clone, PartialEq)]
pub struct PerturbationSpec {
    shifts: Vec<f64>,
    distribution: PerturbationDistribution,
}

impl PerturbationSpec {
    pub fn new(
        shifts: Vec<f64>,
        distribution: PerturbationDistribution,
    ) -> Result<Self, ModelError> {
        let n = shifts.len();
        if shifts.iter().any(|s| !(*s >= 0.0 && s.is_finite())) {
            return Err(ModelError::InvalidModel(
                "shifts must be finite and >= 0".into(),
            ));
        }
        match &distribution {
            PerturbationDistribution::Normal { means, stddevs } => {
                check_len(n, means.len())?;
                check_len(n, stddevs.len())?;
                if means.iter().any(|m| !m.is_finite()) {
                    return Err(ModelError::InvalidModel("means must be finite".into()));
                }
                if stddevs.iter().any(|s| !(*s > 0.0 && s.is_finite())) {
                    return Err(ModelError::InvalidModel("stddevs must be positive".into()));
                }
            }
            PerturbationDistribution::Exponential { rates } => {
                check_len(n, rates.len())?;
                if rates.iter().any(|r| !(*r > 0.0 && r.is_finite())) {
                    return Err(ModelError::InvalidModel("rates must be positive".into()));
                }
            }
        }
        Ok(Self {
            shifts,
            distribution,
        })
    }

    /// Standard normal perturbations (`m = 0`, `s = 1`).
    pub fn standard_normal(shifts: Vec<f64>) -> Result<Self, ModelError> {
        let n = shifts.len();
        Self::new(
            shifts,
            PerturbationDistribution::Normal {
                means: vec![0.0; n],
                stddevs: vec![1.0; n],
            },
        )
    }

    pub fn exponential(shifts: Vec<f64>, rates: Vec<f64>) -> Result<Self, ModelError> {
        Self::new(shifts, PerturbationDistribution::Exponential { rates })
    }

    pub fn shifts(&self) -> &[f64] {
        &self.shifts
    }

    pub fn distribution(&self) -> &PerturbationDistribution {
        &self.distribution
    }

    pub fn len(&self) -> usize {
        self.shifts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.shifts.is_empty()
    }
}

fn check_len(expected: usize, found: usize) -> Result<(), ModelError> {
    if expected == found {
        Ok(())
    } else {
        Err(ModelError::DimensionMismatch { expected, found })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Variant {
    Nominal,
    RobustNormal { spec: PerturbationSpec, beta: f64 },
    RobustExponential { spec: PerturbationSpec, beta: f64 },
}

impl Variant {
    pub fn tag(&self) -> &'static str {
        match self {
            Variant::Nominal => "nominal",
            Variant::RobustNormal { .. } => "robust_normal",
            Variant::RobustExponential { .. } => "robust_exponential",
        }
    }

    pub fn beta(&self) -> Option<f64> {
        match self {
            Variant::Nominal => None,
            Variant::RobustNormal { beta, .. } | Variant::RobustExponential { beta, .. } => {
                Some(*beta)
            }
        }
    }

    pub fn spec(&self) -> Option<&PerturbationSpec> {
        match self {
            Variant::Nominal => None,
            Variant::RobustNormal { spec, .. } | Variant::RobustExponential { spec, .. } => {
                Some(spec)
            }
        }
    }

    pub fn is_convex(&self) -> bool {
        match self {
            Variant::Nominal => true,
            Variant::RobustNormal { beta, .. } => *beta >= 0.5,
            Variant::RobustExponential { .. } => false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PortfolioModel {
    stats: ReturnStatistics,
    tau: f64,
    variant: Variant,
    /// `sqrt(2) erfinv(1 - 2 beta)`, cached for the normal variant.
    cone_factor: f64,
}

impl PortfolioModel {
    pub fn new(stats: ReturnStatistics, tau: f64, variant: Variant) -> Result<Self, ModelError> {
        if !tau.is_finite() {
            return Err(ModelError::InvalidModel(format!(
                "target return {tau} not finite"
            )));
        }
        let n = stats.num_assets();
        let mut cone_factor = 0.0;
        match &variant {
            Variant::Nominal => {}
            Variant::RobustNormal { spec, beta } | Variant::RobustExponential { spec, beta } => {
                if !(*beta > 0.0 && *beta < 1.0) {
                    return Err(ModelError::InvalidModel(format!(
                        "beta {beta} not in (0, 1)"
                    )));
                }
                check_len(n, spec.len())?;
                let is_normal = matches!(variant, Variant::RobustNormal { .. });
                match (is_normal, spec.distribution()) {
                    (true, PerturbationDistribution::Normal { .. }) => {
                        cone_factor = std::f64::consts::SQRT_2 * try_erf_inv(1.0 - 2.0 * beta)?;
                    }
                    (false, PerturbationDistribution::Exponential { .. }) => {}
                    _ => {
                        return Err(ModelError::InvalidModel(format!(
                            "{} variant needs {} perturbations",
                            variant.tag(),
                            if is_normal { "normal" } else { "exponential" }
                        )))
                    }
                }
            }
        }
        Ok(Self {
            stats,
            tau,
            variant,
            cone_factor,
        })
    }

    pub fn stats(&self) -> &ReturnStatistics {
        &self.stats
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn variant(&self) -> &Variant {
        &self.variant
    }

    pub fn num_assets(&self) -> usize {
        self.stats.num_assets()
    }

    /// Same model at another target return.
    pub fn with_tau(&self, tau: f64) -> Result<Self, ModelError> {
        if !tau.is_finite() {
            return Err(ModelError::InvalidModel(format!(
                "target return {tau} not finite"
            )));
        }
        Ok(Self {
            tau,
            ..self.clone()
        })
    }

    /// `sqrt(2) erfinv(1 - 2 beta)`; zero for the other variants.
    pub fn cone_factor(&self) -> f64 {
        self.cone_factor
    }

    fn check_dim(&self, x: &[f64]) -> Result<(), ModelError> {
        check_len(self.num_assets(), x.len())
    }

    /// Portfolio risk `1/2 x' Sigma x`.
    pub fn objective(&self, x: &[f64]) -> Result<f64, ModelError> {
        self.check_dim(x)?;
        Ok(0.5 * self.stats.quadratic_form(x))
    }

    pub fn objective_gradient(&self, x: &[f64]) -> Result<Vec<f64>, ModelError> {
        self.check_dim(x)?;
        Ok(self.stats.covariance_times(x))
    }

    /// Return-constraint slack; `>= 0` means the constraint holds.
    pub fn constraint_slack(&self, x: &[f64]) -> Result<f64, ModelError> {
        self.check_dim(x)?;
        match &self.variant {
            Variant::Nominal => Ok(self.stats.expected_return(x) - self.tau),
            Variant::RobustNormal { .. } => Ok(self.normal_return(x) - self.tau),
            Variant::RobustExponential { spec, beta } => {
                let a = self.tau - self.stats.expected_return(x);
                Ok((1.0 - beta) - exponential_cdf(spec, x, a)?)
            }
        }
    }

    /// Gradient of [`constraint_slack`](Self::constraint_slack): analytic for
    /// the nominal and normal variants, central differences for the
    /// exponential one.
    pub fn slack_gradient(&self, x: &[f64]) -> Result<Vec<f64>, ModelError> {
        self.check_dim(x)?;
        match &self.variant {
            Variant::Nominal => Ok(self.stats.mu0.clone()),
            Variant::RobustNormal { spec, .. } => {
                let (means, stddevs) = normal_params(spec);
                let scaled: Vec<f64> = (0..x.len()).map(|j| stddevs[j] * spec.shifts[j]).collect();
                let norm = scaled
                    .iter()
                    .zip(x)
                    .map(|(s, xj)| (s * xj).powi(2))
                    .sum::<f64>()
                    .sqrt();
                Ok((0..x.len())
                    .map(|j| {
                        let cone = if norm > 0.0 {
                            self.cone_factor * scaled[j] * scaled[j] * x[j] / norm
                        } else {
                            0.0
                        };
                        self.stats.mu0[j] + spec.shifts[j] * means[j] + cone
                    })
                    .collect())
            }
            Variant::RobustExponential { .. } => {
                let mut probe = x.to_vec();
                let mut grad = Vec::with_capacity(x.len());
                for j in 0..x.len() {
                    probe[j] = x[j] + FD_STEP;
                    let up = self.constraint_slack(&probe)?;
                    probe[j] = x[j] - FD_STEP;
                    let down = self.constraint_slack(&probe)?;
                    probe[j] = x[j];
                    grad.push((up - down) / (2.0 * FD_STEP));
                }
                Ok(grad)
            }
        }
    }

    /// The largest target return `x` satisfies at this model's confidence
    /// level: the constraint holds iff `guaranteed_return(x) >= tau`.
    pub fn guaranteed_return(&self, x: &[f64]) -> Result<f64, ModelError> {
        self.check_dim(x)?;
        match &self.variant {
            Variant::Nominal => Ok(self.stats.expected_return(x)),
            Variant::RobustNormal { .. } => Ok(self.normal_return(x)),
            Variant::RobustExponential { spec, beta } => {
                Ok(self.stats.expected_return(x) + exponential_quantile(spec, x, 1.0 - beta)?)
            }
        }
    }

    fn normal_return(&self, x: &[f64]) -> f64 {
        let spec = self.variant.spec().expect("normal variant carries a spec");
        let (means, stddevs) = normal_params(spec);
        let mut shift_mean = 0.0;
        let mut spread = 0.0;
        for j in 0..x.len() {
            let c = spec.shifts[j] * x[j];
            shift_mean += c * means[j];
            spread += (stddevs[j] * c).powi(2);
        }
        self.stats.expected_return(x) + shift_mean + self.cone_factor * spread.sqrt()
    }
}

fn normal_params(spec: &PerturbationSpec) -> (&[f64], &[f64]) {
    match spec.distribution() {
        PerturbationDistribution::Normal { means, stddevs } => (means, stddevs),
        PerturbationDistribution::Exponential { .. } => {
            unreachable!("normal variant validated at construction")
        }
    }
}

/// Weighted exponential sum over assets whose `shift_j x_j` is not negligible.
pub fn exponential_sum(
    spec: &PerturbationSpec,
    x: &[f64],
) -> Result<Option<WeightedExponentialSum>, ModelError> {
    let PerturbationDistribution::Exponential { rates } = spec.distribution() else {
        return Err(ModelError::InvalidModel(
            "exponential perturbations required".into(),
        ));
    };
    let (coefficients, kept_rates): (Vec<f64>, Vec<f64>) = spec
        .shifts
        .iter()
        .zip(x)
        .zip(rates)
        .map(|((s, xj), r)| (s * xj, *r))
        .filter(|(c, _)| *c >= ZERO_WEIGHT_THRESHOLD)
        .unzip();
    if coefficients.is_empty() {
        return Ok(None);
    }
    Ok(Some(WeightedExponentialSum::new(coefficients, kept_rates)?))
}

/// `P(sum shift_j x_j Z_j <= a)`; a point mass at zero when every term is dropped.
fn exponential_cdf(spec: &PerturbationSpec, x: &[f64], a: f64) -> Result<f64, ModelError> {
    if !(a > 0.0) {
        return Ok(0.0);
    }
    match exponential_sum(spec, x)? {
        None => Ok(1.0),
        Some(sum) => Ok(hypoexp_cdf(&sum, a)?),
    }
}

/// Largest `a` with `P(Y <= a) <= level`, found by bisection.
fn exponential_quantile(spec: &PerturbationSpec, x: &[f64], level: f64) -> Result<f64, ModelError> {
    let Some(sum) = exponential_sum(spec, x)? else {
        return Ok(0.0);
    };
    let mut lo = 0.0;
    let mut hi = sum.mean().max(f64::MIN_POSITIVE);
    while hypoexp_cdf(&sum, hi)? <= level {
        lo = hi;
        hi *= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if hypoexp_cdf(&sum, mid)? <= level {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(lo)
}

/// Range of target returns for which the model can be feasible.
///
/// Exact for the nominal variant (the extreme expected returns). For the
/// robust variants the upper end comes from [`max_guaranteed_return`] and is
/// approximate; the lower end is the smallest vertex value.
pub fn feasible_return_range(model: &PortfolioModel) -> Result<(f64, f64), ModelError> {
    let tau_min = (0..model.num_assets())
        .map(|i| model.guaranteed_return(&vertex(model.num_assets(), i)))
        .collect::<Result<Vec<_>, _>>()?
        .into_iter()
        .fold(f64::INFINITY, f64::min);
    let (_, tau_max) = max_guaranteed_return(model)?;
    Ok((tau_min, tau_max))
}

/// Portfolio with the largest guaranteed return and that return.
///
/// Vertices are compared exactly; for the robust variants projected-gradient
/// ascent from every vertex and the centroid refines the best value.
pub fn max_guaranteed_return(model: &PortfolioModel) -> Result<(Vec<f64>, f64), ModelError> {
    let n = model.num_assets();
    let vertices: Vec<Vec<f64>> = (0..n).map(|i| vertex(n, i)).collect();
    let mut best = (vertices[0].clone(), f64::NEG_INFINITY);
    for v in &vertices {
        let value = model.guaranteed_return(v)?;
        if value > best.1 {
            best = (v.clone(), value);
        }
    }
    if matches!(model.variant(), Variant::Nominal) || n == 1 {
        return Ok(best);
    }
    let mut starts = vertices;
    starts.push(vec![1.0 / n as f64; n]);
    let ascent = crate::solver::maximize_on_simplex(
        |x| model.guaranteed_return(x).unwrap_or(f64::NEG_INFINITY),
        &starts,
    );
    if ascent.1 > best.1 {
        best = ascent;
    }
    Ok(best)
}

fn vertex(n: usize, i: usize) -> Vec<f64> {
    (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect()
}
