//! Price ingestion and return statistics.
//!
//! Returns are simple percentage returns, `100 (P_t - P_{t-1}) / P_{t-1}`,
//! and the covariance uses the population divisor `T`.

use std::io::Read;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Smallest eigenvalue tolerated before a covariance matrix is rejected.
pub const PSD_TOLERANCE: f64 = -1e-9;

#[derive(Debug, Error)]
pub enum StatsError {
    #[error("malformed csv: {0}")]
    MalformedCsv(String),
    #[error("non-positive price {price} for asset `{asset}` at `{timestamp}`")]
    NonPositivePrice {
        asset: String,
        timestamp: String,
        price: f64,
    },
    #[error("duplicate timestamp `{0}`")]
    DuplicateTimestamp(String),
    #[error("need at least 2 price rows, got {0}")]
    TooFewRows(usize),
    #[error("return matrix has no periods")]
    EmptyReturns,
    #[error("invalid statistics: {0}")]
    InvalidStatistics(String),
}

/// Raw closing prices, one row per period and one column per asset.
#[derive(Debug, Clone, PartialEq)]
pub struct PriceSeries {
    asset_labels: Vec<String>,
    timestamps: Vec<String>,
    prices: Vec<Vec<f64>>,
}

impl PriceSeries {
    /// Builds a series, sorting rows by timestamp and checking every invariant.
    pub fn new(
        asset_labels: Vec<String>,
        timestamps: Vec<String>,
        prices: Vec<Vec<f64>>,
    ) -> Result<Self, StatsError> {
        if timestamps.len() != prices.len() {
            return Err(StatsError::MalformedCsv(format!(
                "{} timestamps for {} price rows",
                timestamps.len(),
                prices.len()
            )));
        }
        if asset_labels.is_empty() {
            return Err(StatsError::MalformedCsv("no asset columns".into()));
        }
        let n = asset_labels.len();
        let mut rows: Vec<(String, Vec<f64>)> = timestamps.into_iter().zip(prices).collect();
        for (ts, row) in &rows {
            if row.len() != n {
                return Err(StatsError::MalformedCsv(format!(
                    "row `{ts}` has {} prices, expected {n}",
                    row.len()
                )));
            }
            for (label, &p) in asset_labels.iter().zip(row) {
                if !(p > 0.0) || !p.is_finite() {
                    return Err(StatsError::NonPositivePrice {
                        asset: label.clone(),
                        timestamp: ts.clone(),
                        price: p,
                    });
                }
            }
        }
        rows.sort_by(|a, b| a.0.cmp(&b.0));
        if let Some(w) = rows.windows(2).find(|w| w[0].0 == w[1].0) {
            return Err(StatsError::DuplicateTimestamp(w[0].0.clone()));
        }
        if rows.len() < 2 {
            return Err(StatsError::TooFewRows(rows.len()));
        }
        let (timestamps, prices) = rows.into_iter().unzip();
        Ok(Self {
            asset_labels,
            timestamps,
            prices,
        })
    }

    pub fn asset_labels(&self) -> &[String] {
        &self.asset_labels
    }

    pub fn timestamps(&self) -> &[String] {
        &self.timestamps
    }

    pub fn prices(&self) -> &[Vec<f64>] {
        &self.prices
    }

    pub fn num_assets(&self) -> usize {
        self.asset_labels.len()
    }

    pub fn num_rows(&self) -> usize {
        self.prices.len()
    }

    /// Keeps every `step`-th row starting from the first, e.g. `step = 3`
    /// turns month-end closes into quarter-end closes.
    pub fn resample(&self, step: usize) -> Result<Self, StatsError> {
        let step = step.max(1);
        let keep: Vec<usize> = (0..self.num_rows()).step_by(step).collect();
        Self::new(
            self.asset_labels.clone(),
            keep.iter().map(|&i| self.timestamps[i].clone()).collect(),
            keep.iter().map(|&i| self.prices[i].clone()).collect(),
        )
    }
}

/// Percentage returns, rows are periods and columns are assets.
#[derive(Debug, Clone, PartialEq)]
pub struct ReturnMatrix {
    pub asset_labels: Vec<String>,
    pub returns: Vec<Vec<f64>>,
}

impl ReturnMatrix {
    pub fn num_periods(&self) -> usize {
        self.returns.len()
    }
}

/// Expected returns `mu0` (percent) and covariance `sigma` (percent squared).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawStatistics")]
pub struct ReturnStatistics {
    pub labels: Vec<String>,
    pub mu0: Vec<f64>,
    pub sigma: Vec<Vec<f64>>,
    #[serde(rename = "T")]
    pub periods: usize,
}

#[derive(Deserialize)]
struct RawStatistics {
    labels: Vec<String>,
    mu0: Vec<f64>,
    sigma: Vec<Vec<f64>>,
    #[serde(rename = "T", default)]
    periods: usize,
}

impl TryFrom<RawStatistics> for ReturnStatistics {
    type Error = StatsError;

    fn try_from(raw: RawStatistics) -> Result<Self, Self::Error> {
        ReturnStatistics::new(raw.labels, raw.mu0, raw.sigma, raw.periods)
    }
}

impl ReturnStatistics {
    /// Validates dimensions, exact symmetry and positive semidefiniteness.
    pub fn new(
        labels: Vec<String>,
        mu0: Vec<f64>,
        sigma: Vec<Vec<f64>>,
        periods: usize,
    ) -> Result<Self, StatsError> {
        let n = labels.len();
        if n == 0 {
            return Err(StatsError::InvalidStatistics("no assets".into()));
        }
        if mu0.len() != n || sigma.len() != n || sigma.iter().any(|r| r.len() != n) {
            return Err(StatsError::InvalidStatistics(format!(
                "dimension mismatch: {n} labels, {} returns, {}x? covariance",
                mu0.len(),
                sigma.len()
            )));
        }
        if mu0
            .iter()
            .chain(sigma.iter().flatten())
            .any(|v| !v.is_finite())
        {
            return Err(StatsError::InvalidStatistics("non-finite entry".into()));
        }
        for i in 0..n {
            for j in 0..i {
                if sigma[i][j] != sigma[j][i] {
                    return Err(StatsError::InvalidStatistics(format!(
                        "covariance not symmetric at ({i}, {j})"
                    )));
                }
            }
        }
        let min_eig = symmetric_eigenvalues(&sigma)
            .into_iter()
            .fold(f64::INFINITY, f64::min);
        if min_eig < PSD_TOLERANCE {
            return Err(StatsError::InvalidStatistics(format!(
                "covariance not positive semidefinite (min eigenvalue {min_eig:e})"
            )));
        }
        Ok(Self {
            labels,
            mu0,
            sigma,
            periods,
        })
    }

    pub fn num_assets(&self) -> usize {
        self.mu0.len()
    }

    /// `x' Sigma x`.
    pub fn quadratic_form(&self, x: &[f64]) -> f64 {
        self.sigma
            .iter()
            .zip(x)
            .map(|(row, xi)| xi * row.iter().zip(x).map(|(s, xj)| s * xj).sum::<f64>())
            .sum()
    }

    /// `Sigma x`.
    pub fn covariance_times(&self, x: &[f64]) -> Vec<f64> {
        self.sigma
            .iter()
            .map(|row| row.iter().zip(x).map(|(s, xj)| s * xj).sum())
            .collect()
    }

    /// `mu0' x`.
    pub fn expected_return(&self, x: &[f64]) -> f64 {
        self.mu0.iter().zip(x).map(|(m, xi)| m * xi).sum()
    }
}

/// Parses `date,<label1>,...,<labeln>` CSV into a [`PriceSeries`].
pub fn load_prices<R: Read>(source: R) -> Result<PriceSeries, StatsError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(source);
    let header = reader
        .headers()
        .map_err(|e| StatsError::MalformedCsv(e.to_string()))?
        .clone();
    let mut cols = header.iter();
    match cols.next() {
        Some(first)
            if first
                .trim_start_matches('\u{feff}')
                .eq_ignore_ascii_case("date") => {}
        other => {
            return Err(StatsError::MalformedCsv(format!(
                "header must start with `date`, found {other:?}"
            )))
        }
    }
    let labels: Vec<String> = cols.map(str::to_owned).collect();
    if labels.is_empty() || labels.iter().any(String::is_empty) {
        return Err(StatsError::MalformedCsv(
            "missing asset labels in header".into(),
        ));
    }

    let mut timestamps = Vec::new();
    let mut prices = Vec::new();
    for (line, record) in reader.records().enumerate() {
        let record = record.map_err(|e| StatsError::MalformedCsv(e.to_string()))?;
        if record.len() != labels.len() + 1 {
            return Err(StatsError::MalformedCsv(format!(
                "data row {} has {} fields, expected {}",
                line + 1,
                record.len(),
                labels.len() + 1
            )));
        }
        timestamps.push(record[0].to_owned());
        let row = record
            .iter()
            .skip(1)
            .map(|field| {
                field.parse::<f64>().map_err(|_| {
                    StatsError::MalformedCsv(format!(
                        "non-numeric price `{field}` in data row {}",
                        line + 1
                    ))
                })
            })
            .collect::<Result<Vec<_>, _>>()?;
        prices.push(row);
    }
    PriceSeries::new(labels, timestamps, prices)
}

pub fn compute_returns(prices: &PriceSeries) -> ReturnMatrix {
    let returns = prices
        .prices
        .windows(2)
        .map(|w| {
            w[0].iter()
                .zip(&w[1])
                .map(|(prev, cur)| 100.0 * (cur - prev) / prev)
                .collect()
        })
        .collect();
    ReturnMatrix {
        asset_labels: prices.asset_labels.clone(),
        returns,
    }
}

/// Sample means and population (divisor `T`) covariances of the returns.
pub fn estimate_statistics(returns: &ReturnMatrix) -> Result<ReturnStatistics, StatsError> {
    let t = returns.num_periods();
    if t == 0 {
        return Err(StatsError::EmptyReturns);
    }
    let n = returns.asset_labels.len();
    if returns.returns.iter().any(|r| r.len() != n) {
        return Err(StatsError::MalformedCsv("ragged return matrix".into()));
    }
    let tf = t as f64;
    let mu0: Vec<f64> = (0..n)
        .map(|i| returns.returns.iter().map(|r| r[i]).sum::<f64>() / tf)
        .collect();
    let mut sigma = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..=i {
            let s = returns
                .returns
                .iter()
                .map(|r| (r[i] - mu0[i]) * (r[j] - mu0[j]))
                .sum::<f64>()
                / tf;
            sigma[i][j] = s;
            sigma[j][i] = s;
        }
    }
    ReturnStatistics::new(returns.asset_labels.clone(), mu0, sigma, t)
}

/// Cyclic Jacobi eigenvalue iteration; adequate for the handful of assets
/// this crate targets.
pub(crate) fn symmetric_eigenvalues(m: &[Vec<f64>]) -> Vec<f64> {
    let n = m.len();
    let mut a: Vec<Vec<f64>> = m.to_vec();
    for _sweep in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[i][j] * a[i][j])
            .sum();
        let scale: f64 = a.iter().flatten().map(|v| v * v).sum();
        if off <= 1e-30 * scale.max(f64::MIN_POSITIVE) {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                if a[p][q] == 0.0 {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[k][p];
                    let akq = a[k][q];
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[p][k];
                    let aqk = a[q][k];
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
            }
        }
    }
    (0..n).map(|i| a[i][i]).collect()
}
