//! File formats: model JSON, frontier CSV, target-return grids.
//!
//! Model JSON:
//!
//! ```json
//! {"stats": {"labels": [...], "mu0": [...], "sigma": [[...]]},
//!  "tau": 2.5, "variant": "robust_normal", "beta": 0.95,
//!  "shifts": [...], "dist_params": {"means": [...], "stddevs": [...]}}
//! ```
//!
//! `dist_params` is `{"rates": [...]}` for `robust_exponential`; `beta`,
//! `shifts` and `dist_params` are omitted for `nominal`.
//!
//! Frontier CSV is UTF-8 with LF line endings, header
//! `tau,risk,status,w_<label1>,...`, numbers printed with six decimals;
//! infeasible rows leave risk and weights empty.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::analysis::{Frontier, FrontierPoint};
use crate::models::{
    ModelError, PerturbationDistribution, PerturbationSpec, PortfolioModel, Variant,
};
use crate::solver::Status;
use crate::stats::ReturnStatistics;

#[derive(Debug, Error)]
pub enum FormatError {
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("csv: {0}")]
    Csv(String),
    #[error("schema: {0}")]
    Schema(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VariantTag {
    Nominal,
    RobustNormal,
    RobustExponential,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelFile {
    pub stats: ReturnStatistics,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tau: Option<f64>,
    pub variant: VariantTag,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub shifts: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dist_params: Option<PerturbationDistribution>,
}

impl ModelFile {
    /// Builds the model; `tau` overrides the file's target when given.
    pub fn into_model(self, tau: Option<f64>) -> Result<PortfolioModel, FormatError> {
        let tau = tau
            .or(self.tau)
            .ok_or_else(|| FormatError::Schema("missing `tau`".into()))?;
        let variant = match self.variant {
            VariantTag::Nominal => Variant::Nominal,
            tag => {
                let beta = self
                    .beta
                    .ok_or_else(|| FormatError::Schema("robust variant needs `beta`".into()))?;
                let shifts = self
                    .shifts
                    .ok_or_else(|| FormatError::Schema("robust variant needs `shifts`".into()))?;
                let dist = self.dist_params.ok_or_else(|| {
                    FormatError::Schema("robust variant needs `dist_params`".into())
                })?;
                let spec = PerturbationSpec::new(shifts, dist)?;
                if tag == VariantTag::RobustNormal {
                    Variant::RobustNormal { spec, beta }
                } else {
                    Variant::RobustExponential { spec, beta }
                }
            }
        };
        Ok(PortfolioModel::new(self.stats, tau, variant)?)
    }

    pub fn from_model(model: &PortfolioModel) -> Self {
        let (variant, beta, shifts, dist_params) = match model.variant() {
            Variant::Nominal => (VariantTag::Nominal, None, None, None),
            Variant::RobustNormal { spec, beta } => (
                VariantTag::RobustNormal,
                Some(*beta),
                Some(spec.shifts().to_vec()),
                Some(spec.distribution().clone()),
            ),
            Variant::RobustExponential { spec, beta } => (
                VariantTag::RobustExponential,
                Some(*beta),
                Some(spec.shifts().to_vec()),
                Some(spec.distribution().clone()),
            ),
        };
        Self {
            stats: model.stats().clone(),
            tau: Some(model.tau()),
            variant,
            beta,
            shifts,
            dist_params,
        }
    }
}

pub fn read_model_file<R: Read>(reader: R) -> Result<ModelFile, FormatError> {
    Ok(serde_json::from_reader(reader)?)
}

/// Parses `start:step:end`; the end is included when the last grid point
/// lands within half a step of it.
pub fn parse_tau_grid(spec: &str) -> Result<Vec<f64>, FormatError> {
    let parts: Vec<&str> = spec.split(':').map(str::trim).collect();
    let [start, step, end] = parts.as_slice() else {
        return Err(FormatError::Schema(format!(
            "tau grid `{spec}` is not of the form start:step:end"
        )));
    };
    let parse = |s: &str| {
        s.parse::<f64>()
            .ok()
            .filter(|v| v.is_finite())
            .ok_or_else(|| FormatError::Schema(format!("bad number `{s}` in tau grid")))
    };
    let (start, step, end) = (parse(start)?, parse(step)?, parse(end)?);
    if !(step > 0.0) {
        return Err(FormatError::Schema(format!(
            "tau grid step {step} must be positive"
        )));
    }
    if end < start {
        return Err(FormatError::Schema(format!(
            "tau grid end {end} precedes start {start}; targets must increase"
        )));
    }
    let count = ((end - start) / step + 0.5).floor() as usize;
    if count > 1_000_000 {
        return Err(FormatError::Schema("tau grid too large".into()));
    }
    Ok((0..=count).map(|i| start + step * i as f64).collect())
}

pub fn parse_weights(text: &str) -> Result<Vec<f64>, FormatError> {
    text.split(',')
        .map(|s| {
            s.trim()
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| FormatError::Schema(format!("bad weight `{s}`")))
        })
        .collect()
}

fn fmt6(v: f64) -> String {
    format!("{v:.6}")
}

pub fn write_frontier_csv<W: Write>(
    mut out: W,
    frontier: &Frontier,
    labels: &[String],
) -> Result<(), FormatError> {
    let mut header = vec!["tau".to_owned(), "risk".into(), "status".into()];
    header.extend(labels.iter().map(|l| format!("w_{l}")));
    writeln!(out, "{}", header.join(","))?;
    for p in &frontier.points {
        let mut fields = vec![fmt6(p.tau)];
        if p.status == Status::Infeasible || p.weights.is_empty() {
            fields.push(String::new());
            fields.push(p.status.as_str().into());
            fields.extend(std::iter::repeat_n(String::new(), labels.len()));
        } else {
            fields.push(fmt6(p.risk));
            fields.push(p.status.as_str().into());
            fields.extend(p.weights.iter().map(|w| fmt6(*w)));
        }
        writeln!(out, "{}", fields.join(","))?;
    }
    Ok(())
}

/// A frontier read back from CSV, with the asset labels from its header.
#[derive(Debug, Clone, PartialEq)]
pub struct FrontierTable {
    pub labels: Vec<String>,
    pub frontier: Frontier,
}

pub fn read_frontier_csv<R: Read>(
    reader: R,
    model_tag: &str,
) -> Result<FrontierTable, FormatError> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(reader);
    let header = rdr
        .headers()
        .map_err(|e| FormatError::Csv(e.to_string()))?
        .clone();
    let cols: Vec<&str> = header.iter().collect();
    if cols.len() < 4 || cols[..3] != ["tau", "risk", "status"] {
        return Err(FormatError::Csv(
            "header must be `tau,risk,status,w_<label>,...`".into(),
        ));
    }
    let labels = cols[3..]
        .iter()
        .map(|c| {
            c.strip_prefix("w_")
                .map(str::to_owned)
                .ok_or_else(|| FormatError::Csv(format!("weight column `{c}` lacks `w_` prefix")))
        })
        .collect::<Result<Vec<_>, _>>()?;

    let number = |s: &str| {
        s.parse::<f64>()
            .map_err(|_| FormatError::Csv(format!("bad number `{s}`")))
    };
    let mut points = Vec::new();
    for record in rdr.records() {
        let record = record.map_err(|e| FormatError::Csv(e.to_string()))?;
        let status = match &record[2] {
            "converged" => Status::Converged,
            "infeasible" => Status::Infeasible,
            "not_converged" => Status::NotConverged,
            other => return Err(FormatError::Csv(format!("unknown status `{other}`"))),
        };
        let tau = number(&record[0])?;
        let (risk, weights) = if record[1].is_empty() {
            (f64::NAN, Vec::new())
        } else {
            (
                number(&record[1])?,
                record
                    .iter()
                    .skip(3)
                    .map(number)
                    .collect::<Result<Vec<_>, _>>()?,
            )
        };
        points.push(FrontierPoint {
            tau,
            weights,
            risk,
            status,
        });
    }
    Ok(FrontierTable {
        labels,
        frontier: Frontier {
            model_tag: model_tag.to_owned(),
            points,
        },
    })
}
