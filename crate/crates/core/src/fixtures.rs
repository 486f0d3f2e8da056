//! Built-in data: the three-sector quarterly statistics, the perturbation
//! setup used with them, and published reference solutions.
//!
//! Fixture files are embedded at compile time. Setting
//! `CHANCE_PORTFOLIO_FIXTURES` to a directory makes [`fixture_text`] read
//! same-named files from there instead.

use std::path::PathBuf;

use crate::models::{PerturbationSpec, PortfolioModel, Variant};
use crate::stats::ReturnStatistics;

pub const FIXTURE_DIR_ENV: &str = "CHANCE_PORTFOLIO_FIXTURES";

pub const LABELS: [&str; 3] = ["Nifty Bank", "Nifty Infra", "Nifty IT"];
pub const MU0: [f64; 3] = [2.609, -1.430, 6.329];
pub const SIGMA: [[f64; 3]; 3] = [
    [24.126, -1.460, 11.032],
    [-1.460, 8.237, 0.461],
    [11.032, 0.461, 18.034],
];
/// Quarterly periods behind the statistics (June 2017 to May 2022).
pub const PERIODS: usize = 20;
/// Basic shift of each asset's perturbation.
pub const BASIC_SHIFTS: [f64; 3] = [0.2, 0.1, 0.3];
pub const BETA: f64 = 0.95;

/// Target returns `1.5, 1.7, ..., 3.5`.
pub fn canonical_taus() -> Vec<f64> {
    (0..11).map(|i| 1.5 + 0.2 * i as f64).collect()
}

/// A published optimum: target return, weights, risk `1/2 x' Sigma x`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReferenceRow {
    pub tau: f64,
    pub weights: [f64; 3],
    pub risk: f64,
}

const fn row(tau: f64, w: [f64; 3], risk: f64) -> ReferenceRow {
    ReferenceRow {
        tau,
        weights: w,
        risk,
    }
}

pub const NOMINAL_REFERENCE: [ReferenceRow; 11] = [
    row(1.5, [0.1415, 0.5545, 0.3040], 2.7788),
    row(1.7, [0.1328, 0.5329, 0.3343], 2.8585),
    row(1.9, [0.1242, 0.5113, 0.3645], 2.9535),
    row(2.1, [0.1155, 0.4897, 0.3948], 3.0638),
    row(2.3, [0.1068, 0.4680, 0.4251], 3.1893),
    row(2.5, [0.0982, 0.4464, 0.4554], 3.3301),
    row(2.7, [0.0895, 0.4248, 0.4857], 3.4861),
    row(2.9, [0.0809, 0.4032, 0.5160], 3.6574),
    row(3.1, [0.0722, 0.3815, 0.5463], 3.8440),
    row(3.3, [0.0635, 0.3599, 0.5765], 4.0459),
    row(3.5, [0.0549, 0.3383, 0.6068], 4.2630),
];

pub const NORMAL_REFERENCE: [ReferenceRow; 11] = [
    row(1.5, [0.1371, 0.5321, 0.3308], 2.8546),
    row(1.7, [0.1290, 0.5087, 0.3623], 2.9547),
    row(1.9, [0.1210, 0.4853, 0.3938], 3.0723),
    row(2.1, [0.1129, 0.4617, 0.4253], 3.2075),
    row(2.3, [0.1049, 0.4382, 0.4570], 3.3602),
    row(2.5, [0.0968, 0.4145, 0.4887], 3.5307),
    row(2.7, [0.0888, 0.3908, 0.5204], 3.7188),
    row(2.9, [0.0807, 0.3671, 0.5522], 3.9248),
    row(3.1, [0.0727, 0.3433, 0.5840], 4.1485),
    row(3.3, [0.0646, 0.3196, 0.6158], 4.3901),
    row(3.5, [0.0566, 0.2958, 0.6477], 4.6494),
];

/// Reported exponential-perturbation solutions. These are not all global
/// optima of their problems and serve as upper bounds on the risk.
pub const EXPONENTIAL_REFERENCE: [ReferenceRow; 11] = [
    row(1.5, [0.0001, 0.6216, 0.3783], 2.9906),
    row(1.7, [0.0000, 0.5963, 0.4036], 3.0447),
    row(1.9, [0.0746, 0.4818, 0.4436], 3.2087),
    row(2.1, [0.0000, 0.5450, 0.4550], 3.2045),
    row(2.3, [0.0083, 0.4985, 0.4932], 3.3701),
    row(2.5, [0.0000, 0.4933, 0.5067], 3.4324),
    row(2.7, [0.0003, 0.4632, 0.5366], 3.5955),
    row(2.9, [0.0006, 0.4411, 0.5583], 3.7287),
    row(3.1, [0.0782, 0.3840, 0.5378], 3.8042),
    row(3.3, [0.0001, 0.3758, 0.6240], 4.2021),
    row(3.5, [0.0000, 0.3388, 0.6612], 4.5184),
];

/// Reported pairwise distances: (nominal, normal), (nominal, exponential),
/// (normal, exponential).
pub const REFERENCE_DISTANCES: [f64; 3] = [0.8298, 0.5621, 0.5195];

pub fn reference_statistics() -> ReturnStatistics {
    ReturnStatistics::new(
        LABELS.iter().map(|s| s.to_string()).collect(),
        MU0.to_vec(),
        SIGMA.iter().map(|r| r.to_vec()).collect(),
        PERIODS,
    )
    .expect("built-in statistics are valid")
}

pub fn nominal_model(tau: f64) -> PortfolioModel {
    PortfolioModel::new(reference_statistics(), tau, Variant::Nominal).expect("valid fixture")
}

/// Zero-mean, unit-variance normal perturbations at confidence `beta`.
pub fn normal_model(tau: f64, beta: f64) -> PortfolioModel {
    let spec = PerturbationSpec::standard_normal(BASIC_SHIFTS.to_vec()).expect("valid fixture");
    PortfolioModel::new(
        reference_statistics(),
        tau,
        Variant::RobustNormal { spec, beta },
    )
    .expect("valid fixture")
}

/// Unit-mean exponential perturbations at confidence `beta`.
pub fn exponential_model(tau: f64, beta: f64) -> PortfolioModel {
    let spec =
        PerturbationSpec::exponential(BASIC_SHIFTS.to_vec(), vec![1.0; 3]).expect("valid fixture");
    PortfolioModel::new(
        reference_statistics(),
        tau,
        Variant::RobustExponential { spec, beta },
    )
    .expect("valid fixture")
}

/// Embedded fixture files, by file name.
pub const FILES: [(&str, &str); 5] = [
    (
        "quarterly_3asset.csv",
        include_str!("../fixtures/quarterly_3asset.csv"),
    ),
    (
        "reference_stats.json",
        include_str!("../fixtures/reference_stats.json"),
    ),
    ("nominal.json", include_str!("../fixtures/nominal.json")),
    (
        "robust_normal.json",
        include_str!("../fixtures/robust_normal.json"),
    ),
    (
        "robust_exponential.json",
        include_str!("../fixtures/robust_exponential.json"),
    ),
];

/// Contents of a named fixture, honouring the directory override.
pub fn fixture_text(name: &str) -> Option<String> {
    if let Some(dir) = std::env::var_os(FIXTURE_DIR_ENV) {
        let path = PathBuf::from(dir).join(name);
        if let Ok(text) = std::fs::read_to_string(path) {
            return Some(text);
        }
    }
    FILES
        .iter()
        .find(|(file, _)| *file == name)
        .map(|(_, text)| text.to_string())
}
