//! Command-line interface.
//!
//! Exit codes: 0 success, 2 invalid input (bad CSV/JSON/flags), 3 I/O
//! failure, 4 invalid solver configuration, 5 validation failed.

use std::ffi::OsString;
use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::analysis::{
    dissimilarity_matrix, monte_carlo_validate, one_sided_sampling_bound, sweep_frontier,
    AnalysisError,
};
use crate::fixtures;
use crate::io::{
    parse_tau_grid, parse_weights, read_frontier_csv, read_model_file, write_frontier_csv,
    FormatError,
};
use crate::models::PerturbationDistribution;
use crate::solver::{SolverConfig, SolverError};
use crate::stats::{
    compute_returns, estimate_statistics, load_prices, ReturnStatistics, StatsError,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INPUT: i32 = 2;
pub const EXIT_IO: i32 = 3;
pub const EXIT_CONFIG: i32 = 4;
pub const EXIT_VALIDATION: i32 = 5;

pub const DEFAULT_SEED: u64 = 42;

#[derive(Debug, Parser)]
#[command(
    name = "chance-portfolio",
    version,
    about = "Nominal and chance-constrained robust mean-variance portfolios",
    after_help = "Exit codes: 0 ok, 2 invalid input, 3 I/O failure, 4 invalid solver \
                  configuration, 5 validation failed.\n\
                  Built-in fixtures can be overridden by files in $CHANCE_PORTFOLIO_FIXTURES."
)]
pub struct Cli {
    /// Cap on worker threads (default: all cores).
    #[arg(long, global = true, value_name = "N")]
    pub threads: Option<usize>,
    /// Write a JSON run manifest to this path.
    #[arg(long, global = true, value_name = "PATH")]
    pub manifest: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Estimate expected returns and covariance from a price CSV.
    Stats(StatsArgs),
    /// Solve a model over a grid of target returns and write the frontier CSV.
    Frontier(FrontierArgs),
    /// Pairwise distances between the risk columns of frontier CSVs.
    Dissimilarity(DissimilarityArgs),
    /// Monte Carlo check of the chance constraint for given weights.
    Validate(ValidateArgs),
    /// Write a built-in fixture file.
    Fixture(FixtureArgs),
}

#[derive(Debug, Args)]
pub struct StatsArgs {
    /// Price CSV with header `date,<label1>,...`.
    #[arg(long, value_name = "CSV", required_unless_present = "fixture")]
    pub prices: Option<PathBuf>,
    /// Emit a built-in statistics fixture instead of reading prices (`reference`).
    #[arg(long, value_name = "NAME", conflicts_with = "prices")]
    pub fixture: Option<String>,
    /// Keep every N-th price row before computing returns (3: monthly to quarterly).
    #[arg(long, value_name = "N", default_value_t = 1)]
    pub resample: usize,
    /// Output statistics JSON.
    #[arg(long, value_name = "JSON")]
    pub out: PathBuf,
}

#[derive(Debug, Args, Clone)]
pub struct SolverFlags {
    /// Convergence tolerance on the projected-gradient residual and violation.
    #[arg(long, default_value_t = 1e-8)]
    pub tolerance: f64,
    /// Iteration cap per subproblem.
    #[arg(long, default_value_t = 10_000)]
    pub max_iterations: usize,
    /// Starts for the nonconvex exponential model (plus a nominal warm start).
    #[arg(long, default_value_t = 16)]
    pub multistarts: usize,
    /// Seed for start generation.
    #[arg(long, default_value_t = DEFAULT_SEED)]
    pub seed: u64,
    /// Penalty growth factor of the augmented Lagrangian.
    #[arg(long, default_value_t = 10.0)]
    pub penalty_growth: f64,
    /// Lattice step of the grid oracle.
    #[arg(long, default_value_t = 1e-3)]
    pub grid_step: f64,
}

impl SolverFlags {
    pub fn config(&self) -> SolverConfig {
        SolverConfig {
            tolerance: self.tolerance,
            max_iterations: self.max_iterations,
            multistart_count: self.multistarts,
            rng_seed: self.seed,
            penalty_growth: self.penalty_growth,
            grid_step: self.grid_step,
        }
    }
}

#[derive(Debug, Args)]
pub struct FrontierArgs {
    /// Model JSON; its `tau` is ignored.
    #[arg(long, value_name = "JSON")]
    pub model: PathBuf,
    /// Target returns as `start:step:end`, end inclusive.
    #[arg(
        long,
        value_name = "GRID",
        default_value = "1.5:0.2:3.5",
        allow_hyphen_values = true
    )]
    pub taus: String,
    /// Output frontier CSV.
    #[arg(long, value_name = "CSV")]
    pub out: PathBuf,
    #[command(flatten)]
    pub solver: SolverFlags,
}

#[derive(Debug, Args)]
pub struct DissimilarityArgs {
    /// Two or more frontier CSVs on the same target-return grid.
    #[arg(value_name = "CSV", required = true)]
    pub frontiers: Vec<PathBuf>,
    /// Comma-separated model labels (default: file stems).
    #[arg(long)]
    pub labels: Option<String>,
    /// Output JSON `{labels, matrix}`.
    #[arg(long, value_name = "JSON")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ValidateArgs {
    /// Robust model JSON supplying statistics, perturbations, beta and tau.
    #[arg(long, value_name = "JSON")]
    pub model: PathBuf,
    /// Comma-separated portfolio weights.
    #[arg(
        long,
        conflicts_with = "frontier",
        required_unless_present = "frontier",
        allow_hyphen_values = true
    )]
    pub weights: Option<String>,
    /// Take weights (and tau) from a frontier CSV row instead.
    #[arg(long, value_name = "CSV", requires = "row")]
    pub frontier: Option<PathBuf>,
    /// Zero-based data row of `--frontier`.
    #[arg(long)]
    pub row: Option<usize>,
    /// Override the target return.
    #[arg(long, allow_hyphen_values = true)]
    pub tau: Option<f64>,
    /// Number of Monte Carlo draws.
    #[arg(long, default_value_t = 1_000_000)]
    pub samples: usize,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct FixtureArgs {
    /// Fixture file name; omit with --list.
    #[arg(required_unless_present = "list")]
    pub name: Option<String>,
    #[arg(long, required_unless_present = "list")]
    pub out: Option<PathBuf>,
    /// List the available fixtures.
    #[arg(long)]
    pub list: bool,
}

/// Echo of the effective configuration, stored in run manifests.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ConfigEcho {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub taus: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub shifts: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub distribution: Option<PerturbationDistribution>,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub solver: Option<SolverConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub samples: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub inputs: Vec<String>,
    pub config: ConfigEcho,
    pub outputs: Vec<String>,
    pub duration_seconds: f64,
}

#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    fn new(code: i32, message: impl Into<String>) -> Self {
        Self {
            code,
            message: message.into(),
        }
    }
}

impl From<FormatError> for CliError {
    fn from(e: FormatError) -> Self {
        let code = match e {
            FormatError::Io(_) => EXIT_IO,
            _ => EXIT_INPUT,
        };
        Self::new(code, e.to_string())
    }
}

impl From<StatsError> for CliError {
    fn from(e: StatsError) -> Self {
        Self::new(EXIT_INPUT, e.to_string())
    }
}

impl From<SolverError> for CliError {
    fn from(e: SolverError) -> Self {
        let code = match e {
            SolverError::ConfigInvalid(_) => EXIT_CONFIG,
            _ => EXIT_INPUT,
        };
        Self::new(code, e.to_string())
    }
}

impl From<AnalysisError> for CliError {
    fn from(e: AnalysisError) -> Self {
        match e {
            AnalysisError::Solver(s) => s.into(),
            other => Self::new(EXIT_INPUT, other.to_string()),
        }
    }
}

fn open(path: &Path) -> Result<BufReader<File>, CliError> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| CliError::new(EXIT_IO, format!("cannot open {}: {e}", path.display())))
}

fn write_file(
    path: &Path,
    body: impl FnOnce(&mut dyn Write) -> Result<(), FormatError>,
) -> Result<(), CliError> {
    let file = File::create(path)
        .map_err(|e| CliError::new(EXIT_IO, format!("cannot create {}: {e}", path.display())))?;
    let mut out = BufWriter::new(file);
    body(&mut out).map_err(|e| match e {
        FormatError::Io(io) => CliError::new(EXIT_IO, format!("writing {}: {io}", path.display())),
        other => other.into(),
    })?;
    out.flush()
        .map_err(|e| CliError::new(EXIT_IO, format!("writing {}: {e}", path.display())))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    write_file(path, |out| {
        serde_json::to_writer_pretty(&mut *out, value)?;
        writeln!(out)?;
        Ok(())
    })
}

fn display(path: &Path) -> String {
    path.display().to_string()
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_INPUT } else { EXIT_OK };
            let rendered = e.render().to_string();
            let _ = if e.use_stderr() {
                write!(stderr, "{rendered}")
            } else {
                write!(stdout, "{rendered}")
            };
            return code;
        }
    };

    let pool = match cli.threads {
        Some(0) => {
            let _ = writeln!(stderr, "error: --threads must be at least 1");
            return EXIT_CONFIG;
        }
        Some(n) => rayon::ThreadPoolBuilder::new().num_threads(n).build(),
        None => rayon::ThreadPoolBuilder::new().build(),
    };
    let pool = match pool {
        Ok(p) => p,
        Err(e) => {
            let _ = writeln!(stderr, "error: thread pool: {e}");
            return EXIT_CONFIG;
        }
    };

    let started = Instant::now();
    // Command output is buffered so the command body can run on the pool.
    let (result, buffered) = pool.install(|| {
        let mut buffer = Vec::new();
        let result = dispatch(&cli.command, &mut buffer);
        (result, buffer)
    });
    if let Err(e) = stdout.write_all(&buffered).and_then(|_| stdout.flush()) {
        let _ = writeln!(stderr, "error: writing output: {e}");
        return EXIT_IO;
    }
    match result {
        Ok(mut manifest) => {
            if let Some(path) = &cli.manifest {
                manifest.duration_seconds = started.elapsed().as_secs_f64();
                if let Err(e) = write_json(path, &manifest) {
                    let _ = writeln!(stderr, "error: {}", e.message);
                    return e.code;
                }
            }
            EXIT_OK
        }
        Err(e) => {
            let _ = writeln!(stderr, "error: {}", e.message);
            e.code
        }
    }
}

fn dispatch(command: &Command, stdout: &mut dyn Write) -> Result<RunManifest, CliError> {
    match command {
        Command::Stats(args) => cmd_stats(args),
        Command::Frontier(args) => cmd_frontier(args, stdout),
        Command::Dissimilarity(args) => cmd_dissimilarity(args, stdout),
        Command::Validate(args) => cmd_validate(args, stdout),
        Command::Fixture(args) => cmd_fixture(args, stdout),
    }
}

fn manifest(
    command: &str,
    inputs: Vec<String>,
    config: ConfigEcho,
    outputs: Vec<String>,
) -> RunManifest {
    RunManifest {
        command: command.to_owned(),
        inputs,
        config,
        outputs,
        duration_seconds: 0.0,
    }
}

pub fn cmd_stats(args: &StatsArgs) -> Result<RunManifest, CliError> {
    let (stats, input): (ReturnStatistics, String) = match (&args.prices, &args.fixture) {
        (_, Some(name)) => {
            let file = match name.as_str() {
                "reference" | "reference_stats.json" => "reference_stats.json",
                other => {
                    return Err(CliError::new(
                        EXIT_INPUT,
                        format!("unknown statistics fixture `{other}`"),
                    ))
                }
            };
            let text = fixtures::fixture_text(file)
                .ok_or_else(|| CliError::new(EXIT_INPUT, format!("fixture `{file}` not found")))?;
            let stats = serde_json::from_str(&text)
                .map_err(|e| CliError::new(EXIT_INPUT, e.to_string()))?;
            (stats, format!("fixture:{file}"))
        }
        (Some(path), None) => {
            let prices = load_prices(open(path)?)?;
            let prices = if args.resample > 1 {
                prices.resample(args.resample)?
            } else {
                prices
            };
            (
                estimate_statistics(&compute_returns(&prices))?,
                display(path),
            )
        }
        (None, None) => {
            return Err(CliError::new(
                EXIT_INPUT,
                "either --prices or --fixture is required",
            ))
        }
    };
    write_json(&args.out, &stats)?;
    Ok(manifest(
        "stats",
        vec![input],
        ConfigEcho {
            seed: DEFAULT_SEED,
            ..ConfigEcho::default()
        },
        vec![display(&args.out)],
    ))
}

pub fn cmd_frontier(args: &FrontierArgs, stdout: &mut dyn Write) -> Result<RunManifest, CliError> {
    let file = read_model_file(open(&args.model)?)?;
    let model = file.clone().into_model(Some(file.tau.unwrap_or(0.0)))?;
    let taus = parse_tau_grid(&args.taus)?;
    let config = args.solver.config();
    config.validate()?;
    let frontier = sweep_frontier(&model, &taus, &config)?;
    let labels = model.stats().labels.clone();
    write_file(&args.out, |out| write_frontier_csv(out, &frontier, &labels))?;

    let io_err = |e: std::io::Error| CliError::new(EXIT_IO, e.to_string());
    writeln!(
        stdout,
        "{} frontier ({} points)",
        frontier.model_tag,
        frontier.points.len()
    )
    .map_err(io_err)?;
    let mut header = format!("{:>8} {:>10} {:>14}", "tau", "risk", "status");
    for l in &labels {
        header.push_str(&format!(" {:>12}", truncate(l, 12)));
    }
    writeln!(stdout, "{header}").map_err(io_err)?;
    for p in &frontier.points {
        let mut line = format!("{:>8.4} {:>10.4} {:>14}", p.tau, p.risk, p.status.as_str());
        for w in &p.weights {
            line.push_str(&format!(" {w:>12.4}"));
        }
        writeln!(stdout, "{line}").map_err(io_err)?;
    }

    Ok(manifest(
        "frontier",
        vec![display(&args.model)],
        ConfigEcho {
            beta: model.variant().beta(),
            taus,
            shifts: model.variant().spec().map(|s| s.shifts().to_vec()),
            distribution: model.variant().spec().map(|s| s.distribution().clone()),
            seed: config.rng_seed,
            solver: Some(config),
            samples: None,
        },
        vec![display(&args.out)],
    ))
}

fn truncate(s: &str, max: usize) -> String {
    s.chars().take(max).collect()
}

pub fn cmd_dissimilarity(
    args: &DissimilarityArgs,
    stdout: &mut dyn Write,
) -> Result<RunManifest, CliError> {
    if args.frontiers.len() < 2 {
        return Err(CliError::new(
            EXIT_INPUT,
            "need at least two frontier files",
        ));
    }
    let labels: Vec<String> = match &args.labels {
        Some(text) => text.split(',').map(|s| s.trim().to_owned()).collect(),
        None => args
            .frontiers
            .iter()
            .map(|p| {
                p.file_stem()
                    .map(|s| s.to_string_lossy().into_owned())
                    .unwrap_or_else(|| display(p))
            })
            .collect(),
    };
    if labels.len() != args.frontiers.len() {
        return Err(CliError::new(
            EXIT_INPUT,
            "one label per frontier file is required",
        ));
    }
    let mut risk_vectors = Vec::new();
    let mut grid: Option<Vec<f64>> = None;
    for (path, label) in args.frontiers.iter().zip(&labels) {
        let table = read_frontier_csv(open(path)?, label)?;
        let taus = table.frontier.taus();
        match &grid {
            None => grid = Some(taus),
            Some(g) => {
                let same = g.len() == taus.len()
                    && g.iter().zip(&taus).all(|(a, b)| (a - b).abs() <= 1e-9);
                if !same {
                    return Err(CliError::new(
                        EXIT_INPUT,
                        format!("{} uses a different tau grid", path.display()),
                    ));
                }
            }
        }
        risk_vectors.push(table.frontier.risks());
    }
    let matrix = dissimilarity_matrix(&risk_vectors, &labels)?;
    write_json(&args.out, &matrix)?;
    for (label, row) in labels.iter().zip(&matrix.d) {
        let cells: Vec<String> = row.iter().map(|v| format!("{v:.4}")).collect();
        writeln!(stdout, "{label}: {}", cells.join(" "))
            .map_err(|e| CliError::new(EXIT_IO, e.to_string()))?;
    }
    Ok(manifest(
        "dissimilarity",
        args.frontiers.iter().map(|p| display(p)).collect(),
        ConfigEcho {
            seed: DEFAULT_SEED,
            ..ConfigEcho::default()
        },
        vec![display(&args.out)],
    ))
}

pub fn cmd_validate(args: &ValidateArgs, stdout: &mut dyn Write) -> Result<RunManifest, CliError> {
    let file = read_model_file(open(&args.model)?)?;
    let mut inputs = vec![display(&args.model)];
    let (weights, row_tau) = match (&args.weights, &args.frontier) {
        (Some(text), _) => (parse_weights(text)?, None),
        (None, Some(path)) => {
            inputs.push(display(path));
            let row = args.row.unwrap_or(0);
            let table = read_frontier_csv(open(path)?, "frontier")?;
            let point = table.frontier.points.get(row).ok_or_else(|| {
                CliError::new(EXIT_INPUT, format!("frontier has no data row {row}"))
            })?;
            if point.weights.is_empty() {
                return Err(CliError::new(
                    EXIT_INPUT,
                    format!("frontier row {row} has no weights"),
                ));
            }
            (point.weights.clone(), Some(point.tau))
        }
        (None, None) => {
            return Err(CliError::new(
                EXIT_INPUT,
                "either --weights or --frontier is required",
            ))
        }
    };
    let tau = args.tau.or(row_tau).or(file.tau);
    let model = file.into_model(tau)?;
    let (Some(spec), Some(beta)) = (model.variant().spec(), model.variant().beta()) else {
        return Err(CliError::new(
            EXIT_INPUT,
            "validation needs a robust model with perturbations",
        ));
    };
    let n = model.num_assets();
    if weights.len() != n {
        return Err(CliError::new(
            EXIT_INPUT,
            format!("{} weights given for a {n}-asset model", weights.len()),
        ));
    }
    if weights.iter().any(|w| *w < -1e-10) || (weights.iter().sum::<f64>() - 1.0).abs() > 1e-6 {
        return Err(CliError::new(
            EXIT_INPUT,
            "weights must be nonnegative and sum to 1",
        ));
    }
    if args.samples == 0 {
        return Err(CliError::new(EXIT_INPUT, "--samples must be at least 1"));
    }
    let probability = monte_carlo_validate(
        &weights,
        model.stats(),
        spec,
        model.tau(),
        args.samples,
        args.seed,
    )?;
    let threshold = beta - one_sided_sampling_bound(beta, args.samples);
    let passed = probability >= threshold;
    writeln!(
        stdout,
        "empirical_probability={probability:.6}\nbeta={beta}\nthreshold={threshold:.6}\nsamples={}\nresult={}",
        args.samples,
        if passed { "pass" } else { "fail" }
    )
    .map_err(|e| CliError::new(EXIT_IO, e.to_string()))?;
    if !passed {
        return Err(CliError::new(
            EXIT_VALIDATION,
            format!("empirical probability {probability:.6} below {threshold:.6}"),
        ));
    }
    Ok(manifest(
        "validate",
        inputs,
        ConfigEcho {
            beta: Some(beta),
            taus: vec![model.tau()],
            shifts: Some(spec.shifts().to_vec()),
            distribution: Some(spec.distribution().clone()),
            seed: args.seed,
            solver: None,
            samples: Some(args.samples),
        },
        Vec::new(),
    ))
}

pub fn cmd_fixture(args: &FixtureArgs, stdout: &mut dyn Write) -> Result<RunManifest, CliError> {
    let io_err = |e: std::io::Error| CliError::new(EXIT_IO, e.to_string());
    if args.list {
        for (name, _) in fixtures::FILES {
            writeln!(stdout, "{name}").map_err(io_err)?;
        }
        return Ok(manifest(
            "fixture",
            Vec::new(),
            ConfigEcho {
                seed: DEFAULT_SEED,
                ..ConfigEcho::default()
            },
            Vec::new(),
        ));
    }
    let (Some(name), Some(out)) = (&args.name, &args.out) else {
        return Err(CliError::new(
            EXIT_INPUT,
            "fixture name and --out are required",
        ));
    };
    let text = fixtures::fixture_text(name)
        .ok_or_else(|| CliError::new(EXIT_INPUT, format!("unknown fixture `{name}`")))?;
    std::fs::write(out, text)
        .map_err(|e| CliError::new(EXIT_IO, format!("{}: {e}", out.display())))?;
    Ok(manifest(
        "fixture",
        vec![format!("fixture:{name}")],
        ConfigEcho {
            seed: DEFAULT_SEED,
            ..ConfigEcho::default()
        },
        vec![display(out)],
    ))
}
