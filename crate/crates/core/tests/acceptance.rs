//! End-to-end acceptance criteria.
//!
//! Runs every criterion at its stated tolerance, prints one `PASS`/`FAIL`
//! line per criterion and exits nonzero if any criterion fails.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use chance_portfolio::analysis::{
    dissimilarity_matrix, monte_carlo_validate, sample_perturbation_sums, sweep_frontier, Frontier,
};
use chance_portfolio::distributions::sampling::Sampler;
use chance_portfolio::fixtures::{
    canonical_taus, exponential_model, nominal_model, normal_model, reference_statistics,
    BASIC_SHIFTS, BETA, EXPONENTIAL_REFERENCE, NOMINAL_REFERENCE, NORMAL_REFERENCE,
    REFERENCE_DISTANCES,
};
use chance_portfolio::solver::objective_lipschitz_bound;
use chance_portfolio::{
    erf_inv, grid_oracle, hypoexp_cdf, hypoexp_pdf, weighted_normal_params, PerturbationSpec,
    PortfolioModel, SolverConfig, Status, Variant, WeightedExponentialSum, WeightedNormalSum,
};

const SAMPLES: usize = 1_000_000;
const SEED: u64 = 42;

type Check<'a> = Box<dyn Fn() -> Outcome + 'a>;

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: String) -> Outcome {
    Outcome { passed, detail }
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

fn frontier(template: &PortfolioModel) -> Frontier {
    sweep_frontier(template, &canonical_taus(), &SolverConfig::default()).expect("frontier sweep")
}

fn all_converged(f: &Frontier) -> bool {
    f.points.iter().all(|p| p.status == Status::Converged)
}

fn golden(
    f: &Frontier,
    reference: &[chance_portfolio::fixtures::ReferenceRow],
    weight_tol: f64,
    risk_tol: f64,
    elapsed: Duration,
    budget: Duration,
) -> Outcome {
    let mut worst_w = 0.0f64;
    let mut worst_r = 0.0f64;
    for (p, r) in f.points.iter().zip(reference) {
        worst_w = worst_w.max(max_abs_diff(&p.weights, &r.weights));
        worst_r = worst_r.max((p.risk - r.risk).abs());
    }
    let passed = all_converged(f)
        && f.points.len() == reference.len()
        && worst_w <= weight_tol
        && worst_r <= risk_tol
        && elapsed < budget;
    outcome(
        passed,
        format!(
            "max |dw| = {worst_w:.2e} (tol {weight_tol:.0e}), max |drisk| = {worst_r:.2e} (tol {risk_tol:.0e}), {:.2}s (budget {}s)",
            elapsed.as_secs_f64(),
            budget.as_secs()
        ),
    )
}

struct Context {
    nominal: Frontier,
    normal: Frontier,
    exponential: Frontier,
    nominal_time: Duration,
    normal_time: Duration,
    exponential_time: Duration,
}

fn criterion_1(ctx: &Context) -> Outcome {
    golden(
        &ctx.nominal,
        &NOMINAL_REFERENCE,
        2e-3,
        1e-3,
        ctx.nominal_time,
        Duration::from_secs(5),
    )
}

fn criterion_2(ctx: &Context) -> Outcome {
    golden(
        &ctx.normal,
        &NORMAL_REFERENCE,
        3e-3,
        2e-3,
        ctx.normal_time,
        Duration::from_secs(10),
    )
}

fn criterion_3(ctx: &Context) -> Outcome {
    let start = Instant::now();
    let mut oracle_time = Duration::ZERO;
    let bound = objective_lipschitz_bound(&reference_statistics()) * 1e-3;
    let mut failures = Vec::new();
    let mut worst_excess = f64::NEG_INFINITY;
    let mut worst_gap = 0.0f64;
    for (p, r) in ctx.exponential.points.iter().zip(&EXPONENTIAL_REFERENCE) {
        let model = exponential_model(p.tau, BETA);
        let slack = model.constraint_slack(&p.weights).expect("slack");
        let oracle_start = Instant::now();
        let oracle = grid_oracle(&model, 1e-3).expect("oracle");
        oracle_time += oracle_start.elapsed();
        let gap = (p.risk - oracle.risk).abs();
        worst_excess = worst_excess.max(p.risk - r.risk);
        worst_gap = worst_gap.max(gap);
        if p.status != Status::Converged || p.risk > r.risk + 5e-3 || slack < -1e-6 || gap > bound {
            failures.push(format!(
                "tau {}: risk {:.4} slack {slack:.1e} oracle {:.4}",
                p.tau, p.risk, oracle.risk
            ));
        }
    }
    let elapsed = ctx.exponential_time + start.elapsed();
    let passed = failures.is_empty() && elapsed < Duration::from_secs(60);
    outcome(
        passed,
        format!(
            "max (risk - reported) = {worst_excess:+.4} (tol +5e-3), max oracle gap = {worst_gap:.2e} (bound {bound:.2e}), {:.2}s (solve {:.2}s, oracle {:.2}s; budget 60s){}",
            elapsed.as_secs_f64(),
            ctx.exponential_time.as_secs_f64(),
            oracle_time.as_secs_f64(),
            if failures.is_empty() { String::new() } else { format!("; {}", failures.join("; ")) }
        ),
    )
}

fn criterion_4(ctx: &Context) -> Outcome {
    let spec = PerturbationSpec::standard_normal(BASIC_SHIFTS.to_vec()).expect("spec");
    let template = PortfolioModel::new(
        reference_statistics(),
        0.0,
        Variant::RobustNormal { spec, beta: 0.5 },
    )
    .expect("model");
    let half = frontier(&template);
    let worst = half
        .points
        .iter()
        .zip(&ctx.nominal.points)
        .map(|(a, b)| max_abs_diff(&a.weights, &b.weights))
        .fold(0.0, f64::max);
    outcome(
        all_converged(&half) && worst <= 1e-6,
        format!("max |w(beta=0.5) - w(nominal)| = {worst:.2e} (tol 1e-6)"),
    )
}

fn criterion_5(ctx: &Context) -> Outcome {
    let labels: Vec<String> = ["nominal", "robust_normal", "robust_exponential"]
        .map(String::from)
        .to_vec();
    let m = dissimilarity_matrix(
        &[
            ctx.nominal.risks(),
            ctx.normal.risks(),
            ctx.exponential.risks(),
        ],
        &labels,
    )
    .expect("dissimilarity");
    let checks = [
        (m.get(0, 1), REFERENCE_DISTANCES[0], 2e-3),
        (m.get(0, 2), REFERENCE_DISTANCES[1], 2e-2),
        (m.get(1, 2), REFERENCE_DISTANCES[2], 2e-2),
    ];
    let passed = checks
        .iter()
        .all(|(got, want, tol)| (got - want).abs() <= *tol);
    let detail = ["D12", "D13", "D23"]
        .iter()
        .zip(&checks)
        .map(|(name, (got, want, tol))| format!("{name} = {got:.4} (want {want} +/- {tol:.0e})"))
        .collect::<Vec<_>>()
        .join(", ");
    outcome(passed, detail)
}

fn criterion_6() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);

    // Normalization: composite 5-point Gauss-Legendre over (0, L] with L far
    // in the tail. The open rule never evaluates the jump at zero.
    const NODES: [f64; 5] = [
        0.0,
        -0.538_469_310_105_683_1,
        0.538_469_310_105_683_1,
        -0.906_179_845_938_664,
        0.906_179_845_938_664,
    ];
    const WEIGHTS: [f64; 5] = [
        0.568_888_888_888_888_9,
        0.478_628_670_499_366_5,
        0.478_628_670_499_366_5,
        0.236_926_885_056_189_1,
        0.236_926_885_056_189_1,
    ];
    let mut worst_mass = 0.0f64;
    for _ in 0..50 {
        let k = rng.random_range(1..=5);
        let coefficients: Vec<f64> = (0..k).map(|_| rng.random_range(0.1..2.0)).collect();
        let rates: Vec<f64> = (0..k).map(|_| rng.random_range(0.5..3.0)).collect();
        let sum = WeightedExponentialSum::new(coefficients, rates).expect("sum");
        let scale = sum
            .coefficients()
            .iter()
            .zip(sum.rates())
            .map(|(c, r)| c / r)
            .fold(0.0, f64::max);
        let upper = 60.0 * scale;
        let panels = 4_000;
        let h = upper / panels as f64;
        let mut acc = 0.0;
        for i in 0..panels {
            let mid = (i as f64 + 0.5) * h;
            for (t, w) in NODES.iter().zip(WEIGHTS) {
                acc += w * hypoexp_pdf(&sum, mid + 0.5 * h * t).expect("pdf");
            }
        }
        let acc = acc * 0.5 * h;
        worst_mass = worst_mass.max((acc - 1.0).abs());
    }

    // Kolmogorov-Smirnov distance against sampled sums.
    let weights = [0.2, 0.3, 0.5];
    let spec = PerturbationSpec::exponential(BASIC_SHIFTS.to_vec(), vec![1.0; 3]).expect("spec");
    let coefficients: Vec<f64> = BASIC_SHIFTS
        .iter()
        .zip(&weights)
        .map(|(s, x)| s * x)
        .collect();
    let sum = WeightedExponentialSum::new(coefficients, vec![1.0; 3]).expect("sum");
    let mut draws = sample_perturbation_sums(&weights, &spec, SAMPLES, SEED);
    draws.sort_by(f64::total_cmp);
    let n = draws.len() as f64;
    let mut ks = 0.0f64;
    for (i, y) in draws.iter().enumerate() {
        let f = hypoexp_cdf(&sum, *y).expect("cdf");
        ks = ks
            .max((f - i as f64 / n).abs())
            .max(((i + 1) as f64 / n - f).abs());
    }

    let inv = erf_inv(-0.9).expect("erf_inv");
    let inv_err = (inv + 1.1630871537).abs();
    outcome(
        worst_mass <= 1e-6 && ks <= 0.005 && inv_err <= 1e-9,
        format!(
            "max |mass - 1| = {worst_mass:.2e} (tol 1e-6), KS = {ks:.2e} (tol 5e-3), erf_inv(-0.9) = {inv:.10} (err {inv_err:.1e})"
        ),
    )
}

fn criterion_7() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED + 7);
    let mut worst = 0.0f64;
    for set in 0..10u64 {
        let k = rng.random_range(1..=5);
        let coefficients: Vec<f64> = (0..k).map(|_| rng.random_range(0.0..1.0)).collect();
        let means: Vec<f64> = (0..k).map(|_| rng.random_range(-1.0..1.0)).collect();
        let stddevs: Vec<f64> = (0..k).map(|_| rng.random_range(0.1..2.0)).collect();
        let sum = WeightedNormalSum::new(coefficients.clone(), means.clone(), stddevs.clone())
            .expect("sum");
        let (m, s) = weighted_normal_params(&sum);

        let mut sampler = Sampler::new(SEED, set);
        let mut total = 0.0;
        let mut total_sq = 0.0;
        for _ in 0..SAMPLES {
            let v: f64 = (0..k)
                .map(|j| coefficients[j] * sampler.normal(means[j], stddevs[j]))
                .sum();
            total += v;
            total_sq += v * v;
        }
        let n = SAMPLES as f64;
        let mean = total / n;
        let std = ((total_sq - n * mean * mean) / (n - 1.0)).sqrt();
        let mean_z = (mean - m).abs() / (s / n.sqrt());
        let std_z = (std - s).abs() / (s / (2.0 * n).sqrt());
        worst = worst.max(mean_z).max(std_z);
    }
    outcome(
        worst <= 3.0,
        format!("max standardized error = {worst:.2} (tol 3 standard errors)"),
    )
}

fn criterion_8(ctx: &Context) -> Outcome {
    let stats = reference_statistics();
    let normal_spec = PerturbationSpec::standard_normal(BASIC_SHIFTS.to_vec()).expect("spec");
    let exp_spec =
        PerturbationSpec::exponential(BASIC_SHIFTS.to_vec(), vec![1.0; 3]).expect("spec");
    let mut normal_range = (f64::INFINITY, f64::NEG_INFINITY);
    let mut exp_min = f64::INFINITY;
    for p in &ctx.normal.points {
        let prob = monte_carlo_validate(&p.weights, &stats, &normal_spec, p.tau, SAMPLES, SEED)
            .expect("mc");
        normal_range = (normal_range.0.min(prob), normal_range.1.max(prob));
    }
    for p in &ctx.exponential.points {
        let prob =
            monte_carlo_validate(&p.weights, &stats, &exp_spec, p.tau, SAMPLES, SEED).expect("mc");
        exp_min = exp_min.min(prob);
    }
    let passed = (normal_range.0 - BETA).abs() <= 0.01
        && (normal_range.1 - BETA).abs() <= 0.01
        && exp_min >= BETA - 0.01;
    outcome(
        passed,
        format!(
            "normal in [{:.4}, {:.4}] (want 0.95 +/- 0.01), exponential min {exp_min:.4} (want >= 0.94)",
            normal_range.0, normal_range.1
        ),
    )
}

fn criterion_9(ctx: &Context) -> Outcome {
    let bound = objective_lipschitz_bound(&reference_statistics()) * 1e-3;
    let mut worst = 0.0f64;
    for (f, build) in [
        (&ctx.nominal, nominal_model as fn(f64) -> PortfolioModel),
        (&ctx.normal, |tau| normal_model(tau, BETA)),
    ] {
        for p in &f.points {
            let oracle = grid_oracle(&build(p.tau), 1e-3).expect("oracle");
            worst = worst.max((p.risk - oracle.risk).abs());
        }
    }
    outcome(
        worst <= bound,
        format!("max |solve - oracle| = {worst:.2e} (bound {bound:.2e})"),
    )
}

fn timed(template: &PortfolioModel) -> (Frontier, Duration) {
    let start = Instant::now();
    let f = frontier(template);
    (f, start.elapsed())
}

fn main() -> ExitCode {
    let total = Instant::now();
    let (nominal, nominal_time) = timed(&nominal_model(0.0));
    let (normal, normal_time) = timed(&normal_model(0.0, BETA));
    let (exponential, exponential_time) = timed(&exponential_model(0.0, BETA));
    let ctx = Context {
        nominal,
        normal,
        exponential,
        nominal_time,
        normal_time,
        exponential_time,
    };

    let criteria: [(&str, Check<'_>); 9] = [
        ("1 nominal golden", Box::new(|| criterion_1(&ctx))),
        ("2 robust-normal golden", Box::new(|| criterion_2(&ctx))),
        (
            "3 robust-exponential dominance",
            Box::new(|| criterion_3(&ctx)),
        ),
        (
            "4 beta = 0.5 reduces to nominal",
            Box::new(|| criterion_4(&ctx)),
        ),
        ("5 dissimilarity matrix", Box::new(|| criterion_5(&ctx))),
        ("6 distribution correctness", Box::new(criterion_6)),
        ("7 weighted normal moments", Box::new(criterion_7)),
        (
            "8 Monte Carlo chance validation",
            Box::new(|| criterion_8(&ctx)),
        ),
        ("9 oracle equivalence", Box::new(|| criterion_9(&ctx))),
    ];

    let mut failed = 0;
    for (name, check) in &criteria {
        let result = check();
        if !result.passed {
            failed += 1;
        }
        println!(
            "{} criterion {name}: {}",
            if result.passed { "PASS" } else { "FAIL" },
            result.detail
        );
    }
    let elapsed = total.elapsed();
    println!(
        "{} of {} criteria passed in {:.1}s",
        criteria.len() - failed,
        criteria.len(),
        elapsed.as_secs_f64()
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
