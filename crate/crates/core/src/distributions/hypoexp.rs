//! Density and distribution function of `Y = sum_j c_j Z_j`, where the `Z_j`
//! are independent exponentials with rates `lambda_j` and every `c_j > 0`.
//!
//! With `k` terms the density on `y > 0` is
//!
//! ```text
//! g(y) = prod_j lambda_j * sum_k c_k^(k-2) exp(-lambda_k y / c_k)
//!                               / prod_{l != k} (c_k lambda_l - c_l lambda_k)
//! ```
//!
//! and the CDF is its closed-form antiderivative from 0. The partial-fraction
//! sum needs pairwise distinct ratios `lambda_j / c_j`; coincident ratios are
//! separated by a fixed relative nudge of the coefficients. When the ratios
//! are merely close, the alternating sum loses digits, and evaluation switches
//! to the equivalent bidiagonal phase-type representation `1 - e1' exp(T a) 1`.

use super::DistributionError;

/// Relative gap below which two ratios count as coincident.
pub const DEGENERACY_THRESHOLD: f64 = 1e-9;
/// Per-index relative nudge applied to the coefficients of a degenerate sum.
pub const NUDGE: f64 = 1e-7;
/// Raw CDF values may leave `[0, 1]` by at most this much before clamping.
pub const CLAMP_BAND: f64 = 1e-8;
/// Estimated cancellation error above which the closed form is abandoned.
const CANCELLATION_LIMIT: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct WeightedExponentialSum {
    coefficients: Vec<f64>,
    rates: Vec<f64>,
    nudged: bool,
}

impl WeightedExponentialSum {
    pub fn new(coefficients: Vec<f64>, rates: Vec<f64>) -> Result<Self, DistributionError> {
        if coefficients.len() != rates.len() {
            return Err(DistributionError::LengthMismatch {
                coefficients: coefficients.len(),
                parameters: rates.len(),
            });
        }
        if coefficients.is_empty() {
            return Err(DistributionError::Empty);
        }
        if let Some(&c) = coefficients.iter().find(|c| !(**c > 0.0 && c.is_finite())) {
            return Err(DistributionError::InvalidParameter(format!(
                "coefficient {c} must be positive"
            )));
        }
        if let Some(&r) = rates.iter().find(|r| !(**r > 0.0 && r.is_finite())) {
            return Err(DistributionError::InvalidParameter(format!(
                "rate {r} must be positive"
            )));
        }
        let mut sum = Self {
            coefficients,
            rates,
            nudged: false,
        };
        if sum.has_degenerate_pair() {
            for (k, c) in sum.coefficients.iter_mut().enumerate() {
                *c *= 1.0 + (k + 1) as f64 * NUDGE;
            }
            sum.nudged = true;
            if sum.has_degenerate_pair() {
                return Err(DistributionError::DegenerateCoefficients);
            }
        }
        Ok(sum)
    }

    /// Coefficients actually used, after any nudge.
    pub fn coefficients(&self) -> &[f64] {
        &self.coefficients
    }

    pub fn rates(&self) -> &[f64] {
        &self.rates
    }

    pub fn len(&self) -> usize {
        self.rates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rates.is_empty()
    }

    /// Whether coincident ratios forced a nudge.
    pub fn was_nudged(&self) -> bool {
        self.nudged
    }

    /// `E[Y] = sum c_j / lambda_j`.
    pub fn mean(&self) -> f64 {
        self.coefficients
            .iter()
            .zip(&self.rates)
            .map(|(c, l)| c / l)
            .sum()
    }

    fn has_degenerate_pair(&self) -> bool {
        let k = self.len();
        (0..k).any(|a| {
            (a + 1..k).any(|b| {
                let lhs = self.coefficients[a] * self.rates[b];
                let rhs = self.coefficients[b] * self.rates[a];
                (lhs - rhs).abs() < DEGENERACY_THRESHOLD * lhs.abs().max(rhs.abs())
            })
        })
    }

    /// `prod_{l != k} (c_k lambda_l - c_l lambda_k)`.
    fn denominator(&self, k: usize) -> f64 {
        let (ck, lk) = (self.coefficients[k], self.rates[k]);
        self.coefficients
            .iter()
            .zip(&self.rates)
            .enumerate()
            .filter(|(l, _)| *l != k)
            .map(|(_, (cl, ll))| ck * ll - cl * lk)
            .product()
    }

    fn rate_product(&self) -> f64 {
        self.rates.iter().product()
    }

    /// Effective exponential rates `lambda_j / c_j` of the scaled terms.
    fn scaled_rates(&self) -> Vec<f64> {
        self.rates
            .iter()
            .zip(&self.coefficients)
            .map(|(l, c)| l / c)
            .collect()
    }
}

/// Density of the weighted sum at `y`; zero on `y <= 0`.
pub fn hypoexp_pdf(sum: &WeightedExponentialSum, y: f64) -> Result<f64, DistributionError> {
    if !(y > 0.0) {
        return Ok(0.0);
    }
    let k = sum.len();
    let lead = sum.rate_product();
    let mut total = 0.0;
    let mut magnitude = 0.0;
    for idx in 0..k {
        let c = sum.coefficients[idx];
        let term = c.powi(k as i32 - 2) * (-sum.rates[idx] * y / c).exp() / sum.denominator(idx);
        total += term;
        magnitude += term.abs();
    }
    let value = lead * total;
    if lead * magnitude * f64::EPSILON * (k + 2) as f64 > CANCELLATION_LIMIT * value.abs().max(1.0)
    {
        return Ok(phase_type_pdf(&sum.scaled_rates(), y).max(0.0));
    }
    Ok(value.max(0.0))
}

/// `P(Y <= a)`; zero on `a <= 0`, nondecreasing, tends to one.
pub fn hypoexp_cdf(sum: &WeightedExponentialSum, a: f64) -> Result<f64, DistributionError> {
    if !(a > 0.0) {
        return Ok(0.0);
    }
    if a == f64::INFINITY {
        return Ok(1.0);
    }
    let k = sum.len();
    let lead = sum.rate_product();
    let mut total = 0.0;
    let mut magnitude = 0.0;
    for idx in 0..k {
        let c = sum.coefficients[idx];
        let lam = sum.rates[idx];
        // c^(k-1) (exp(-lam a / c) - 1) / (-lam * denominator)
        let term = c.powi(k as i32 - 1) * -(-lam * a / c).exp_m1() / (lam * sum.denominator(idx));
        total += term;
        magnitude += term.abs();
    }
    let raw = if lead * magnitude * f64::EPSILON * (k + 2) as f64 > CANCELLATION_LIMIT {
        phase_type_cdf(&sum.scaled_rates(), a)
    } else {
        lead * total
    };
    if !raw.is_finite() || !(-CLAMP_BAND..=1.0 + CLAMP_BAND).contains(&raw) {
        return Err(DistributionError::DegenerateCoefficients);
    }
    Ok(raw.clamp(0.0, 1.0))
}

/// `exp(T a)` for the upper-bidiagonal generator with `T_ii = -r_i`,
/// `T_{i,i+1} = r_i`, by scaling and squaring a truncated Taylor series.
fn bidiagonal_expm(rates: &[f64], a: f64) -> Vec<Vec<f64>> {
    let n = rates.len();
    let norm = rates.iter().fold(0.0f64, |m, r| m.max(2.0 * r * a));
    let squarings = if norm > 0.5 {
        (norm / 0.5).log2().ceil() as u32
    } else {
        0
    };
    let h = a / 2f64.powi(squarings as i32);
    let mut gen = vec![vec![0.0; n]; n];
    for i in 0..n {
        gen[i][i] = -rates[i] * h;
        if i + 1 < n {
            gen[i][i + 1] = rates[i] * h;
        }
    }
    let mut result = identity(n);
    let mut power = identity(n);
    for j in 1..=30 {
        power = matmul(&power, &gen);
        let scale = 1.0 / (1..=j).map(|v| v as f64).product::<f64>();
        let mut max_term = 0.0f64;
        for r in 0..n {
            for c in 0..n {
                let t = power[r][c] * scale;
                result[r][c] += t;
                max_term = max_term.max(t.abs());
            }
        }
        if max_term < 1e-18 {
            break;
        }
    }
    for _ in 0..squarings {
        result = matmul(&result, &result);
    }
    result
}

fn phase_type_cdf(rates: &[f64], a: f64) -> f64 {
    let e = bidiagonal_expm(rates, a);
    1.0 - e[0].iter().sum::<f64>()
}

fn phase_type_pdf(rates: &[f64], y: f64) -> f64 {
    let e = bidiagonal_expm(rates, y);
    let n = rates.len();
    e[0][n - 1] * rates[n - 1]
}

fn identity(n: usize) -> Vec<Vec<f64>> {
    (0..n)
        .map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
        .collect()
}

fn matmul(a: &[Vec<f64>], b: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = a.len();
    (0..n)
        .map(|i| {
            (0..n)
                .map(|j| (0..n).map(|k| a[i][k] * b[k][j]).sum())
                .collect()
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distributions::sampling::Sampler;
    use proptest::prelude::*;

    fn sum(c: &[f64], l: &[f64]) -> WeightedExponentialSum {
        WeightedExponentialSum::new(c.to_vec(), l.to_vec()).unwrap()
    }

    /// Composite Gauss-Legendre (5 point) quadrature on `[lo, hi]`.
    fn integrate(f: impl Fn(f64) -> f64, lo: f64, hi: f64, panels: usize) -> f64 {
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
        let width = (hi - lo) / panels as f64;
        (0..panels)
            .map(|p| {
                let mid = lo + (p as f64 + 0.5) * width;
                NODES
                    .iter()
                    .zip(WEIGHTS)
                    .map(|(n, w)| w * f(mid + 0.5 * width * n))
                    .sum::<f64>()
                    * 0.5
                    * width
            })
            .sum()
    }

    #[test]
    fn single_term_reduces_to_scaled_exponential() {
        let s = sum(&[1.0], &[1.0]);
        assert!((hypoexp_pdf(&s, 2.0).unwrap() - (-2.0f64).exp()).abs() < 1e-15);
        let s = sum(&[2.0], &[1.0]);
        assert!((hypoexp_cdf(&s, 2.0).unwrap() - (1.0 - (-1.0f64).exp())).abs() < 1e-15);
    }

    #[test]
    fn zero_below_support() {
        let s = sum(&[0.3, 0.1, 0.7], &[1.0, 2.0, 0.5]);
        assert_eq!(hypoexp_pdf(&s, -1.0).unwrap(), 0.0);
        assert_eq!(hypoexp_cdf(&s, 0.0).unwrap(), 0.0);
        assert_eq!(hypoexp_cdf(&s, -3.0).unwrap(), 0.0);
    }

    #[test]
    fn two_term_density_normalizes() {
        let s = sum(&[1.0, 2.0], &[1.0, 1.0]);
        let mass = integrate(|y| hypoexp_pdf(&s, y).unwrap(), 0.0, 200.0, 4000);
        assert!((mass - 1.0).abs() < 1e-6, "mass {mass}");
    }

    #[test]
    fn three_term_cdf_matches_sampling() {
        let c: Vec<f64> = [0.2, 0.1, 0.3].iter().map(|v| v / 3.0).collect();
        let s = sum(&c, &[1.0, 1.0, 1.0]);
        let exact = hypoexp_cdf(&s, 0.15).unwrap();
        let mut sampler = Sampler::new(11, 0);
        let draws = 1_000_000;
        let hits = (0..draws)
            .filter(|_| {
                c.iter()
                    .map(|ci| ci * sampler.exponential(1.0))
                    .sum::<f64>()
                    <= 0.15
            })
            .count();
        let empirical = hits as f64 / draws as f64;
        assert!((exact - empirical).abs() < 0.003, "{exact} vs {empirical}");
    }

    #[test]
    fn coincident_ratios_are_nudged() {
        let s = sum(&[0.2, 0.2, 0.1], &[1.0, 1.0, 0.5]);
        assert!(s.was_nudged());
        let v = hypoexp_cdf(&s, 0.4).unwrap();
        // Erlang(3, rate 5) at 0.4: 1 - e^-2 (1 + 2 + 2)
        let erlang = 1.0 - (-2.0f64).exp() * 5.0;
        assert!((v - erlang).abs() < 1e-5, "{v} vs {erlang}");
    }

    #[test]
    fn near_coincident_ratios_stay_accurate() {
        // Ratios differ by 1e-6 relative: the closed form cancels badly.
        let s = sum(
            &[0.1, 0.1 * (1.0 + 1e-6), 0.1 * (1.0 + 2e-6)],
            &[1.0, 1.0, 1.0],
        );
        assert!(!s.was_nudged());
        let v = hypoexp_cdf(&s, 0.2).unwrap();
        let erlang = 1.0 - (-2.0f64).exp() * 5.0;
        assert!((v - erlang).abs() < 1e-5, "{v} vs {erlang}");
        let d = hypoexp_pdf(&s, 0.2).unwrap();
        let erlang_pdf = 1000.0 * 0.04 / 2.0 * (-2.0f64).exp();
        assert!((d - erlang_pdf).abs() < 1e-4 * erlang_pdf);
    }

    #[test]
    fn phase_type_agrees_with_closed_form() {
        let s = sum(&[0.3, 0.1, 0.7, 0.2], &[1.0, 2.0, 0.5, 3.0]);
        for a in [0.01, 0.3, 1.0, 4.0, 25.0] {
            let closed = hypoexp_cdf(&s, a).unwrap();
            let pt = phase_type_cdf(&s.scaled_rates(), a);
            assert!((closed - pt).abs() < 1e-12, "a={a}: {closed} vs {pt}");
        }
    }

    #[test]
    fn rejects_invalid_parameters() {
        assert!(WeightedExponentialSum::new(vec![0.0], vec![1.0]).is_err());
        assert!(WeightedExponentialSum::new(vec![1.0], vec![-1.0]).is_err());
        assert!(WeightedExponentialSum::new(vec![1.0, 2.0], vec![1.0]).is_err());
        assert!(WeightedExponentialSum::new(vec![], vec![]).is_err());
    }

    fn distinct_instance() -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
        (1usize..5)
            .prop_flat_map(|k| {
                (
                    prop::collection::vec(0.05f64..2.0, k),
                    prop::collection::vec(0.2f64..3.0, k),
                )
            })
            .prop_filter("ratios well separated", |(c, l)| {
                let r: Vec<f64> = l.iter().zip(c).map(|(l, c)| l / c).collect();
                (0..r.len())
                    .all(|i| (i + 1..r.len()).all(|j| (r[i] - r[j]).abs() > 0.05 * r[i].max(r[j])))
            })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(50))]

        #[test]
        fn density_normalizes((c, l) in distinct_instance()) {
            let s = sum(&c, &l);
            let slowest = l.iter().zip(&c).map(|(l, c)| l / c).fold(f64::INFINITY, f64::min);
            let hi = 60.0 / slowest;
            let mass = integrate(|y| hypoexp_pdf(&s, y).unwrap(), 0.0, hi, 6000);
            prop_assert!((mass - 1.0).abs() < 1e-6, "mass {}", mass);
        }

        #[test]
        fn cdf_is_integral_of_density((c, l) in distinct_instance(), frac in 0.01f64..3.0) {
            let s = sum(&c, &l);
            let a = frac * s.mean();
            let quad = integrate(|y| hypoexp_pdf(&s, y).unwrap(), 0.0, a, 400);
            prop_assert!((hypoexp_cdf(&s, a).unwrap() - quad).abs() < 1e-8);
        }

        #[test]
        fn cdf_is_monotone((c, l) in distinct_instance(), a1 in 0.0f64..5.0, gap in 0.0f64..5.0) {
            let s = sum(&c, &l);
            prop_assert!(hypoexp_cdf(&s, a1).unwrap() <= hypoexp_cdf(&s, a1 + gap).unwrap() + 1e-12);
        }

        #[test]
        fn permutation_invariant((c, l) in distinct_instance(), y in 0.01f64..4.0, rot in 0usize..4) {
            let k = c.len();
            let s = sum(&c, &l);
            let c2: Vec<f64> = (0..k).map(|i| c[(i + rot) % k]).collect();
            let l2: Vec<f64> = (0..k).map(|i| l[(i + rot) % k]).collect();
            let p = sum(&c2, &l2);
            prop_assert!((hypoexp_pdf(&s, y).unwrap() - hypoexp_pdf(&p, y).unwrap()).abs() < 1e-12);
            prop_assert!((hypoexp_cdf(&s, y).unwrap() - hypoexp_cdf(&p, y).unwrap()).abs() < 1e-12);
        }
    }
}
