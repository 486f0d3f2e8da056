//! Euclidean projection onto the unit simplex and projected-gradient descent.

/// `argmin ||x - v||` subject to `sum x = 1`, `x >= 0`.
///
/// Sort-and-threshold construction: find the largest `k` such that the `k`
/// largest entries stay positive after subtracting a common shift.
pub fn project_to_simplex(v: &[f64]) -> Vec<f64> {
    assert!(!v.is_empty(), "cannot project an empty vector");
    let mut sorted = v.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let mut cumulative = 0.0;
    let mut theta = 0.0;
    for (k, &u) in sorted.iter().enumerate() {
        cumulative += u;
        let candidate = (cumulative - 1.0) / (k + 1) as f64;
        if u - candidate > 0.0 {
            theta = candidate;
        } else {
            break;
        }
    }
    let mut x: Vec<f64> = v.iter().map(|vi| (vi - theta).max(0.0)).collect();
    // One renormalization pass removes the round-off left by the threshold.
    let total: f64 = x.iter().sum();
    if total > 0.0 && total != 1.0 {
        x.iter_mut().for_each(|xi| *xi /= total);
    }
    x
}

pub(crate) struct DescentOutcome {
    pub x: Vec<f64>,
    pub value: f64,
    pub converged: bool,
}

/// Minimizes a smooth function over the simplex.
///
/// Barzilai-Borwein trial steps along the projection arc, Armijo backtracking
/// on each. Stops when the projected-gradient residual
/// `||x - P(x - g)||_inf` falls below `tolerance`.
pub(crate) fn projected_gradient<F>(
    mut eval: F,
    start: &[f64],
    tolerance: f64,
    max_iterations: usize,
) -> DescentOutcome
where
    F: FnMut(&[f64]) -> (f64, Vec<f64>),
{
    const ARMIJO: f64 = 1e-4;
    let mut x = project_to_simplex(start);
    let (mut value, mut grad) = eval(&x);
    let mut step = 1.0;
    for _ in 0..max_iterations {
        let full: Vec<f64> = x.iter().zip(&grad).map(|(xi, gi)| xi - gi).collect();
        let residual = inf_distance(&x, &project_to_simplex(&full));
        if residual <= tolerance || !value.is_finite() {
            return DescentOutcome {
                x,
                value,
                converged: value.is_finite(),
            };
        }

        let mut alpha = step;
        let mut accepted = None;
        for _ in 0..60 {
            let trial_point: Vec<f64> = x
                .iter()
                .zip(&grad)
                .map(|(xi, gi)| xi - alpha * gi)
                .collect();
            let trial = project_to_simplex(&trial_point);
            let decrease: f64 = grad
                .iter()
                .zip(trial.iter().zip(&x))
                .map(|(g, (t, xi))| g * (t - xi))
                .sum();
            let (trial_value, trial_grad) = eval(&trial);
            if trial_value <= value + ARMIJO * decrease {
                accepted = Some((trial, trial_value, trial_grad));
                break;
            }
            alpha *= 0.5;
        }
        let Some((next, next_value, next_grad)) = accepted else {
            // No decrease along the arc at machine resolution.
            return DescentOutcome {
                x,
                value,
                converged: residual <= tolerance.sqrt(),
            };
        };

        let s: Vec<f64> = next.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = next_grad.iter().zip(&grad).map(|(a, b)| a - b).collect();
        let sy: f64 = s.iter().zip(&y).map(|(a, b)| a * b).sum();
        let ss: f64 = s.iter().map(|a| a * a).sum();
        step = if sy > 0.0 {
            (ss / sy).clamp(1e-12, 1e12)
        } else {
            (alpha * 2.0).min(1e12)
        };

        let moved = inf_distance(&x, &next);
        x = next;
        value = next_value;
        grad = next_grad;
        if moved == 0.0 {
            return DescentOutcome {
                x,
                value,
                converged: true,
            };
        }
    }
    DescentOutcome {
        x,
        value,
        converged: false,
    }
}

fn inf_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

/// Best value of `f` found by projected-gradient ascent (finite-difference
/// gradients) from each start, with its maximizer. Ties keep the earliest
/// start; an empty start list yields `(vec![], -inf)`.
pub fn maximize_on_simplex<F>(f: F, starts: &[Vec<f64>]) -> (Vec<f64>, f64)
where
    F: Fn(&[f64]) -> f64,
{
    const H: f64 = 1e-7;
    let negated = |x: &[f64]| {
        let value = -f(x);
        let mut probe = x.to_vec();
        let grad = (0..x.len())
            .map(|j| {
                probe[j] = x[j] + H;
                let up = f(&probe);
                probe[j] = x[j] - H;
                let down = f(&probe);
                probe[j] = x[j];
                -(up - down) / (2.0 * H)
            })
            .collect();
        (value, grad)
    };
    let mut best = (Vec::new(), f64::NEG_INFINITY);
    for s in starts {
        let outcome = projected_gradient(&negated, s, 1e-10, 2000);
        if -outcome.value > best.1 {
            best = (outcome.x, -outcome.value);
        }
    }
    best
}
