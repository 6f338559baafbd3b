use super::{norm, relative_change, Objective, OptimOptions, OptimOutcome, Optimizer};

/// Consecutive iterations below the relative tolerance that count as a stall.
const STALL_LIMIT: usize = 10;

/// Quasi-Newton minimizer with inverse-Hessian BFGS updates and a
/// backtracking Armijo line search.
#[derive(Debug, Clone)]
pub struct Bfgs {
    /// Sufficient-decrease constant.
    pub armijo: f64,
    pub backtrack: f64,
    pub max_line_search: usize,
}

impl Default for Bfgs {
    fn default() -> Self {
        Self {
            armijo: 1e-4,
            backtrack: 0.5,
            max_line_search: 60,
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn identity(n: usize) -> Vec<Vec<f64>> {
    (0..n)
        .map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
        .collect()
}

impl Optimizer for Bfgs {
    fn name(&self) -> &'static str {
        "bfgs"
    }

    fn aliases(&self) -> &'static [&'static str] {
        &["quasi-newton"]
    }

    fn minimize(&self, objective: &dyn Objective, x0: &[f64], opts: &OptimOptions) -> OptimOutcome {
        let n = x0.len();
        let mut x = x0.to_vec();
        let (mut f, mut g) = objective.value_and_gradient(&x);
        let mut evaluations = 1;
        let mut history = vec![f];
        if !f.is_finite() || g.iter().any(|v| !v.is_finite()) {
            return OptimOutcome {
                x,
                value: f,
                iterations: 0,
                evaluations,
                converged: false,
                history,
            };
        }

        let mut h = identity(n);
        let mut fresh = true;
        let mut last_change = f64::INFINITY;
        let mut stalled = 0;
        let mut converged = false;
        let mut iterations = 0;

        while iterations < opts.max_iterations {
            let grad_small = norm(&g) <= opts.gradient_tolerance * (1.0 + f.abs());
            if grad_small && last_change < opts.relative_tolerance {
                converged = true;
                break;
            }
            iterations += 1;

            let mut d: Vec<f64> = (0..n).map(|i| -dot(&h[i], &g)).collect();
            let mut slope = dot(&g, &d);
            if slope >= 0.0 {
                h = identity(n);
                fresh = true;
                d = g.iter().map(|v| -v).collect();
                slope = dot(&g, &d);
            }

            // Keep the first (unscaled) step inside a unit box.
            let mut alpha = if fresh {
                (1.0 / d.iter().fold(0.0f64, |m, v| m.max(v.abs()))).min(1.0)
            } else {
                1.0
            };

            let mut accepted = None;
            for _ in 0..self.max_line_search {
                let trial: Vec<f64> = x.iter().zip(&d).map(|(xi, di)| xi + alpha * di).collect();
                let (ft, gt) = objective.value_and_gradient(&trial);
                evaluations += 1;
                if ft.is_finite()
                    && gt.iter().all(|v| v.is_finite())
                    && ft <= f + self.armijo * alpha * slope
                {
                    accepted = Some((trial, ft, gt));
                    break;
                }
                alpha *= self.backtrack;
            }

            let Some((x_new, f_new, g_new)) = accepted else {
                if !fresh && last_change >= opts.relative_tolerance {
                    h = identity(n);
                    fresh = true;
                    continue;
                }
                // No representable decrease left: x minimises f to working
                // precision. Callers still check stationarity themselves.
                converged = true;
                break;
            };

            let s: Vec<f64> = x_new.iter().zip(&x).map(|(a, b)| a - b).collect();
            let y: Vec<f64> = g_new.iter().zip(&g).map(|(a, b)| a - b).collect();
            let sy = dot(&s, &y);
            if sy > 1e-12 * norm(&s) * norm(&y) {
                if fresh {
                    // Shanno-Phua scaling of the initial inverse Hessian.
                    let scale = sy / dot(&y, &y);
                    h = identity(n)
                        .into_iter()
                        .map(|row| row.into_iter().map(|v| v * scale).collect())
                        .collect();
                }
                let rho = 1.0 / sy;
                let hy: Vec<f64> = (0..n).map(|i| dot(&h[i], &y)).collect();
                let yhy = dot(&y, &hy);
                for i in 0..n {
                    for j in 0..n {
                        h[i][j] += -rho * (hy[i] * s[j] + s[i] * hy[j])
                            + (rho * rho * yhy + rho) * s[i] * s[j];
                    }
                }
                fresh = false;
            }

            last_change = relative_change(f, f_new);
            let negligible_step = s
                .iter()
                .zip(&x)
                .all(|(si, xi)| si.abs() <= 1e-10 * (1.0 + xi.abs()));
            stalled = if last_change < opts.relative_tolerance { stalled + 1 } else { 0 };
            x = x_new;
            f = f_new;
            g = g_new;
            history.push(f);
            // Sitting on the floating-point floor: steps still pass Armijo on
            // rounding noise but no longer move x or f.
            if negligible_step || stalled >= STALL_LIMIT {
                converged = true;
                break;
            }
        }

        if !converged && iterations >= opts.max_iterations {
            converged = norm(&g) <= opts.gradient_tolerance * (1.0 + f.abs())
                && last_change < opts.relative_tolerance;
        }

        OptimOutcome {
            x,
            value: f,
            iterations,
            evaluations,
            converged,
            history,
        }
    }
}
