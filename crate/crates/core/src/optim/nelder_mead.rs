use super::{norm, relative_change, Objective, OptimOptions, OptimOutcome, Optimizer};

/// Derivative-free downhill simplex.
///
/// Never evaluates the gradient. When the simplex collapses it is rebuilt
/// around its best vertex; convergence is declared once a rebuilt simplex
/// collapses again without improving on the previous best value.
#[derive(Debug, Clone)]
pub struct NelderMead {
    pub reflection: f64,
    pub expansion: f64,
    pub contraction: f64,
    pub shrink: f64,
    /// Edge length of the initial simplex, per coordinate.
    pub initial_step: f64,
    /// The simplex counts as collapsed only once every vertex is within this
    /// distance of the best one (and the value spread is below the relative
    /// tolerance).
    pub x_tolerance: f64,
}

impl Default for NelderMead {
    fn default() -> Self {
        Self {
            reflection: 1.0,
            expansion: 2.0,
            contraction: 0.5,
            shrink: 0.5,
            initial_step: 0.1,
            x_tolerance: 1e-7,
        }
    }
}

fn eval(objective: &dyn Objective, x: &[f64]) -> f64 {
    let v = objective.value(x);
    if v.is_finite() {
        v
    } else {
        f64::INFINITY
    }
}

impl NelderMead {
    fn build_simplex(&self, objective: &dyn Objective, center: &[f64], step: f64) -> Vec<(Vec<f64>, f64)> {
        let mut simplex = vec![(center.to_vec(), eval(objective, center))];
        for i in 0..center.len() {
            let mut v = center.to_vec();
            v[i] += step;
            let f = eval(objective, &v);
            simplex.push((v, f));
        }
        simplex
    }
}

impl Optimizer for NelderMead {
    fn name(&self) -> &'static str {
        "nelder-mead"
    }

    fn aliases(&self) -> &'static [&'static str] {
        &["simplex"]
    }

    fn minimize(&self, objective: &dyn Objective, x0: &[f64], opts: &OptimOptions) -> OptimOutcome {
        let n = x0.len();
        let mut simplex = self.build_simplex(objective, x0, self.initial_step);
        let mut evaluations = n + 1;
        let sort = |s: &mut Vec<(Vec<f64>, f64)>| {
            s.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap_or(std::cmp::Ordering::Equal))
        };
        sort(&mut simplex);
        let mut history = vec![simplex[0].1];
        if !simplex[0].1.is_finite() {
            return OptimOutcome {
                x: simplex[0].0.clone(),
                value: simplex[0].1,
                iterations: 0,
                evaluations,
                converged: false,
                history,
            };
        }

        let mut iterations = 0;
        let mut converged = false;
        let mut last_restart: Option<f64> = None;
        while iterations < opts.max_iterations {
            let best = simplex[0].1;
            let worst = simplex[n].1;
            let spread = (worst - best).abs() / best.abs().max(1.0);
            let diameter = simplex[1..]
                .iter()
                .map(|(v, _)| norm(&v.iter().zip(&simplex[0].0).map(|(a, b)| a - b).collect::<Vec<_>>()))
                .fold(0.0, f64::max);
            if spread < opts.relative_tolerance && diameter < self.x_tolerance {
                if last_restart.is_some_and(|b| relative_change(b, best) < opts.relative_tolerance) {
                    converged = true;
                    break;
                }
                last_restart = Some(best);
                let center = simplex[0].0.clone();
                simplex = self.build_simplex(objective, &center, self.initial_step);
                evaluations += n;
                sort(&mut simplex);
            }
            iterations += 1;

            let centroid: Vec<f64> = (0..n)
                .map(|j| simplex[..n].iter().map(|(v, _)| v[j]).sum::<f64>() / n as f64)
                .collect();
            let along = |coef: f64| -> Vec<f64> {
                centroid
                    .iter()
                    .zip(&simplex[n].0)
                    .map(|(c, w)| c + coef * (c - w))
                    .collect()
            };

            let xr = along(self.reflection);
            let fr = eval(objective, &xr);
            evaluations += 1;

            if fr < simplex[0].1 {
                let xe = along(self.reflection * self.expansion);
                let fe = eval(objective, &xe);
                evaluations += 1;
                simplex[n] = if fe < fr { (xe, fe) } else { (xr, fr) };
            } else if fr < simplex[n - 1].1 {
                simplex[n] = (xr, fr);
            } else {
                let (xc, fc) = if fr < simplex[n].1 {
                    let xc = along(self.reflection * self.contraction);
                    let fc = eval(objective, &xc);
                    (xc, fc)
                } else {
                    let xc = along(-self.contraction);
                    let fc = eval(objective, &xc);
                    (xc, fc)
                };
                evaluations += 1;
                if fc < simplex[n].1.min(fr) {
                    simplex[n] = (xc, fc);
                } else {
                    let anchor = simplex[0].0.clone();
                    for vertex in simplex.iter_mut().skip(1) {
                        let v: Vec<f64> = anchor
                            .iter()
                            .zip(&vertex.0)
                            .map(|(a, x)| a + self.shrink * (x - a))
                            .collect();
                        let f = eval(objective, &v);
                        *vertex = (v, f);
                    }
                    evaluations += n;
                }
            }
            sort(&mut simplex);
            history.push(simplex[0].1);
        }

        let (x, value) = simplex.swap_remove(0);
        OptimOutcome {
            x,
            value,
            iterations,
            evaluations,
            converged,
            history,
        }
    }
}
