//! Censored maximum-likelihood fitting.
//!
//! Parameters are optimised on the log scale, `x = ln(theta, shape, scale)`,
//! so every candidate is a valid model. Fits are multistarted: start 0 is
//! [`initial_params`], the others jitter it by up to `±FitOptions::jitter` in
//! each log coordinate using ChaCha streams derived from `FitOptions::seed`
//! and the start index. Results are therefore reproducible regardless of how
//! the starts are scheduled.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::distributions::WeibullParams;
use crate::error::{Error, Result};
use crate::model::{cure_fraction, value_and_gradient, ModelParams, Observation};
use crate::optim::{norm, Objective, OptimOptions, OptimOutcome, OptimizerRegistry};

mod hessian;

pub use hessian::{hessian_step, invert_spd, numeric_hessian, standard_errors, StandardErrors};

/// Fit-level stationarity requirement: `||grad l|| < GRADIENT_TOLERANCE (1 + |l|)`
/// in natural parameters.
pub const GRADIENT_TOLERANCE: f64 = 1e-5;

/// Tolerance handed to the optimizer, on the log-parameter gradient. Kept well
/// below [`GRADIENT_TOLERANCE`] so the natural-scale check is met after the
/// change of variables.
const OPTIMIZER_GRADIENT_TOLERANCE: f64 = 1e-8;

#[derive(Debug, Clone, Serialize)]
pub struct FitOptions {
    pub max_iterations: usize,
    pub relative_tolerance: f64,
    pub multistart_count: usize,
    /// Registry name of the minimizer (`bfgs`/`quasi-newton` or
    /// `nelder-mead`/`simplex`).
    pub optimizer: String,
    pub seed: u64,
    /// Half-width of the uniform log-space jitter applied to starts 1..n.
    pub jitter: f64,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            max_iterations: 500,
            relative_tolerance: 1e-8,
            multistart_count: 5,
            optimizer: "bfgs".to_string(),
            seed: 0,
            jitter: 0.3,
        }
    }
}

impl FitOptions {
    pub fn validate(&self) -> Result<()> {
        if self.max_iterations == 0 {
            return Err(Error::Domain("max_iterations must be positive".into()));
        }
        if self.multistart_count == 0 {
            return Err(Error::Domain("multistart_count must be positive".into()));
        }
        if !(self.relative_tolerance.is_finite() && self.relative_tolerance > 0.0) {
            return Err(Error::Domain("relative_tolerance must be positive".into()));
        }
        if !(self.jitter.is_finite() && self.jitter >= 0.0) {
            return Err(Error::Domain("jitter must be non-negative".into()));
        }
        Ok(())
    }

    fn optim_options(&self) -> OptimOptions {
        OptimOptions {
            max_iterations: self.max_iterations,
            relative_tolerance: self.relative_tolerance,
            gradient_tolerance: OPTIMIZER_GRADIENT_TOLERANCE,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Degeneracy {
    /// No recovered contract in the data: theta's MLE sits on the boundary.
    AllCensored,
    /// Every recovery happened at the same time; the Weibull shape is not
    /// identifiable.
    IdenticalEventTimes,
    /// The observed information is not positive definite.
    SingularHessian,
}

#[derive(Debug, Clone, Serialize)]
pub struct FitResult {
    pub params: ModelParams,
    pub log_likelihood: f64,
    /// `(theta, shape, scale)`; absent when the information matrix is singular.
    pub standard_errors: Option<[f64; 3]>,
    pub cure_fraction: f64,
    pub cure_fraction_se: Option<f64>,
    pub converged: bool,
    pub iterations: usize,
    /// Natural-scale gradient norm at `params`.
    pub gradient_norm: f64,
    pub n_events: usize,
    pub n_censored: usize,
    pub degeneracy: Option<Degeneracy>,
}

#[derive(Debug, Clone, Serialize)]
pub struct GroupEstimate {
    pub theta: f64,
    pub theta_se: Option<f64>,
    pub cure_fraction: f64,
    pub cure_fraction_se: Option<f64>,
    pub n_events: usize,
    pub n_censored: usize,
    /// Set when the group had no events and theta is pinned at 0.
    pub degenerate: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct StratifiedFitResult {
    pub shared_weibull: WeibullParams,
    /// `(shape, scale)`.
    pub shared_standard_errors: Option<[f64; 2]>,
    pub groups: BTreeMap<String, GroupEstimate>,
    pub log_likelihood: f64,
    pub converged: bool,
    pub iterations: usize,
    pub gradient_norm: f64,
    pub degeneracy: Option<Degeneracy>,
}

impl StratifiedFitResult {
    pub fn group_params(&self, label: &str) -> Option<ModelParams> {
        let g = self.groups.get(label)?;
        ModelParams::new(g.theta, self.shared_weibull).ok()
    }

    pub fn risk_ranking(&self) -> Vec<RiskRank> {
        risk_ranking(self.groups.iter().map(|(k, g)| (k.clone(), g.theta)))
    }
}

fn counts(data: &[Observation]) -> (usize, usize) {
    let events = data.iter().filter(|o| o.event).count();
    (events, data.len() - events)
}

fn censored_theta(data: &[Observation]) -> f64 {
    let n = data.len() as f64;
    let censored = data.iter().filter(|o| !o.event).count() as f64 / n;
    -censored.max(1.0 / (2.0 * n)).ln()
}

/// Starting point derived from the data: `theta` from the censored fraction
/// (floored at `1/(2n)`), shape 1, scale at the mean event time.
pub fn initial_params(data: &[Observation]) -> Result<ModelParams> {
    let events: Vec<f64> = data.iter().filter(|o| o.event).map(|o| o.time).collect();
    if events.is_empty() {
        return Err(Error::Initialization("no recovery events in the data".into()));
    }
    let mean = events.iter().sum::<f64>() / events.len() as f64;
    if !(mean.is_finite() && mean > 0.0) {
        return Err(Error::Initialization(format!(
            "mean event time must be positive, got {mean}"
        )));
    }
    ModelParams::from_triple(censored_theta(data), 1.0, mean)
}

fn identical_event_times(events: impl Iterator<Item = f64>) -> bool {
    let mut first = None;
    for t in events {
        match first {
            None => first = Some(t),
            Some(f) if f != t => return false,
            _ => {}
        }
    }
    true
}

struct SingleObjective<'a> {
    data: &'a [Observation],
}

impl SingleObjective<'_> {
    fn params(x: &[f64]) -> Option<ModelParams> {
        ModelParams::from_triple(x[0].exp(), x[1].exp(), x[2].exp()).ok()
    }
}

impl Objective for SingleObjective<'_> {
    fn dim(&self) -> usize {
        3
    }

    fn value(&self, x: &[f64]) -> f64 {
        Self::params(x)
            .and_then(|p| crate::model::log_likelihood(&p, self.data).ok())
            .map_or(f64::INFINITY, |v| -v)
    }

    fn value_and_gradient(&self, x: &[f64]) -> (f64, Vec<f64>) {
        let Some(p) = Self::params(x) else {
            return (f64::INFINITY, vec![f64::NAN; 3]);
        };
        match value_and_gradient(&p, self.data) {
            Ok((v, g)) => {
                let natural = p.as_array();
                (-v, (0..3).map(|j| -g[j] * natural[j]).collect())
            }
            Err(_) => (f64::INFINITY, vec![f64::NAN; 3]),
        }
    }
}

/// Joint objective over `[ln shape, ln scale, ln theta_1, ..]`.
struct StratifiedObjective<'a> {
    groups: Vec<&'a [Observation]>,
}

impl StratifiedObjective<'_> {
    fn value_and_natural_gradient(&self, x: &[f64]) -> Option<(f64, Vec<f64>)> {
        let w = WeibullParams::new(x[0].exp(), x[1].exp()).ok()?;
        let mut total = 0.0;
        let mut grad = vec![0.0; x.len()];
        for (g, data) in self.groups.iter().enumerate() {
            let p = ModelParams::new(x[2 + g].exp(), w).ok()?;
            let (v, gr) = value_and_gradient(&p, data).ok()?;
            total += v;
            grad[0] += gr[1];
            grad[1] += gr[2];
            grad[2 + g] = gr[0];
        }
        Some((total, grad))
    }
}

impl Objective for StratifiedObjective<'_> {
    fn dim(&self) -> usize {
        2 + self.groups.len()
    }

    fn value(&self, x: &[f64]) -> f64 {
        self.value_and_gradient(x).0
    }

    fn value_and_gradient(&self, x: &[f64]) -> (f64, Vec<f64>) {
        match self.value_and_natural_gradient(x) {
            Some((v, g)) if v.is_finite() => {
                let gx = g.iter().zip(x).map(|(gi, xi)| -gi * xi.exp()).collect();
                (-v, gx)
            }
            _ => (f64::INFINITY, vec![f64::NAN; x.len()]),
        }
    }
}

/// Runs the configured optimizer from every start and keeps the converged
/// outcome with the lowest objective, falling back to unconverged ones only
/// when no start converged (ties go to the lowest start index).
fn multistart(objective: &dyn Objective, x0: &[f64], opts: &FitOptions) -> Result<OptimOutcome> {
    let optimizer = OptimizerRegistry::builtin().get(&opts.optimizer)?;
    let optim_opts = opts.optim_options();
    let starts: Vec<Vec<f64>> = (0..opts.multistart_count)
        .map(|i| {
            if i == 0 {
                return x0.to_vec();
            }
            let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
            rng.set_stream(i as u64);
            x0.iter()
                .map(|v| v + opts.jitter * (2.0 * rng.random::<f64>() - 1.0))
                .collect()
        })
        .collect();
    let outcomes: Vec<OptimOutcome> = starts
        .par_iter()
        .map(|s| optimizer.minimize(objective, s, &optim_opts))
        .collect();
    let best = outcomes
        .into_iter()
        .filter(|o| o.value.is_finite())
        .reduce(|best, o| {
            let better = match (o.converged, best.converged) {
                (true, false) => true,
                (false, true) => false,
                _ => o.value < best.value,
            };
            if better {
                o
            } else {
                best
            }
        });
    best.ok_or_else(|| Error::Unidentifiable("no start produced a finite likelihood".into()))
}

/// Maximum-likelihood fit of a single homogeneous group.
pub fn fit_mle(data: &[Observation], opts: &FitOptions) -> Result<FitResult> {
    opts.validate()?;
    if data.is_empty() {
        return Err(Error::Domain("cannot fit an empty dataset".into()));
    }
    let (n_events, n_censored) = counts(data);
    if n_events == 0 {
        return Err(Error::Unidentifiable(
            "all observations are censored; theta degenerates to 0".into(),
        ));
    }
    let start = initial_params(data)?;

    if identical_event_times(data.iter().filter(|o| o.event).map(|o| o.time)) {
        let ll = crate::model::log_likelihood(&start, data)?;
        return Ok(FitResult {
            params: start,
            log_likelihood: ll,
            standard_errors: None,
            cure_fraction: start.cure_fraction(),
            cure_fraction_se: None,
            converged: false,
            iterations: 0,
            gradient_norm: f64::NAN,
            n_events,
            n_censored,
            degeneracy: Some(Degeneracy::IdenticalEventTimes),
        });
    }

    let x0: Vec<f64> = start.as_array().iter().map(|v| v.ln()).collect();
    let objective = SingleObjective { data };
    let best = multistart(&objective, &x0, opts)?;

    let params = ModelParams::from_triple(best.x[0].exp(), best.x[1].exp(), best.x[2].exp())?;
    let (ll, grad) = value_and_gradient(&params, data)?;
    let gradient_norm = norm(&grad);
    let converged = best.converged && gradient_norm < GRADIENT_TOLERANCE * (1.0 + ll.abs());

    let (standard_errors, cure_fraction_se, degeneracy) = match standard_errors(&params, data) {
        Ok(se) => (Some(se.params), Some(se.cure_fraction), None),
        Err(_) => (None, None, Some(Degeneracy::SingularHessian)),
    };

    Ok(FitResult {
        params,
        log_likelihood: ll,
        standard_errors,
        cure_fraction: cure_fraction(params.theta()),
        cure_fraction_se,
        converged,
        iterations: best.iterations,
        gradient_norm,
        n_events,
        n_censored,
        degeneracy,
    })
}

/// Joint fit with one Weibull baseline shared by all groups and a separate
/// latent-cause intensity per group.
///
/// Groups without any event are pinned at `theta = 0` (the boundary MLE),
/// flagged as degenerate and left out of the free parameters.
pub fn fit_stratified(
    groups: &BTreeMap<String, Vec<Observation>>,
    opts: &FitOptions,
) -> Result<StratifiedFitResult> {
    opts.validate()?;
    if groups.len() < 2 {
        return Err(Error::Domain(format!(
            "stratified fit needs at least 2 groups, got {}",
            groups.len()
        )));
    }
    if let Some((label, _)) = groups.iter().find(|(_, d)| d.is_empty()) {
        return Err(Error::Domain(format!("group `{label}` has no observations")));
    }
    if let Some((label, _)) = groups
        .iter()
        .find(|(_, d)| d.iter().any(|o| o.time.is_nan() || o.time < 0.0))
    {
        return Err(Error::Domain(format!("group `{label}` has a negative time")));
    }

    let active: Vec<(&String, &Vec<Observation>)> =
        groups.iter().filter(|(_, d)| d.iter().any(|o| o.event)).collect();
    if active.is_empty() {
        return Err(Error::Unidentifiable(
            "every group is fully censored; theta degenerates to 0".into(),
        ));
    }

    let all_events: Vec<f64> = active
        .iter()
        .flat_map(|(_, d)| d.iter().filter(|o| o.event).map(|o| o.time))
        .collect();
    let mean = all_events.iter().sum::<f64>() / all_events.len() as f64;
    if !(mean.is_finite() && mean > 0.0) {
        return Err(Error::Initialization(format!(
            "mean event time must be positive, got {mean}"
        )));
    }

    let pinned = |label: &String, data: &Vec<Observation>| {
        let (n_events, n_censored) = counts(data);
        (
            label.clone(),
            GroupEstimate {
                theta: 0.0,
                theta_se: None,
                cure_fraction: 1.0,
                cure_fraction_se: None,
                n_events,
                n_censored,
                degenerate: true,
            },
        )
    };

    let mut x0 = vec![0.0, mean.ln()];
    x0.extend(active.iter().map(|(_, d)| censored_theta(d).ln()));
    let objective = StratifiedObjective {
        groups: active.iter().map(|(_, d)| d.as_slice()).collect(),
    };

    let any_flat = active.len() < groups.len();
    if identical_event_times(all_events.iter().copied()) {
        let (ll, _) = objective
            .value_and_natural_gradient(&x0)
            .unwrap_or((f64::NAN, Vec::new()));
        let shared = WeibullParams::new(1.0, mean)?;
        let mut out = BTreeMap::new();
        for (label, data) in groups {
            if data.iter().any(|o| o.event) {
                let theta = censored_theta(data);
                let (n_events, n_censored) = counts(data);
                out.insert(
                    label.clone(),
                    GroupEstimate {
                        theta,
                        theta_se: None,
                        cure_fraction: cure_fraction(theta),
                        cure_fraction_se: None,
                        n_events,
                        n_censored,
                        degenerate: false,
                    },
                );
            } else {
                let (k, v) = pinned(label, data);
                out.insert(k, v);
            }
        }
        return Ok(StratifiedFitResult {
            shared_weibull: shared,
            shared_standard_errors: None,
            groups: out,
            log_likelihood: ll,
            converged: false,
            iterations: 0,
            gradient_norm: f64::NAN,
            degeneracy: Some(Degeneracy::IdenticalEventTimes),
        });
    }

    let best = multistart(&objective, &x0, opts)?;
    let (ll, grad) = objective
        .value_and_natural_gradient(&best.x)
        .ok_or_else(|| Error::Unidentifiable("optimum left the parameter space".into()))?;
    let gradient_norm = norm(&grad);
    let converged = best.converged && gradient_norm < GRADIENT_TOLERANCE * (1.0 + ll.abs());

    let hess = numeric_hessian(|y| objective.value(y), &best.x);
    let cov = invert_spd(&hess).ok();
    let se = cov.as_ref().map(|c| hessian::delta_exp(&best.x, c));

    let mut out = BTreeMap::new();
    for (g, (label, data)) in active.iter().enumerate() {
        let theta = best.x[2 + g].exp();
        let (n_events, n_censored) = counts(data);
        out.insert(
            (*label).clone(),
            GroupEstimate {
                theta,
                theta_se: se.as_ref().map(|s| s[2 + g]),
                cure_fraction: cure_fraction(theta),
                cure_fraction_se: cov
                    .as_ref()
                    .map(|c| hessian::cure_fraction_se(theta, c[(2 + g, 2 + g)])),
                n_events,
                n_censored,
                degenerate: false,
            },
        );
    }
    for (label, data) in groups.iter().filter(|(_, d)| !d.iter().any(|o| o.event)) {
        let (k, v) = pinned(label, data);
        out.insert(k, v);
    }

    let degeneracy = if any_flat {
        Some(Degeneracy::AllCensored)
    } else if cov.is_none() {
        Some(Degeneracy::SingularHessian)
    } else {
        None
    };

    Ok(StratifiedFitResult {
        shared_weibull: WeibullParams::new(best.x[0].exp(), best.x[1].exp())?,
        shared_standard_errors: se.as_ref().map(|s| [s[0], s[1]]),
        groups: out,
        log_likelihood: ll,
        converged,
        iterations: best.iterations,
        gradient_norm,
        degeneracy,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RiskRank {
    pub label: String,
    pub theta: f64,
    pub cure_fraction: f64,
}

/// Orders groups from least to most susceptible to recovery (ascending
/// theta, ties by label).
pub fn risk_ranking<I, L>(thetas: I) -> Vec<RiskRank>
where
    I: IntoIterator<Item = (L, f64)>,
    L: Into<String>,
{
    let mut ranks: Vec<RiskRank> = thetas
        .into_iter()
        .map(|(label, theta)| RiskRank {
            label: label.into(),
            theta,
            cure_fraction: cure_fraction(theta),
        })
        .collect();
    ranks.sort_by(|a, b| {
        a.theta
            .total_cmp(&b.theta)
            .then_with(|| a.label.cmp(&b.label))
    });
    ranks
}
