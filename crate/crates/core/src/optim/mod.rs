//! Unconstrained minimizers behind a common trait.
//!
//! Each strategy implements [`Optimizer`] and is looked up by name in an
//! [`OptimizerRegistry`]. The estimation code only ever talks to the trait, so
//! a new minimizer becomes available to fits and to the command line by
//! registering it.

use std::collections::BTreeMap;
use std::sync::{Arc, OnceLock};

use crate::error::{Error, Result};

mod bfgs;
mod nelder_mead;

pub use bfgs::Bfgs;
pub use nelder_mead::NelderMead;

/// A smooth function to minimise. Non-finite values mark infeasible points.
pub trait Objective: Sync {
    fn dim(&self) -> usize;

    fn value(&self, x: &[f64]) -> f64;

    fn value_and_gradient(&self, x: &[f64]) -> (f64, Vec<f64>);
}

#[derive(Debug, Clone, Copy)]
pub struct OptimOptions {
    pub max_iterations: usize,
    /// Bound on `|f_k - f_{k+1}| / max(|f_k|, 1)`.
    pub relative_tolerance: f64,
    /// Bound on `||grad f|| / (1 + |f|)`.
    pub gradient_tolerance: f64,
}

impl Default for OptimOptions {
    fn default() -> Self {
        Self {
            max_iterations: 500,
            relative_tolerance: 1e-8,
            gradient_tolerance: 1e-8,
        }
    }
}

#[derive(Debug, Clone)]
pub struct OptimOutcome {
    pub x: Vec<f64>,
    pub value: f64,
    pub iterations: usize,
    pub evaluations: usize,
    pub converged: bool,
    /// Best objective value after each iteration.
    pub history: Vec<f64>,
}

pub trait Optimizer: Send + Sync {
    /// Registry key.
    fn name(&self) -> &'static str;

    /// Alternative keys the registry also accepts.
    fn aliases(&self) -> &'static [&'static str] {
        &[]
    }

    fn minimize(&self, objective: &dyn Objective, x0: &[f64], opts: &OptimOptions) -> OptimOutcome;
}

pub struct OptimizerRegistry {
    strategies: BTreeMap<&'static str, Arc<dyn Optimizer>>,
    aliases: BTreeMap<&'static str, &'static str>,
}

impl OptimizerRegistry {
    pub fn empty() -> Self {
        Self {
            strategies: BTreeMap::new(),
            aliases: BTreeMap::new(),
        }
    }

    /// Registry holding the quasi-Newton and simplex minimizers.
    pub fn with_builtins() -> Self {
        let mut registry = Self::empty();
        registry.register(Arc::new(Bfgs::default()));
        registry.register(Arc::new(NelderMead::default()));
        registry
    }

    /// Process-wide registry of built-in strategies.
    pub fn builtin() -> &'static OptimizerRegistry {
        static REGISTRY: OnceLock<OptimizerRegistry> = OnceLock::new();
        REGISTRY.get_or_init(Self::with_builtins)
    }

    pub fn register(&mut self, optimizer: Arc<dyn Optimizer>) {
        let name = optimizer.name();
        for alias in optimizer.aliases() {
            self.aliases.insert(alias, name);
        }
        self.strategies.insert(name, optimizer);
    }

    pub fn get(&self, name: &str) -> Result<Arc<dyn Optimizer>> {
        let key = self.aliases.get(name).copied().unwrap_or(name);
        self.strategies
            .get(key)
            .cloned()
            .ok_or_else(|| Error::UnknownOptimizer {
                name: name.to_string(),
                available: self.names().join(", "),
            })
    }

    pub fn names(&self) -> Vec<&'static str> {
        self.strategies.keys().copied().collect()
    }
}

pub(crate) fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

pub(crate) fn relative_change(old: f64, new: f64) -> f64 {
    (old - new).abs() / old.abs().max(1.0)
}
