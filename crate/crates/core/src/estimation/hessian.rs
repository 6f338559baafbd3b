//! Observed-information standard errors.
//!
//! The Hessian of the negative log-likelihood is taken by central differences
//! in the log-parameter space the optimizer works in, inverted, and mapped
//! back to natural parameters with the delta method (`d p / d x = p` for
//! `p = exp(x)`).

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{log_likelihood, ModelParams, Observation};

/// Per-coordinate central-difference step.
pub fn hessian_step(x: f64) -> f64 {
    1e-5f64.max(1e-5 * x.abs())
}

/// Central-difference Hessian of `f` at `x`.
pub fn numeric_hessian(f: impl Fn(&[f64]) -> f64, x: &[f64]) -> DMatrix<f64> {
    let n = x.len();
    let h: Vec<f64> = x.iter().map(|&v| hessian_step(v)).collect();
    let f0 = f(x);
    let at = |shifts: &[(usize, f64)]| {
        let mut y = x.to_vec();
        for &(i, d) in shifts {
            y[i] += d;
        }
        f(&y)
    };
    let mut hess = DMatrix::zeros(n, n);
    for i in 0..n {
        let fp = at(&[(i, h[i])]);
        let fm = at(&[(i, -h[i])]);
        hess[(i, i)] = (fp - 2.0 * f0 + fm) / (h[i] * h[i]);
        for j in 0..i {
            let fpp = at(&[(i, h[i]), (j, h[j])]);
            let fpm = at(&[(i, h[i]), (j, -h[j])]);
            let fmp = at(&[(i, -h[i]), (j, h[j])]);
            let fmm = at(&[(i, -h[i]), (j, -h[j])]);
            let v = (fpp - fpm - fmp + fmm) / (4.0 * h[i] * h[j]);
            hess[(i, j)] = v;
            hess[(j, i)] = v;
        }
    }
    hess
}

/// Inverse of a symmetric positive-definite matrix, or
/// [`Error::SingularHessian`] when it is not positive definite.
pub fn invert_spd(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if m.iter().any(|v| !v.is_finite()) {
        return Err(Error::SingularHessian);
    }
    let chol = m.clone().cholesky().ok_or(Error::SingularHessian)?;
    let inv = chol.inverse();
    if inv.diagonal().iter().any(|v| !(v.is_finite() && *v > 0.0)) {
        return Err(Error::SingularHessian);
    }
    Ok(inv)
}

/// Natural-scale standard errors for `exp(x)` given the covariance of `x`.
pub(crate) fn delta_exp(x: &[f64], cov: &DMatrix<f64>) -> Vec<f64> {
    let p = DVector::from_iterator(x.len(), x.iter().map(|v| v.exp()));
    (0..x.len()).map(|j| p[j] * cov[(j, j)].sqrt()).collect()
}

/// Standard error of `exp(-theta)` when `theta = exp(x)` has log-space
/// variance `var_log_theta`.
pub(crate) fn cure_fraction_se(theta: f64, var_log_theta: f64) -> f64 {
    theta * (-theta).exp() * var_log_theta.sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StandardErrors {
    /// `(theta, shape, scale)` order.
    pub params: [f64; 3],
    pub cure_fraction: f64,
}

/// Standard errors at `p`, which should be an interior stationary point of
/// the likelihood for `data`.
pub fn standard_errors(p: &ModelParams, data: &[Observation]) -> Result<StandardErrors> {
    if p.theta() <= 0.0 {
        return Err(Error::SingularHessian);
    }
    let x: Vec<f64> = p.as_array().iter().map(|v| v.ln()).collect();
    let neg_ll = |y: &[f64]| match ModelParams::from_triple(y[0].exp(), y[1].exp(), y[2].exp()) {
        Ok(q) => log_likelihood(&q, data).map(|v| -v).unwrap_or(f64::INFINITY),
        Err(_) => f64::INFINITY,
    };
    log_likelihood(p, data)?;
    let hess = numeric_hessian(neg_ll, &x);
    let cov = invert_spd(&hess)?;
    let se = delta_exp(&x, &cov);
    Ok(StandardErrors {
        params: [se[0], se[1], se[2]],
        cure_fraction: cure_fraction_se(p.theta(), cov[(0, 0)]),
    })
}
