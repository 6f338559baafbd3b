//! The promotion-time cure model.
//!
//! With `theta` the Poisson intensity of latent causes and `F`, `f` the
//! Weibull cdf and density of each latent time:
//!
//! ```text
//! S_Y(t) = exp(-theta F(t))            population survival (non-recovery)
//! f_Y(t) = theta f(t) exp(-theta F(t)) population (defective) density
//! h_Y(t) = theta f(t)                  population hazard
//! ```
//!
//! `S_Y` decreases from 1 towards the cure fraction `exp(-theta)`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::distributions::WeibullParams;
use crate::error::{Error, Result};

/// Observations per chunk for the parallel likelihood sum. Chunk boundaries
/// are fixed so the result does not depend on thread scheduling.
const LIKELIHOOD_CHUNK: usize = 8192;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ModelParams {
    theta: f64,
    weibull: WeibullParams,
}

impl ModelParams {
    pub fn new(theta: f64, weibull: WeibullParams) -> Result<Self> {
        if !(theta.is_finite() && theta >= 0.0) {
            return Err(Error::InvalidParameter {
                name: "theta",
                value: theta,
                reason: "must be finite and >= 0",
            });
        }
        Ok(Self { theta, weibull })
    }

    /// `(theta, shape, scale)` in one call.
    pub fn from_triple(theta: f64, shape: f64, scale: f64) -> Result<Self> {
        Self::new(theta, WeibullParams::new(shape, scale)?)
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn weibull(&self) -> WeibullParams {
        self.weibull
    }

    pub fn shape(&self) -> f64 {
        self.weibull.shape()
    }

    pub fn scale(&self) -> f64 {
        self.weibull.scale()
    }

    /// `[theta, shape, scale]`, the coordinate order used by gradients and
    /// standard errors.
    pub fn as_array(&self) -> [f64; 3] {
        [self.theta, self.shape(), self.scale()]
    }

    pub fn cure_fraction(&self) -> f64 {
        cure_fraction(self.theta)
    }

    pub fn survival(&self, t: f64) -> Result<f64> {
        population_survival(t, self)
    }
}

/// One contract as seen by the likelihood: time on book and whether it was
/// recovered. Censored observations carry the censoring time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub time: f64,
    pub event: bool,
}

impl Observation {
    pub fn event(time: f64) -> Self {
        Self { time, event: true }
    }

    pub fn censored(time: f64) -> Self {
        Self { time, event: false }
    }
}

fn check_time(t: f64) -> Result<()> {
    if t.is_nan() || t < 0.0 {
        return Err(Error::Domain(format!("time must be >= 0, got {t}")));
    }
    Ok(())
}

/// Probability of the latent-cause count being zero.
pub fn cure_fraction(theta: f64) -> f64 {
    (-theta).exp()
}

pub fn population_survival(t: f64, p: &ModelParams) -> Result<f64> {
    check_time(t)?;
    Ok((-p.theta * p.weibull.cdf_unchecked(t)).exp())
}

pub fn population_density(t: f64, p: &ModelParams) -> Result<f64> {
    check_time(t)?;
    let w = &p.weibull;
    if p.theta == 0.0 {
        return Ok(0.0);
    }
    Ok(p.theta * w.pdf_unchecked(t) * (-p.theta * w.cdf_unchecked(t)).exp())
}

/// `f_Y / S_Y`, which reduces to `theta f(t)`.
pub fn population_hazard(t: f64, p: &ModelParams) -> Result<f64> {
    if t.is_nan() || t <= 0.0 {
        return Err(Error::Domain(format!("hazard needs t > 0, got {t}")));
    }
    Ok(p.theta * p.weibull.pdf_unchecked(t))
}

fn check_data(data: &[Observation]) -> Result<()> {
    if data.is_empty() {
        return Err(Error::Domain("log-likelihood of an empty dataset".into()));
    }
    if let Some(o) = data.iter().find(|o| o.time.is_nan() || o.time < 0.0) {
        return Err(Error::Domain(format!(
            "observation time must be >= 0, got {}",
            o.time
        )));
    }
    Ok(())
}

/// Censored log-likelihood
/// `sum_i [delta_i (ln theta + ln f(t_i)) - theta F(t_i)]`.
///
/// Returns `f64::NEG_INFINITY` when an event has zero population density
/// (`theta = 0`, or an event at `t = 0` with shape > 1).
pub fn log_likelihood(p: &ModelParams, data: &[Observation]) -> Result<f64> {
    check_data(data)?;
    Ok(chunked_sum(data, |chunk| {
        chunk.iter().map(|o| term(p, o)).sum::<f64>()
    }))
}

/// Gradient of [`log_likelihood`] with respect to `(theta, shape, scale)`.
pub fn log_likelihood_gradient(p: &ModelParams, data: &[Observation]) -> Result<[f64; 3]> {
    Ok(value_and_gradient(p, data)?.1)
}

/// Log-likelihood and its natural-space gradient in a single pass.
pub fn value_and_gradient(p: &ModelParams, data: &[Observation]) -> Result<(f64, [f64; 3])> {
    check_data(data)?;
    if data.iter().any(|o| o.event) {
        if p.theta == 0.0 {
            return Err(Error::Domain(
                "gradient undefined at theta = 0 with observed events".into(),
            ));
        }
        if data.iter().any(|o| o.event && o.time == 0.0) {
            return Err(Error::Domain(
                "gradient undefined for an event at t = 0".into(),
            ));
        }
    }
    let partials: Vec<[f64; 4]> = if data.len() > LIKELIHOOD_CHUNK {
        data.par_chunks(LIKELIHOOD_CHUNK)
            .map(|c| chunk_value_and_gradient(p, c))
            .collect()
    } else {
        vec![chunk_value_and_gradient(p, data)]
    };
    let mut acc = [0.0; 4];
    for part in partials {
        for (a, v) in acc.iter_mut().zip(part) {
            *a += v;
        }
    }
    Ok((acc[0], [acc[1], acc[2], acc[3]]))
}

fn chunked_sum(data: &[Observation], f: impl Fn(&[Observation]) -> f64 + Sync) -> f64 {
    if data.len() > LIKELIHOOD_CHUNK {
        let parts: Vec<f64> = data.par_chunks(LIKELIHOOD_CHUNK).map(&f).collect();
        parts.into_iter().sum()
    } else {
        f(data)
    }
}

fn term(p: &ModelParams, o: &Observation) -> f64 {
    let w = &p.weibull;
    let censored = -p.theta * w.cdf_unchecked(o.time);
    if o.event {
        if p.theta == 0.0 {
            return f64::NEG_INFINITY;
        }
        p.theta.ln() + w.ln_pdf_unchecked(o.time) + censored
    } else {
        censored
    }
}

fn chunk_value_and_gradient(p: &ModelParams, data: &[Observation]) -> [f64; 4] {
    let theta = p.theta;
    let k = p.shape();
    let s = p.scale();
    let ln_theta = theta.ln();
    let ln_k = k.ln();
    let ln_s = s.ln();

    let (mut ll, mut g_theta, mut g_k, mut g_s) = (0.0, 0.0, 0.0, 0.0);
    for o in data {
        if o.time == 0.0 {
            // F(0) = 0 and censored terms vanish; events at 0 are rejected earlier.
            continue;
        }
        let lx = o.time.ln() - ln_s;
        let z = (k * lx).exp();
        let surv = (-z).exp();
        let cdf = -(-z).exp_m1();

        ll -= theta * cdf;
        g_theta -= cdf;
        g_k -= theta * surv * z * lx;
        g_s += theta * surv * k * z / s;

        if o.event {
            ll += ln_theta + ln_k - ln_s + (k - 1.0) * lx - z;
            g_theta += 1.0 / theta;
            g_k += 1.0 / k + lx - z * lx;
            g_s += k * (z - 1.0) / s;
        }
    }
    [ll, g_theta, g_k, g_s]
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn mp(theta: f64, shape: f64, scale: f64) -> ModelParams {
        ModelParams::from_triple(theta, shape, scale).unwrap()
    }

    fn random_data(rng: &mut ChaCha8Rng, n: usize) -> Vec<Observation> {
        (0..n)
            .map(|_| {
                if rng.random_bool(0.4) {
                    Observation::censored(24.0)
                } else {
                    Observation::event(rng.random_range(0.1..24.0))
                }
            })
            .collect()
    }

    #[test]
    fn survival_published_values() {
        let cases = [
            ((0.614, 1.157, 18.762), 24.0, 0.6365),
            ((1.422, 1.260, 23.152), 12.0, 0.6046),
            ((1.849, 1.304, 18.551), 18.0, 0.3191),
        ];
        for ((th, k, s), t, expected) in cases {
            let v = population_survival(t, &mp(th, k, s)).unwrap();
            assert!((v - expected).abs() < 5e-4, "{v} vs {expected}");
        }
        assert_eq!(population_survival(0.0, &mp(2.0, 1.3, 4.0)).unwrap(), 1.0);
        assert!(population_survival(-1.0, &mp(2.0, 1.3, 4.0)).is_err());
    }

    #[test]
    fn survival_tends_to_cure_fraction() {
        for (th, k, s) in [(0.1, 0.8, 3.0), (0.871, 1.157, 18.762), (5.0, 2.0, 10.0)] {
            let p = mp(th, k, s);
            let tail = population_survival(50.0 * s, &p).unwrap();
            assert!((tail - cure_fraction(th)).abs() < 1e-9);
        }
    }

    #[test]
    fn survival_strictly_decreasing() {
        let p = mp(0.871, 1.157, 18.762);
        let mut prev = 1.0;
        for i in 1..=2400 {
            let v = population_survival(i as f64 * 0.01, &p).unwrap();
            assert!(v < prev);
            prev = v;
        }
    }

    #[test]
    fn risk_ordering_in_theta() {
        let w = WeibullParams::new(1.3, 18.5).unwrap();
        for t in [0.5, 6.0, 12.0, 24.0, 100.0] {
            let lo = population_survival(t, &ModelParams::new(0.5, w).unwrap()).unwrap();
            let hi = population_survival(t, &ModelParams::new(1.5, w).unwrap()).unwrap();
            assert!(lo > hi);
        }
    }

    #[test]
    fn density_examples() {
        assert_eq!(population_density(0.0, &mp(1.0, 1.157, 18.762)).unwrap(), 0.0);
        let p = mp(1.422, 1.26, 23.152);
        for i in 1..=50 {
            let t = i as f64 * 0.9;
            let h = 1e-5 * t;
            let fd = -(population_survival(t + h, &p).unwrap()
                - population_survival(t - h, &p).unwrap())
                / (2.0 * h);
            let d = population_density(t, &p).unwrap();
            assert!(((d - fd) / d).abs() < 1e-6, "t={t}");
        }
    }

    #[test]
    fn hazard_examples() {
        assert_eq!(population_hazard(3.0, &mp(0.0, 1.2, 5.0)).unwrap(), 0.0);
        let one = population_hazard(7.0, &mp(1.0, 1.2, 5.0)).unwrap();
        let two = population_hazard(7.0, &mp(2.0, 1.2, 5.0)).unwrap();
        assert_eq!(two, 2.0 * one);

        let p = mp(1.422, 1.26, 23.152);
        let h = population_hazard(12.0, &p).unwrap();
        let direct = 1.422 * p.weibull().pdf(12.0).unwrap();
        assert!(((h - direct) / direct).abs() < 1e-12);
        let ratio = population_density(12.0, &p).unwrap() / population_survival(12.0, &p).unwrap();
        assert!(((h - ratio) / h).abs() < 1e-12);
        assert!(population_hazard(0.0, &p).is_err());
    }

    #[test]
    fn cure_fraction_values() {
        assert!((cure_fraction(1.422) - 0.241).abs() < 5e-4);
        assert!((cure_fraction(1.849) - 0.157).abs() < 5e-4);
        assert_eq!(cure_fraction(0.0), 1.0);
    }

    #[test]
    fn likelihood_single_observations() {
        let p = mp(0.9, 1.2, 15.0);
        let f = p.weibull().cdf(10.0).unwrap();
        let c = log_likelihood(&p, &[Observation::censored(10.0)]).unwrap();
        assert_eq!(c, -0.9 * f);
        let e = log_likelihood(&p, &[Observation::event(10.0)]).unwrap();
        let expected = 0.9f64.ln() + p.weibull().pdf(10.0).unwrap().ln() - 0.9 * f;
        assert!((e - expected).abs() < 1e-12);
        let both =
            log_likelihood(&p, &[Observation::event(10.0), Observation::censored(10.0)]).unwrap();
        assert!((both - (c + e)).abs() < 1e-12);
    }

    #[test]
    fn likelihood_errors_and_degenerate_values() {
        let p = mp(0.9, 1.2, 15.0);
        assert!(log_likelihood(&p, &[]).is_err());
        assert!(log_likelihood(&p, &[Observation::event(-1.0)]).is_err());
        let at_zero = log_likelihood(&p, &[Observation::event(0.0)]).unwrap();
        assert_eq!(at_zero, f64::NEG_INFINITY);
        let no_causes = log_likelihood(&mp(0.0, 1.2, 15.0), &[Observation::event(3.0)]).unwrap();
        assert_eq!(no_causes, f64::NEG_INFINITY);
        assert!(log_likelihood_gradient(&mp(0.0, 1.2, 15.0), &[Observation::event(3.0)]).is_err());
    }

    #[test]
    fn likelihood_matches_product_form() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let p = mp(1.1, 1.3, 17.0);
        for n in [1usize, 5, 20] {
            let data = random_data(&mut rng, n);
            let product: f64 = data
                .iter()
                .map(|o| {
                    if o.event {
                        population_density(o.time, &p).unwrap()
                    } else {
                        population_survival(o.time, &p).unwrap()
                    }
                })
                .product();
            let ll = log_likelihood(&p, &data).unwrap();
            assert!((ll - product.ln()).abs() < 1e-10, "n={n}");
        }
    }

    #[test]
    fn all_censored_theta_gradient() {
        let data: Vec<_> = [3.0, 10.0, 24.0].iter().map(|&t| Observation::censored(t)).collect();
        let p = mp(0.7, 1.4, 12.0);
        let g = log_likelihood_gradient(&p, &data).unwrap();
        let sum_f: f64 = data.iter().map(|o| p.weibull().cdf(o.time).unwrap()).sum();
        assert!((g[0] + sum_f).abs() < 1e-14);
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..10 {
            let p = [
                rng.random_range(0.2..2.0),
                rng.random_range(0.7..2.0),
                rng.random_range(5.0..30.0),
            ];
            let data = random_data(&mut rng, 100);
            let g = log_likelihood_gradient(&mp(p[0], p[1], p[2]), &data).unwrap();
            for j in 0..3 {
                let h = 1e-6 * p[j];
                let mut up = p;
                let mut dn = p;
                up[j] += h;
                dn[j] -= h;
                let fd = (log_likelihood(&mp(up[0], up[1], up[2]), &data).unwrap()
                    - log_likelihood(&mp(dn[0], dn[1], dn[2]), &data).unwrap())
                    / (2.0 * h);
                assert!((g[j] - fd).abs() <= 1e-5 * fd.abs().max(1e-3), "j={j}: {} vs {fd}", g[j]);
            }
        }
    }

    #[test]
    fn value_matches_between_paths() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let data = random_data(&mut rng, 50);
        let p = mp(0.6, 1.1, 20.0);
        let (v, _) = value_and_gradient(&p, &data).unwrap();
        assert!((v - log_likelihood(&p, &data).unwrap()).abs() < 1e-10);
    }

    #[test]
    fn chunked_sum_is_partition_independent() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let data = random_data(&mut rng, 3 * LIKELIHOOD_CHUNK + 17);
        let p = mp(0.871, 1.157, 18.762);
        let serial: f64 = data.iter().map(|o| term(&p, o)).sum();
        let chunked = log_likelihood(&p, &data).unwrap();
        assert!(((serial - chunked) / serial).abs() < 1e-9);
        let (v, _) = value_and_gradient(&p, &data).unwrap();
        assert!(((serial - v) / serial).abs() < 1e-9);
    }
}
