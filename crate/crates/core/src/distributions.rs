//! Weibull and Poisson primitives.
//!
//! The Weibull law is parametrized by shape `k` and scale `s` (months):
//!
//! ```text
//! f(t) = (k / s) (t / s)^(k - 1) exp(-(t / s)^k)
//! F(t) = 1 - exp(-(t / s)^k)
//! ```
//!
//! Some texts write the same family with a rate `b = 1 / s`, i.e.
//! `f(t) = k b^k t^(k-1) exp(-(b t)^k)`. Published parameter tables for this
//! model report the scale in months (values around 18-28), so convert with
//! `scale = 1 / rate` when the source uses the rate form.

use rand::Rng;
use serde::Serialize;

use crate::error::{Error, Result};

/// Above this intensity Poisson draws switch from sequential inversion to a
/// rejection sampler.
const POISSON_INVERSION_LIMIT: f64 = 30.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct WeibullParams {
    shape: f64,
    scale: f64,
}

impl WeibullParams {
    pub fn new(shape: f64, scale: f64) -> Result<Self> {
        if !(shape.is_finite() && shape > 0.0) {
            return Err(Error::InvalidParameter {
                name: "shape",
                value: shape,
                reason: "must be finite and > 0",
            });
        }
        if !(scale.is_finite() && scale > 0.0) {
            return Err(Error::InvalidParameter {
                name: "scale",
                value: scale,
                reason: "must be finite and > 0",
            });
        }
        Ok(Self { shape, scale })
    }

    /// Builds from the rate form `k b^k t^(k-1) exp(-(b t)^k)`.
    pub fn from_rate(shape: f64, rate: f64) -> Result<Self> {
        if !(rate.is_finite() && rate > 0.0) {
            return Err(Error::InvalidParameter {
                name: "rate",
                value: rate,
                reason: "must be finite and > 0",
            });
        }
        Self::new(shape, 1.0 / rate)
    }

    pub fn shape(&self) -> f64 {
        self.shape
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn rate(&self) -> f64 {
        1.0 / self.scale
    }

    pub fn pdf(&self, t: f64) -> Result<f64> {
        check_time(t)?;
        Ok(self.pdf_unchecked(t))
    }

    pub fn cdf(&self, t: f64) -> Result<f64> {
        check_time(t)?;
        Ok(self.cdf_unchecked(t))
    }

    /// Inverse of [`cdf`](Self::cdf) on `[0, 1)`.
    pub fn quantile(&self, u: f64) -> Result<f64> {
        if !(0.0..1.0).contains(&u) {
            return Err(Error::Domain(format!(
                "quantile level must lie in [0, 1), got {u}"
            )));
        }
        Ok(self.quantile_unchecked(u))
    }

    /// Inverse-transform draw.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let u: f64 = rng.random();
        self.quantile_unchecked(u)
    }

    pub(crate) fn pdf_unchecked(&self, t: f64) -> f64 {
        if t == 0.0 {
            return match self.shape.partial_cmp(&1.0) {
                Some(std::cmp::Ordering::Greater) => 0.0,
                Some(std::cmp::Ordering::Equal) => 1.0 / self.scale,
                _ => f64::INFINITY,
            };
        }
        let x = t / self.scale;
        let z = x.powf(self.shape);
        (self.shape / self.scale) * x.powf(self.shape - 1.0) * (-z).exp()
    }

    /// `ln f(t)`, with the `t = 0` limits made explicit.
    pub(crate) fn ln_pdf_unchecked(&self, t: f64) -> f64 {
        if t == 0.0 {
            return self.pdf_unchecked(0.0).ln();
        }
        let lx = (t / self.scale).ln();
        self.shape.ln() - self.scale.ln() + (self.shape - 1.0) * lx - (self.shape * lx).exp()
    }

    pub(crate) fn cdf_unchecked(&self, t: f64) -> f64 {
        -(-(t / self.scale).powf(self.shape)).exp_m1()
    }

    pub(crate) fn quantile_unchecked(&self, u: f64) -> f64 {
        self.scale * (-(-u).ln_1p()).powf(1.0 / self.shape)
    }
}

fn check_time(t: f64) -> Result<()> {
    if t.is_nan() || t < 0.0 {
        return Err(Error::Domain(format!("time must be >= 0, got {t}")));
    }
    Ok(())
}

/// Intensity of the latent-cause count.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PoissonParam {
    intensity: f64,
}

impl PoissonParam {
    /// `intensity = 0` is allowed and means every unit is cured.
    pub fn new(intensity: f64) -> Result<Self> {
        if !(intensity.is_finite() && intensity >= 0.0) {
            return Err(Error::InvalidParameter {
                name: "theta",
                value: intensity,
                reason: "must be finite and >= 0",
            });
        }
        Ok(Self { intensity })
    }

    pub fn intensity(&self) -> f64 {
        self.intensity
    }

    /// `theta^m exp(-theta) / m!`, evaluated in log space.
    pub fn pmf(&self, m: u64) -> f64 {
        if self.intensity == 0.0 {
            return if m == 0 { 1.0 } else { 0.0 };
        }
        (m as f64 * self.intensity.ln() - self.intensity - ln_factorial(m)).exp()
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> u64 {
        let theta = self.intensity;
        if theta == 0.0 {
            return 0;
        }
        if theta >= POISSON_INVERSION_LIMIT {
            let dist = rand_distr::Poisson::new(theta).expect("validated intensity");
            return rand_distr::Distribution::<f64>::sample(&dist, rng) as u64;
        }
        // Sequential search over the cdf.
        let u: f64 = rng.random();
        let mut m = 0u64;
        let mut p = (-theta).exp();
        let mut cum = p;
        while u >= cum {
            m += 1;
            p *= theta / m as f64;
            let next = cum + p;
            if next == cum {
                // cdf has saturated in floating point
                break;
            }
            cum = next;
        }
        m
    }
}

/// `ln(m!)`: exact summation for small `m`, Stirling series beyond.
pub(crate) fn ln_factorial(m: u64) -> f64 {
    if m < 20 {
        return (2..=m).map(|k| (k as f64).ln()).sum();
    }
    let x = m as f64;
    let inv = 1.0 / x;
    let inv2 = inv * inv;
    x * x.ln() - x + 0.5 * (2.0 * std::f64::consts::PI * x).ln()
        + inv * (1.0 / 12.0 - inv2 * (1.0 / 360.0 - inv2 * (1.0 / 1260.0 - inv2 / 1680.0)))
}
