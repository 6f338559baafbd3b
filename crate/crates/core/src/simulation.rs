//! Generative sampler for the latent-cause mechanism.
//!
//! Each contract draws `M ~ Poisson(theta)` latent causes with i.i.d. Weibull
//! times and recovers at the earliest one. `M = 0` means the contract is never
//! recovered. Anything not recovered by the horizon is censored at the
//! horizon, exactly as real portfolio data is recorded.
//!
//! All draws come from a `ChaCha8Rng` seeded with the spec's seed, so a
//! portfolio is a pure function of its [`SimulationSpec`].

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::distributions::PoissonParam;
use crate::error::{Error, Result};
use crate::model::{ModelParams, Observation};
use crate::portfolio::{ContractRecord, Portfolio};

#[derive(Debug, Clone, Serialize)]
pub struct SimulationSpec {
    pub true_params: ModelParams,
    pub n_contracts: usize,
    pub horizon_months: f64,
    pub seed: u64,
    /// Segment labels stamped on every simulated record.
    pub fx_bs: u8,
    pub fx_cv: u8,
    pub id_prefix: String,
}

impl SimulationSpec {
    pub fn new(true_params: ModelParams, n_contracts: usize, horizon_months: f64, seed: u64) -> Self {
        Self {
            true_params,
            n_contracts,
            horizon_months,
            seed,
            fx_bs: 1,
            fx_cv: 1,
            id_prefix: "C".to_string(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_contracts == 0 {
            return Err(Error::Domain("n_contracts must be at least 1".into()));
        }
        if !(self.horizon_months.is_finite() && self.horizon_months > 0.0) {
            return Err(Error::Domain(format!(
                "horizon must be positive, got {}",
                self.horizon_months
            )));
        }
        for (name, v) in [("fx_bs", self.fx_bs), ("fx_cv", self.fx_cv)] {
            if !(1..=4).contains(&v) {
                return Err(Error::Domain(format!("{name} must be in 1..=4, got {v}")));
            }
        }
        Ok(())
    }
}

/// Unobservable quantities behind one simulated contract, for diagnostics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LatentDraw {
    pub causes: u64,
    /// Earliest latent time; `None` when there were no causes.
    pub first_time: Option<f64>,
}

pub fn simulate_contract<R: Rng + ?Sized>(rng: &mut R, p: &ModelParams, horizon: f64) -> Observation {
    simulate_contract_latent(rng, p, horizon).0
}

/// Like [`simulate_contract`] but also returns the latent draw.
pub fn simulate_contract_latent<R: Rng + ?Sized>(
    rng: &mut R,
    p: &ModelParams,
    horizon: f64,
) -> (Observation, LatentDraw) {
    let poisson = PoissonParam::new(p.theta()).expect("ModelParams holds a valid theta");
    let causes = poisson.sample(rng);
    let weibull = p.weibull();
    let first_time = (0..causes).map(|_| weibull.sample(rng)).reduce(f64::min);
    let obs = match first_time {
        Some(y) if y <= horizon => Observation::event(y),
        _ => Observation::censored(horizon),
    };
    (obs, LatentDraw { causes, first_time })
}

/// `n` observations from a single seeded stream.
pub fn simulate_observations(p: &ModelParams, n: usize, horizon: f64, seed: u64) -> Vec<Observation> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| simulate_contract(&mut rng, p, horizon)).collect()
}

pub fn simulate_portfolio(spec: &SimulationSpec) -> Result<Portfolio> {
    spec.validate()?;
    let width = spec.n_contracts.to_string().len().max(6);
    let records = simulate_observations(
        &spec.true_params,
        spec.n_contracts,
        spec.horizon_months,
        spec.seed,
    )
    .into_iter()
    .enumerate()
    .map(|(i, o)| ContractRecord {
        contract_id: format!("{}{:0width$}", spec.id_prefix, i + 1),
        time_months: o.time,
        recovered: o.event,
        fx_bs: spec.fx_bs,
        fx_cv: spec.fx_cv,
    })
    .collect();
    Portfolio::new(records, spec.horizon_months)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::population_survival;

    fn mp(theta: f64, shape: f64, scale: f64) -> ModelParams {
        ModelParams::from_triple(theta, shape, scale).unwrap()
    }

    #[test]
    fn no_causes_means_censored() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let p = mp(0.0, 1.2, 10.0);
        for _ in 0..1000 {
            let (o, latent) = simulate_contract_latent(&mut rng, &p, 24.0);
            assert_eq!(o, Observation::censored(24.0));
            assert_eq!(latent.causes, 0);
            assert!(latent.first_time.is_none());
        }
    }

    #[test]
    fn many_fast_causes_almost_always_recover() {
        let p = mp(50.0, 1.0, 0.5);
        let closed_form = 1.0 - population_survival(24.0, &p).unwrap();
        assert!(closed_form > 0.999);
        let data = simulate_observations(&p, 10_000, 24.0, 1);
        let rate = data.iter().filter(|o| o.event).count() as f64 / data.len() as f64;
        assert!(rate > 0.99);
    }

    #[test]
    fn empirical_survival_tracks_closed_form() {
        let p = mp(0.871, 1.157, 18.762);
        let data = simulate_observations(&p, 100_000, 24.0, 2);
        for t in [6.0, 12.0, 18.0] {
            let emp = data.iter().filter(|o| o.time > t).count() as f64 / data.len() as f64;
            let exact = population_survival(t, &p).unwrap();
            assert!((emp - exact).abs() < 0.01, "t={t}: {emp} vs {exact}");
        }
    }

    #[test]
    fn event_subdistribution_binomial_check() {
        // Two-sided binomial z-test at alpha = 0.001 on P(event by t).
        let p = mp(0.614, 1.157, 18.762);
        let n = 100_000;
        let data = simulate_observations(&p, n, 24.0, 3);
        let z_crit = 3.290_526_731_491_9;
        for i in 1..=10 {
            let t = 2.4 * i as f64;
            let prob = 1.0 - population_survival(t, &p).unwrap();
            let hits = data.iter().filter(|o| o.event && o.time <= t).count() as f64;
            let z = (hits - n as f64 * prob) / (n as f64 * prob * (1.0 - prob)).sqrt();
            assert!(z.abs() < z_crit, "t={t}: z={z}");
        }
    }

    #[test]
    fn censored_records_sit_on_the_horizon() {
        let data = simulate_observations(&mp(0.7, 1.3, 30.0), 5000, 24.0, 4);
        assert!(data.iter().filter(|o| !o.event).all(|o| o.time == 24.0));
        assert!(data.iter().filter(|o| o.event).all(|o| o.time <= 24.0));
    }

    #[test]
    fn min_of_three_exponentials() {
        // Given M = 3 with shape 1, the minimum is exponential with scale/3.
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let p = mp(3.0, 1.0, 12.0);
        let mut mins = Vec::new();
        while mins.len() < 20_000 {
            let (_, latent) = simulate_contract_latent(&mut rng, &p, 1e9);
            if latent.causes == 3 {
                mins.push(latent.first_time.unwrap());
            }
        }
        let mean = mins.iter().sum::<f64>() / mins.len() as f64;
        let expected = 4.0;
        assert!((mean - expected).abs() < 3.0 * expected / (mins.len() as f64).sqrt(), "{mean}");
        let below = mins.iter().filter(|&&m| m <= 4.0).count() as f64 / mins.len() as f64;
        assert!((below - (1.0 - (-1.0f64).exp())).abs() < 0.015);
    }

    #[test]
    fn portfolio_examples() {
        let spec = SimulationSpec::new(mp(0.0, 1.2, 10.0), 100, 24.0, 7);
        let p = simulate_portfolio(&spec).unwrap();
        assert_eq!(p.records().len(), 100);
        assert!(p.records().iter().all(|r| !r.recovered && r.time_months == 24.0));
        assert_eq!(p.records()[0].contract_id, "C000001");

        let a = simulate_portfolio(&SimulationSpec::new(mp(0.9, 1.2, 10.0), 500, 24.0, 9)).unwrap();
        let b = simulate_portfolio(&SimulationSpec::new(mp(0.9, 1.2, 10.0), 500, 24.0, 9)).unwrap();
        assert_eq!(a.records(), b.records());

        let big = SimulationSpec::new(mp(0.614, 1.157, 18.762), 100_000, 24.0, 11);
        let p = simulate_portfolio(&big).unwrap();
        let censored = p.records().iter().filter(|r| !r.recovered).count() as f64 / 100_000.0;
        assert!((censored - 0.6365).abs() < 0.01, "{censored}");
    }

    #[test]
    fn invalid_spec() {
        let mut spec = SimulationSpec::new(mp(0.5, 1.2, 10.0), 0, 24.0, 1);
        assert!(simulate_portfolio(&spec).is_err());
        spec.n_contracts = 5;
        spec.horizon_months = 0.0;
        assert!(simulate_portfolio(&spec).is_err());
        spec.horizon_months = 24.0;
        spec.fx_cv = 5;
        assert!(simulate_portfolio(&spec).is_err());
    }
}
