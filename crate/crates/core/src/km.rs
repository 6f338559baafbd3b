//! Kaplan-Meier product-limit estimator, used as a nonparametric check on
//! fitted model curves.

use std::io::Write;

use crate::error::{Error, Result};
use crate::model::{population_survival, ModelParams, Observation};

/// Right-continuous step function: equal to 1 before the first breakpoint and
/// to `value` of the last breakpoint at or before `t` afterwards.
#[derive(Debug, Clone, PartialEq)]
pub struct StepFunction {
    steps: Vec<(f64, f64)>,
}

impl StepFunction {
    pub fn steps(&self) -> &[(f64, f64)] {
        &self.steps
    }

    pub fn value_at(&self, t: f64) -> f64 {
        let idx = self.steps.partition_point(|&(s, _)| s <= t);
        if idx == 0 {
            1.0
        } else {
            self.steps[idx - 1].1
        }
    }

    /// Two-column `time,survival` CSV, starting from `(0, 1)`.
    pub fn write_csv<W: Write>(&self, sink: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(sink);
        w.write_record(["time", "survival"])?;
        if self.steps.first().is_none_or(|&(t, _)| t > 0.0) {
            w.write_record(["0", "1"])?;
        }
        for (t, s) in &self.steps {
            w.write_record([t.to_string(), s.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Product-limit estimate `prod_{t_j <= t} (1 - d_j / n_j)`. Censorings tied
/// with an event time stay in that event's risk set.
pub fn kaplan_meier(obs: &[Observation]) -> Result<StepFunction> {
    if obs.is_empty() {
        return Err(Error::Domain("Kaplan-Meier of an empty sample".into()));
    }
    if obs.iter().any(|o| o.time.is_nan()) {
        return Err(Error::Domain("NaN observation time".into()));
    }
    let mut sorted = obs.to_vec();
    // events before censorings at equal times
    sorted.sort_by(|a, b| a.time.total_cmp(&b.time).then(b.event.cmp(&a.event)));

    let mut at_risk = sorted.len();
    let mut surv = 1.0;
    let mut steps = Vec::new();
    let mut i = 0;
    while i < sorted.len() {
        let t = sorted[i].time;
        let mut deaths = 0;
        let mut leaving = 0;
        while i < sorted.len() && sorted[i].time == t {
            deaths += usize::from(sorted[i].event);
            leaving += 1;
            i += 1;
        }
        if deaths > 0 {
            surv *= 1.0 - deaths as f64 / at_risk as f64;
            steps.push((t, surv));
        }
        at_risk -= leaving;
    }
    Ok(StepFunction { steps })
}

/// `max_t |S_hat(t) - S_Y(t)|` over `grid`.
pub fn sup_distance(s: &StepFunction, model: &ModelParams, grid: &[f64]) -> Result<f64> {
    grid.iter().try_fold(0.0f64, |acc, &t| {
        Ok(acc.max((s.value_at(t) - population_survival(t, model)?).abs()))
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simulation::simulate_observations;

    /// Direct product-limit evaluation at `t`, recomputing every risk set.
    fn brute_force(obs: &[Observation], t: f64) -> f64 {
        let mut times: Vec<f64> = obs.iter().filter(|o| o.event && o.time <= t).map(|o| o.time).collect();
        times.sort_by(f64::total_cmp);
        times.dedup();
        times
            .iter()
            .map(|&tj| {
                let d = obs.iter().filter(|o| o.event && o.time == tj).count() as f64;
                let n = obs.iter().filter(|o| o.time >= tj).count() as f64;
                1.0 - d / n
            })
            .product()
    }

    #[test]
    fn uncensored_steps() {
        let obs: Vec<_> = [1.0, 2.0, 3.0].map(Observation::event).to_vec();
        let km = kaplan_meier(&obs).unwrap();
        let values: Vec<f64> = km.steps().iter().map(|s| s.1).collect();
        assert!((values[0] - 2.0 / 3.0).abs() < 1e-15);
        assert!((values[1] - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(values[2], 0.0);
        assert_eq!(km.value_at(0.5), 1.0);
    }

    #[test]
    fn all_censored_is_flat() {
        let km = kaplan_meier(&[Observation::censored(24.0); 4]).unwrap();
        assert!(km.steps().is_empty());
        assert_eq!(km.value_at(100.0), 1.0);
    }

    #[test]
    fn censoring_between_events() {
        let obs = [Observation::event(1.0), Observation::event(2.0), Observation::censored(1.5)];
        let km = kaplan_meier(&obs).unwrap();
        assert!((km.value_at(1.0) - 2.0 / 3.0).abs() < 1e-15);
        assert!((km.value_at(1.9) - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(km.value_at(2.0), 0.0);
    }

    #[test]
    fn matches_brute_force_with_ties() {
        let obs = vec![
            Observation::event(2.0),
            Observation::censored(2.0),
            Observation::event(2.0),
            Observation::event(5.0),
            Observation::censored(7.0),
            Observation::event(7.0),
            Observation::censored(24.0),
            Observation::censored(24.0),
        ];
        let km = kaplan_meier(&obs).unwrap();
        for t in [0.0, 2.0, 3.0, 5.0, 7.0, 10.0, 24.0] {
            assert!((km.value_at(t) - brute_force(&obs, t)).abs() < 1e-15, "t={t}");
        }
    }

    #[test]
    fn no_censoring_equals_one_minus_ecdf() {
        let obs: Vec<_> = [3.0, 1.0, 4.0, 1.0, 5.0, 9.0, 2.0, 6.0].map(Observation::event).to_vec();
        let km = kaplan_meier(&obs).unwrap();
        for t in [0.5, 1.0, 2.5, 4.0, 6.0, 9.0] {
            let ecdf = obs.iter().filter(|o| o.time <= t).count() as f64 / obs.len() as f64;
            assert!((km.value_at(t) - (1.0 - ecdf)).abs() < 1e-12);
        }
    }

    #[test]
    fn plateau_after_last_event() {
        let p = ModelParams::from_triple(0.871, 1.157, 18.762).unwrap();
        let data = simulate_observations(&p, 5000, 24.0, 3);
        let km = kaplan_meier(&data).unwrap();
        let steps = km.steps();
        assert!(steps.windows(2).all(|w| w[0].0 < w[1].0 && w[1].1 <= w[0].1));
        let last = steps.last().unwrap().1;
        assert!(last > 0.0);
        assert_eq!(km.value_at(1000.0), last);
    }

    #[test]
    fn empty_input_is_an_error() {
        assert!(kaplan_meier(&[]).is_err());
    }

    #[test]
    fn sup_distance_examples() {
        let p = ModelParams::from_triple(0.871, 1.157, 18.762).unwrap();
        // the model's own curve sampled as steps at 0.01-month spacing
        let steps: Vec<(f64, f64)> = (1..=2400)
            .map(|i| {
                let t = i as f64 * 0.01;
                (t, population_survival(t, &p).unwrap())
            })
            .collect();
        let own = StepFunction { steps };
        let grid: Vec<f64> = (0..=240).map(|i| i as f64 * 0.1).collect();
        let max_jump = 1.0 - population_survival(0.01, &p).unwrap();
        assert!(sup_distance(&own, &p, &grid).unwrap() <= max_jump);

        let data = simulate_observations(&p, 100_000, 24.0, 12);
        let km = kaplan_meier(&data).unwrap();
        assert!(sup_distance(&km, &p, &grid).unwrap() < 0.01);

        let wrong = ModelParams::from_triple(2.0 * 0.871, 1.157, 18.762).unwrap();
        assert!(sup_distance(&km, &wrong, &grid).unwrap() > 0.05);
    }

    #[test]
    fn csv_starts_at_one() {
        let km = kaplan_meier(&[Observation::event(2.0), Observation::censored(3.0)]).unwrap();
        let mut out = Vec::new();
        km.write_csv(&mut out).unwrap();
        assert_eq!(String::from_utf8(out).unwrap(), "time,survival\n0,1\n2,0.5\n");
    }
}
