//! Report shapes produced by the command line: fit reports (JSON and CSV),
//! survival tables at fixed horizons, and non-recovery curves (CSV and SVG).

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::Write;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimation::{risk_ranking, FitResult, StratifiedFitResult};
use crate::model::{population_survival, ModelParams, Observation};
use crate::portfolio::summarize;

/// A labelled parameter vector, the input of tables and curves.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupParams {
    pub label: String,
    pub params: ModelParams,
}

impl FromStr for GroupParams {
    type Err = Error;

    /// `label:theta,shape,scale`.
    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Domain(format!("expected `label:theta,shape,scale`, got `{s}`"));
        let (label, rest) = s.split_once(':').ok_or_else(bad)?;
        let values = rest
            .split(',')
            .map(|v| v.trim().parse::<f64>().map_err(|_| bad()))
            .collect::<Result<Vec<_>>>()?;
        let [theta, shape, scale] = values[..] else {
            return Err(bad());
        };
        Ok(GroupParams {
            label: label.trim().to_string(),
            params: ModelParams::from_triple(theta, shape, scale)?,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupReport {
    pub label: String,
    pub theta: f64,
    pub shape: f64,
    pub scale: f64,
    pub cure_fraction: f64,
    pub theta_se: Option<f64>,
    pub shape_se: Option<f64>,
    pub scale_se: Option<f64>,
    pub cure_fraction_se: Option<f64>,
    pub n_events: usize,
    pub n_censored: usize,
    pub degenerate: bool,
}

/// Machine-readable fit output (full precision).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    /// `single` or `stratified`.
    pub mode: String,
    pub optimizer: String,
    pub horizon_months: f64,
    pub partition: String,
    pub log_likelihood: f64,
    pub converged: bool,
    pub degeneracy: Option<String>,
    pub groups: Vec<GroupReport>,
}

fn degeneracy_name<T: Serialize>(d: &Option<T>) -> Option<String> {
    d.as_ref()
        .and_then(|d| serde_json::to_value(d).ok())
        .and_then(|v| v.as_str().map(str::to_string))
}

impl FitReport {
    pub fn from_single(label: &str, fit: &FitResult, optimizer: &str, horizon: f64, partition: &str) -> Self {
        let se = fit.standard_errors;
        FitReport {
            mode: "single".into(),
            optimizer: optimizer.into(),
            horizon_months: horizon,
            partition: partition.into(),
            log_likelihood: fit.log_likelihood,
            converged: fit.converged,
            degeneracy: degeneracy_name(&fit.degeneracy),
            groups: vec![GroupReport {
                label: label.into(),
                theta: fit.params.theta(),
                shape: fit.params.shape(),
                scale: fit.params.scale(),
                cure_fraction: fit.cure_fraction,
                theta_se: se.map(|s| s[0]),
                shape_se: se.map(|s| s[1]),
                scale_se: se.map(|s| s[2]),
                cure_fraction_se: fit.cure_fraction_se,
                n_events: fit.n_events,
                n_censored: fit.n_censored,
                degenerate: fit.degeneracy.is_some(),
            }],
        }
    }

    pub fn from_stratified(fit: &StratifiedFitResult, optimizer: &str, horizon: f64, partition: &str) -> Self {
        let w = fit.shared_weibull;
        let shared = fit.shared_standard_errors;
        let groups = fit
            .groups
            .iter()
            .map(|(label, g)| GroupReport {
                label: label.clone(),
                theta: g.theta,
                shape: w.shape(),
                scale: w.scale(),
                cure_fraction: g.cure_fraction,
                theta_se: g.theta_se,
                shape_se: shared.map(|s| s[0]),
                scale_se: shared.map(|s| s[1]),
                cure_fraction_se: g.cure_fraction_se,
                n_events: g.n_events,
                n_censored: g.n_censored,
                degenerate: g.degenerate,
            })
            .collect();
        FitReport {
            mode: "stratified".into(),
            optimizer: optimizer.into(),
            horizon_months: horizon,
            partition: partition.into(),
            log_likelihood: fit.log_likelihood,
            converged: fit.converged,
            degeneracy: degeneracy_name(&fit.degeneracy),
            groups,
        }
    }

    pub fn is_degenerate(&self) -> bool {
        !self.converged || self.degeneracy.is_some() || self.groups.iter().any(|g| g.degenerate)
    }

    pub fn group_params(&self) -> Result<Vec<GroupParams>> {
        self.groups
            .iter()
            .map(|g| {
                Ok(GroupParams {
                    label: g.label.clone(),
                    params: ModelParams::from_triple(g.theta, g.shape, g.scale)?,
                })
            })
            .collect()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    /// Rounded human-readable table: parameters to 3 decimals.
    pub fn write_csv<W: Write>(&self, sink: W) -> Result<()> {
        let opt3 = |v: Option<f64>| v.map_or_else(String::new, |v| format!("{v:.3}"));
        let mut w = csv::Writer::from_writer(sink);
        w.write_record([
            "group",
            "shape",
            "scale",
            "theta",
            "cure_fraction",
            "shape_se",
            "scale_se",
            "theta_se",
            "cure_fraction_se",
            "n_events",
            "n_censored",
            "converged",
            "degenerate",
        ])?;
        for g in &self.groups {
            w.write_record([
                g.label.clone(),
                format!("{:.3}", g.shape),
                format!("{:.3}", g.scale),
                format!("{:.3}", g.theta),
                format!("{:.3}", g.cure_fraction),
                opt3(g.shape_se),
                opt3(g.scale_se),
                opt3(g.theta_se),
                opt3(g.cure_fraction_se),
                g.n_events.to_string(),
                g.n_censored.to_string(),
                self.converged.to_string(),
                g.degenerate.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SurvivalRow {
    pub label: String,
    /// `100 S_Y(h)` for each horizon.
    pub survival_pct: Vec<f64>,
    /// Observed `% unrecovered`, truncated to two decimals as in the summary
    /// tables, when data was supplied for this group.
    pub observed_unrecovered_pct: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SurvivalTable {
    pub horizons: Vec<f64>,
    pub rows: Vec<SurvivalRow>,
}

impl SurvivalTable {
    pub fn build(
        groups: &[GroupParams],
        horizons: &[f64],
        observed: Option<&BTreeMap<String, Vec<Observation>>>,
    ) -> Result<Self> {
        if horizons.is_empty() {
            return Err(Error::Domain("at least one horizon is required".into()));
        }
        if horizons.iter().any(|h| !(h.is_finite() && *h >= 0.0))
            || horizons.windows(2).any(|w| w[1] <= w[0])
        {
            return Err(Error::Domain(format!(
                "horizons must be non-negative and strictly ascending, got {horizons:?}"
            )));
        }
        let rows = groups
            .iter()
            .map(|g| {
                let survival_pct = horizons
                    .iter()
                    .map(|&h| population_survival(h, &g.params).map(|s| 100.0 * s))
                    .collect::<Result<Vec<_>>>()?;
                let observed_unrecovered_pct = match observed.and_then(|o| o.get(&g.label)) {
                    Some(obs) if !obs.is_empty() => Some(summarize(&g.label, obs)?.pct_non_recovery_display()),
                    _ => None,
                };
                Ok(SurvivalRow {
                    label: g.label.clone(),
                    survival_pct,
                    observed_unrecovered_pct,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(SurvivalTable {
            horizons: horizons.to_vec(),
            rows,
        })
    }

    /// Percentages to two decimals. The observed column is present only when
    /// some row has data.
    pub fn write_csv<W: Write>(&self, sink: W) -> Result<()> {
        let with_observed = self.rows.iter().any(|r| r.observed_unrecovered_pct.is_some());
        let mut w = csv::Writer::from_writer(sink);
        let mut header = vec!["group".to_string()];
        header.extend(self.horizons.iter().map(|h| format!("s_y_{h}")));
        if with_observed {
            header.push("pct_unrecovered".into());
        }
        w.write_record(&header)?;
        for r in &self.rows {
            let mut rec = vec![r.label.clone()];
            rec.extend(r.survival_pct.iter().map(|v| format!("{v:.2}")));
            if with_observed {
                rec.push(r.observed_unrecovered_pct.clone().unwrap_or_default());
            }
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CurveSeries {
    pub label: String,
    pub theta: f64,
    /// `(t, S_Y(t))` on a uniform grid over `[0, horizon]`.
    pub points: Vec<(f64, f64)>,
}

/// Uniform grid `0, step, 2 step, ...` up to and including `horizon`.
pub fn uniform_grid(step: f64, horizon: f64) -> Result<Vec<f64>> {
    if !(step.is_finite() && step > 0.0) {
        return Err(Error::Domain(format!("grid step must be > 0, got {step}")));
    }
    if !(horizon.is_finite() && horizon >= 0.0) {
        return Err(Error::Domain(format!("horizon must be >= 0, got {horizon}")));
    }
    let n = (horizon / step + 1e-9).floor() as usize;
    let mut grid: Vec<f64> = (0..=n).map(|i| i as f64 * step).collect();
    if horizon - grid[n] > 1e-9 * horizon.max(1.0) {
        grid.push(horizon);
    }
    Ok(grid)
}

/// Non-recovery curves, ordered from the lowest to the highest recovery risk
/// (so at every `t` each curve lies above the next).
pub fn build_curves(groups: &[GroupParams], step: f64, horizon: f64) -> Result<Vec<CurveSeries>> {
    let grid = uniform_grid(step, horizon)?;
    let order = risk_ranking(groups.iter().map(|g| (g.label.clone(), g.params.theta())));
    order
        .iter()
        .map(|rank| {
            let g = groups
                .iter()
                .find(|g| g.label == rank.label)
                .expect("ranking preserves labels");
            let points = grid
                .iter()
                .map(|&t| Ok((t, population_survival(t, &g.params)?)))
                .collect::<Result<Vec<_>>>()?;
            Ok(CurveSeries {
                label: g.label.clone(),
                theta: rank.theta,
                points,
            })
        })
        .collect()
}

/// Long format: `group,t,non_recovery`.
pub fn write_curves_csv<W: Write>(curves: &[CurveSeries], sink: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(sink);
    w.write_record(["group", "t", "non_recovery"])?;
    for c in curves {
        for (t, s) in &c.points {
            w.write_record([c.label.clone(), t.to_string(), format!("{s:.6}")])?;
        }
    }
    w.flush()?;
    Ok(())
}

const PALETTE: [&str; 8] = [
    "#1b9e77", "#d95f02", "#7570b3", "#e7298a", "#66a61e", "#e6ab02", "#a6761d", "#666666",
];

/// Static line chart of the curves, y axis fixed to `[0, 1]`.
pub fn render_svg(curves: &[CurveSeries], title: &str) -> String {
    let (w, h, left, right, top, bottom) = (640.0, 400.0, 60.0, 150.0, 40.0, 50.0);
    let plot_w = w - left - right;
    let plot_h = h - top - bottom;
    let t_max = curves
        .iter()
        .flat_map(|c| c.points.last().map(|p| p.0))
        .fold(0.0f64, f64::max)
        .max(1e-9);
    let px = |t: f64| left + plot_w * t / t_max;
    let py = |s: f64| top + plot_h * (1.0 - s);

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(svg, r#"<rect width="{w}" height="{h}" fill="white"/>"#);
    let _ = writeln!(svg, r#"<text x="{}" y="24" text-anchor="middle" font-size="14">{}</text>"#, left + plot_w / 2.0, escape(title));
    let _ = writeln!(
        svg,
        r#"<path d="M{left},{top} V{} H{}" fill="none" stroke="black"/>"#,
        top + plot_h,
        left + plot_w
    );
    for i in 0..=5 {
        let s = i as f64 / 5.0;
        let _ = writeln!(
            svg,
            r#"<text x="{}" y="{}" text-anchor="end">{s:.1}</text>"#,
            left - 6.0,
            py(s) + 4.0
        );
    }
    for i in 0..=4 {
        let t = t_max * i as f64 / 4.0;
        let _ = writeln!(
            svg,
            r#"<text x="{}" y="{}" text-anchor="middle">{t:.0}</text>"#,
            px(t),
            top + plot_h + 18.0
        );
    }
    let _ = writeln!(
        svg,
        r#"<text x="{}" y="{}" text-anchor="middle">months</text>"#,
        left + plot_w / 2.0,
        h - 10.0
    );
    for (i, c) in curves.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let pts: Vec<String> = c.points.iter().map(|&(t, s)| format!("{:.2},{:.2}", px(t), py(s))).collect();
        let _ = writeln!(
            svg,
            r#"<polyline fill="none" stroke="{color}" stroke-width="2" points="{}"/>"#,
            pts.join(" ")
        );
        let ly = top + 16.0 * i as f64 + 10.0;
        let _ = writeln!(
            svg,
            r#"<line x1="{}" y1="{ly}" x2="{}" y2="{ly}" stroke="{color}" stroke-width="2"/><text x="{}" y="{}">{}</text>"#,
            left + plot_w + 10.0,
            left + plot_w + 30.0,
            left + plot_w + 35.0,
            ly + 4.0,
            escape(&c.label)
        );
    }
    svg.push_str("</svg>\n");
    svg
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}
