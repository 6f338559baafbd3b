//! Defaulted-loan portfolios: CSV ingestion, validation, segmentation and
//! the count/percentage summaries.
//!
//! Input CSV (UTF-8, header row, dot decimals):
//!
//! ```text
//! contract_id,time_months,recovered,fx_bs,fx_cv[,partially_recovered]
//! ```
//!
//! `recovered` and `partially_recovered` are `0`/`1`; `fx_bs` (behaviour
//! score range) and `fx_cv` (contracted amount range) are levels `1..=4`.
//! Unrecovered contracts are censored at the workout horizon and must carry
//! it as their time. Partially recovered contracts are dropped on load.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::Observation;

pub const DEFAULT_HORIZON_MONTHS: f64 = 24.0;

const REQUIRED_COLUMNS: [&str; 5] = ["contract_id", "time_months", "recovered", "fx_bs", "fx_cv"];
const PARTIAL_COLUMN: &str = "partially_recovered";

/// Slack allowed when matching a censored time against the horizon.
const HORIZON_EPS: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ContractRecord {
    pub contract_id: String,
    pub time_months: f64,
    pub recovered: bool,
    pub fx_bs: u8,
    pub fx_cv: u8,
}

impl ContractRecord {
    pub fn observation(&self) -> Observation {
        Observation {
            time: self.time_months,
            event: self.recovered,
        }
    }

    fn check(&self, horizon: f64) -> std::result::Result<(), (&'static str, String)> {
        if self.contract_id.is_empty() {
            return Err(("contract_id", "empty contract id".into()));
        }
        if !(self.time_months.is_finite() && self.time_months >= 0.0) {
            return Err(("time_months", format!("must be >= 0, got {}", self.time_months)));
        }
        if self.recovered && self.time_months > horizon {
            return Err((
                "time_months",
                format!(
                    "recovery at {} months is past the {horizon}-month horizon",
                    self.time_months
                ),
            ));
        }
        if !self.recovered && (self.time_months - horizon).abs() > HORIZON_EPS {
            return Err((
                "time_months",
                format!(
                    "unrecovered contract must be censored at the horizon ({horizon}), got {}",
                    self.time_months
                ),
            ));
        }
        for (field, level) in [("fx_bs", self.fx_bs), ("fx_cv", self.fx_cv)] {
            if !(1..=4).contains(&level) {
                return Err((field, format!("level must be 1..=4, got {level}")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Portfolio {
    records: Vec<ContractRecord>,
    horizon_months: f64,
    excluded_partial: usize,
}

impl Portfolio {
    pub fn new(records: Vec<ContractRecord>, horizon_months: f64) -> Result<Self> {
        check_horizon(horizon_months)?;
        let mut seen = HashSet::new();
        for (i, r) in records.iter().enumerate() {
            let line = i as u64 + 2;
            if let Err((field, message)) = r.check(horizon_months) {
                return Err(Error::Parse {
                    line,
                    field: field.into(),
                    message,
                });
            }
            if !seen.insert(r.contract_id.as_str()) {
                return Err(Error::Parse {
                    line,
                    field: "contract_id".into(),
                    message: format!("duplicate contract id `{}`", r.contract_id),
                });
            }
        }
        Ok(Self {
            records,
            horizon_months,
            excluded_partial: 0,
        })
    }

    pub fn records(&self) -> &[ContractRecord] {
        &self.records
    }

    pub fn horizon_months(&self) -> f64 {
        self.horizon_months
    }

    /// Partially recovered rows dropped while loading.
    pub fn excluded_partial(&self) -> usize {
        self.excluded_partial
    }

    pub fn observations(&self) -> Vec<Observation> {
        self.records.iter().map(ContractRecord::observation).collect()
    }

    /// Concatenates two portfolios with the same horizon.
    pub fn merge(self, other: Portfolio) -> Result<Portfolio> {
        if self.horizon_months != other.horizon_months {
            return Err(Error::Domain("cannot merge portfolios with different horizons".into()));
        }
        let mut records = self.records;
        records.extend(other.records);
        let mut merged = Portfolio::new(records, self.horizon_months)?;
        merged.excluded_partial = self.excluded_partial + other.excluded_partial;
        Ok(merged)
    }
}

fn check_horizon(h: f64) -> Result<()> {
    if !(h.is_finite() && h > 0.0) {
        return Err(Error::InvalidParameter {
            name: "horizon",
            value: h,
            reason: "must be finite and > 0",
        });
    }
    Ok(())
}

fn parse_flag(raw: &str) -> std::result::Result<bool, String> {
    match raw {
        "0" => Ok(false),
        "1" => Ok(true),
        other => Err(format!("expected 0 or 1, got `{other}`")),
    }
}

pub fn load_portfolio<R: Read>(source: R, horizon_months: f64) -> Result<Portfolio> {
    check_horizon(horizon_months)?;
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(source);
    let headers = reader.headers()?.clone();
    let column = |name: &str| headers.iter().position(|h| h == name);
    let mut idx = [0usize; 5];
    for (slot, name) in idx.iter_mut().zip(REQUIRED_COLUMNS) {
        *slot = column(name).ok_or_else(|| Error::MissingColumn(name.to_string()))?;
    }
    let partial_idx = column(PARTIAL_COLUMN);

    let mut records = Vec::new();
    let mut excluded_partial = 0;
    let mut seen = HashSet::new();
    for row in reader.records() {
        let row = row?;
        let line = row.position().map_or(0, |p| p.line());
        let err = |field: &str, message: String| Error::Parse {
            line,
            field: field.to_string(),
            message,
        };
        let get = |i: usize, name: &str| row.get(i).ok_or_else(|| err(name, "missing value".into()));

        let contract_id = get(idx[0], "contract_id")?.to_string();
        if !seen.insert(contract_id.clone()) {
            return Err(err("contract_id", format!("duplicate contract id `{contract_id}`")));
        }
        if let Some(pi) = partial_idx {
            let raw = row.get(pi).unwrap_or("");
            let partial = if raw.is_empty() {
                false
            } else {
                parse_flag(raw).map_err(|m| err(PARTIAL_COLUMN, m))?
            };
            if partial {
                excluded_partial += 1;
                continue;
            }
        }

        let time_months: f64 = get(idx[1], "time_months")?
            .parse()
            .map_err(|e| err("time_months", format!("{e}")))?;
        let recovered = parse_flag(get(idx[2], "recovered")?).map_err(|m| err("recovered", m))?;
        let level = |i: usize, name: &str| -> Result<u8> {
            get(i, name)?
                .parse::<u8>()
                .map_err(|e| err(name, format!("{e}")))
        };
        let record = ContractRecord {
            contract_id,
            time_months,
            recovered,
            fx_bs: level(idx[3], "fx_bs")?,
            fx_cv: level(idx[4], "fx_cv")?,
        };
        record
            .check(horizon_months)
            .map_err(|(field, message)| err(field, message))?;
        records.push(record);
    }

    Ok(Portfolio {
        records,
        horizon_months,
        excluded_partial,
    })
}

pub fn write_portfolio<W: Write>(p: &Portfolio, sink: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(sink);
    w.write_record(REQUIRED_COLUMNS)?;
    for r in &p.records {
        w.write_record([
            r.contract_id.clone(),
            r.time_months.to_string(),
            u8::from(r.recovered).to_string(),
            r.fx_bs.to_string(),
            r.fx_cv.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Covariate {
    /// Behaviour score range.
    BehaviorScore,
    /// Contracted amount range.
    ContractAmount,
}

impl Covariate {
    fn tag(self) -> &'static str {
        match self {
            Covariate::BehaviorScore => "BS",
            Covariate::ContractAmount => "CV",
        }
    }

    fn level(self, r: &ContractRecord) -> u8 {
        match self {
            Covariate::BehaviorScore => r.fx_bs,
            Covariate::ContractAmount => r.fx_cv,
        }
    }
}

impl FromStr for Covariate {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "bs" | "fx_bs" | "fx-bs" => Ok(Covariate::BehaviorScore),
            "cv" | "fx_cv" | "fx-cv" => Ok(Covariate::ContractAmount),
            other => Err(Error::Segmentation(format!("unknown covariate `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PartitionDim {
    pub covariate: Covariate,
    pub levels: BTreeSet<u8>,
}

/// Which covariates to split on and which of their levels to keep. Several
/// dimensions form a cross partition. No dimensions means a single
/// `population` group.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct PartitionSpec {
    pub dims: Vec<PartitionDim>,
}

impl PartitionSpec {
    pub fn population() -> Self {
        Self::default()
    }

    pub fn by(mut self, covariate: Covariate, levels: impl IntoIterator<Item = u8>) -> Self {
        self.dims.push(PartitionDim {
            covariate,
            levels: levels.into_iter().collect(),
        });
        self
    }

    fn label(&self, r: &ContractRecord) -> Option<String> {
        if self.dims.is_empty() {
            return Some(POPULATION_LABEL.to_string());
        }
        let mut parts = Vec::with_capacity(self.dims.len());
        for d in &self.dims {
            let level = d.covariate.level(r);
            if !d.levels.contains(&level) {
                return None;
            }
            parts.push(format!("{}{}", d.covariate.tag(), level));
        }
        Some(parts.join("x"))
    }
}

pub const POPULATION_LABEL: &str = "population";

impl FromStr for PartitionDim {
    type Err = Error;

    /// `cv=1,2` or `bs=1,2,3`.
    fn from_str(s: &str) -> Result<Self> {
        let (name, levels) = s
            .split_once('=')
            .ok_or_else(|| Error::Segmentation(format!("expected `<covariate>=<levels>`, got `{s}`")))?;
        let covariate = name.parse()?;
        let levels = levels
            .split(',')
            .map(str::trim)
            .filter(|l| !l.is_empty())
            .map(|l| {
                l.parse::<u8>()
                    .ok()
                    .filter(|v| (1..=4).contains(v))
                    .ok_or_else(|| Error::Segmentation(format!("invalid level `{l}`")))
            })
            .collect::<Result<BTreeSet<u8>>>()?;
        Ok(PartitionDim { covariate, levels })
    }
}

impl FromStr for PartitionSpec {
    type Err = Error;

    /// Dimensions separated by `;`, e.g. `cv=1,2;bs=1,2`.
    fn from_str(s: &str) -> Result<Self> {
        let dims = s
            .split(';')
            .map(str::trim)
            .filter(|d| !d.is_empty())
            .map(str::parse)
            .collect::<Result<Vec<_>>>()?;
        Ok(PartitionSpec { dims })
    }
}

impl fmt::Display for PartitionSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.dims.is_empty() {
            return f.write_str(POPULATION_LABEL);
        }
        let parts: Vec<String> = self
            .dims
            .iter()
            .map(|d| {
                let levels: Vec<String> = d.levels.iter().map(u8::to_string).collect();
                format!("{}={}", d.covariate.tag().to_ascii_lowercase(), levels.join(","))
            })
            .collect();
        f.write_str(&parts.join(";"))
    }
}

#[derive(Debug, Clone)]
pub struct Segmentation {
    pub groups: BTreeMap<String, Vec<Observation>>,
    /// Records outside the selected levels.
    pub dropped: usize,
}

pub fn segment(p: &Portfolio, spec: &PartitionSpec) -> Result<Segmentation> {
    if let Some(d) = spec.dims.iter().find(|d| d.levels.is_empty()) {
        return Err(Error::Segmentation(format!(
            "no levels selected for {}",
            d.covariate.tag()
        )));
    }
    let mut groups: BTreeMap<String, Vec<Observation>> = BTreeMap::new();
    let mut dropped = 0;
    for r in &p.records {
        match spec.label(r) {
            Some(label) => groups.entry(label).or_default().push(r.observation()),
            None => dropped += 1,
        }
    }
    if groups.is_empty() {
        return Err(Error::Segmentation(format!(
            "no records match partition `{spec}`"
        )));
    }
    Ok(Segmentation { groups, dropped })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SummaryRow {
    pub label: String,
    pub n_total: usize,
    pub n_recovered: usize,
    pub n_unrecovered: usize,
    /// `100 * n_unrecovered / n_total`, full precision.
    pub pct_non_recovery: f64,
    /// Mean time over recovered contracts only.
    pub mean_recovery_time_months: Option<f64>,
}

impl SummaryRow {
    /// Percentage truncated (not rounded) to two decimals, computed in exact
    /// integer arithmetic.
    pub fn pct_non_recovery_display(&self) -> String {
        let hundredths = (10_000u128 * self.n_unrecovered as u128) / self.n_total as u128;
        format!("{}.{:02}", hundredths / 100, hundredths % 100)
    }
}

pub fn summarize(label: &str, obs: &[Observation]) -> Result<SummaryRow> {
    if obs.is_empty() {
        return Err(Error::Domain(format!("cannot summarize empty group `{label}`")));
    }
    let recovered: Vec<f64> = obs.iter().filter(|o| o.event).map(|o| o.time).collect();
    let n_total = obs.len();
    let n_recovered = recovered.len();
    let n_unrecovered = n_total - n_recovered;
    let mean = (!recovered.is_empty()).then(|| recovered.iter().sum::<f64>() / n_recovered as f64);
    Ok(SummaryRow {
        label: label.to_string(),
        n_total,
        n_recovered,
        n_unrecovered,
        pct_non_recovery: 100.0 * n_unrecovered as f64 / n_total as f64,
        mean_recovery_time_months: mean,
    })
}

/// Population row followed by one row per group of the partition.
pub fn summary_table(p: &Portfolio, spec: &PartitionSpec) -> Result<Vec<SummaryRow>> {
    let seg = segment(p, spec)?;
    let mut rows = vec![summarize(POPULATION_LABEL, &p.observations())?];
    if !spec.dims.is_empty() {
        for (label, obs) in &seg.groups {
            rows.push(summarize(label, obs)?);
        }
    }
    Ok(rows)
}

pub fn write_summary_csv<W: Write>(rows: &[SummaryRow], sink: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(sink);
    w.write_record([
        "group",
        "total",
        "recovered",
        "unrecovered",
        "pct_non_recovery",
        "mean_recovery_time_months",
    ])?;
    for r in rows {
        w.write_record([
            r.label.clone(),
            r.n_total.to_string(),
            r.n_recovered.to_string(),
            r.n_unrecovered.to_string(),
            r.pct_non_recovery_display(),
            r.mean_recovery_time_months
                .map_or_else(String::new, |m| format!("{m:.2}")),
        ])?;
    }
    w.flush()?;
    Ok(())
}
