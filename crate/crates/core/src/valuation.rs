//! Discounted value of the profits generated by a simulated user base.
//!
//! For day `d = 1..=365 * horizon` after the present, profit accrues as
//! `r(d) / 365 * DAU(d) * margin`, where `r` is annual revenue per user from a
//! logistic curve. By default each day is discounted with the index of the
//! year it falls in, `(1 + rate)^ceil(d / 365)`, so a constant stream values
//! exactly like the annual sum `sum_t profit_t / (1 + rate)^t`. The
//! [`Discounting::Continuous`] convention discounts by `(1 + rate)^(d / 365)`.

use std::io::Write;

use chrono::NaiveDate;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::revenue::{RevenueCase, RevenueCurve};
use crate::scenario::{Scenario, DAYS_PER_YEAR};
use crate::stats;
use crate::timeseries::days_between;

/// Market value at the reference IPO, USD.
pub const IPO_VALUE_USD: f64 = 6.9e9;
pub const DEFAULT_PROFIT_MARGIN: f64 = 0.15;
pub const DEFAULT_DISCOUNT_RATE: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Discounting {
    /// Every day of year `y` is discounted by `(1 + rate)^y`.
    #[default]
    YearIndex,
    /// Day `d` is discounted by `(1 + rate)^(d / 365)`.
    Continuous,
}

impl std::fmt::Display for Discounting {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Discounting::YearIndex => "year-index",
            Discounting::Continuous => "continuous",
        })
    }
}

impl std::str::FromStr for Discounting {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "year-index" => Ok(Discounting::YearIndex),
            "continuous" => Ok(Discounting::Continuous),
            other => Err(Error::Argument(format!(
                "unknown discounting {other:?}, expected year-index or continuous"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ValuationConfig {
    pub profit_margin: f64,
    pub discount_rate: f64,
    pub horizon_years: u32,
    pub discounting: Discounting,
}

impl Default for ValuationConfig {
    fn default() -> Self {
        Self {
            profit_margin: DEFAULT_PROFIT_MARGIN,
            discount_rate: DEFAULT_DISCOUNT_RATE,
            horizon_years: crate::scenario::DEFAULT_HORIZON_YEARS,
            discounting: Discounting::YearIndex,
        }
    }
}

impl ValuationConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.profit_margin > 0.0 && self.profit_margin <= 1.0) {
            return Err(Error::Argument(format!(
                "profit margin {} outside (0, 1]",
                self.profit_margin
            )));
        }
        if !(self.discount_rate.is_finite() && self.discount_rate >= 0.0) {
            return Err(Error::Argument(format!(
                "discount rate {} must be non-negative",
                self.discount_rate
            )));
        }
        if self.horizon_years < 1 {
            return Err(Error::Argument("valuation horizon must be at least one year".into()));
        }
        Ok(())
    }

    fn horizon_days(&self) -> usize {
        self.horizon_years as usize * DAYS_PER_YEAR
    }

    /// Discount factor for time `t` days after the present.
    fn discount(&self, t: f64) -> f64 {
        let years = match self.discounting {
            Discounting::YearIndex => (t / DAYS_PER_YEAR as f64).ceil(),
            Discounting::Continuous => t / DAYS_PER_YEAR as f64,
        };
        (1.0 + self.discount_rate).powf(-years)
    }
}

/// Present value of one scenario. The scenario must start the day after the
/// present and cover the valuation horizon.
pub fn value_scenario(scenario: &Scenario, revenue: &RevenueCurve, cfg: &ValuationConfig) -> Result<f64> {
    value_scenario_substeps(scenario, revenue, cfg, 1)
}

/// As [`value_scenario`], splitting every day into `steps_per_day` accrual
/// steps (DAU held constant within the day).
pub fn value_scenario_substeps(
    scenario: &Scenario,
    revenue: &RevenueCurve,
    cfg: &ValuationConfig,
    steps_per_day: usize,
) -> Result<f64> {
    let weights = AccrualWeights::new(scenario.dau.start_day(), revenue, cfg, steps_per_day)?;
    weights.value(scenario)
}

/// Discounted profit per user for each day of the horizon.
#[derive(Debug, Clone)]
struct AccrualWeights {
    start_day: NaiveDate,
    per_day: Vec<f64>,
}

impl AccrualWeights {
    fn new(
        start_day: NaiveDate,
        revenue: &RevenueCurve,
        cfg: &ValuationConfig,
        steps_per_day: usize,
    ) -> Result<Self> {
        cfg.validate()?;
        if steps_per_day == 0 {
            return Err(Error::Argument("need at least one accrual step per day".into()));
        }
        // day 1 of a scenario is the day after the present
        let present_t = (days_between(revenue.origin, start_day) - 1) as f64;
        let step = 1.0 / steps_per_day as f64;
        let per_step = cfg.profit_margin / DAYS_PER_YEAR as f64 * step;
        let per_day = (0..cfg.horizon_days())
            .map(|i| {
                (1..=steps_per_day)
                    .map(|j| {
                        let t = i as f64 + j as f64 * step;
                        revenue.per_dau_at(present_t + t) * per_step * cfg.discount(t)
                    })
                    .sum()
            })
            .collect();
        Ok(Self { start_day, per_day })
    }

    fn value(&self, scenario: &Scenario) -> Result<f64> {
        let dau = scenario.dau.values();
        if dau.len() < self.per_day.len() {
            return Err(Error::Argument(format!(
                "scenario {} covers {} days, valuation horizon needs {}",
                scenario.scenario_id,
                dau.len(),
                self.per_day.len()
            )));
        }
        debug_assert_eq!(scenario.dau.start_day(), self.start_day);
        Ok(self.per_day.iter().zip(dau).map(|(w, users)| w * users).sum())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValuationDistribution {
    pub scenario_values: Vec<f64>,
    pub median: f64,
    /// 2.5% and 97.5% percentiles.
    pub ci95: (f64, f64),
    pub mean: f64,
}

impl ValuationDistribution {
    pub fn from_values(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::Argument("no scenario values".into()));
        }
        let sorted = stats::sorted(&values);
        Ok(Self {
            median: stats::percentile_sorted(&sorted, 0.5),
            ci95: (
                stats::percentile_sorted(&sorted, 0.025),
                stats::percentile_sorted(&sorted, 0.975),
            ),
            mean: stats::mean(&values),
            scenario_values: values,
        })
    }
}

pub fn value_ensemble(
    scenarios: &[Scenario],
    revenue: &RevenueCurve,
    cfg: &ValuationConfig,
) -> Result<ValuationDistribution> {
    let first = scenarios
        .first()
        .ok_or_else(|| Error::Argument("no scenarios to value".into()))?;
    let weights = AccrualWeights::new(first.dau.start_day(), revenue, cfg, 1)?;
    let values = scenarios
        .par_iter()
        .map(|s| {
            if s.dau.start_day() == weights.start_day {
                weights.value(s)
            } else {
                value_scenario(s, revenue, cfg)
            }
        })
        .collect::<Result<Vec<f64>>>()?;
    ValuationDistribution::from_values(values)
}

/// Share of scenario values at or above `threshold`.
pub fn probability_exceeds(dist: &ValuationDistribution, threshold: f64) -> f64 {
    let hits = dist
        .scenario_values
        .iter()
        .filter(|&&v| v >= threshold)
        .count();
    hits as f64 / dist.scenario_values.len() as f64
}

/// One row of the valuation summary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaseSummary {
    pub case: RevenueCase,
    pub median: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub mean: f64,
    pub p_exceeds_ipo: f64,
}

impl CaseSummary {
    pub fn new(case: RevenueCase, dist: &ValuationDistribution) -> Self {
        Self {
            case,
            median: dist.median,
            ci_low: dist.ci95.0,
            ci_high: dist.ci95.1,
            mean: dist.mean,
            p_exceeds_ipo: probability_exceeds(dist, IPO_VALUE_USD),
        }
    }
}

/// Writes `scenario_id,revenue_case,value_usd` rows.
pub fn write_valuations<W: Write>(
    cases: &[(RevenueCase, &[Scenario], &ValuationDistribution)],
    writer: W,
) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    wtr.write_record(["scenario_id", "revenue_case", "value_usd"])?;
    for (case, scenarios, dist) in cases {
        for (s, v) in scenarios.iter().zip(&dist.scenario_values) {
            wtr.write_record([s.scenario_id.to_string(), case.to_string(), v.to_string()])?;
        }
    }
    wtr.flush()?;
    Ok(())
}
