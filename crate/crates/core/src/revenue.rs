//! Revenue per daily active user, derived from quarterly financials, and the
//! three logistic revenue cases built on it.

use std::fmt;
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;
use std::str::FromStr;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::growthfit::{self, LogisticParams, Point};
use crate::stats;
use crate::timeseries::{add_days, days_between, parse_date, DailySeries};

/// Allowed spacing between consecutive quarter ends, in days.
pub const QUARTER_SPACING: std::ops::RangeInclusive<i64> = 84..=98;
const YEAR_DAYS: usize = 365;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuarterlyRevenue {
    pub quarter_end: NaiveDate,
    pub revenue: f64,
}

/// Trailing four-quarter revenue at a quarter end.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnnualRevenue {
    pub quarter_end: NaiveDate,
    pub revenue: f64,
}

fn validate_quarters(quarters: &[QuarterlyRevenue]) -> Result<()> {
    if let Some(q) = quarters
        .iter()
        .find(|q| !(q.revenue.is_finite() && q.revenue >= 0.0))
    {
        return Err(Error::Validation(format!(
            "quarter ending {} has invalid revenue {}",
            q.quarter_end, q.revenue
        )));
    }
    for pair in quarters.windows(2) {
        let gap = days_between(pair[0].quarter_end, pair[1].quarter_end);
        if !QUARTER_SPACING.contains(&gap) {
            return Err(Error::Validation(format!(
                "quarters ending {} and {} are {gap} days apart, expected consecutive quarters",
                pair[0].quarter_end, pair[1].quarter_end
            )));
        }
    }
    Ok(())
}

pub fn load_financials(path: impl AsRef<Path>) -> Result<Vec<QuarterlyRevenue>> {
    parse_financials(File::open(path)?)
}

/// Parses `quarter_end,revenue_usd` rows; rows are sorted by date and must
/// form a run of consecutive quarters.
pub fn parse_financials<R: Read>(reader: R) -> Result<Vec<QuarterlyRevenue>> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .has_headers(false)
        .from_reader(reader);
    let mut rows = rdr.records();
    let header = match rows.next() {
        Some(h) => h?,
        None => return Err(Error::parse(1, "empty file, expected header `quarter_end,revenue_usd`")),
    };
    if header.iter().collect::<Vec<_>>() != ["quarter_end", "revenue_usd"] {
        return Err(Error::parse(
            1,
            format!("unexpected header {header:?}, expected `quarter_end,revenue_usd`"),
        ));
    }
    let mut quarters = Vec::new();
    for row in rows {
        let row = row?;
        let line = row.position().map(|p| p.line()).unwrap_or(0);
        if row.len() != 2 {
            return Err(Error::parse(line, format!("expected 2 fields, found {}", row.len())));
        }
        let quarter_end = parse_date(&row[0])
            .ok_or_else(|| Error::parse(line, format!("invalid date {:?}", &row[0])))?;
        let revenue: f64 = row[1]
            .parse()
            .map_err(|_| Error::parse(line, format!("invalid revenue {:?}", &row[1])))?;
        quarters.push(QuarterlyRevenue {
            quarter_end,
            revenue,
        });
    }
    if quarters.is_empty() {
        return Err(Error::parse(1, "no data rows"));
    }
    quarters.sort_by_key(|q| q.quarter_end);
    validate_quarters(&quarters)?;
    Ok(quarters)
}

pub fn write_financials<W: Write>(quarters: &[QuarterlyRevenue], writer: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    wtr.write_record(["quarter_end", "revenue_usd"])?;
    for q in quarters {
        wtr.write_record([q.quarter_end.to_string(), q.revenue.to_string()])?;
    }
    wtr.flush()?;
    Ok(())
}

/// `R_i = Rq_{i-3} + Rq_{i-2} + Rq_{i-1} + Rq_i` for every quarter from the
/// fourth onward.
pub fn trailing_annual_revenue(quarters: &[QuarterlyRevenue]) -> Result<Vec<AnnualRevenue>> {
    if quarters.len() < 4 {
        return Err(Error::Validation(format!(
            "trailing annual revenue needs 4 quarters, got {}",
            quarters.len()
        )));
    }
    validate_quarters(quarters)?;
    Ok(quarters
        .windows(4)
        .map(|w| AnnualRevenue {
            quarter_end: w[3].quarter_end,
            revenue: w.iter().map(|q| q.revenue).sum(),
        })
        .collect())
}

/// Revenue per DAU, time-indexed in days from the first annual point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RevenuePerDau {
    pub origin: NaiveDate,
    pub points: Vec<Point>,
}

/// Divides each trailing annual revenue by the mean DAU over the 365 days
/// ending on its quarter end (inclusive).
pub fn revenue_per_dau(annual: &[AnnualRevenue], dau: &DailySeries) -> Result<RevenuePerDau> {
    let origin = annual
        .first()
        .ok_or_else(|| Error::Argument("no annual revenue points".into()))?
        .quarter_end;
    let mut points = Vec::with_capacity(annual.len());
    for a in annual {
        let first = add_days(a.quarter_end, 1 - YEAR_DAYS as i64);
        let covered: Vec<f64> = (0..YEAR_DAYS as i64)
            .filter_map(|i| dau.get(add_days(first, i)))
            .collect();
        if covered.len() < YEAR_DAYS {
            return Err(Error::Coverage(format!(
                "DAU covers {} of the 365 days ending {}",
                covered.len(),
                a.quarter_end
            )));
        }
        let mean = stats::mean(&covered);
        if mean <= 0.0 {
            return Err(Error::DegenerateInput(format!(
                "mean DAU over the year ending {} is zero",
                a.quarter_end
            )));
        }
        points.push(Point::new(
            days_between(origin, a.quarter_end) as f64,
            a.revenue / mean,
        ));
    }
    Ok(RevenuePerDau { origin, points })
}

/// Writes `date,t_days,revenue_per_dau` rows.
pub fn write_revenue_points<W: Write>(revenue: &RevenuePerDau, writer: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    wtr.write_record(["date", "t_days", "revenue_per_dau"])?;
    for p in &revenue.points {
        let date = add_days(revenue.origin, p.t as i64);
        wtr.write_record([date.to_string(), p.t.to_string(), p.y.to_string()])?;
    }
    wtr.flush()?;
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RevenueCase {
    Base,
    High,
    Extreme,
}

impl RevenueCase {
    pub const ALL: [RevenueCase; 3] = [RevenueCase::Base, RevenueCase::High, RevenueCase::Extreme];

    pub fn as_str(&self) -> &'static str {
        match self {
            RevenueCase::Base => "base",
            RevenueCase::High => "high",
            RevenueCase::Extreme => "extreme",
        }
    }
}

impl fmt::Display for RevenueCase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for RevenueCase {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "base" => Ok(RevenueCase::Base),
            "high" => Ok(RevenueCase::High),
            "extreme" => Ok(RevenueCase::Extreme),
            other => Err(Error::Argument(format!("unknown revenue case {other:?}"))),
        }
    }
}

/// A logistic revenue-per-DAU curve (USD per user per year) on the calendar.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RevenueCurve {
    pub params: LogisticParams,
    pub origin: NaiveDate,
}

impl RevenueCurve {
    pub fn new(params: LogisticParams, origin: NaiveDate) -> Self {
        Self { params, origin }
    }

    /// Annual revenue per user `t` days after the origin (fractional days allowed).
    pub fn per_dau_at(&self, t: f64) -> f64 {
        self.params.value(t)
    }

    pub fn per_dau_on(&self, date: NaiveDate) -> f64 {
        self.per_dau_at(days_between(self.origin, date) as f64)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RevenueScenarios {
    pub base: LogisticParams,
    pub high: LogisticParams,
    pub extreme: LogisticParams,
    pub origin: NaiveDate,
    /// Raw bootstrap quantiles of K before ordering is enforced.
    pub k80: f64,
    pub k95: f64,
}

impl RevenueScenarios {
    pub fn params(&self, case: RevenueCase) -> &LogisticParams {
        match case {
            RevenueCase::Base => &self.base,
            RevenueCase::High => &self.high,
            RevenueCase::Extreme => &self.extreme,
        }
    }

    pub fn curve(&self, case: RevenueCase) -> RevenueCurve {
        RevenueCurve::new(*self.params(case), self.origin)
    }

    /// Whether base <= high <= extreme holds day by day on `[from, to]`
    /// (days since origin). Refitted `(r, u0)` can make curves cross even when
    /// the carrying capacities are ordered.
    pub fn pointwise_ordered(&self, from: i64, to: i64) -> bool {
        (from..=to).all(|t| {
            let t = t as f64;
            let (b, h, e) = (self.base.value(t), self.high.value(t), self.extreme.value(t));
            let slack = 1e-12 * e.abs();
            b <= h + slack && h <= e + slack
        })
    }
}

#[derive(Debug, Clone, Copy)]
pub struct BootstrapOptions {
    pub n_resamples: usize,
    pub seed: u64,
}

impl Default for BootstrapOptions {
    fn default() -> Self {
        Self {
            n_resamples: growthfit::DEFAULT_RESAMPLES,
            seed: 0,
        }
    }
}

pub const HIGH_LEVEL: f64 = 0.80;
pub const EXTREME_LEVEL: f64 = 0.95;

/// Base case is the free fit; the high and extreme cases refit `(r, u0)`
/// with K pinned at the 80% and 95% upper bootstrap values. Pinned values
/// below the preceding case are raised to it so K stays ordered.
pub fn build_scenarios(
    revenue: &RevenuePerDau,
    options: BootstrapOptions,
) -> Result<RevenueScenarios> {
    let points = &revenue.points;
    if points.len() < 4 {
        return Err(Error::Argument(format!(
            "revenue scenarios need at least 4 points, got {}",
            points.len()
        )));
    }
    let base = growthfit::fit_logistic(points)?;
    let ks = growthfit::bootstrap_k(points, &base, options.n_resamples, options.seed)?;
    let k80 = stats::percentile_sorted(&ks, HIGH_LEVEL);
    let k95 = stats::percentile_sorted(&ks, EXTREME_LEVEL);

    let pin = |k: f64, below: &LogisticParams| -> Result<LogisticParams> {
        if k <= below.k() {
            Ok(*below)
        } else {
            growthfit::fit_fixed_k_inner(points, k)
        }
    };
    let high = pin(k80, &base)?;
    let extreme = pin(k95, &high)?;
    Ok(RevenueScenarios {
        base,
        high,
        extreme,
        origin: revenue.origin,
        k80,
        k95,
    })
}
