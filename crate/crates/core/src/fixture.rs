//! Synthetic catalog and financials with known ground truth.
//!
//! Game `i` launches `tau * i` days after the first launch, ramps linearly to
//! its peak, then decays as an exact power law, all under small multiplicative
//! lognormal noise. Quarterly revenue is the aggregate DAU times a logistic
//! revenue-per-user curve, summed over calendar quarters.

use chrono::{Datelike, NaiveDate};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, LogNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::growthfit::LogisticParams;
use crate::revenue::QuarterlyRevenue;
use crate::timeseries::{self, add_days, days_between, DailySeries, GameRecord};

pub const DEFAULT_TAU: u32 = 53;
/// Agreement expected between fitted and true decay exponents.
pub const GAMMA_TOLERANCE: f64 = 0.05;

#[derive(Debug, Clone, Copy)]
pub struct FixtureOptions {
    pub games: usize,
    pub seed: u64,
    pub tau: u32,
    /// Standard deviation of the log-noise on daily DAU.
    pub dau_noise: f64,
    /// Standard deviation of the log-noise on quarterly revenue.
    pub revenue_noise: f64,
    pub first_launch: NaiveDate,
}

impl Default for FixtureOptions {
    fn default() -> Self {
        Self {
            games: 20,
            seed: 0,
            tau: DEFAULT_TAU,
            dau_noise: 0.02,
            revenue_noise: 0.03,
            first_launch: NaiveDate::from_ymd_opt(2009, 6, 1).unwrap(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GameTruth {
    pub game_id: String,
    pub launch_date: NaiveDate,
    pub peak_age: u32,
    pub peak_dau: f64,
    pub amplitude: f64,
    pub gamma: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RevenueTruth {
    pub origin: NaiveDate,
    pub k: f64,
    pub r: f64,
    pub u0: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FixtureTruth {
    pub seed: u64,
    pub tau: u32,
    pub present: NaiveDate,
    pub dau_noise: f64,
    pub revenue_noise: f64,
    pub gamma_tolerance: f64,
    pub games: Vec<GameTruth>,
    pub revenue: RevenueTruth,
}

#[derive(Debug, Clone)]
pub struct Fixture {
    pub catalog: Vec<GameRecord>,
    pub financials: Vec<QuarterlyRevenue>,
    pub truth: FixtureTruth,
}

const MIN_HISTORY_DAYS: i64 = 3 * 365;
const LAST_GAME_DAYS: i64 = 365;

pub fn make_fixture(options: FixtureOptions) -> Result<Fixture> {
    if options.games == 0 {
        return Err(Error::Argument("fixture needs at least one game".into()));
    }
    if options.tau == 0 {
        return Err(Error::Argument("fixture cadence must be at least one day".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(options.seed);
    let dau_noise = LogNormal::new(0.0, options.dau_noise)
        .map_err(|e| Error::Argument(format!("dau noise: {e}")))?;
    let revenue_noise = LogNormal::new(0.0, options.revenue_noise)
        .map_err(|e| Error::Argument(format!("revenue noise: {e}")))?;

    let first = options.first_launch;
    let last_launch = i64::from(options.tau) * (options.games as i64 - 1);
    let present = add_days(first, (last_launch + LAST_GAME_DAYS).max(MIN_HISTORY_DAYS));

    let mut catalog = Vec::with_capacity(options.games);
    let mut games = Vec::with_capacity(options.games);
    for i in 0..options.games {
        let launch = add_days(first, i64::from(options.tau) * i as i64);
        let peak_age: u32 = rng.random_range(15..=45);
        let gamma: f64 = rng.random_range(0.6..1.6);
        let peak_dau: f64 = 2e7 * (-0.15 * i as f64).exp() * rng.random_range(0.6..1.4);
        let amplitude = peak_dau * f64::from(peak_age).powf(gamma);
        let days = days_between(launch, present) as usize + 1;
        let values: Vec<f64> = (0..days)
            .map(|age| {
                let clean = if age as u32 <= peak_age {
                    peak_dau * (0.1 + 0.9 * age as f64 / f64::from(peak_age))
                } else {
                    amplitude * (age as f64).powf(-gamma)
                };
                clean * dau_noise.sample(&mut rng)
            })
            .collect();
        let game_id = format!("game{:02}", i + 1);
        catalog.push(GameRecord::new(&game_id, launch, DailySeries::new(launch, values)?)?);
        games.push(GameTruth {
            game_id,
            launch_date: launch,
            peak_age,
            peak_dau,
            amplitude,
            gamma,
        });
    }

    let revenue = RevenueTruth {
        origin: first,
        k: 33.0,
        r: 0.004,
        u0: 4.0,
    };
    let curve = LogisticParams::new(revenue.k, revenue.r, revenue.u0)?;
    let total = timeseries::catalog_total(&catalog)?;
    let financials = quarter_ends(first, present)
        .into_iter()
        .map(|(start, end)| {
            let clean: f64 = (0..=days_between(start, end))
                .map(|i| {
                    let day = add_days(start, i);
                    let users = total.get(day).unwrap_or(0.0);
                    users * curve.value(days_between(first, day) as f64) / 365.0
                })
                .sum();
            QuarterlyRevenue {
                quarter_end: end,
                revenue: clean * revenue_noise.sample(&mut rng),
            }
        })
        .collect();

    Ok(Fixture {
        catalog,
        financials,
        truth: FixtureTruth {
            seed: options.seed,
            tau: options.tau,
            present,
            dau_noise: options.dau_noise,
            revenue_noise: options.revenue_noise,
            gamma_tolerance: GAMMA_TOLERANCE,
            games,
            revenue,
        },
    })
}

/// Calendar quarters `(first day, last day)` lying entirely within `[from, to]`.
fn quarter_ends(from: NaiveDate, to: NaiveDate) -> Vec<(NaiveDate, NaiveDate)> {
    let mut out = Vec::new();
    let (mut year, mut quarter) = (from.year(), (from.month0() / 3) as i32);
    loop {
        let start = NaiveDate::from_ymd_opt(year, quarter as u32 * 3 + 1, 1).unwrap();
        let next = if quarter == 3 {
            NaiveDate::from_ymd_opt(year + 1, 1, 1).unwrap()
        } else {
            NaiveDate::from_ymd_opt(year, quarter as u32 * 3 + 4, 1).unwrap()
        };
        let end = add_days(next, -1);
        if end > to {
            break;
        }
        if start >= from {
            out.push((start, end));
        }
        quarter += 1;
        if quarter == 4 {
            quarter = 0;
            year += 1;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::revenue::trailing_annual_revenue;
    use crate::scenario::estimate_tau;
    use crate::tailfit::{build_template, TailModel, TailOptions};

    #[test]
    fn deterministic_for_a_seed() {
        let a = make_fixture(FixtureOptions { games: 5, seed: 7, ..Default::default() }).unwrap();
        let b = make_fixture(FixtureOptions { games: 5, seed: 7, ..Default::default() }).unwrap();
        assert_eq!(a.catalog, b.catalog);
        assert_eq!(a.financials, b.financials);
        assert_eq!(a.truth, b.truth);
        let c = make_fixture(FixtureOptions { games: 5, seed: 8, ..Default::default() }).unwrap();
        assert_ne!(a.catalog, c.catalog);
    }

    #[test]
    fn zero_games_is_an_argument_error() {
        let err = make_fixture(FixtureOptions { games: 0, ..Default::default() }).unwrap_err();
        assert!(matches!(err, Error::Argument(_)));
    }

    #[test]
    fn quarters_are_calendar_aligned() {
        let q = quarter_ends(
            NaiveDate::from_ymd_opt(2009, 6, 1).unwrap(),
            NaiveDate::from_ymd_opt(2010, 3, 31).unwrap(),
        );
        let ends: Vec<String> = q.iter().map(|(_, e)| e.to_string()).collect();
        assert_eq!(ends, ["2009-09-30", "2009-12-31", "2010-03-31"]);
        assert_eq!(q[0].0.to_string(), "2009-07-01");
    }

    #[test]
    fn fitted_tails_match_truth() {
        let fx = make_fixture(FixtureOptions { games: 20, seed: 7, ..Default::default() }).unwrap();
        let templates: Vec<_> = fx
            .catalog
            .iter()
            .map(|g| build_template(g, TailOptions::default()).unwrap())
            .collect();
        for (tpl, truth) in templates.iter().zip(&fx.truth.games) {
            let TailModel::PowerLaw(tail) = tpl.tail() else { panic!("flat tail") };
            assert!((tail.gamma() - truth.gamma).abs() < GAMMA_TOLERANCE, "{} {} vs {}", truth.game_id, tail.gamma(), truth.gamma);
            assert!(tail.r_squared() > 0.99);
        }
        assert_eq!(estimate_tau(&templates).unwrap(), DEFAULT_TAU);
        assert!(trailing_annual_revenue(&fx.financials).unwrap().len() >= 4);
    }
}
