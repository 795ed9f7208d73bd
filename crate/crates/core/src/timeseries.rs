//! Per-game daily-active-user series: ingestion, selection and aggregation.
//!
//! The DAU CSV contract is a header `date,game_id,dau` followed by one row per
//! (game, day) in any order. An optional fourth column `launch_date` pins the
//! launch of a game when it predates the first observation; otherwise the
//! first observed date is taken as the launch.

use std::cmp::Ordering;
use std::collections::{BTreeMap, HashSet};
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use chrono::{Days, NaiveDate};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const DATE_FORMAT: &str = "%Y-%m-%d";

pub(crate) fn parse_date(s: &str) -> Option<NaiveDate> {
    NaiveDate::parse_from_str(s.trim(), DATE_FORMAT).ok()
}

pub(crate) fn add_days(date: NaiveDate, days: i64) -> NaiveDate {
    if days >= 0 {
        date.checked_add_days(Days::new(days as u64))
    } else {
        date.checked_sub_days(Days::new(days.unsigned_abs()))
    }
    .expect("date arithmetic out of range")
}

pub(crate) fn days_between(from: NaiveDate, to: NaiveDate) -> i64 {
    (to - from).num_days()
}

/// A gap-free run of non-negative daily values starting at `start_day`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DailySeries {
    start_day: NaiveDate,
    values: Vec<f64>,
}

#[allow(clippy::len_without_is_empty)]
impl DailySeries {
    pub fn new(start_day: NaiveDate, values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::Validation("daily series must hold at least one value".into()));
        }
        if let Some((i, v)) = values
            .iter()
            .enumerate()
            .find(|(_, v)| !v.is_finite() || **v < 0.0)
        {
            return Err(Error::Validation(format!(
                "daily series value {v} at {} is not a finite non-negative number",
                add_days(start_day, i as i64)
            )));
        }
        Ok(Self { start_day, values })
    }

    pub fn zeros(start_day: NaiveDate, len: usize) -> Self {
        assert!(len > 0, "daily series must hold at least one value");
        Self {
            start_day,
            values: vec![0.0; len],
        }
    }

    /// Caller guarantees the invariants (non-empty, finite, non-negative).
    pub(crate) fn from_parts(start_day: NaiveDate, values: Vec<f64>) -> Self {
        debug_assert!(!values.is_empty());
        debug_assert!(values.iter().all(|v| v.is_finite() && *v >= 0.0));
        Self { start_day, values }
    }

    pub fn start_day(&self) -> NaiveDate {
        self.start_day
    }

    /// Last covered day (inclusive).
    pub fn end_day(&self) -> NaiveDate {
        self.date_at(self.values.len() - 1)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn date_at(&self, index: usize) -> NaiveDate {
        add_days(self.start_day, index as i64)
    }

    pub fn index_of(&self, date: NaiveDate) -> Option<usize> {
        let offset = days_between(self.start_day, date);
        (offset >= 0 && (offset as usize) < self.values.len()).then_some(offset as usize)
    }

    pub fn get(&self, date: NaiveDate) -> Option<f64> {
        self.index_of(date).map(|i| self.values[i])
    }

    pub fn peak(&self) -> f64 {
        self.values.iter().copied().fold(0.0, f64::max)
    }

    pub fn total(&self) -> f64 {
        self.values.iter().sum()
    }

    pub fn last_value(&self) -> f64 {
        self.values[self.values.len() - 1]
    }
}

/// A non-empty run of consecutive calendar days.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DateWindow {
    start: NaiveDate,
    days: usize,
}

impl DateWindow {
    pub fn new(start: NaiveDate, days: usize) -> Result<Self> {
        if days == 0 {
            return Err(Error::Argument("date window must span at least one day".into()));
        }
        Ok(Self { start, days })
    }

    /// Window from `first` to `last`, both inclusive.
    pub fn inclusive(first: NaiveDate, last: NaiveDate) -> Result<Self> {
        let span = days_between(first, last);
        if span < 0 {
            return Err(Error::Argument(format!(
                "date window end {last} precedes its start {first}"
            )));
        }
        Self::new(first, span as usize + 1)
    }

    pub fn start(&self) -> NaiveDate {
        self.start
    }

    pub fn days(&self) -> usize {
        self.days
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GameRecord {
    game_id: String,
    launch_date: NaiveDate,
    observed: DailySeries,
}

impl GameRecord {
    pub fn new(game_id: impl Into<String>, launch_date: NaiveDate, observed: DailySeries) -> Result<Self> {
        let game_id = game_id.into();
        if observed.start_day() < launch_date {
            return Err(Error::Validation(format!(
                "game {game_id}: first observation {} precedes launch date {launch_date}",
                observed.start_day()
            )));
        }
        Ok(Self {
            game_id,
            launch_date,
            observed,
        })
    }

    pub fn game_id(&self) -> &str {
        &self.game_id
    }

    pub fn launch_date(&self) -> NaiveDate {
        self.launch_date
    }

    pub fn observed(&self) -> &DailySeries {
        &self.observed
    }

    /// Game age in days (days since launch) of the first observation.
    pub fn first_age(&self) -> i64 {
        days_between(self.launch_date, self.observed.start_day())
    }

    /// Game age in days of observation `index`.
    pub fn age_at(&self, index: usize) -> i64 {
        self.first_age() + index as i64
    }
}

/// Reads a DAU catalog from a CSV file.
pub fn load_catalog(path: impl AsRef<Path>) -> Result<Vec<GameRecord>> {
    parse_catalog(File::open(path)?)
}

/// Parses a DAU catalog. Records come back ordered by `game_id`; interior
/// missing days are filled by linear interpolation between their neighbours.
pub fn parse_catalog<R: Read>(reader: R) -> Result<Vec<GameRecord>> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .has_headers(false)
        .from_reader(reader);

    let mut records = rdr.records();
    let header = match records.next() {
        Some(h) => h?,
        None => return Err(Error::parse(1, "empty file, expected header `date,game_id,dau`")),
    };
    let columns: Vec<&str> = header.iter().collect();
    let has_launch = match columns.as_slice() {
        ["date", "game_id", "dau"] => false,
        ["date", "game_id", "dau", "launch_date"] => true,
        _ => {
            return Err(Error::parse(
                1,
                format!("unexpected header {columns:?}, expected `date,game_id,dau`"),
            ))
        }
    };

    let mut games: BTreeMap<String, BTreeMap<NaiveDate, f64>> = BTreeMap::new();
    let mut launches: BTreeMap<String, NaiveDate> = BTreeMap::new();
    for row in records {
        let row = row?;
        let line = row.position().map(|p| p.line()).unwrap_or(0);
        if row.len() != columns.len() {
            return Err(Error::parse(
                line,
                format!("expected {} fields, found {}", columns.len(), row.len()),
            ));
        }
        let date = parse_date(&row[0])
            .ok_or_else(|| Error::parse(line, format!("invalid date {:?}", &row[0])))?;
        let game_id = row[1].to_string();
        if game_id.is_empty() {
            return Err(Error::parse(line, "empty game_id"));
        }
        let dau: f64 = row[2]
            .parse()
            .map_err(|_| Error::parse(line, format!("invalid dau {:?}", &row[2])))?;
        if !dau.is_finite() {
            return Err(Error::parse(line, format!("invalid dau {:?}", &row[2])));
        }
        if dau < 0.0 {
            return Err(Error::Validation(format!(
                "line {line}: negative dau {dau} for game {game_id} on {date}"
            )));
        }
        if has_launch && !row[3].is_empty() {
            let launch = parse_date(&row[3])
                .ok_or_else(|| Error::parse(line, format!("invalid launch_date {:?}", &row[3])))?;
            if let Some(prev) = launches.insert(game_id.clone(), launch) {
                if prev != launch {
                    return Err(Error::Validation(format!(
                        "line {line}: conflicting launch dates {prev} and {launch} for game {game_id}"
                    )));
                }
            }
        }
        if games.entry(game_id.clone()).or_default().insert(date, dau).is_some() {
            return Err(Error::Validation(format!(
                "line {line}: duplicate row for game {game_id} on {date}"
            )));
        }
    }
    if games.is_empty() {
        return Err(Error::parse(1, "no data rows"));
    }

    games
        .into_iter()
        .map(|(game_id, days)| {
            let observed = fill_gaps(&days);
            let launch = launches
                .get(&game_id)
                .copied()
                .unwrap_or(observed.start_day());
            GameRecord::new(game_id, launch, observed)
        })
        .collect()
}

fn fill_gaps(days: &BTreeMap<NaiveDate, f64>) -> DailySeries {
    let mut iter = days.iter();
    let (&start, &first) = iter.next().expect("non-empty game");
    let mut values = vec![first];
    let mut prev = (0i64, first);
    for (&date, &value) in iter {
        let offset = days_between(start, date);
        let gap = offset - prev.0;
        for step in 1..gap {
            let frac = step as f64 / gap as f64;
            values.push(prev.1 + (value - prev.1) * frac);
        }
        values.push(value);
        prev = (offset, value);
    }
    DailySeries::from_parts(start, values)
}

/// Writes a catalog in the DAU CSV format. A `launch_date` column is emitted
/// only when some game launched before its first observation.
pub fn write_catalog<W: Write>(catalog: &[GameRecord], writer: W) -> Result<()> {
    let with_launch = catalog
        .iter()
        .any(|g| g.launch_date != g.observed.start_day());
    let mut wtr = csv::Writer::from_writer(writer);
    if with_launch {
        wtr.write_record(["date", "game_id", "dau", "launch_date"])?;
    } else {
        wtr.write_record(["date", "game_id", "dau"])?;
    }
    for game in catalog {
        let launch = game.launch_date.format(DATE_FORMAT).to_string();
        for (i, v) in game.observed.values().iter().enumerate() {
            let date = game.observed.date_at(i).format(DATE_FORMAT).to_string();
            let dau = v.to_string();
            if with_launch {
                wtr.write_record([date.as_str(), game.game_id.as_str(), dau.as_str(), launch.as_str()])?;
            } else {
                wtr.write_record([date.as_str(), game.game_id.as_str(), dau.as_str()])?;
            }
        }
    }
    wtr.flush()?;
    Ok(())
}

fn popularity_order(a: &GameRecord, b: &GameRecord) -> Ordering {
    b.observed
        .peak()
        .total_cmp(&a.observed.peak())
        .then(a.launch_date.cmp(&b.launch_date))
        .then_with(|| a.game_id.cmp(&b.game_id))
}

/// The `n` games with the highest peak DAU, most popular first. Ties go to the
/// earlier launch, then the lexicographically smaller id.
pub fn select_top(catalog: &[GameRecord], n: usize) -> Result<Vec<GameRecord>> {
    if n == 0 {
        return Err(Error::Argument("top-n selection needs n >= 1".into()));
    }
    if n > catalog.len() {
        return Err(Error::Argument(format!(
            "cannot select top {n} games from a catalog of {}",
            catalog.len()
        )));
    }
    let mut sorted = catalog.to_vec();
    sorted.sort_by(popularity_order);
    sorted.truncate(n);
    Ok(sorted)
}

/// Share of all user-days in `catalog` accounted for by `subset`.
pub fn coverage_fraction(subset: &[GameRecord], catalog: &[GameRecord]) -> Result<f64> {
    let ids: HashSet<&str> = catalog.iter().map(|g| g.game_id()).collect();
    if let Some(stray) = subset.iter().find(|g| !ids.contains(g.game_id())) {
        return Err(Error::Argument(format!(
            "game {} is not part of the catalog",
            stray.game_id()
        )));
    }
    let total: f64 = catalog.iter().map(|g| g.observed.total()).sum();
    if total <= 0.0 {
        return Err(Error::DegenerateInput(
            "catalog is empty or has no active users".into(),
        ));
    }
    let part: f64 = subset.iter().map(|g| g.observed.total()).sum();
    Ok(part / total)
}

/// Pointwise sum of `series_list` over `window`; a series contributes zero on
/// days it does not cover.
pub fn aggregate<'a, I>(series_list: I, window: DateWindow) -> DailySeries
where
    I: IntoIterator<Item = &'a DailySeries>,
{
    let mut out = vec![0.0; window.days];
    for series in series_list {
        let offset = days_between(window.start, series.start_day);
        for (i, v) in series.values.iter().enumerate() {
            let slot = offset + i as i64;
            if slot < 0 {
                continue;
            }
            match out.get_mut(slot as usize) {
                Some(acc) => *acc += v,
                None => break,
            }
        }
    }
    DailySeries::from_parts(window.start, out)
}

/// Aggregate DAU of a whole catalog over the span it covers.
pub fn catalog_total(catalog: &[GameRecord]) -> Result<DailySeries> {
    let first = catalog
        .iter()
        .map(|g| g.observed.start_day())
        .min()
        .ok_or_else(|| Error::DegenerateInput("empty catalog".into()))?;
    let last = catalog.iter().map(|g| g.observed.end_day()).max().unwrap();
    let window = DateWindow::inclusive(first, last)?;
    Ok(aggregate(catalog.iter().map(|g| &g.observed), window))
}

/// Last observed day across the catalog.
pub fn last_observed_day(catalog: &[GameRecord]) -> Option<NaiveDate> {
    catalog.iter().map(|g| g.observed.end_day()).max()
}
