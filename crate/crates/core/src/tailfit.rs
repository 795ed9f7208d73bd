//! Power-law decay tails and replayable game templates.
//!
//! Game age `t` counts days since the launch date. A template replays the
//! observed trajectory verbatim and continues it with `s * A * t^-gamma`,
//! where the handoff scale `s` makes the tail meet the last observation.

use std::io::{Read, Write};

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::timeseries::{days_between, DailySeries, GameRecord};

/// Minimum observed length for onset detection.
pub const MIN_SERIES_DAYS: usize = 14;
/// Minimum number of positive points in the fitted tail window.
pub const MIN_TAIL_POINTS: usize = 10;
const SMOOTHING_HALF_WIDTH: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerLawTail {
    t_min: u32,
    amplitude: f64,
    gamma: f64,
    r_squared: f64,
}

impl PowerLawTail {
    pub fn new(t_min: u32, amplitude: f64, gamma: f64, r_squared: f64) -> Result<Self> {
        if t_min < 1 {
            return Err(Error::Validation("t_min must be at least 1".into()));
        }
        if !(amplitude.is_finite() && amplitude > 0.0) {
            return Err(Error::Validation(format!("amplitude {amplitude} must be positive")));
        }
        if !(gamma.is_finite() && gamma > 0.0) {
            return Err(Error::Validation(format!("gamma {gamma} must be positive")));
        }
        if !(0.0..=1.0).contains(&r_squared) {
            return Err(Error::Validation(format!("r_squared {r_squared} outside [0, 1]")));
        }
        Ok(Self {
            t_min,
            amplitude,
            gamma,
            r_squared,
        })
    }

    pub fn t_min(&self) -> u32 {
        self.t_min
    }

    pub fn amplitude(&self) -> f64 {
        self.amplitude
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn r_squared(&self) -> f64 {
        self.r_squared
    }

    /// `A * t^-gamma` at game age `t`.
    pub fn value(&self, age: f64) -> f64 {
        self.amplitude * age.powf(-self.gamma)
    }
}

/// How a template continues past its last observation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum TailModel {
    PowerLaw(PowerLawTail),
    /// Hold the last observed value. Only used when explicitly requested.
    Flat,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GameTemplate {
    record: GameRecord,
    tail: TailModel,
    handoff_scale: f64,
}

impl GameTemplate {
    /// Anchors `tail` to the last observation of `record`.
    pub fn new(record: GameRecord, tail: PowerLawTail) -> Result<Self> {
        let observed = record.observed();
        let last_age = record.age_at(observed.len() - 1);
        let last = observed.last_value();
        if last_age < 1 {
            return Err(Error::InsufficientData(format!(
                "game {}: no observation past launch day",
                record.game_id()
            )));
        }
        if last <= 0.0 {
            return Err(Error::DegenerateInput(format!(
                "game {}: last observed DAU is zero, tail cannot be anchored",
                record.game_id()
            )));
        }
        let handoff_scale = last / tail.value(last_age as f64);
        Self::from_parts(record, TailModel::PowerLaw(tail), handoff_scale)
    }

    pub fn flat(record: GameRecord) -> Self {
        Self {
            record,
            tail: TailModel::Flat,
            handoff_scale: 1.0,
        }
    }

    pub fn from_parts(record: GameRecord, tail: TailModel, handoff_scale: f64) -> Result<Self> {
        if !(handoff_scale.is_finite() && handoff_scale > 0.0) {
            return Err(Error::Validation(format!(
                "game {}: handoff scale {handoff_scale} must be positive and finite",
                record.game_id()
            )));
        }
        Ok(Self {
            record,
            tail,
            handoff_scale,
        })
    }

    pub fn record(&self) -> &GameRecord {
        &self.record
    }

    pub fn game_id(&self) -> &str {
        self.record.game_id()
    }

    pub fn tail(&self) -> &TailModel {
        &self.tail
    }

    pub fn handoff_scale(&self) -> f64 {
        self.handoff_scale
    }

    /// Value `index` days after the first observation.
    pub fn value_at_index(&self, index: usize) -> f64 {
        let observed = self.record.observed().values();
        if let Some(v) = observed.get(index) {
            return *v;
        }
        match &self.tail {
            TailModel::PowerLaw(tail) => {
                self.handoff_scale * tail.value(self.record.age_at(index) as f64)
            }
            TailModel::Flat => observed[observed.len() - 1],
        }
    }

    /// Value on a calendar date; zero before the first observation.
    pub fn value_on(&self, date: NaiveDate) -> f64 {
        let offset = days_between(self.record.observed().start_day(), date);
        if offset < 0 {
            0.0
        } else {
            self.value_at_index(offset as usize)
        }
    }

    /// The first `len` values of the replayed trajectory.
    pub fn trajectory(&self, len: usize) -> Vec<f64> {
        (0..len).map(|i| self.value_at_index(i)).collect()
    }
}

/// Decay onset: game age at the maximum of the 7-day centred moving average,
/// earliest on ties.
pub fn detect_tmin(record: &GameRecord) -> Result<u32> {
    let values = record.observed().values();
    if values.len() < MIN_SERIES_DAYS {
        return Err(Error::InsufficientData(format!(
            "game {}: {} observed days, need {MIN_SERIES_DAYS}",
            record.game_id(),
            values.len()
        )));
    }
    let width = 2 * SMOOTHING_HALF_WIDTH + 1;
    let mut window: f64 = values[..width].iter().sum();
    let mut best = (SMOOTHING_HALF_WIDTH, window);
    for centre in SMOOTHING_HALF_WIDTH + 1..values.len() - SMOOTHING_HALF_WIDTH {
        window += values[centre + SMOOTHING_HALF_WIDTH] - values[centre - SMOOTHING_HALF_WIDTH - 1];
        if window > best.1 {
            best = (centre, window);
        }
    }
    let age = record.age_at(best.0).max(1);
    u32::try_from(age).map_err(|_| Error::Validation(format!("game age {age} out of range")))
}

/// Ordinary least squares of `ln(dau)` on `ln(t)` over ages `t >= t_min`.
pub fn fit_power_law(record: &GameRecord, t_min: u32) -> Result<PowerLawTail> {
    if t_min < 1 {
        return Err(Error::Argument("t_min must be at least 1".into()));
    }
    let observed = record.observed().values();
    let mut window = 0usize;
    let mut points = Vec::with_capacity(observed.len());
    for (i, &v) in observed.iter().enumerate() {
        let age = record.age_at(i);
        if age < i64::from(t_min) {
            continue;
        }
        window += 1;
        if v > 0.0 {
            points.push(((age as f64).ln(), v.ln()));
        }
    }
    let zeros = window - points.len();
    if 2 * zeros > window {
        return Err(Error::InsufficientData(format!(
            "game {}: {zeros} of {window} tail points are zero",
            record.game_id()
        )));
    }
    if points.len() < MIN_TAIL_POINTS {
        return Err(Error::InsufficientData(format!(
            "game {}: {} positive tail points from t_min={t_min}, need {MIN_TAIL_POINTS}",
            record.game_id(),
            points.len()
        )));
    }

    let n = points.len() as f64;
    let (mx, my) = points
        .iter()
        .fold((0.0, 0.0), |(sx, sy), (x, y)| (sx + x, sy + y));
    let (mx, my) = (mx / n, my / n);
    let (mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0);
    for (x, y) in &points {
        let (dx, dy) = (x - mx, y - my);
        sxx += dx * dx;
        sxy += dx * dy;
        syy += dy * dy;
    }
    let slope = sxy / sxx;
    if !slope.is_finite() || slope >= 0.0 {
        return Err(Error::NoDecay { slope });
    }
    let intercept = my - slope * mx;
    let ss_res: f64 = points
        .iter()
        .map(|(x, y)| {
            let e = y - (intercept + slope * x);
            e * e
        })
        .sum();
    let r_squared = if syy > 0.0 {
        (1.0 - ss_res / syy).clamp(0.0, 1.0)
    } else {
        1.0
    };
    PowerLawTail::new(t_min, intercept.exp(), -slope, r_squared)
}

/// Trajectory of `template` over `horizon_days` from its first observation.
pub fn extrapolate(template: &GameTemplate, horizon_days: usize) -> Result<DailySeries> {
    let observed = template.record().observed();
    if horizon_days < observed.len() {
        return Err(Error::Argument(format!(
            "horizon of {horizon_days} days is shorter than the {} observed days",
            observed.len()
        )));
    }
    Ok(DailySeries::from_parts(
        observed.start_day(),
        template.trajectory(horizon_days),
    ))
}

#[derive(Debug, Clone, Copy, Default)]
pub struct TailOptions {
    /// Hold the last value instead of failing when a tail cannot be fitted.
    pub allow_flat_fallback: bool,
}

/// Onset detection, fit and anchoring in one step.
pub fn build_template(record: &GameRecord, options: TailOptions) -> Result<GameTemplate> {
    let fitted = detect_tmin(record)
        .and_then(|t_min| fit_power_law(record, t_min))
        .and_then(|tail| GameTemplate::new(record.clone(), tail));
    match fitted {
        Err(Error::InsufficientData(_) | Error::NoDecay { .. } | Error::DegenerateInput(_))
            if options.allow_flat_fallback =>
        {
            Ok(GameTemplate::flat(record.clone()))
        }
        other => other,
    }
}

const TAIL_HEADER: [&str; 6] = ["game_id", "t_min", "amplitude", "gamma", "r_squared", "handoff_scale"];

/// Writes `game_id,t_min,amplitude,gamma,r_squared,handoff_scale` rows.
/// Flat tails are written with `gamma = 0`, the held value as amplitude and
/// the last observed age as `t_min`.
pub fn write_tails<W: Write>(templates: &[GameTemplate], writer: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    wtr.write_record(TAIL_HEADER)?;
    for tpl in templates {
        let (t_min, amplitude, gamma, r2) = match tpl.tail() {
            TailModel::PowerLaw(t) => (i64::from(t.t_min()), t.amplitude(), t.gamma(), t.r_squared()),
            TailModel::Flat => {
                let obs = tpl.record().observed();
                (tpl.record().age_at(obs.len() - 1), obs.last_value(), 0.0, 0.0)
            }
        };
        wtr.write_record([
            tpl.game_id().to_string(),
            t_min.to_string(),
            amplitude.to_string(),
            gamma.to_string(),
            r2.to_string(),
            tpl.handoff_scale().to_string(),
        ])?;
    }
    wtr.flush()?;
    Ok(())
}

/// Reads a tails CSV and attaches each row to its game in `catalog`.
/// Templates come back in file order.
pub fn read_tails<R: Read>(reader: R, catalog: &[GameRecord]) -> Result<Vec<GameTemplate>> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(reader);
    let header: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    if header != TAIL_HEADER {
        return Err(Error::parse(1, format!("unexpected tails header {header:?}")));
    }
    let mut templates = Vec::new();
    for row in rdr.records() {
        let row = row?;
        let line = row.position().map(|p| p.line()).unwrap_or(0);
        let num = |i: usize| -> Result<f64> {
            row[i]
                .parse::<f64>()
                .map_err(|_| Error::parse(line, format!("invalid {} {:?}", TAIL_HEADER[i], &row[i])))
        };
        let game_id = &row[0];
        let t_min: u32 = row[1]
            .parse()
            .map_err(|_| Error::parse(line, format!("invalid t_min {:?}", &row[1])))?;
        let (amplitude, gamma, r2, scale) = (num(2)?, num(3)?, num(4)?, num(5)?);
        let record = catalog
            .iter()
            .find(|g| g.game_id() == game_id)
            .ok_or_else(|| {
                Error::Validation(format!("line {line}: game {game_id} is not in the DAU catalog"))
            })?
            .clone();
        let template = if gamma == 0.0 {
            GameTemplate::flat(record)
        } else {
            let tail = PowerLawTail::new(t_min, amplitude, gamma, r2)?;
            GameTemplate::from_parts(record, TailModel::PowerLaw(tail), scale)?
        };
        templates.push(template);
    }
    Ok(templates)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::timeseries::parse_date;
    use proptest::prelude::*;

    fn launch() -> NaiveDate {
        parse_date("2010-06-01").unwrap()
    }

    /// Record whose observation `i` is at game age `first_age + i`.
    fn record_from(first_age: i64, values: Vec<f64>) -> GameRecord {
        let start = crate::timeseries::add_days(launch(), first_age);
        GameRecord::new("g", launch(), DailySeries::new(start, values).unwrap()).unwrap()
    }

    fn power_law(a: f64, gamma: f64, ages: std::ops::RangeInclusive<i64>) -> GameRecord {
        let first = *ages.start();
        record_from(first, ages.map(|t| a * (t as f64).powf(-gamma)).collect())
    }

    /// Independent brute-force argmax of the 7-day centred average.
    fn brute_tmin(values: &[f64]) -> usize {
        let mut best = (0, f64::MIN);
        for c in 3..values.len() - 3 {
            let m = values[c - 3..=c + 3].iter().sum::<f64>() / 7.0;
            if m > best.1 + 1e-12 {
                best = (c, m);
            }
        }
        best.0
    }

    #[test]
    fn tmin_of_monotone_decay_is_first_smoothable_day() {
        let rec = record_from(0, (0..40).map(|i| 1000.0 - i as f64).collect());
        assert_eq!(detect_tmin(&rec).unwrap(), 3);
    }

    #[test]
    fn tmin_of_triangle_ramp() {
        let values: Vec<f64> = (0..90)
            .map(|i| if i <= 30 { i as f64 } else { (60 - i).max(0) as f64 })
            .collect();
        let rec = record_from(0, values.clone());
        let t = detect_tmin(&rec).unwrap();
        assert_eq!(t as usize, brute_tmin(&values));
        assert!((27..=33).contains(&t));
    }

    #[test]
    fn tmin_of_constant_series_is_earliest_eligible() {
        let rec = record_from(0, vec![5.0; 20]);
        assert_eq!(detect_tmin(&rec).unwrap(), 3);
        let rec = record_from(10, vec![5.0; 20]);
        assert_eq!(detect_tmin(&rec).unwrap(), 13);
    }

    #[test]
    fn tmin_needs_two_weeks() {
        let rec = record_from(0, vec![5.0; 13]);
        assert!(matches!(detect_tmin(&rec), Err(Error::InsufficientData(_))));
    }

    #[test]
    fn recovers_noiseless_power_law() {
        let rec = power_law(1000.0, 1.0, 30..=200);
        let tail = fit_power_law(&rec, 30).unwrap();
        assert!((tail.gamma() - 1.0).abs() < 1e-9);
        assert!((tail.amplitude() - 1000.0).abs() < 1e-9 * 1000.0);
        assert!((tail.r_squared() - 1.0).abs() < 1e-9);
        let t = 40.0;
        assert!((tail.value(2.0 * t) - tail.value(t) / 2f64.powf(tail.gamma())).abs() < 1e-9);
    }

    #[test]
    fn fit_ignores_points_before_tmin() {
        let mut values: Vec<f64> = (1..=30).map(|t| t as f64 * 10.0).collect();
        values.extend((31..=120).map(|t| 5e4 * (t as f64).powf(-1.3)));
        let rec = record_from(1, values);
        let tail = fit_power_law(&rec, 31).unwrap();
        assert!((tail.gamma() - 1.3).abs() < 1e-9);
    }

    #[test]
    fn too_few_points_or_zeros() {
        let rec = power_law(1000.0, 1.0, 30..=38);
        assert!(matches!(fit_power_law(&rec, 30), Err(Error::InsufficientData(_))));
        let mut values: Vec<f64> = (10..=40).map(|t| 1e3 / t as f64).collect();
        values.extend(std::iter::repeat_n(0.0, 40));
        let rec = record_from(10, values);
        assert!(matches!(fit_power_law(&rec, 10), Err(Error::InsufficientData(_))));
    }

    #[test]
    fn zero_points_are_dropped() {
        let mut values: Vec<f64> = (10..=60).map(|t| 1e3 / t as f64).collect();
        values[5] = 0.0;
        values[17] = 0.0;
        let tail = fit_power_law(&record_from(10, values), 10).unwrap();
        assert!((tail.gamma() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn growing_tail_is_rejected() {
        let rec = record_from(10, (10..=60).map(|t| t as f64).collect());
        assert!(matches!(fit_power_law(&rec, 10), Err(Error::NoDecay { .. })));
        let flat = build_template(
            &rec,
            TailOptions {
                allow_flat_fallback: true,
            },
        )
        .unwrap();
        assert_eq!(flat.tail(), &TailModel::Flat);
        assert_eq!(flat.value_at_index(500), 60.0);
        assert!(build_template(&rec, TailOptions::default()).is_err());
    }

    #[test]
    fn extrapolation_hands_off_continuously() {
        // last observation 100 at age 200, gamma 1
        let rec = record_from(150, (150..=200).map(|t| 2e4 / t as f64).collect());
        let tail = PowerLawTail::new(150, 3e4, 1.0, 1.0).unwrap();
        let tpl = GameTemplate::new(rec.clone(), tail).unwrap();
        let len = rec.observed().len();
        assert!((tpl.handoff_scale() - 2.0 / 3.0).abs() < 1e-12);
        let series = extrapolate(&tpl, len + 5).unwrap();
        assert_eq!(&series.values()[..len], rec.observed().values());
        let expected = 100.0 * 200.0 / 201.0;
        assert!((series.values()[len] - expected).abs() < 1e-9);

        let same = extrapolate(&tpl, len).unwrap();
        assert_eq!(same.values(), rec.observed().values());
        assert!(extrapolate(&tpl, len - 1).is_err());
    }

    #[test]
    fn tail_area_matches_quadrature() {
        let rec = power_law(5e5, 1.4, 20..=300);
        let tail = fit_power_law(&rec, 20).unwrap();
        let tpl = GameTemplate::new(rec.clone(), tail).unwrap();
        let horizon = 20 * 365;
        let series = extrapolate(&tpl, horizon).unwrap();
        let obs = rec.observed().len();
        let summed: f64 = series.values()[obs..].iter().sum();

        // Simpson's rule on the closed form, each day covering [t - 1/2, t + 1/2].
        let c = tpl.handoff_scale() * tail.amplitude();
        let f = |t: f64| c * t.powf(-tail.gamma());
        let (lo, hi) = (rec.age_at(obs) as f64 - 0.5, rec.age_at(horizon - 1) as f64 + 0.5);
        let n = 200_000;
        let h = (hi - lo) / n as f64;
        let mut acc = f(lo) + f(hi);
        for k in 1..n {
            acc += f(lo + k as f64 * h) * if k % 2 == 1 { 4.0 } else { 2.0 };
        }
        let integral = acc * h / 3.0;
        assert!(summed.is_finite());
        assert!((summed - integral).abs() / integral < 1e-3, "{summed} vs {integral}");
    }

    #[test]
    fn zero_last_value_cannot_anchor() {
        let mut values: Vec<f64> = (10..=60).map(|t| 1e3 / t as f64).collect();
        *values.last_mut().unwrap() = 0.0;
        let rec = record_from(10, values);
        let tail = fit_power_law(&rec, 10).unwrap();
        assert!(matches!(
            GameTemplate::new(rec, tail),
            Err(Error::DegenerateInput(_))
        ));
    }

    #[test]
    fn tails_csv_round_trip() {
        let rec = power_law(1000.0, 0.8, 5..=80);
        let mut other = power_law(10.0, 0.5, 5..=80);
        other = GameRecord::new("h", other.launch_date(), other.observed().clone()).unwrap();
        let tpl = build_template(&rec, TailOptions::default()).unwrap();
        let flat = GameTemplate::flat(other.clone());
        let mut buf = Vec::new();
        write_tails(&[tpl.clone(), flat.clone()], &mut buf).unwrap();
        let back = read_tails(buf.as_slice(), &[rec, other]).unwrap();
        assert_eq!(back, vec![tpl, flat]);
        assert!(read_tails(buf.as_slice(), &[]).is_err());
    }

    proptest! {
        #[test]
        fn noiseless_fit_is_exact(a in 1.0f64..1e7, gamma in 0.2f64..3.0, start in 1i64..100, len in 10usize..400) {
            let rec = power_law(a, gamma, start..=start + len as i64 - 1);
            let tail = fit_power_law(&rec, start as u32).unwrap();
            prop_assert!((tail.gamma() - gamma).abs() < 1e-9 * gamma.max(1.0));
            prop_assert!((tail.amplitude() - a).abs() < 1e-8 * a);
        }

        #[test]
        fn gamma_is_scale_invariant(scale in 1e-3f64..1e3, seed in 0u64..1000) {
            let values: Vec<f64> = (20..120)
                .map(|t| 1e4 * (t as f64).powf(-1.2) * (1.0 + 0.1 * (((t as u64 * 7919 + seed) % 97) as f64 / 97.0 - 0.5)))
                .collect();
            let base = fit_power_law(&record_from(20, values.clone()), 20).unwrap();
            let scaled = fit_power_law(&record_from(20, values.iter().map(|v| v * scale).collect()), 20).unwrap();
            prop_assert!((base.gamma() - scaled.gamma()).abs() < 1e-9);
            prop_assert!((scaled.amplitude() / base.amplitude() - scale).abs() < 1e-9 * scale);
        }

        #[test]
        fn extrapolation_decreases_and_is_prefix_stable(gamma in 0.05f64..3.0, extra in 1usize..3000) {
            let rec = power_law(1e5, gamma, 10..=60);
            let tail = PowerLawTail::new(10, 1e5, gamma, 1.0).unwrap();
            let tpl = GameTemplate::new(rec.clone(), tail).unwrap();
            let obs = rec.observed().len();
            let short = extrapolate(&tpl, obs + extra).unwrap();
            let long = extrapolate(&tpl, obs + extra + 500).unwrap();
            prop_assert_eq!(short.values(), &long.values()[..obs + extra]);
            let tail_part = &long.values()[obs - 1..];
            prop_assert!(tail_part.windows(2).all(|w| w[1] < w[0] && w[1] > 0.0));
        }
    }
}
