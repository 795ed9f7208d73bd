//! Semi-bootstrap simulation of the aggregate user base.
//!
//! Existing games decay forward from the present along their templates. Every
//! `tau` days a template is drawn uniformly (with replacement) and its whole
//! trajectory, observed history first, is launched on that day. A scenario is
//! the sum of everything running on each day of the horizon.
//!
//! Day offsets count from the present: offset `d` is `present + d`, and a
//! scenario covers offsets `1..=horizon_days`. Launches happen at offsets
//! `k * tau` for `k >= 1` while `k * tau <= horizon_days`.

use std::collections::BTreeSet;
use std::io::{Read, Write};

use chrono::NaiveDate;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stats;
use crate::tailfit::GameTemplate;
use crate::timeseries::{add_days, days_between, DailySeries};

pub const DAYS_PER_YEAR: usize = 365;
pub const DEFAULT_HORIZON_YEARS: u32 = 20;
pub const DEFAULT_SCENARIOS: usize = 1000;

#[derive(Debug, Clone)]
pub struct SimulationConfig {
    pub tau: u32,
    pub horizon_years: u32,
    pub n_scenarios: usize,
    pub seed: u64,
    pub present: NaiveDate,
    pub templates: Vec<GameTemplate>,
}

impl SimulationConfig {
    /// Config with the default horizon, scenario count and seed 0.
    pub fn new(templates: Vec<GameTemplate>, present: NaiveDate, tau: u32) -> Self {
        Self {
            tau,
            horizon_years: DEFAULT_HORIZON_YEARS,
            n_scenarios: DEFAULT_SCENARIOS,
            seed: 0,
            present,
            templates,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.templates.is_empty() {
            return Err(Error::Argument("simulation needs at least one template".into()));
        }
        if self.tau < 1 {
            return Err(Error::Argument("tau must be at least one day".into()));
        }
        if self.horizon_years < 1 {
            return Err(Error::Argument("horizon must be at least one year".into()));
        }
        if self.n_scenarios < 1 {
            return Err(Error::Argument("need at least one scenario".into()));
        }
        Ok(())
    }

    pub fn horizon_days(&self) -> usize {
        self.horizon_years as usize * DAYS_PER_YEAR
    }

    /// Offsets from the present at which new games launch.
    pub fn launch_offsets(&self) -> impl Iterator<Item = usize> {
        let tau = self.tau as usize;
        let horizon = self.horizon_days();
        (1..).map(move |k| k * tau).take_while(move |&d| d <= horizon)
    }
}

/// One simulated aggregate DAU path over `present + 1 ..= present + horizon`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub scenario_id: usize,
    pub dau: DailySeries,
}

/// Mean spacing between distinct launch dates, rounded, at least one day.
pub fn estimate_tau(templates: &[GameTemplate]) -> Result<u32> {
    let launches: BTreeSet<NaiveDate> = templates
        .iter()
        .map(|t| t.record().launch_date())
        .collect();
    if launches.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "launch cadence needs 2 distinct launch dates, found {}",
            launches.len()
        )));
    }
    let first = *launches.first().unwrap();
    let last = *launches.last().unwrap();
    let mean = days_between(first, last) as f64 / (launches.len() - 1) as f64;
    Ok((mean.round() as u32).max(1))
}

/// Ensemble engine with per-template trajectories precomputed once.
#[derive(Debug)]
pub struct Simulator<'a> {
    config: &'a SimulationConfig,
    baseline: Vec<f64>,
    replays: Vec<Vec<f64>>,
}

impl<'a> Simulator<'a> {
    pub fn new(config: &'a SimulationConfig) -> Result<Self> {
        config.validate()?;
        let horizon = config.horizon_days();
        let mut baseline = vec![0.0; horizon];
        for tpl in &config.templates {
            for (i, slot) in baseline.iter_mut().enumerate() {
                *slot += tpl.value_on(add_days(config.present, i as i64 + 1));
            }
        }
        let replays = config
            .templates
            .iter()
            .map(|tpl| tpl.trajectory(horizon))
            .collect();
        Ok(Self {
            config,
            baseline,
            replays,
        })
    }

    pub fn config(&self) -> &SimulationConfig {
        self.config
    }

    /// Contribution of the existing games alone, offsets `1..=horizon`.
    pub fn baseline(&self) -> &[f64] {
        &self.baseline
    }

    /// Replayed trajectory of template `index`, from its first observed day.
    pub fn replay_trajectory(&self, index: usize) -> &[f64] {
        &self.replays[index]
    }

    /// Template indices drawn for each launch of scenario `scenario_id`.
    pub fn draws(&self, scenario_id: usize) -> Vec<usize> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.config.seed);
        rng.set_stream(scenario_id as u64);
        let n = self.config.templates.len();
        self.config
            .launch_offsets()
            .map(|_| rng.random_range(0..n))
            .collect()
    }

    pub fn scenario(&self, scenario_id: usize) -> Scenario {
        let draws = self.draws(scenario_id);
        self.superpose(scenario_id, &draws)
    }

    /// Scenario built from explicit template draws, one per launch.
    pub fn replay(&self, scenario_id: usize, draws: &[usize]) -> Result<Scenario> {
        let launches = self.config.launch_offsets().count();
        if draws.len() != launches {
            return Err(Error::Argument(format!(
                "expected {launches} draws, got {}",
                draws.len()
            )));
        }
        if let Some(bad) = draws.iter().find(|&&i| i >= self.replays.len()) {
            return Err(Error::Argument(format!("template index {bad} out of range")));
        }
        Ok(self.superpose(scenario_id, draws))
    }

    fn superpose(&self, scenario_id: usize, draws: &[usize]) -> Scenario {
        let mut values = self.baseline.clone();
        for (offset, &draw) in self.config.launch_offsets().zip(draws) {
            for (slot, v) in values[offset - 1..].iter_mut().zip(&self.replays[draw]) {
                *slot += v;
            }
        }
        Scenario {
            scenario_id,
            dau: DailySeries::from_parts(add_days(self.config.present, 1), values),
        }
    }
}

pub fn simulate_scenario(config: &SimulationConfig, scenario_id: usize) -> Result<Scenario> {
    Ok(Simulator::new(config)?.scenario(scenario_id))
}

/// All `n_scenarios` scenarios, in id order. Scenarios run in parallel on the
/// current rayon pool; the result does not depend on the pool size.
pub fn run_ensemble(config: &SimulationConfig) -> Result<Vec<Scenario>> {
    let sim = Simulator::new(config)?;
    Ok((0..config.n_scenarios)
        .into_par_iter()
        .map(|id| sim.scenario(id))
        .collect())
}

pub const BAND_PERCENTILES: [f64; 5] = [0.025, 0.25, 0.5, 0.75, 0.975];

/// Per-day percentiles across an ensemble.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BandRow {
    pub day_offset: usize,
    pub percentiles: [f64; 5],
}

pub fn ensemble_band(scenarios: &[Scenario]) -> Result<Vec<BandRow>> {
    let len = scenarios
        .first()
        .ok_or_else(|| Error::Argument("empty ensemble".into()))?
        .dau
        .len();
    if scenarios.iter().any(|s| s.dau.len() != len) {
        return Err(Error::Argument("scenarios have different lengths".into()));
    }
    Ok((0..len)
        .into_par_iter()
        .map(|i| {
            let column: Vec<f64> = scenarios.iter().map(|s| s.dau.values()[i]).collect();
            let sorted = stats::sorted(&column);
            BandRow {
                day_offset: i + 1,
                percentiles: BAND_PERCENTILES.map(|p| stats::percentile_sorted(&sorted, p)),
            }
        })
        .collect())
}

pub fn write_band<W: Write>(band: &[BandRow], writer: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    wtr.write_record(["day_offset", "p2.5", "p25", "p50", "p75", "p97.5"])?;
    for row in band {
        let mut rec = vec![row.day_offset.to_string()];
        rec.extend(row.percentiles.iter().map(f64::to_string));
        wtr.write_record(&rec)?;
    }
    wtr.flush()?;
    Ok(())
}

/// Writes `scenario_id,day_offset,dau` rows.
pub fn write_scenarios<W: Write>(scenarios: &[Scenario], present: NaiveDate, writer: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    wtr.write_record(["scenario_id", "day_offset", "dau"])?;
    let mut buf = FloatText::default();
    for s in scenarios {
        let first = days_between(present, s.dau.start_day());
        let id = s.scenario_id.to_string();
        for (i, v) in s.dau.values().iter().enumerate() {
            let offset = (first + i as i64).to_string();
            wtr.write_record([id.as_str(), offset.as_str(), buf.format(*v)])?;
        }
    }
    wtr.flush()?;
    Ok(())
}

/// Reads a scenario CSV. Each scenario must list consecutive offsets from 1.
pub fn read_scenarios<R: Read>(reader: R, present: NaiveDate) -> Result<Vec<Scenario>> {
    let mut rdr = csv::ReaderBuilder::new().from_reader(reader);
    let header = rdr.byte_headers()?.clone();
    if header.iter().collect::<Vec<_>>() != [&b"scenario_id"[..], b"day_offset", b"dau"] {
        return Err(Error::parse(1, "expected header `scenario_id,day_offset,dau`"));
    }
    let mut scenarios: Vec<Scenario> = Vec::new();
    let mut current: Option<(usize, Vec<f64>)> = None;
    let start = add_days(present, 1);
    let finish = |id: usize, values: Vec<f64>| -> Result<Scenario> {
        Ok(Scenario {
            scenario_id: id,
            dau: DailySeries::new(start, values)?,
        })
    };
    let mut record = csv::ByteRecord::new();
    while rdr.read_byte_record(&mut record)? {
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        let field = |i: usize| -> Result<&str> {
            record
                .get(i)
                .and_then(|f| std::str::from_utf8(f).ok())
                .ok_or_else(|| Error::parse(line, "missing or non-UTF-8 field"))
        };
        let id: usize = field(0)?
            .parse()
            .map_err(|_| Error::parse(line, "invalid scenario_id"))?;
        let offset: usize = field(1)?
            .parse()
            .map_err(|_| Error::parse(line, "invalid day_offset"))?;
        let dau: f64 = field(2)?
            .parse()
            .map_err(|_| Error::parse(line, "invalid dau"))?;
        match &mut current {
            Some((cur, values)) if *cur == id => {
                if offset != values.len() + 1 {
                    return Err(Error::parse(line, format!("scenario {id}: expected day_offset {}", values.len() + 1)));
                }
                values.push(dau);
            }
            _ => {
                if let Some((prev, values)) = current.take() {
                    scenarios.push(finish(prev, values)?);
                }
                if offset != 1 {
                    return Err(Error::parse(line, format!("scenario {id} must start at day_offset 1")));
                }
                if scenarios.iter().any(|s| s.scenario_id == id) {
                    return Err(Error::parse(line, format!("scenario {id} appears twice")));
                }
                current = Some((id, vec![dau]));
            }
        }
    }
    if let Some((id, values)) = current {
        scenarios.push(finish(id, values)?);
    }
    if scenarios.is_empty() {
        return Err(Error::parse(1, "no scenarios"));
    }
    Ok(scenarios)
}

/// Shortest round-trip float formatting into a reusable buffer.
#[derive(Default)]
struct FloatText(String);

impl FloatText {
    fn format(&mut self, v: f64) -> &str {
        use std::fmt::Write as _;
        self.0.clear();
        write!(self.0, "{v}").unwrap();
        &self.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tailfit::{PowerLawTail, TailModel};
    use crate::timeseries::{parse_date, GameRecord};

    fn d(s: &str) -> NaiveDate {
        parse_date(s).unwrap()
    }

    fn flat_template(id: &str, launch: NaiveDate, value: f64, days: usize) -> GameTemplate {
        let rec = GameRecord::new(id, launch, DailySeries::new(launch, vec![value; days]).unwrap()).unwrap();
        GameTemplate::flat(rec)
    }

    fn decaying(id: &str, launch: NaiveDate, amp: f64, gamma: f64, days: usize) -> GameTemplate {
        let values: Vec<f64> = (1..=days).map(|t| amp * (t as f64).powf(-gamma)).collect();
        let rec = GameRecord::new(id, launch, DailySeries::new(launch, values).unwrap()).unwrap();
        let tail = PowerLawTail::new(1, amp, gamma, 1.0).unwrap();
        // launch day is age 0 here, so the handoff scale is not exactly 1
        GameTemplate::new(rec, tail).unwrap()
    }

    #[test]
    fn tau_examples() {
        let base = d("2010-01-01");
        let at = |days: &[i64]| -> Vec<GameTemplate> {
            days.iter()
                .enumerate()
                .map(|(i, &o)| flat_template(&format!("g{i}"), add_days(base, o), 1.0, 3))
                .collect()
        };
        assert_eq!(estimate_tau(&at(&[0, 50, 100])).unwrap(), 50);
        assert_eq!(estimate_tau(&at(&[0, 10, 110])).unwrap(), 55);
        assert_eq!(estimate_tau(&at(&[0, 0, 1])).unwrap(), 1);
        assert!(matches!(
            estimate_tau(&at(&[5, 5])),
            Err(Error::InsufficientData(_))
        ));
    }

    #[test]
    fn config_validation() {
        let present = d("2011-12-15");
        let tpl = flat_template("a", d("2011-01-01"), 1.0, 10);
        let mut cfg = SimulationConfig::new(vec![tpl], present, 0);
        assert!(cfg.validate().is_err());
        cfg.tau = 53;
        cfg.n_scenarios = 0;
        assert!(cfg.validate().is_err());
        cfg.n_scenarios = 1;
        cfg.horizon_years = 0;
        assert!(cfg.validate().is_err());
        cfg.horizon_years = 1;
        assert!(cfg.validate().is_ok());
        cfg.templates.clear();
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn no_launch_when_horizon_shorter_than_tau() {
        let present = d("2011-12-15");
        let tpl = decaying("a", d("2011-06-01"), 1e5, 1.1, 198);
        let mut cfg = SimulationConfig::new(vec![tpl.clone()], present, 400);
        cfg.horizon_years = 1;
        let s = simulate_scenario(&cfg, 0).unwrap();
        assert_eq!(s.dau.start_day(), add_days(present, 1));
        assert_eq!(s.dau.len(), 365);
        for (i, v) in s.dau.values().iter().enumerate() {
            assert_eq!(*v, tpl.value_on(add_days(present, i as i64 + 1)));
        }
    }

    #[test]
    fn draws_are_deterministic_and_distinct_per_scenario() {
        let present = d("2011-12-15");
        let templates: Vec<_> = (0..20)
            .map(|i| flat_template(&format!("g{i}"), d("2011-01-01"), i as f64, 10))
            .collect();
        let mut cfg = SimulationConfig::new(templates, present, 53);
        cfg.seed = 42;
        let sim = Simulator::new(&cfg).unwrap();
        assert_eq!(sim.draws(3), sim.draws(3));
        assert_ne!(sim.draws(3), sim.draws(4));
        assert_eq!(sim.draws(0).len(), 20 * 365 / 53);
        assert_eq!(sim.scenario(7), simulate_scenario(&cfg, 7).unwrap());
        assert!(sim.replay(0, &[0]).is_err());
    }

    #[test]
    fn launches_only_add_users() {
        let present = d("2011-12-15");
        let templates: Vec<_> = (0..5)
            .map(|i| decaying(&format!("g{i}"), add_days(d("2011-01-01"), 40 * i), 1e4 * (i + 1) as f64, 0.7 + 0.2 * i as f64, 300))
            .collect();
        let mut cfg = SimulationConfig::new(templates, present, 30);
        cfg.horizon_years = 3;
        cfg.n_scenarios = 8;
        let sim = Simulator::new(&cfg).unwrap();
        for s in run_ensemble(&cfg).unwrap() {
            for (v, b) in s.dau.values().iter().zip(sim.baseline()) {
                assert!(v >= b && v.is_finite());
            }
        }
    }

    #[test]
    fn longer_horizon_keeps_prefix() {
        let present = d("2011-12-15");
        let templates: Vec<_> = (0..4)
            .map(|i| decaying(&format!("g{i}"), add_days(d("2011-02-01"), 30 * i), 5e3, 1.0, 250))
            .collect();
        let mut short = SimulationConfig::new(templates, present, 45);
        short.horizon_years = 2;
        short.seed = 9;
        let mut long = short.clone();
        long.horizon_years = 5;
        let a = simulate_scenario(&short, 11).unwrap();
        let b = simulate_scenario(&long, 11).unwrap();
        assert_eq!(a.dau.values(), &b.dau.values()[..a.dau.len()]);
    }

    #[test]
    fn permuted_templates_give_the_same_scenarios() {
        let present = d("2011-12-15");
        let templates: Vec<_> = (0..6)
            .map(|i| decaying(&format!("g{i}"), add_days(d("2011-01-01"), 25 * i), 1e4 + 3e3 * i as f64, 0.5 + 0.15 * i as f64, 200))
            .collect();
        let perm = [3usize, 0, 5, 1, 4, 2];
        let permuted: Vec<_> = perm.iter().map(|&i| templates[i].clone()).collect();
        let mut cfg = SimulationConfig::new(templates, present, 60);
        cfg.horizon_years = 4;
        let mut pcfg = cfg.clone();
        pcfg.templates = permuted;
        let sim = Simulator::new(&cfg).unwrap();
        let psim = Simulator::new(&pcfg).unwrap();
        for id in 0..5 {
            let draws = sim.draws(id);
            let mapped: Vec<usize> = draws
                .iter()
                .map(|&j| perm.iter().position(|&p| p == j).unwrap())
                .collect();
            let a = sim.scenario(id);
            let b = psim.replay(id, &mapped).unwrap();
            for (x, y) in a.dau.values().iter().zip(b.dau.values()) {
                assert!((x - y).abs() <= 1e-9 * x.abs().max(1.0));
            }
        }
    }

    #[test]
    fn tails_extend_replays() {
        let present = d("2011-12-15");
        let tpl = decaying("a", d("2011-09-01"), 1e4, 1.2, 106);
        assert!(matches!(tpl.tail(), TailModel::PowerLaw(_)));
        let mut cfg = SimulationConfig::new(vec![tpl.clone()], present, 100);
        cfg.horizon_years = 1;
        let sim = Simulator::new(&cfg).unwrap();
        assert_eq!(sim.replay_trajectory(0), tpl.trajectory(365).as_slice());
    }

    #[test]
    fn scenario_and_band_csv() {
        let present = d("2011-12-15");
        let templates: Vec<_> = (0..3)
            .map(|i| decaying(&format!("g{i}"), add_days(d("2011-01-01"), 50 * i), 3e3, 0.9, 200))
            .collect();
        let mut cfg = SimulationConfig::new(templates, present, 40);
        cfg.horizon_years = 1;
        cfg.n_scenarios = 4;
        let ens = run_ensemble(&cfg).unwrap();
        let mut buf = Vec::new();
        write_scenarios(&ens, present, &mut buf).unwrap();
        let back = read_scenarios(buf.as_slice(), present).unwrap();
        assert_eq!(back, ens);

        let band = ensemble_band(&ens).unwrap();
        assert_eq!(band.len(), 365);
        for row in &band {
            assert!(row.percentiles.windows(2).all(|w| w[0] <= w[1]));
        }
        let mut out = Vec::new();
        write_band(&band, &mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        assert!(text.starts_with("day_offset,p2.5,p25,p50,p75,p97.5\n1,"));

        let broken = "scenario_id,day_offset,dau\n0,2,1.0\n";
        assert!(read_scenarios(broken.as_bytes(), present).is_err());
        let dup = "scenario_id,day_offset,dau\n0,1,1.0\n1,1,1.0\n0,1,2.0\n";
        assert!(read_scenarios(dup.as_bytes(), present).is_err());
    }
}
