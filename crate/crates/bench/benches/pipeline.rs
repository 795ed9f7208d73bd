use chrono::NaiveDate;
use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use std::hint::black_box;

use dauval::fixture::{make_fixture, FixtureOptions};
use dauval::growthfit::{fit_logistic, LogisticParams, Point};
use dauval::revenue::RevenueCurve;
use dauval::scenario::{run_ensemble, SimulationConfig, Simulator};
use dauval::tailfit::{build_template, detect_tmin, fit_power_law, TailOptions};
use dauval::timeseries::last_observed_day;
use dauval::valuation::{value_scenario, ValuationConfig};

fn templates(games: usize) -> (Vec<dauval::GameTemplate>, NaiveDate) {
    let fx = make_fixture(FixtureOptions {
        games,
        seed: 1,
        ..Default::default()
    })
    .unwrap();
    let present = last_observed_day(&fx.catalog).unwrap();
    let tpl = fx
        .catalog
        .iter()
        .map(|g| build_template(g, TailOptions::default()).unwrap())
        .collect();
    (tpl, present)
}

fn tail_fit(c: &mut Criterion) {
    let fx = make_fixture(FixtureOptions {
        games: 1,
        seed: 3,
        ..Default::default()
    })
    .unwrap();
    let game = &fx.catalog[0];
    c.bench_function("detect_tmin", |b| b.iter(|| detect_tmin(black_box(game)).unwrap()));
    let t_min = detect_tmin(game).unwrap();
    c.bench_function("fit_power_law", |b| {
        b.iter(|| fit_power_law(black_box(game), t_min).unwrap())
    });
}

fn logistic_fit(c: &mut Criterion) {
    let truth = LogisticParams::new(57.0, 0.02, 2.0).unwrap();
    let points: Vec<Point> = (0..12)
        .map(|i| {
            let t = 30.0 * i as f64;
            Point::new(t, truth.value(t) * (1.0 + 0.01 * ((i * 7 % 5) as f64 - 2.0)))
        })
        .collect();
    c.bench_function("fit_logistic_12pts", |b| {
        b.iter(|| fit_logistic(black_box(&points)).unwrap())
    });
}

fn simulation(c: &mut Criterion) {
    let (tpl, present) = templates(20);
    let mut group = c.benchmark_group("ensemble");
    group.sample_size(10);
    for n in [10usize, 100] {
        let mut cfg = SimulationConfig::new(tpl.clone(), present, 53);
        cfg.n_scenarios = n;
        group.bench_with_input(BenchmarkId::from_parameter(n), &cfg, |b, cfg| {
            b.iter(|| run_ensemble(cfg).unwrap())
        });
    }
    group.finish();

    let cfg = SimulationConfig::new(tpl, present, 53);
    let sim = Simulator::new(&cfg).unwrap();
    let scenario = sim.scenario(0);
    let curve = RevenueCurve::new(
        LogisticParams::new(33.0, 0.004, 4.0).unwrap(),
        NaiveDate::from_ymd_opt(2009, 6, 1).unwrap(),
    );
    let vcfg = ValuationConfig::default();
    c.bench_function("single_scenario", |b| b.iter(|| sim.scenario(black_box(5))));
    c.bench_function("value_scenario_20y", |b| {
        b.iter(|| value_scenario(black_box(&scenario), &curve, &vcfg).unwrap())
    });
}

criterion_group!(benches, tail_fit, logistic_fit, simulation);
criterion_main!(benches);
