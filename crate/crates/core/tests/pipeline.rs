use dauval::fixture::{make_fixture, FixtureOptions};
use dauval::revenue::{
    build_scenarios, parse_financials, revenue_per_dau, trailing_annual_revenue, write_financials,
    BootstrapOptions, RevenueCase,
};
use dauval::scenario::{read_scenarios, run_ensemble, write_scenarios, SimulationConfig};
use dauval::tailfit::{build_template, read_tails, write_tails, TailOptions};
use dauval::timeseries::{catalog_total, last_observed_day, parse_catalog, select_top, write_catalog};
use dauval::valuation::{value_ensemble, ValuationConfig};

#[test]
fn files_round_trip_through_the_pipeline() {
    let fx = make_fixture(FixtureOptions { games: 8, seed: 21, ..Default::default() }).unwrap();

    let mut buf = Vec::new();
    write_catalog(&fx.catalog, &mut buf).unwrap();
    let catalog = parse_catalog(buf.as_slice()).unwrap();
    assert_eq!(catalog, fx.catalog);
    let present = last_observed_day(&catalog).unwrap();
    assert_eq!(present, fx.truth.present);

    let top = select_top(&catalog, 5).unwrap();
    let templates: Vec<_> = top
        .iter()
        .map(|g| build_template(g, TailOptions::default()).unwrap())
        .collect();
    let mut buf = Vec::new();
    write_tails(&templates, &mut buf).unwrap();
    let reread = read_tails(buf.as_slice(), &catalog).unwrap();
    for (a, b) in templates.iter().zip(&reread) {
        assert_eq!(a.game_id(), b.game_id());
        for i in [0, 500, 5000] {
            let (x, y) = (a.value_at_index(i), b.value_at_index(i));
            assert!((x - y).abs() <= 1e-12 * x.abs(), "{} at {i}: {x} vs {y}", a.game_id());
        }
    }

    let mut cfg = SimulationConfig::new(reread, present, 53);
    cfg.horizon_years = 3;
    cfg.n_scenarios = 30;
    let scenarios = run_ensemble(&cfg).unwrap();
    let mut buf = Vec::new();
    write_scenarios(&scenarios, present, &mut buf).unwrap();
    let scenarios_back = read_scenarios(buf.as_slice(), present).unwrap();
    assert_eq!(scenarios, scenarios_back);

    let mut buf = Vec::new();
    write_financials(&fx.financials, &mut buf).unwrap();
    let quarters = parse_financials(buf.as_slice()).unwrap();
    assert_eq!(quarters, fx.financials);

    let annual = trailing_annual_revenue(&quarters).unwrap();
    let per_dau = revenue_per_dau(&annual, &catalog_total(&catalog).unwrap()).unwrap();
    // Each point is the DAU-weighted mean of the true curve over its trailing
    // year, up to the quarterly revenue noise.
    let truth = &fx.truth.revenue;
    let total = catalog_total(&catalog).unwrap();
    let curve = |date: chrono::NaiveDate| {
        let t = (date - truth.origin).num_days() as f64;
        truth.k * truth.u0 / (truth.u0 + (truth.k - truth.u0) * (-truth.r * t).exp())
    };
    for p in &per_dau.points {
        let end = per_dau.origin + chrono::Duration::days(p.t as i64);
        let (mut weighted, mut users) = (0.0, 0.0);
        for back in 0..365 {
            let date = end - chrono::Duration::days(back);
            let u = total.get(date).unwrap();
            weighted += u * curve(date);
            users += u;
        }
        let expected = weighted / users;
        assert!((p.y / expected - 1.0).abs() < 0.1, "{end}: {} vs {expected}", p.y);
    }

    let cases = build_scenarios(&per_dau, BootstrapOptions { n_resamples: 200, seed: 3 }).unwrap();
    let cfg = ValuationConfig { horizon_years: 3, ..Default::default() };
    let mut medians = Vec::new();
    for case in RevenueCase::ALL {
        let dist = value_ensemble(&scenarios_back, &cases.curve(case), &cfg).unwrap();
        assert!(dist.ci95.0 <= dist.median && dist.median <= dist.ci95.1);
        medians.push(dist.median);
    }
    assert!(medians[0] <= medians[1] && medians[1] <= medians[2]);
}
