use chrono::NaiveDate;
use dauval::fixture::{make_fixture, FixtureOptions};
use dauval::scenario::{ensemble_band, run_ensemble, SimulationConfig};
use dauval::stats;
use dauval::tailfit::{build_template, GameTemplate, TailOptions};

fn fixture_templates(games: usize, seed: u64) -> (Vec<GameTemplate>, NaiveDate) {
    let fx = make_fixture(FixtureOptions { games, seed, ..Default::default() }).unwrap();
    let templates = fx
        .catalog
        .iter()
        .map(|g| build_template(g, TailOptions::default()).unwrap())
        .collect();
    (templates, fx.truth.present)
}

/// Expected DAU under uniform template draws: the baseline plus, for every
/// launch so far, the average replay at that launch's age.
fn renewal_mean(templates: &[GameTemplate], present: NaiveDate, tau: usize, days: usize) -> Vec<f64> {
    let n = templates.len() as f64;
    (1..=days)
        .map(|offset| {
            let date = present + chrono::Duration::days(offset as i64);
            let baseline: f64 = templates.iter().map(|t| t.value_on(date)).sum();
            let mut launches = 0.0;
            let mut k = 1;
            while k * tau <= offset {
                let age = offset - k * tau;
                launches += templates.iter().map(|t| t.value_at_index(age)).sum::<f64>() / n;
                k += 1;
            }
            baseline + launches
        })
        .collect()
}

#[test]
fn ensemble_mean_matches_renewal_expectation() {
    let (templates, present) = fixture_templates(10, 2);
    let tau = 53;
    let mut cfg = SimulationConfig::new(templates.clone(), present, tau);
    cfg.horizon_years = 3;
    cfg.n_scenarios = 2000;
    cfg.seed = 17;
    let scenarios = run_ensemble(&cfg).unwrap();
    let days = cfg.horizon_days();
    let oracle = renewal_mean(&templates, present, tau as usize, days);

    let n = scenarios.len() as f64;
    let mut inside = 0;
    for (d, &expected) in oracle.iter().enumerate() {
        let column: Vec<f64> = scenarios.iter().map(|s| s.dau.values()[d]).collect();
        let se = stats::std_dev(&column) / n.sqrt();
        if (stats::mean(&column) - expected).abs() <= 3.0 * se + 1e-9 * expected {
            inside += 1;
        }
    }
    assert!(inside as f64 >= 0.95 * days as f64, "{inside}/{days} days within 3 SE");

    let totals: Vec<f64> = scenarios.iter().map(|s| s.dau.total()).collect();
    let expected: f64 = oracle.iter().sum();
    let se = stats::std_dev(&totals) / n.sqrt();
    assert!((stats::mean(&totals) - expected).abs() <= 3.0 * se);
}

#[test]
fn band_brackets_the_median_path() {
    let (templates, present) = fixture_templates(6, 3);
    let mut cfg = SimulationConfig::new(templates, present, 40);
    cfg.horizon_years = 2;
    cfg.n_scenarios = 200;
    let scenarios = run_ensemble(&cfg).unwrap();
    let band = ensemble_band(&scenarios).unwrap();
    assert_eq!(band.len(), cfg.horizon_days());
    for row in &band {
        assert!(row.percentiles.windows(2).all(|w| w[0] <= w[1]));
    }
}

#[test]
fn different_seeds_give_different_ensembles() {
    let (templates, present) = fixture_templates(6, 3);
    let mut cfg = SimulationConfig::new(templates, present, 40);
    cfg.horizon_years = 2;
    cfg.n_scenarios = 20;
    let a = run_ensemble(&cfg).unwrap();
    cfg.seed = 1;
    let b = run_ensemble(&cfg).unwrap();
    assert_ne!(a, b);
}
