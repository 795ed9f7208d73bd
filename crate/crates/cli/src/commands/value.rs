use std::path::PathBuf;

use clap::Args;
use dauval::growthfit::DEFAULT_RESAMPLES;
use dauval::revenue::{
    build_scenarios, parse_financials, revenue_per_dau, trailing_annual_revenue,
    write_revenue_points, BootstrapOptions, RevenueCase,
};
use dauval::scenario::{read_scenarios, DAYS_PER_YEAR};
use dauval::timeseries::catalog_total;
use dauval::valuation::{
    value_ensemble, write_valuations, CaseSummary, Discounting, ValuationConfig,
    DEFAULT_DISCOUNT_RATE, DEFAULT_PROFIT_MARGIN,
};

use super::{
    default_input, load_catalog, present_of, render, to_json, DAU_FILE, FINANCIALS_FILE,
    REVENUE_POINTS_FILE, REVENUE_SCENARIOS_FILE, SCENARIOS_FILE, SUMMARY_FILE, VALUATION_FILE,
};
use crate::config::{Config, Resolver};
use crate::error::{CliError, CliResult};
use crate::manifest::Run;
use crate::Common;

#[derive(Args)]
pub struct Opts {
    #[command(flatten)]
    common: Common,
    /// Scenario CSV from simulate (default: OUT/scenarios.csv).
    #[arg(long)]
    scenarios: Option<PathBuf>,
    /// Quarterly revenue CSV (default: OUT/financials.csv).
    #[arg(long)]
    financials: Option<PathBuf>,
    /// DAU catalog CSV (default: OUT/dau.csv).
    #[arg(long)]
    dau: Option<PathBuf>,
    /// Share of revenue kept as profit.
    #[arg(long)]
    margin: Option<f64>,
    /// Annual discount rate.
    #[arg(long)]
    discount: Option<f64>,
    /// Seed for the carrying-capacity bootstrap.
    #[arg(long)]
    seed: Option<u64>,
    /// Bootstrap resamples.
    #[arg(long)]
    resamples: Option<usize>,
    /// Valuation horizon (default: the scenario length).
    #[arg(long)]
    horizon_years: Option<u32>,
    /// year-index or continuous.
    #[arg(long)]
    discounting: Option<Discounting>,
}

pub fn run(opts: Opts) -> CliResult<()> {
    let out = &opts.common.out;
    let config = Config::load(opts.common.config.as_deref(), "value")?;
    let mut r = Resolver::new(&config);
    let scenarios_path = r.path("scenarios", opts.scenarios, default_input(out, SCENARIOS_FILE))?;
    let financials_path = r.path("financials", opts.financials, default_input(out, FINANCIALS_FILE))?;
    let dau_path = r.path("dau", opts.dau, default_input(out, DAU_FILE))?;
    let profit_margin = r.value("margin", opts.margin, DEFAULT_PROFIT_MARGIN)?;
    let discount_rate = r.value("discount", opts.discount, DEFAULT_DISCOUNT_RATE)?;
    let seed = r.value("seed", opts.seed, 0u64)?;
    let n_resamples = r.value("resamples", opts.resamples, DEFAULT_RESAMPLES)?;
    let horizon_years = r.optional("horizon-years", opts.horizon_years)?;
    let discounting = r.value("discounting", opts.discounting, Discounting::default())?;
    let mut resolved = r.finish()?;

    let mut run = Run::start("value", out)?;
    let catalog = load_catalog(&mut run, &dau_path, &config)?;
    let present = present_of(&catalog)?;
    let scenario_bytes = run.read_input("scenarios", &scenarios_path, &config)?;
    let scenarios = read_scenarios(scenario_bytes.as_slice(), present)
        .map_err(|e| CliError::context(e, format!("{}", scenarios_path.display())))?;
    let financial_bytes = run.read_input("financials", &financials_path, &config)?;
    let quarters = parse_financials(financial_bytes.as_slice())
        .map_err(|e| CliError::context(e, format!("{}", financials_path.display())))?;

    let horizon_years = match horizon_years {
        Some(h) => h,
        None => (scenarios[0].dau.len() / DAYS_PER_YEAR) as u32,
    };
    resolved.insert("horizon-years".into(), horizon_years.to_string());
    let cfg = ValuationConfig {
        profit_margin,
        discount_rate,
        horizon_years,
        discounting,
    };
    cfg.validate()?;

    let annual = trailing_annual_revenue(&quarters)?;
    let per_dau = revenue_per_dau(&annual, &catalog_total(&catalog)?)?;
    let cases = build_scenarios(&per_dau, BootstrapOptions { n_resamples, seed })?;
    run.note(format!(
        "revenue per DAU: {} points, bootstrap K80={:.4} K95={:.4}",
        per_dau.points.len(),
        cases.k80,
        cases.k95
    ));
    for case in RevenueCase::ALL {
        let p = cases.params(case);
        run.note(format!(
            "{case}: K={:.4} r={:.6}/day u0={:.4} rss={:.4e}",
            p.k(),
            p.r(),
            p.u0(),
            p.rss()
        ));
    }
    let first_t = per_dau.points.first().map_or(0.0, |p| p.t) as i64;
    let last_t = first_t.max(
        (present - cases.origin).num_days() + i64::from(horizon_years) * DAYS_PER_YEAR as i64,
    );
    if !cases.pointwise_ordered(first_t, last_t) {
        run.note("warning: revenue-per-DAU curves cross; base <= high <= extreme does not hold every day");
    }

    let dists = RevenueCase::ALL
        .iter()
        .map(|&case| value_ensemble(&scenarios, &cases.curve(case), &cfg))
        .collect::<Result<Vec<_>, _>>()?;
    let summary: Vec<CaseSummary> = RevenueCase::ALL
        .iter()
        .zip(&dists)
        .map(|(&case, dist)| CaseSummary::new(case, dist))
        .collect();
    for s in &summary {
        run.note(format!(
            "{}: median {:.3}B, 95% CI [{:.3}B, {:.3}B], P(> IPO) {:.3}",
            s.case,
            s.median / 1e9,
            s.ci_low / 1e9,
            s.ci_high / 1e9,
            s.p_exceeds_ipo
        ));
    }

    let rows: Vec<_> = RevenueCase::ALL
        .iter()
        .zip(&dists)
        .map(|(&case, dist)| (case, scenarios.as_slice(), dist))
        .collect();
    run.write_output(VALUATION_FILE, &render(|w| write_valuations(&rows, w))?)?;
    run.write_output(SUMMARY_FILE, &to_json(&summary)?)?;
    run.write_output(REVENUE_POINTS_FILE, &render(|w| write_revenue_points(&per_dau, w))?)?;
    run.write_output(REVENUE_SCENARIOS_FILE, &to_json(&cases)?)?;
    run.finish(resolved)?;
    Ok(())
}
