use clap::Args;
use dauval::fixture::{make_fixture, FixtureOptions, DEFAULT_TAU};
use dauval::revenue::write_financials;
use dauval::timeseries::write_catalog;

use super::{render, to_json, DAU_FILE, FINANCIALS_FILE, TRUTH_FILE};
use crate::config::{Config, Resolver};
use crate::error::CliResult;
use crate::manifest::Run;
use crate::Common;

#[derive(Args)]
pub struct Opts {
    #[command(flatten)]
    common: Common,
    /// Number of synthetic games.
    #[arg(long)]
    games: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Days between consecutive launches.
    #[arg(long)]
    tau: Option<u32>,
}

pub fn run(opts: Opts) -> CliResult<()> {
    let config = Config::load(opts.common.config.as_deref(), "make-fixture")?;
    let defaults = FixtureOptions::default();
    let mut r = Resolver::new(&config);
    let options = FixtureOptions {
        games: r.value("games", opts.games, defaults.games)?,
        seed: r.value("seed", opts.seed, defaults.seed)?,
        tau: r.value("tau", opts.tau, DEFAULT_TAU)?,
        ..defaults
    };
    let resolved = r.finish()?;

    let mut run = Run::start("make-fixture", &opts.common.out)?;
    let fixture = make_fixture(options)?;
    run.write_output(DAU_FILE, &render(|w| write_catalog(&fixture.catalog, w))?)?;
    run.write_output(FINANCIALS_FILE, &render(|w| write_financials(&fixture.financials, w))?)?;
    run.write_output(TRUTH_FILE, &to_json(&fixture.truth)?)?;
    run.note(format!(
        "wrote {} games and {} quarters ending {}",
        fixture.catalog.len(),
        fixture.financials.len(),
        fixture.truth.present
    ));
    run.finish(resolved)?;
    Ok(())
}
