use std::path::PathBuf;

use clap::Args;
use dauval::scenario::{
    ensemble_band, estimate_tau, run_ensemble, write_band, write_scenarios, SimulationConfig,
    DEFAULT_HORIZON_YEARS, DEFAULT_SCENARIOS,
};
use dauval::tailfit::read_tails;

use super::{default_input, load_catalog, present_of, render, BAND_FILE, DAU_FILE, SCENARIOS_FILE, TAILS_FILE};
use crate::config::{Config, Resolver};
use crate::error::{CliError, CliResult};
use crate::manifest::Run;
use crate::Common;

#[derive(Args)]
pub struct Opts {
    #[command(flatten)]
    common: Common,
    /// DAU catalog CSV (default: OUT/dau.csv).
    #[arg(long)]
    dau: Option<PathBuf>,
    /// Tail fits from fit-tails (default: OUT/tails.csv).
    #[arg(long)]
    tails: Option<PathBuf>,
    /// Days between future launches (default: mean historical spacing).
    #[arg(long)]
    tau: Option<u32>,
    #[arg(long)]
    seed: Option<u64>,
    /// Number of scenarios.
    #[arg(long)]
    scenarios: Option<usize>,
    #[arg(long)]
    horizon_years: Option<u32>,
}

pub fn run(opts: Opts) -> CliResult<()> {
    let out = &opts.common.out;
    let config = Config::load(opts.common.config.as_deref(), "simulate")?;
    let mut r = Resolver::new(&config);
    let dau_path = r.path("dau", opts.dau, default_input(out, DAU_FILE))?;
    let tails_path = r.path("tails", opts.tails, default_input(out, TAILS_FILE))?;
    let tau = r.optional("tau", opts.tau)?;
    let seed = r.value("seed", opts.seed, 0u64)?;
    let n_scenarios = r.value("scenarios", opts.scenarios, DEFAULT_SCENARIOS)?;
    let horizon_years = r.value("horizon-years", opts.horizon_years, DEFAULT_HORIZON_YEARS)?;
    let mut resolved = r.finish()?;

    let mut run = Run::start("simulate", out)?;
    let catalog = load_catalog(&mut run, &dau_path, &config)?;
    let tails = run.read_input("tails", &tails_path, &config)?;
    let templates = read_tails(tails.as_slice(), &catalog)
        .map_err(|e| CliError::context(e, format!("{}", tails_path.display())))?;
    let present = present_of(&catalog)?;
    let tau = match tau {
        Some(t) => t,
        None => {
            let t = estimate_tau(&templates)?;
            run.note(format!("estimated launch cadence tau = {t} days"));
            t
        }
    };
    resolved.insert("tau".into(), tau.to_string());

    let mut sim = SimulationConfig::new(templates, present, tau);
    sim.seed = seed;
    sim.n_scenarios = n_scenarios;
    sim.horizon_years = horizon_years;
    sim.validate()?;
    let scenarios = run_ensemble(&sim)?;
    let band = ensemble_band(&scenarios)?;
    run.note(format!(
        "{} scenarios of {} days from {present}, {} launches each",
        scenarios.len(),
        sim.horizon_days(),
        sim.launch_offsets().count()
    ));

    run.write_output(SCENARIOS_FILE, &render(|w| write_scenarios(&scenarios, present, w))?)?;
    run.write_output(BAND_FILE, &render(|w| write_band(&band, w))?)?;
    run.finish(resolved)?;
    Ok(())
}
