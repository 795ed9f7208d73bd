use std::path::PathBuf;

use clap::Args;
use dauval::tailfit::{build_template, write_tails, TailModel, TailOptions};
use dauval::timeseries::{coverage_fraction, select_top};

use super::{default_input, load_catalog, render, DAU_FILE, TAILS_FILE};
use crate::config::{Config, Resolver};
use crate::error::{CliError, CliResult};
use crate::manifest::Run;
use crate::Common;

const DEFAULT_TOP: usize = 20;

#[derive(Args)]
pub struct Opts {
    #[command(flatten)]
    common: Common,
    /// DAU catalog CSV (default: OUT/dau.csv).
    #[arg(long)]
    dau: Option<PathBuf>,
    /// Number of most popular games to model (default: 20, or all if fewer).
    #[arg(long)]
    top: Option<usize>,
    /// Keep games without a usable decay, holding their last value flat.
    #[arg(long)]
    allow_flat_fallback: bool,
}

pub fn run(opts: Opts) -> CliResult<()> {
    let out = &opts.common.out;
    let config = Config::load(opts.common.config.as_deref(), "fit-tails")?;
    let mut r = Resolver::new(&config);
    let dau_path = r.path("dau", opts.dau, default_input(out, DAU_FILE))?;
    let top = r.optional("top", opts.top)?;
    let allow_flat_fallback = r.switch("allow-flat-fallback", opts.allow_flat_fallback)?;
    let mut resolved = r.finish()?;

    let mut run = Run::start("fit-tails", out)?;
    let catalog = load_catalog(&mut run, &dau_path, &config)?;
    let top = top.unwrap_or(DEFAULT_TOP.min(catalog.len()));
    resolved.insert("top".into(), top.to_string());
    let selected = select_top(&catalog, top)?;

    let options = TailOptions { allow_flat_fallback };
    let mut templates = Vec::with_capacity(selected.len());
    for record in &selected {
        let template = build_template(record, options)
            .map_err(|e| CliError::context(e, format!("game {}", record.game_id())))?;
        match template.tail() {
            TailModel::PowerLaw(t) => run.note(format!(
                "{}: t_min={} gamma={:.4} amplitude={:.6e} r2={:.4}",
                record.game_id(),
                t.t_min(),
                t.gamma(),
                t.amplitude(),
                t.r_squared()
            )),
            TailModel::Flat => run.note(format!(
                "{}: no usable decay, holding last value flat",
                record.game_id()
            )),
        }
        templates.push(template);
    }
    let coverage = coverage_fraction(&selected, &catalog)?;
    run.note(format!(
        "top {top} of {} games carry {:.2}% of observed DAU",
        catalog.len(),
        100.0 * coverage
    ));

    run.write_output(TAILS_FILE, &render(|w| write_tails(&templates, w))?)?;
    run.finish(resolved)?;
    Ok(())
}
