use std::fmt::Write as _;
use std::path::PathBuf;

use clap::Args;
use dauval::revenue::{RevenueCase, RevenueScenarios};
use dauval::valuation::{CaseSummary, IPO_VALUE_USD};

use super::{default_input, REPORT_FILE, REVENUE_SCENARIOS_FILE, SUMMARY_FILE};
use crate::config::{Config, Resolver};
use crate::error::{CliError, CliResult};
use crate::manifest::Run;
use crate::Common;

#[derive(Args)]
pub struct Opts {
    #[command(flatten)]
    common: Common,
    /// Valuation summary from value (default: OUT/summary.json).
    #[arg(long)]
    summary: Option<PathBuf>,
    /// Revenue scenario parameters from value (default: OUT/revenue_scenarios.json).
    #[arg(long)]
    revenue_scenarios: Option<PathBuf>,
}

pub fn run(opts: Opts) -> CliResult<()> {
    let out = &opts.common.out;
    let config = Config::load(opts.common.config.as_deref(), "report")?;
    let mut r = Resolver::new(&config);
    let summary_path = r.path("summary", opts.summary, default_input(out, SUMMARY_FILE))?;
    let revenue_path = r.path(
        "revenue-scenarios",
        opts.revenue_scenarios,
        default_input(out, REVENUE_SCENARIOS_FILE),
    )?;
    let resolved = r.finish()?;

    let mut run = Run::start("report", out)?;
    let summary: Vec<CaseSummary> = parse_json(&run.read_input("summary", &summary_path, &config)?, &summary_path)?;
    let revenue: RevenueScenarios =
        parse_json(&run.read_input("revenue-scenarios", &revenue_path, &config)?, &revenue_path)?;

    let text = render_report(&summary, &revenue);
    print!("{text}");
    run.write_output(REPORT_FILE, text.as_bytes())?;
    run.finish(resolved)?;
    Ok(())
}

fn parse_json<T: serde::de::DeserializeOwned>(bytes: &[u8], path: &std::path::Path) -> CliResult<T> {
    serde_json::from_slice(bytes)
        .map_err(|e| CliError::usage(format!("cannot parse {}: {e}", path.display())))
}

fn render_report(summary: &[CaseSummary], revenue: &RevenueScenarios) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "Valuation (USD billions)");
    let _ = writeln!(
        s,
        "{:<8} {:>9} {:>9} {:>9} {:>9} {:>10}",
        "case", "median", "ci_low", "ci_high", "mean", "P(>IPO)"
    );
    for row in summary {
        let _ = writeln!(
            s,
            "{:<8} {:>9.3} {:>9.3} {:>9.3} {:>9.3} {:>10.3}",
            row.case.as_str(),
            row.median / 1e9,
            row.ci_low / 1e9,
            row.ci_high / 1e9,
            row.mean / 1e9,
            row.p_exceeds_ipo
        );
    }
    let _ = writeln!(s, "IPO reference: {:.1}B", IPO_VALUE_USD / 1e9);
    let _ = writeln!(s);
    let _ = writeln!(s, "Revenue per DAU (USD per user per year), t in days from {}", revenue.origin);
    let _ = writeln!(
        s,
        "{:<8} {:>10} {:>12} {:>10} {:>10}",
        "case", "K", "r_per_day", "u0", "midpoint"
    );
    for case in RevenueCase::ALL {
        let p = revenue.params(case);
        let _ = writeln!(
            s,
            "{:<8} {:>10.4} {:>12.6} {:>10.4} {:>10.1}",
            case.as_str(),
            p.k(),
            p.r(),
            p.u0(),
            p.midpoint()
        );
    }
    let _ = writeln!(s, "bootstrap K quantiles: 80% {:.4}, 95% {:.4}", revenue.k80, revenue.k95);
    s
}
