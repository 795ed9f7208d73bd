use std::path::{Path, PathBuf};

use dauval::timeseries::{self, GameRecord};

use crate::config::Config;
use crate::error::{CliError, CliResult};
use crate::manifest::Run;

pub mod fit_tails;
pub mod fixture;
pub mod report;
pub mod simulate;
pub mod value;

pub const DAU_FILE: &str = "dau.csv";
pub const FINANCIALS_FILE: &str = "financials.csv";
pub const TRUTH_FILE: &str = "fixture_truth.json";
pub const TAILS_FILE: &str = "tails.csv";
pub const SCENARIOS_FILE: &str = "scenarios.csv";
pub const BAND_FILE: &str = "band.csv";
pub const VALUATION_FILE: &str = "valuation.csv";
pub const SUMMARY_FILE: &str = "summary.json";
pub const REVENUE_POINTS_FILE: &str = "revenue_points.csv";
pub const REVENUE_SCENARIOS_FILE: &str = "revenue_scenarios.json";
pub const REPORT_FILE: &str = "report.txt";

/// Renders a writer-based serializer into a buffer.
fn render<F>(write: F) -> CliResult<Vec<u8>>
where
    F: FnOnce(&mut Vec<u8>) -> dauval::Result<()>,
{
    let mut buf = Vec::new();
    write(&mut buf)?;
    Ok(buf)
}

fn to_json<T: serde::Serialize>(value: &T) -> CliResult<Vec<u8>> {
    let mut buf = serde_json::to_vec_pretty(value)
        .map_err(|e| CliError::usage(format!("cannot encode json: {e}")))?;
    buf.push(b'\n');
    Ok(buf)
}

fn default_input(out: &Path, name: &str) -> PathBuf {
    out.join(name)
}

fn load_catalog(run: &mut Run, path: &Path, config: &Config) -> CliResult<Vec<GameRecord>> {
    let bytes = run.read_input("dau", path, config)?;
    timeseries::parse_catalog(bytes.as_slice())
        .map_err(|e| CliError::context(e, format!("{}", path.display())))
}

fn present_of(catalog: &[GameRecord]) -> CliResult<chrono::NaiveDate> {
    timeseries::last_observed_day(catalog).ok_or_else(|| CliError::usage("catalog is empty"))
}
