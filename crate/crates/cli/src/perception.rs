use std::path::PathBuf;

use clap::Args;
use multiphonic::perception::aggregate_perception;

use crate::error::{CliError, CliResult};
use crate::io::{emit, read_analysis, read_reports, to_json, write_file};

#[derive(Debug, Args)]
pub struct PerceptionArgs {
    /// Listening-test reports (`sample_id,listener_id,pitch,certainty,tuning`).
    #[arg(value_name = "REPORTS_CSV")]
    pub reports: PathBuf,

    /// Analysis report JSON of the same sample.
    #[arg(value_name = "ANALYSIS_JSON")]
    pub analysis: PathBuf,

    /// Aggregate JSON destination (stdout when absent).
    #[arg(short, long, value_name = "PATH")]
    pub out: Option<PathBuf>,

    /// Bar-graph CSV destination.
    #[arg(long, value_name = "PATH")]
    pub bars: Option<PathBuf>,
}

pub fn run(args: &PerceptionArgs) -> CliResult<()> {
    let analysis = read_analysis(&args.analysis)?;
    let reports = read_reports(&args.reports)?;
    if let Some(r) = reports.iter().find(|r| r.sample_id != analysis.sample.id) {
        return Err(CliError::input(format!(
            "{} row {}: sample {:?} does not match analysis sample {:?}",
            args.reports.display(),
            r.row,
            r.sample_id,
            analysis.sample.id
        )));
    }
    let fit = analysis.fit.as_ref().ok_or_else(|| {
        CliError::input(format!(
            "{}: analysis has no harmonic fit",
            args.analysis.display()
        ))
    })?;
    let partials = analysis.fit_partials()?;
    let aggregate = aggregate_perception(&reports, fit, &partials, &analysis.config.association)?;
    if let Some(bars) = &args.bars {
        write_file(bars, &aggregate.to_bar_csv())?;
    }
    emit(&to_json(&aggregate)?, args.out.as_deref())
}
