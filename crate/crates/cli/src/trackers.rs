use std::path::PathBuf;

use clap::Args;
use multiphonic::perception::{aggregate_perception, PerceptionAggregate};
use multiphonic::tracker::{summarize_trace, TrackerSummary};
use serde::Serialize;

use crate::error::{CliError, CliResult};
use crate::io::{emit, read_analysis, read_reports, read_trace, to_json};

#[derive(Debug, Args)]
pub struct TrackersArgs {
    /// Tracker traces (`time_s,freq_hz,confidence`), as `NAME=PATH` or `PATH`.
    #[arg(required = true, value_name = "TRACE")]
    pub traces: Vec<String>,

    /// Analysis report JSON of the sample the traces were taken from.
    #[arg(long, value_name = "ANALYSIS_JSON")]
    pub analysis: PathBuf,

    /// Listening-test reports, for overlap scores.
    #[arg(long, value_name = "CSV")]
    pub reports: Option<PathBuf>,

    #[arg(short, long, value_name = "PATH")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Serialize)]
struct TrackerComparisonOutput {
    sample_id: String,
    trackers: Vec<TrackerSummary<f64>>,
}

pub fn run(args: &TrackersArgs) -> CliResult<()> {
    let analysis = read_analysis(&args.analysis)?;
    let partials = analysis.fit_partials()?;
    let fit = analysis.fit.as_ref().map(|f| (f, partials.as_slice()));

    let perception: Option<PerceptionAggregate<f64>> = match (&args.reports, &analysis.fit) {
        (Some(path), Some(f)) => {
            let reports = read_reports(path)?;
            if let Some(r) = reports.iter().find(|r| r.sample_id != analysis.sample.id) {
                return Err(CliError::input(format!(
                    "{} row {}: sample {:?} does not match analysis sample {:?}",
                    path.display(),
                    r.row,
                    r.sample_id,
                    analysis.sample.id
                )));
            }
            Some(aggregate_perception(
                &reports,
                f,
                &partials,
                &analysis.config.association,
            )?)
        }
        (Some(_), None) => {
            return Err(CliError::input(format!(
                "{}: analysis has no harmonic fit to compare reports with",
                args.analysis.display()
            )))
        }
        _ => analysis.perception.clone(),
    };

    let mut trackers = Vec::with_capacity(args.traces.len());
    for t in &args.traces {
        let trace = read_trace(t, analysis.config.tracker.voicing_threshold)?;
        trackers.push(summarize_trace(
            &trace,
            fit,
            perception.as_ref(),
            &analysis.config.tracker,
            &analysis.config.association,
        )?);
    }
    let out = TrackerComparisonOutput {
        sample_id: analysis.sample.id.clone(),
        trackers,
    };
    emit(&to_json(&out)?, args.out.as_deref())
}
