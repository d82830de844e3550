use std::path::{Path, PathBuf};
use std::thread;

use clap::Args;
use multiphonic::audio::read_wav;
use multiphonic::report::{plot_panels, run_analysis, AnalysisConfig, AnalysisReport, SampleInfo};

use crate::config::ConfigArgs;
use crate::error::{CliError, CliResult};
use crate::io::{emit, read_reports, read_trace, stem, to_json, write_file};

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    /// WAV files to analyze (16/24-bit PCM or 32-bit float).
    #[arg(required = true, value_name = "WAV")]
    pub inputs: Vec<PathBuf>,

    /// Report file for one input, or a directory of `<sample>.json` for several.
    #[arg(short, long, value_name = "PATH")]
    pub out: Option<PathBuf>,

    /// Write plot-data CSVs into `<DIR>/<sample>/`.
    #[arg(long, value_name = "DIR")]
    pub plots: Option<PathBuf>,

    /// Listening-test reports to aggregate against the analysis.
    #[arg(long, value_name = "CSV")]
    pub reports: Option<PathBuf>,

    /// Pitch-tracker trace, as `NAME=PATH` or `PATH`; repeatable.
    #[arg(long = "trace", value_name = "TRACE")]
    pub traces: Vec<String>,

    #[command(flatten)]
    pub config: ConfigArgs,
}

fn analyze_one(
    path: &Path,
    args: &AnalyzeArgs,
    cfg: &AnalysisConfig<f64>,
) -> CliResult<AnalysisReport<f64>> {
    let audio = read_wav::<f64>(path).map_err(|e| CliError::from(e).context(path.display()))?;
    let sample = SampleInfo {
        id: stem(path),
        file: path.file_name().map(|f| f.to_string_lossy().into_owned()),
        sample_rate: audio.rate,
        channels: audio.channels,
        samples: audio.samples.len(),
        duration_s: audio.samples.len() as f64 / f64::from(audio.rate),
    };
    let output = run_analysis(&audio.samples, sample, cfg)
        .map_err(|e| CliError::from(e).context(path.display()))?;
    if let Some(dir) = &args.plots {
        for (name, csv) in plot_panels(&output) {
            write_file(&dir.join(&output.report.sample.id).join(name), &csv)?;
        }
    }
    let mut report = output.report;
    if let Some(reports) = &args.reports {
        let reports: Vec<_> = read_reports(reports)?
            .into_iter()
            .filter(|r| r.sample_id == report.sample.id)
            .collect();
        if report.fit.is_some() {
            report.attach_perception(&reports)?;
        } else {
            report
                .warnings
                .push("perception: no harmonic fit to associate reports with".into());
        }
    }
    for t in &args.traces {
        let trace = read_trace(t, cfg.tracker.voicing_threshold)?;
        report.attach_trace(&trace)?;
    }
    Ok(report)
}

pub fn run(args: &AnalyzeArgs) -> CliResult<()> {
    let cfg = args.config.resolve()?;
    // Files are analyzed in parallel; results keep input order.
    let results: Vec<CliResult<AnalysisReport<f64>>> = thread::scope(|scope| {
        let handles: Vec<_> = args
            .inputs
            .iter()
            .map(|path| scope.spawn(|| analyze_one(path, args, &cfg)))
            .collect();
        handles
            .into_iter()
            .map(|h| {
                h.join()
                    .unwrap_or_else(|_| Err(CliError::internal("analysis thread panicked")))
            })
            .collect()
    });
    let reports = results.into_iter().collect::<CliResult<Vec<_>>>()?;

    if let [report] = reports.as_slice() {
        return emit(&to_json(report)?, args.out.as_deref());
    }
    match &args.out {
        Some(dir) => {
            for r in &reports {
                write_file(&dir.join(format!("{}.json", r.sample.id)), &to_json(r)?)?;
            }
            Ok(())
        }
        None => emit(&to_json(&reports)?, None),
    }
}
