use std::fs::{self, File};
use std::io::{self, BufReader, Write};
use std::path::Path;

use multiphonic::perception::{load_reports, ListenerReport};
use multiphonic::report::AnalysisReport;
use multiphonic::tracker::{load_tracker_trace, TrackerTrace};
use serde::Serialize;

use crate::error::{CliError, CliResult};

pub fn to_json<S: Serialize>(value: &S) -> CliResult<String> {
    let mut text = serde_json::to_string_pretty(value).map_err(CliError::internal)?;
    text.push('\n');
    Ok(text)
}

/// Writes to `path`, or to stdout when `path` is absent.
pub fn emit(text: &str, path: Option<&Path>) -> CliResult<()> {
    match path {
        Some(p) => write_file(p, text),
        None => {
            let mut out = io::stdout().lock();
            out.write_all(text.as_bytes())
                .and_then(|_| out.flush())
                .map_err(|e| CliError::input(format!("stdout: {e}")))
        }
    }
}

pub fn write_file(path: &Path, text: &str) -> CliResult<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| CliError::input(format!("{}: {e}", dir.display())))?;
    }
    fs::write(path, text).map_err(|e| CliError::input(format!("{}: {e}", path.display())))
}

fn open(path: &Path) -> CliResult<BufReader<File>> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| CliError::input(format!("{}: {e}", path.display())))
}

pub fn read_analysis(path: &Path) -> CliResult<AnalysisReport<f64>> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::input(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::input(format!("{}: {e}", path.display())))
}

pub fn read_reports(path: &Path) -> CliResult<Vec<ListenerReport<f64>>> {
    load_reports(open(path)?).map_err(|e| CliError::from(e).context(path.display()))
}

/// `NAME=PATH`, or a bare path named after its file stem.
pub fn read_trace(arg: &str, voicing_threshold: f64) -> CliResult<TrackerTrace<f64>> {
    let (name, path) = match arg.split_once('=') {
        Some((name, path)) if !name.is_empty() => (name.to_owned(), Path::new(path)),
        _ => {
            let path = Path::new(arg);
            (stem(path), path)
        }
    };
    load_tracker_trace(open(path)?, &name, voicing_threshold)
        .map_err(|e| CliError::from(e).context(path.display()))
}

pub fn stem(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| path.display().to_string())
}
