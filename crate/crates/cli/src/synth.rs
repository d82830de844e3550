use std::fs;
use std::path::{Path, PathBuf};

use clap::Args;
use multiphonic::audio::{write_wav, WavEncoding};
use multiphonic::synthesis::ToneSpec;

use crate::error::{CliError, CliResult};

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// Tone specification (JSON).
    #[arg(value_name = "SPEC")]
    pub spec: PathBuf,

    #[arg(value_name = "OUT_WAV")]
    pub out: PathBuf,

    /// Write 32-bit float samples instead of 16-bit PCM.
    #[arg(long)]
    pub float: bool,
}

pub fn read_spec(path: &Path) -> CliResult<ToneSpec> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::input(format!("{}: {e}", path.display())))?;
    let spec: ToneSpec = serde_json::from_str(&text)
        .map_err(|e| CliError::input(format!("{}: {e}", path.display())))?;
    spec.validate()
        .map_err(|e| CliError::from(e).context(path.display()))?;
    Ok(spec)
}

/// Renders `spec` to `out`, embedding the spec JSON as the file comment.
pub fn render_to(spec: &ToneSpec, out: &Path, encoding: WavEncoding) -> CliResult<()> {
    if spec.rate.fract() != 0.0 || spec.rate > f64::from(u32::MAX) {
        return Err(CliError::input(format!(
            "rate {} Hz is not a whole number",
            spec.rate
        )));
    }
    let samples: Vec<f64> = spec.render()?;
    let comment = serde_json::to_string(spec).map_err(CliError::internal)?;
    if let Some(dir) = out.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| CliError::input(format!("{}: {e}", dir.display())))?;
    }
    write_wav(out, &samples, spec.rate as u32, encoding, Some(&comment))
        .map_err(|e| CliError::from(e).context(out.display()))
}

pub fn run(args: &SynthArgs) -> CliResult<()> {
    let spec = read_spec(&args.spec)?;
    let encoding = if args.float {
        WavEncoding::Float32
    } else {
        WavEncoding::Pcm16
    };
    render_to(&spec, &args.out, encoding)
}
