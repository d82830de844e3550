use std::fs;
use std::path::{Path, PathBuf};

use clap::Args;
use multiphonic::harmonicity::CarrierConfig;
use multiphonic::report::AnalysisConfig;
use multiphonic::tracker::TraceWeighting;

use crate::error::{CliError, CliResult};

/// Analysis settings shared by the commands. Flags override the JSON file.
#[derive(Debug, Clone, Default, Args)]
pub struct ConfigArgs {
    /// JSON analysis configuration; omitted fields keep their defaults.
    #[arg(long, env = "MULTIPHONIC_CONFIG", value_name = "PATH")]
    pub config: Option<PathBuf>,

    /// Analysis window length in samples (power of two).
    #[arg(long, value_name = "SAMPLES")]
    pub window: Option<usize>,

    #[arg(long, value_name = "SAMPLES")]
    pub hop: Option<usize>,

    /// Loudness level of the equal-loudness contour.
    #[arg(long, value_name = "PHON")]
    pub phon: Option<f64>,

    #[arg(long, value_name = "HZ")]
    pub smoothing_bandwidth: Option<f64>,

    /// Harmonic assignment tolerance.
    #[arg(long, value_name = "CENTS")]
    pub tolerance: Option<f64>,

    /// Also estimate carrier and modulation frequencies.
    #[arg(long)]
    pub carrier: bool,

    /// Tuning of A4.
    #[arg(long, value_name = "HZ")]
    pub reference: Option<f64>,

    /// Minimum confidence of a voiced tracker frame.
    #[arg(long, value_name = "CONFIDENCE")]
    pub voicing_threshold: Option<f64>,

    /// Count every voiced tracker frame equally instead of by confidence.
    #[arg(long)]
    pub unweighted: bool,
}

pub fn read_config_file(path: &Path) -> CliResult<AnalysisConfig<f64>> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::config(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::config(format!("{}: {e}", path.display())))
}

impl ConfigArgs {
    pub fn resolve(&self) -> CliResult<AnalysisConfig<f64>> {
        let mut cfg = match &self.config {
            Some(path) => read_config_file(path)?,
            None => AnalysisConfig::default(),
        };
        if let Some(w) = self.window {
            cfg.window.window_length = w;
        }
        if let Some(h) = self.hop {
            cfg.window.hop = h;
        }
        if let Some(p) = self.phon {
            cfg.loudness_phon = p;
        }
        if let Some(b) = self.smoothing_bandwidth {
            cfg.smoothing_bandwidth_hz = b;
        }
        if let Some(t) = self.tolerance {
            cfg.harmonicity.tolerance_cents = t;
        }
        if self.carrier && cfg.carrier.is_none() {
            cfg.carrier = Some(CarrierConfig {
                window: cfg.window,
                ..CarrierConfig::default()
            });
        }
        if let Some(r) = self.reference {
            cfg.association.reference_hz = r;
        }
        if let Some(v) = self.voicing_threshold {
            cfg.tracker.voicing_threshold = v;
        }
        if self.unweighted {
            cfg.tracker.weighting = TraceWeighting::Uniform;
        }
        cfg.validate().map_err(CliError::config)?;
        Ok(cfg)
    }
}
