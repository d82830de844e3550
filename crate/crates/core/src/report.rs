//! The end-to-end analysis of one recording and its JSON report.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::harmonicity::{
    analyze_harmonicity, decompose_carrier_modulation, CarrierConfig, CarrierModulation,
    HarmonicFit, HarmonicityClass, HarmonicityConfig,
};
use crate::perception::{
    aggregate_perception, AssociationConfig, ListenerReport, PerceptionAggregate,
};
use crate::scalar::Real;
use crate::spectral::{
    apply_equal_loudness_weighting, compute_averaged_power_spectrum, compute_power_spectrum,
    extract_partials, smooth_spectrum, LoudnessContour, PeakConfig, WindowConfig,
};
use crate::temporal::{
    approximate_gcd, autocorrelation_f0, F0Estimate, F0Method, GcdFit, SearchRange, SpacingProfile,
};
use crate::tone::{freq_to_pitch, power_db, Frequency, Partial, PitchName, Spectrum, SpectrumKind};
use crate::tracker::{summarize_trace, TrackerConfig, TrackerSummary, TrackerTrace};

pub const TOOLKIT_NAME: &str = "multiphonic";
pub const TOOLKIT_VERSION: &str = env!("CARGO_PKG_VERSION");
pub const REPORT_SCHEMA_VERSION: u32 = 1;

/// Every tunable of [`run_analysis`], with defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields, bound = "T: Real")]
pub struct AnalysisConfig<T> {
    pub window: WindowConfig,
    /// Average frame spectra over the whole file instead of analysing only
    /// the first frame.
    pub average_frames: bool,
    pub loudness_phon: T,
    pub smoothing_bandwidth_hz: T,
    pub peaks: PeakConfig<T>,
    pub harmonicity: HarmonicityConfig<T>,
    pub temporal_search: SearchRange<T>,
    /// Samples fed to the autocorrelation, from the start of the file.
    pub temporal_frame_length: usize,
    pub gcd_tolerance_cents: T,
    /// Run the carrier/modulation decomposition.
    pub carrier: Option<CarrierConfig<T>>,
    pub association: AssociationConfig<T>,
    pub tracker: TrackerConfig<T>,
    /// Upper frequency limit of the spectrum plot panels.
    pub plot_max_hz: T,
}

impl<T: Real> Default for AnalysisConfig<T> {
    fn default() -> Self {
        AnalysisConfig {
            window: WindowConfig::default(),
            average_frames: true,
            loudness_phon: T::lit(50.0),
            smoothing_bandwidth_hz: T::lit(30.0),
            peaks: PeakConfig::default(),
            harmonicity: HarmonicityConfig::default(),
            temporal_search: SearchRange {
                min: T::lit(25.0),
                max: T::lit(2000.0),
            },
            temporal_frame_length: 16384,
            gcd_tolerance_cents: T::lit(25.0),
            carrier: None,
            association: AssociationConfig::default(),
            tracker: TrackerConfig::default(),
            plot_max_hz: T::lit(5000.0),
        }
    }
}

impl<T: Real> AnalysisConfig<T> {
    pub fn validate(&self) -> Result<()> {
        self.window.validate()?;
        self.peaks.validate()?;
        self.harmonicity.search.validate()?;
        self.temporal_search.validate()?;
        LoudnessContour::iso226(self.loudness_phon)?;
        if !(self.smoothing_bandwidth_hz.is_finite() && self.smoothing_bandwidth_hz > T::zero()) {
            return Err(Error::Config("smoothing_bandwidth_hz must be > 0".into()));
        }
        if !(self.gcd_tolerance_cents.is_finite() && self.gcd_tolerance_cents >= T::zero()) {
            return Err(Error::Config("gcd_tolerance_cents must be >= 0".into()));
        }
        if self.temporal_frame_length < 2 {
            return Err(Error::Config("temporal_frame_length must be >= 2".into()));
        }
        Frequency::new(self.association.reference_hz)
            .map_err(|_| Error::Config("association.reference_hz must be > 0".into()))?;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleInfo {
    pub id: String,
    pub file: Option<String>,
    pub sample_rate: u32,
    pub channels: u16,
    pub samples: usize,
    pub duration_s: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct SpectrumSummary<T> {
    pub kind: SpectrumKind,
    pub bins: usize,
    pub bin_spacing_hz: T,
    pub total_power: T,
    pub peak_frequency_hz: T,
    pub peak_power_db: T,
}

impl<T: Real> SpectrumSummary<T> {
    fn of(s: &Spectrum<T>) -> Self {
        let (k, p) = s.max_bin().unwrap_or((0, T::zero()));
        SpectrumSummary {
            kind: s.kind(),
            bins: s.len(),
            bin_spacing_hz: s.bin_spacing(),
            total_power: s.total_power(),
            peak_frequency_hz: s.bin_frequencies().get(k).copied().unwrap_or(T::zero()),
            peak_power_db: T::lit(power_db(p.to_f64_lossy())),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct SpectraSummary<T> {
    pub raw: SpectrumSummary<T>,
    pub weighted: SpectrumSummary<T>,
    pub smoothed: SpectrumSummary<T>,
}

/// A partial as it appears in the report.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct PartialRecord<T> {
    pub frequency_hz: T,
    pub power: T,
    pub power_db: T,
    pub pitch: PitchName<T>,
    pub harmonic: Option<u32>,
}

impl<T: Real> PartialRecord<T> {
    fn of(p: &Partial<T>, harmonic: Option<u32>, reference: Frequency<T>) -> Self {
        PartialRecord {
            frequency_hz: p.hz(),
            power: p.power,
            power_db: T::lit(power_db(p.power.to_f64_lossy())),
            pitch: freq_to_pitch(p.frequency, reference),
            harmonic,
        }
    }

    pub fn to_partial(&self) -> Result<Partial<T>> {
        let mut p = Partial::new(self.frequency_hz, self.power)?;
        p.harmonic_index = self.harmonic;
        Ok(p)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct AnalysisReport<T> {
    pub toolkit: String,
    pub version: String,
    pub schema_version: u32,
    pub sample: SampleInfo,
    pub config: AnalysisConfig<T>,
    pub spectra: SpectraSummary<T>,
    /// Peaks of the loudness-weighted spectrum; these feed the fit.
    pub partials: Vec<PartialRecord<T>>,
    /// Peaks of the unweighted spectrum.
    pub raw_partials: Vec<PartialRecord<T>>,
    pub spacing: Option<SpacingProfile<T>>,
    pub gcd: Option<GcdFit<T>>,
    pub temporal_f0: F0Estimate<T>,
    pub spectral_f0: F0Estimate<T>,
    pub fit_range: Option<SearchRange<T>>,
    pub fit: Option<HarmonicFit<T>>,
    pub classification: Option<HarmonicityClass<T>>,
    pub carrier: Option<CarrierModulation<T>>,
    pub perception: Option<PerceptionAggregate<T>>,
    pub trackers: Vec<TrackerSummary<T>>,
    pub warnings: Vec<String>,
}

impl<T: Real> AnalysisReport<T> {
    /// The weighted partials with their harmonic numbers.
    pub fn fit_partials(&self) -> Result<Vec<Partial<T>>> {
        self.partials
            .iter()
            .map(PartialRecord::to_partial)
            .collect()
    }

    /// Adds the perception aggregate for `reports`, which must all belong to
    /// this sample.
    pub fn attach_perception(&mut self, reports: &[ListenerReport<T>]) -> Result<()> {
        if let Some(other) = reports.iter().find(|r| r.sample_id != self.sample.id) {
            return Err(Error::Format(format!(
                "report row {} is for sample {:?}, analysis is for {:?}",
                other.row, other.sample_id, self.sample.id
            )));
        }
        let fit = self.fit.as_ref().ok_or_else(|| {
            Error::DegenerateFit("perception needs a harmonic fit and the analysis has none".into())
        })?;
        let partials = self.fit_partials()?;
        self.perception = Some(aggregate_perception(
            reports,
            fit,
            &partials,
            &self.config.association,
        )?);
        Ok(())
    }

    pub fn attach_trace(&mut self, trace: &TrackerTrace<T>) -> Result<()> {
        let partials = self.fit_partials()?;
        let fit = self.fit.as_ref().map(|f| (f, partials.as_slice()));
        let summary = summarize_trace(
            trace,
            fit,
            self.perception.as_ref(),
            &self.config.tracker,
            &self.config.association,
        )?;
        if let Some(w) = &summary.warning {
            self.warnings
                .push(format!("tracker {}: {w}", trace.tracker_name));
        }
        self.trackers.push(summary);
        Ok(())
    }
}

/// The report plus the spectra it summarizes.
#[derive(Debug, Clone)]
pub struct AnalysisOutput<T> {
    pub report: AnalysisReport<T>,
    pub raw: Spectrum<T>,
    pub weighted: Spectrum<T>,
    pub smoothed: Spectrum<T>,
}

/// Runs every analysis stage on `samples`. Failures of the fit stages become
/// report warnings; input and configuration problems are errors.
pub fn run_analysis<T: Real>(
    samples: &[T],
    sample: SampleInfo,
    cfg: &AnalysisConfig<T>,
) -> Result<AnalysisOutput<T>> {
    cfg.validate()?;
    let rate = T::from_usize_lossy(sample.sample_rate as usize);
    let reference = Frequency::new(cfg.association.reference_hz)?;
    let mut warnings = Vec::new();

    let raw = if cfg.average_frames {
        compute_averaged_power_spectrum(samples, rate, &cfg.window)?
    } else {
        compute_power_spectrum(samples, rate, &cfg.window)?
    };
    let weighted =
        apply_equal_loudness_weighting(&raw, &LoudnessContour::iso226(cfg.loudness_phon)?)?;
    let smoothed = smooth_spectrum(&weighted, cfg.smoothing_bandwidth_hz)?;

    let partials = extract_partials(&weighted, &cfg.peaks)?;
    let raw_partials = extract_partials(&raw, &cfg.peaks)?;

    let temporal_frame = &samples[..samples.len().min(cfg.temporal_frame_length)];
    let temporal_f0 = match autocorrelation_f0(temporal_frame, rate, cfg.temporal_search) {
        Ok(e) => e,
        Err(e @ Error::InsufficientData(_)) => {
            warnings.push(format!("temporal f0: {e}"));
            F0Estimate::none(F0Method::Autocorrelation)
        }
        Err(e) => return Err(e),
    };

    let mut spacing = None;
    let mut gcd = None;
    let mut fit = None;
    let mut fit_range = None;
    let mut classification = None;
    let mut spectral_f0 = F0Estimate::none(F0Method::HarmonicFit);
    match analyze_harmonicity(&partials, &cfg.harmonicity) {
        Ok(h) => {
            match approximate_gcd(&h.profile.spacings, cfg.gcd_tolerance_cents) {
                Ok(g) => gcd = Some(g),
                Err(e) => warnings.push(format!("gcd: {e}")),
            }
            spectral_f0 = F0Estimate {
                frequency: Some(h.fit.f0),
                salience: h.fit.assigned_fraction(),
                method: F0Method::HarmonicFit,
            };
            spacing = Some(h.profile);
            fit_range = Some(h.fit_range);
            classification = Some(h.class);
            fit = Some(h.fit);
        }
        Err(e @ (Error::InsufficientData(_) | Error::DegenerateFit(_))) => {
            warnings.push(format!("harmonicity: {e}"))
        }
        Err(e) => return Err(e),
    }

    let carrier = match &cfg.carrier {
        Some(c) => match decompose_carrier_modulation(samples, rate, c) {
            Ok(cm) => Some(cm),
            Err(e @ Error::InsufficientData(_)) => {
                warnings.push(format!("carrier: {e}"));
                None
            }
            Err(e) => return Err(e),
        },
        None => None,
    };

    let records: Vec<PartialRecord<T>> = partials
        .iter()
        .enumerate()
        .map(|(i, p)| PartialRecord::of(p, fit.as_ref().and_then(|f| f.harmonic_of(i)), reference))
        .collect();
    let raw_records = raw_partials
        .iter()
        .map(|p| PartialRecord::of(p, None, reference))
        .collect();

    let report = AnalysisReport {
        toolkit: TOOLKIT_NAME.into(),
        version: TOOLKIT_VERSION.into(),
        schema_version: REPORT_SCHEMA_VERSION,
        sample,
        config: cfg.clone(),
        spectra: SpectraSummary {
            raw: SpectrumSummary::of(&raw),
            weighted: SpectrumSummary::of(&weighted),
            smoothed: SpectrumSummary::of(&smoothed),
        },
        partials: records,
        raw_partials: raw_records,
        spacing,
        gcd,
        temporal_f0,
        spectral_f0,
        fit_range,
        fit,
        classification,
        carrier,
        perception: None,
        trackers: Vec::new(),
        warnings,
    };
    Ok(AnalysisOutput {
        report,
        raw,
        weighted,
        smoothed,
    })
}

fn spectrum_panel<T: Real>(s: &Spectrum<T>, max_hz: T) -> String {
    let mut out = String::from("freq_hz,power_db\n");
    for (f, p) in s.bin_frequencies().iter().zip(s.bin_powers()) {
        if *f > max_hz {
            break;
        }
        out.push_str(&format!(
            "{},{}\n",
            f.to_f64_lossy(),
            power_db(p.to_f64_lossy())
        ));
    }
    out
}

/// Plot-data panels as `(file name, CSV)` pairs: the three spectra, the
/// partials with dot sizes proportional to their share of the strongest
/// partial's power, the spacing profile, and the f0 markers.
pub fn plot_panels<T: Real>(out: &AnalysisOutput<T>) -> Vec<(String, String)> {
    let r = &out.report;
    let max_hz = r.config.plot_max_hz;
    let mut panels = vec![
        (
            "spectrum_raw.csv".to_string(),
            spectrum_panel(&out.raw, max_hz),
        ),
        (
            "spectrum_weighted.csv".to_string(),
            spectrum_panel(&out.weighted, max_hz),
        ),
        (
            "spectrum_smoothed.csv".to_string(),
            spectrum_panel(&out.smoothed, max_hz),
        ),
    ];

    let strongest = r.partials.iter().map(|p| p.power).fold(T::zero(), T::max);
    let mut partials = String::from("freq_hz,power_db,dot_size,pitch,harmonic\n");
    for p in &r.partials {
        let size = if strongest > T::zero() {
            p.power / strongest
        } else {
            T::zero()
        };
        partials.push_str(&format!(
            "{},{},{},{:.0},{}\n",
            p.frequency_hz.to_f64_lossy(),
            p.power_db.to_f64_lossy(),
            size.to_f64_lossy(),
            p.pitch,
            p.harmonic.map_or(String::new(), |h| h.to_string())
        ));
    }
    panels.push(("partials.csv".into(), partials));

    let mut spacing = String::from("index,lower_hz,upper_hz,spacing_hz\n");
    if r.spacing.is_some() {
        for (i, w) in r.partials.windows(2).enumerate() {
            spacing.push_str(&format!(
                "{},{},{},{}\n",
                i,
                w[0].frequency_hz.to_f64_lossy(),
                w[1].frequency_hz.to_f64_lossy(),
                (w[1].frequency_hz - w[0].frequency_hz).to_f64_lossy()
            ));
        }
    }
    panels.push(("spacing.csv".into(), spacing));

    let reference =
        Frequency::new(r.config.association.reference_hz).unwrap_or_else(|_| Frequency::a4());
    let mut markers = String::from("source,freq_hz,pitch\n");
    let mut marker = |name: &str, hz: Option<T>| {
        if let Some(hz) = hz {
            if let Ok(f) = Frequency::new(hz) {
                markers.push_str(&format!(
                    "{name},{},{:.0}\n",
                    hz.to_f64_lossy(),
                    freq_to_pitch(f, reference)
                ));
            }
        }
    };
    marker("temporal_f0", r.temporal_f0.hz());
    marker("spectral_f0", r.spectral_f0.hz());
    marker("spacing_center", r.spacing.as_ref().map(|s| s.center));
    marker("gcd", r.gcd.map(|g| g.gcd.hz()));
    if let Some(c) = &r.carrier {
        marker("carrier", c.carrier.hz());
        marker("modulation", c.modulation.hz());
    }
    panels.push(("f0_markers.csv".into(), markers));
    panels
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harmonicity::HarmonicityLabel;
    use crate::synthesis::generate_harmonic_tone;

    fn info(n: usize, rate: u32) -> SampleInfo {
        SampleInfo {
            id: "f2".into(),
            file: None,
            sample_rate: rate,
            channels: 1,
            samples: n,
            duration_s: n as f64 / f64::from(rate),
        }
    }

    #[test]
    fn harmonic_tone_report() {
        let x: Vec<f64> = generate_harmonic_tone(87.31, 12, 3.0, 1.0, 48000.0).unwrap();
        let out = run_analysis(&x, info(x.len(), 48000), &AnalysisConfig::default()).unwrap();
        let r = &out.report;
        assert!(r.warnings.is_empty(), "{:?}", r.warnings);
        let f0 = r.fit.as_ref().unwrap().f0.hz();
        assert!((f0 - 87.31).abs() < 0.2, "{f0}");
        assert_eq!(
            r.classification.unwrap().label,
            HarmonicityLabel::QuasiHarmonic
        );
        assert!((r.temporal_f0.hz().unwrap() - 87.31).abs() < 0.2);
        let panels = plot_panels(&out);
        assert_eq!(panels.len(), 6);
        assert!(panels.iter().all(|(_, csv)| csv.lines().count() >= 2));
    }

    #[test]
    fn too_short_is_insufficient_data() {
        let x = vec![0.0f64; 2400];
        assert!(matches!(
            run_analysis(&x, info(x.len(), 48000), &AnalysisConfig::default()),
            Err(Error::InsufficientData(_))
        ));
    }

    #[test]
    fn silence_warns_instead_of_failing() {
        let x = vec![0.0f64; 48000];
        let out = run_analysis(&x, info(x.len(), 48000), &AnalysisConfig::default()).unwrap();
        assert!(out.report.fit.is_none());
        assert!(!out.report.warnings.is_empty());
    }

    #[test]
    fn config_round_trips_through_json() {
        let cfg = AnalysisConfig::<f64>::default();
        let json = serde_json::to_string(&cfg).unwrap();
        let back: AnalysisConfig<f64> = serde_json::from_str(&json).unwrap();
        assert_eq!(cfg, back);
        let partial: AnalysisConfig<f64> =
            serde_json::from_str(r#"{"window":{"window_length":16384}}"#).unwrap();
        assert_eq!(partial.window.window_length, 16384);
        assert_eq!(partial.window.hop, 4096);
        assert!(serde_json::from_str::<AnalysisConfig<f64>>(r#"{"windw":{}}"#).is_err());
    }
}
