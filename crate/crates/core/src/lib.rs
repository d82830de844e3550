//! Pitch analysis for multiphonic and quasi-harmonic tones.
//!
//! The crate covers loudness-weighted spectral analysis, temporal f0 models,
//! harmonic-series fitting and classification, a synthesis bench for test
//! tones, ingestion of listening-test reports and pitch-tracker traces, and a
//! report pipeline tying them together. Numeric code is generic over [`Real`]
//! (`f32` or `f64`); the aliases below fix the common `f64` choice.

// Negated comparisons deliberately treat NaN as out of range.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod audio;
pub mod error;
pub mod harmonicity;
pub mod perception;
pub mod report;
pub mod scalar;
pub mod spectral;
pub mod synthesis;
pub mod temporal;
pub mod tone;
pub mod tracker;

pub use error::{Error, Result};
pub use scalar::Real;
pub use tone::{
    cents_between, freq_to_pitch, hz_to_pitch, pitch_to_freq, Frequency, Partial, PitchClass,
    PitchName, Spectrum, SpectrumKind,
};

pub type Spectrum64 = Spectrum<f64>;
pub type Partial64 = Partial<f64>;
pub type PitchName64 = PitchName<f64>;
pub type HarmonicFit64 = harmonicity::HarmonicFit<f64>;
pub type AnalysisConfig64 = report::AnalysisConfig<f64>;
pub type AnalysisReport64 = report::AnalysisReport<f64>;
pub type ListenerReport64 = perception::ListenerReport<f64>;
pub type TrackerTrace64 = tracker::TrackerTrace<f64>;
pub type Spectrum32 = Spectrum<f32>;
pub type Partial32 = Partial<f32>;
