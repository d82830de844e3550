//! Test-tone generators for each tone family and additive resynthesis.
//!
//! Every generator sums cosines, optionally drives the mix through a `tanh`
//! waveshaper and peak-normalizes the result to -3 dBFS. Synthesis runs in
//! `f64` and converts at the end.

use std::f64::consts::TAU;

use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Linear peak level of every generated signal (-3 dBFS).
pub const OUTPUT_PEAK: f64 = 0.707_945_784_384_137_9;

/// An extra sinusoid mixed into an FM tone.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExtraPartial {
    pub frequency: f64,
    /// Level relative to the modulated component, in dB.
    pub gain_db: f64,
}

/// Per-family parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ToneKind {
    Harmonic {
        f0: f64,
        partials: usize,
        #[serde(default)]
        rolloff_db_per_octave: f64,
        /// Per-partial levels in dB; overrides the rolloff when given.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        gains_db: Option<Vec<f64>>,
    },
    OddHarmonic {
        f0: f64,
        partials: usize,
        #[serde(default)]
        rolloff_db_per_octave: f64,
    },
    PowerChord {
        root: f64,
        #[serde(default)]
        add_octave: bool,
    },
    Fm {
        carrier: f64,
        modulator: f64,
        index: f64,
        /// Keep every component on a multiple of the modulator by blending
        /// the two harmonic carriers that bracket `carrier`.
        #[serde(default)]
        harmonic_lock: bool,
        #[serde(default, skip_serializing_if = "Vec::is_empty")]
        extra_partials: Vec<ExtraPartial>,
    },
}

/// A complete, self-describing tone recipe.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToneSpec {
    #[serde(flatten)]
    pub kind: ToneKind,
    /// `tanh` waveshaper drive; 0 leaves the mix linear.
    #[serde(default)]
    pub drive: f64,
    /// DC bias before the waveshaper, introducing even-order products.
    #[serde(default)]
    pub asymmetry: f64,
    pub duration: f64,
    pub rate: f64,
    /// Seed for random initial phases; cosine phase when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub phase_seed: Option<u64>,
}

impl ToneSpec {
    pub fn new(kind: ToneKind, duration: f64, rate: f64) -> Self {
        ToneSpec {
            kind,
            drive: 0.0,
            asymmetry: 0.0,
            duration,
            rate,
            phase_seed: None,
        }
    }

    pub fn with_drive(mut self, drive: f64) -> Self {
        self.drive = drive;
        self
    }

    pub fn with_phase_seed(mut self, seed: u64) -> Self {
        self.phase_seed = Some(seed);
        self
    }

    /// Checks every field and the Nyquist guard, listing all problems at once.
    pub fn validate(&self) -> Result<()> {
        let mut problems = Vec::new();
        if !(self.duration.is_finite() && self.duration > 0.0) {
            problems.push(format!("duration must be > 0 s, got {}", self.duration));
        }
        if !(self.rate.is_finite() && self.rate > 0.0) {
            problems.push(format!("rate must be > 0 Hz, got {}", self.rate));
        }
        if !(self.drive.is_finite() && self.drive >= 0.0) {
            problems.push(format!("drive must be >= 0, got {}", self.drive));
        }
        if !self.asymmetry.is_finite() {
            problems.push("asymmetry must be finite".into());
        }
        let positive = |name: &str, v: f64, problems: &mut Vec<String>| {
            if !(v.is_finite() && v > 0.0) {
                problems.push(format!("{name} must be > 0 Hz, got {v}"));
            }
        };
        let highest = match &self.kind {
            ToneKind::Harmonic {
                f0,
                partials,
                gains_db,
                rolloff_db_per_octave,
            } => {
                positive("f0", *f0, &mut problems);
                if *partials < 1 {
                    problems.push("partials must be >= 1".into());
                }
                if let Some(g) = gains_db {
                    if g.len() != *partials {
                        problems.push(format!(
                            "gains_db has {} entries for {} partials",
                            g.len(),
                            partials
                        ));
                    }
                }
                if !rolloff_db_per_octave.is_finite() {
                    problems.push("rolloff_db_per_octave must be finite".into());
                }
                *f0 * *partials as f64
            }
            ToneKind::OddHarmonic {
                f0,
                partials,
                rolloff_db_per_octave,
            } => {
                positive("f0", *f0, &mut problems);
                if *partials < 1 {
                    problems.push("partials must be >= 1".into());
                }
                if !rolloff_db_per_octave.is_finite() {
                    problems.push("rolloff_db_per_octave must be finite".into());
                }
                *f0 * (2 * partials.max(&1) - 1) as f64
            }
            ToneKind::PowerChord { root, add_octave } => {
                positive("root", *root, &mut problems);
                *root * if *add_octave { 2.0 } else { 1.5 }
            }
            ToneKind::Fm {
                carrier,
                modulator,
                index,
                extra_partials,
                ..
            } => {
                positive("carrier", *carrier, &mut problems);
                positive("modulator", *modulator, &mut problems);
                if !(index.is_finite() && *index >= 0.0) {
                    problems.push(format!("index must be >= 0, got {index}"));
                }
                for e in extra_partials {
                    positive("extra partial frequency", e.frequency, &mut problems);
                    if !e.gain_db.is_finite() {
                        problems.push("extra partial gain_db must be finite".into());
                    }
                }
                let sidebands = *carrier + (*index + 2.0) * *modulator;
                extra_partials
                    .iter()
                    .map(|e| e.frequency)
                    .fold(sidebands, f64::max)
            }
        };
        if problems.is_empty() {
            let nyquist = self.rate / 2.0;
            // A waveshaper spreads energy up to at least the third harmonic.
            let expansion = if self.drive > 0.0 { 3.0 } else { 1.0 };
            if !(highest * expansion < nyquist) {
                problems.push(format!(
                    "highest component {highest} Hz (x{expansion} for distortion) exceeds Nyquist {nyquist} Hz"
                ));
            }
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidSpec(problems.join("; ")))
        }
    }

    fn sample_count(&self) -> usize {
        (self.duration * self.rate).round() as usize
    }

    /// Renders the tone.
    pub fn render<T: Real>(&self) -> Result<Vec<T>> {
        self.validate()?;
        let mut phases = PhaseSource::new(self.phase_seed);
        let n = self.sample_count();
        let rate = self.rate;
        let mut x = match &self.kind {
            ToneKind::Harmonic {
                f0,
                partials,
                rolloff_db_per_octave,
                gains_db,
            } => {
                let comps: Vec<(f64, f64)> = (1..=*partials)
                    .map(|k| {
                        let db = match gains_db {
                            Some(g) => g[k - 1],
                            None => -rolloff_db_per_octave * (k as f64).log2(),
                        };
                        (k as f64 * f0, db_to_amplitude(db))
                    })
                    .collect();
                sum_cosines(&comps, &mut phases, n, rate)
            }
            ToneKind::OddHarmonic {
                f0,
                partials,
                rolloff_db_per_octave,
            } => {
                let comps: Vec<(f64, f64)> = (1..=*partials)
                    .map(|k| {
                        let m = (2 * k - 1) as f64;
                        (m * f0, db_to_amplitude(-rolloff_db_per_octave * m.log2()))
                    })
                    .collect();
                sum_cosines(&comps, &mut phases, n, rate)
            }
            ToneKind::PowerChord { root, add_octave } => {
                let mut comps = vec![(*root, 1.0), (root * 1.5, 1.0)];
                if *add_octave {
                    comps.push((root * 2.0, 1.0));
                }
                sum_cosines(&comps, &mut phases, n, rate)
            }
            ToneKind::Fm {
                carrier,
                modulator,
                index,
                harmonic_lock,
                extra_partials,
            } => {
                let mut x = fm(
                    *carrier,
                    *modulator,
                    *index,
                    *harmonic_lock,
                    &mut phases,
                    n,
                    rate,
                );
                let extras: Vec<(f64, f64)> = extra_partials
                    .iter()
                    .map(|e| (e.frequency, db_to_amplitude(e.gain_db)))
                    .collect();
                let y = sum_cosines(&extras, &mut phases, n, rate);
                x.iter_mut().zip(y).for_each(|(a, b)| *a += b);
                x
            }
        };
        waveshape(&mut x, self.drive, self.asymmetry);
        normalize_peak(&mut x);
        Ok(x.into_iter().map(T::lit).collect())
    }
}

fn db_to_amplitude(db: f64) -> f64 {
    10f64.powf(db / 20.0)
}

/// Zero phase, or uniformly random phases from a seeded ChaCha8 stream.
struct PhaseSource(Option<ChaCha8Rng>);

impl PhaseSource {
    fn new(seed: Option<u64>) -> Self {
        PhaseSource(seed.map(ChaCha8Rng::seed_from_u64))
    }

    fn next(&mut self) -> f64 {
        match &mut self.0 {
            Some(rng) => rng.random::<f64>() * TAU,
            None => 0.0,
        }
    }
}

fn sum_cosines(
    components: &[(f64, f64)],
    phases: &mut PhaseSource,
    n: usize,
    rate: f64,
) -> Vec<f64> {
    let mut x = vec![0.0; n];
    for (f, a) in components {
        let phi = phases.next();
        let w = TAU * f / rate;
        for (i, v) in x.iter_mut().enumerate() {
            *v += a * (w * i as f64 + phi).cos();
        }
    }
    x
}

fn fm(
    carrier: f64,
    modulator: f64,
    index: f64,
    lock: bool,
    phases: &mut PhaseSource,
    n: usize,
    rate: f64,
) -> Vec<f64> {
    let phi_c = phases.next();
    let phi_m = phases.next();
    let wm = TAU * modulator / rate;
    let modulation = |i: usize| index * (wm * i as f64 + phi_m).sin();
    if !lock {
        let wc = TAU * carrier / rate;
        return (0..n)
            .map(|i| (wc * i as f64 + phi_c + modulation(i)).cos())
            .collect();
    }
    // Two carriers on the modulator's harmonic grid, in quadrature so their
    // spectral envelopes add in power and the blend peaks at `carrier`.
    let ratio = carrier / modulator;
    let k = ratio.floor();
    let frac = ratio - k;
    let (a_lo, a_hi) = ((1.0 - frac).sqrt(), frac.sqrt());
    let (w_lo, w_hi) = (
        TAU * k * modulator / rate,
        TAU * (k + 1.0) * modulator / rate,
    );
    (0..n)
        .map(|i| {
            let t = i as f64;
            let m = modulation(i);
            a_lo * (w_lo * t + phi_c + m).cos() + a_hi * (w_hi * t + phi_c + m).sin()
        })
        .collect()
}

fn waveshape(x: &mut [f64], drive: f64, asymmetry: f64) {
    if drive <= 0.0 {
        return;
    }
    let peak = x.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if peak == 0.0 {
        return;
    }
    let offset = (drive * asymmetry).tanh();
    for v in x.iter_mut() {
        *v = (drive * (*v / peak + asymmetry)).tanh() - offset;
    }
}

fn normalize_peak(x: &mut [f64]) {
    let peak = x.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if peak > 0.0 {
        let g = OUTPUT_PEAK / peak;
        x.iter_mut().for_each(|v| *v *= g);
    }
}

pub fn generate_harmonic_tone<T: Real>(
    f0: T,
    n: usize,
    rolloff_db_per_oct: T,
    duration: T,
    rate: T,
) -> Result<Vec<T>> {
    ToneSpec::new(
        ToneKind::Harmonic {
            f0: f0.to_f64_lossy(),
            partials: n,
            rolloff_db_per_octave: rolloff_db_per_oct.to_f64_lossy(),
            gains_db: None,
        },
        duration.to_f64_lossy(),
        rate.to_f64_lossy(),
    )
    .render()
}

pub fn generate_odd_harmonic_tone<T: Real>(
    f0: T,
    n_odd: usize,
    rolloff_db_per_oct: T,
    duration: T,
    rate: T,
) -> Result<Vec<T>> {
    ToneSpec::new(
        ToneKind::OddHarmonic {
            f0: f0.to_f64_lossy(),
            partials: n_odd,
            rolloff_db_per_octave: rolloff_db_per_oct.to_f64_lossy(),
        },
        duration.to_f64_lossy(),
        rate.to_f64_lossy(),
    )
    .render()
}

pub fn generate_power_chord<T: Real>(
    root: T,
    add_octave: bool,
    drive: T,
    duration: T,
    rate: T,
) -> Result<Vec<T>> {
    ToneSpec::new(
        ToneKind::PowerChord {
            root: root.to_f64_lossy(),
            add_octave,
        },
        duration.to_f64_lossy(),
        rate.to_f64_lossy(),
    )
    .with_drive(drive.to_f64_lossy())
    .render()
}

pub fn generate_fm_tone<T: Real>(
    carrier: T,
    modulator: T,
    index: T,
    drive: T,
    duration: T,
    rate: T,
) -> Result<Vec<T>> {
    ToneSpec::new(
        ToneKind::Fm {
            carrier: carrier.to_f64_lossy(),
            modulator: modulator.to_f64_lossy(),
            index: index.to_f64_lossy(),
            harmonic_lock: false,
            extra_partials: Vec::new(),
        },
        duration.to_f64_lossy(),
        rate.to_f64_lossy(),
    )
    .with_drive(drive.to_f64_lossy())
    .render()
}

/// One sinusoid of a [`PartialSet`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct SynthPartial<T> {
    pub frequency: T,
    /// Mean-square power; amplitude is `sqrt(2 * power)`.
    pub power: T,
    #[serde(default)]
    pub phase: T,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct PartialSet<T> {
    pub partials: Vec<SynthPartial<T>>,
}

/// Sum of the set's sinusoids, peak-normalized to -3 dBFS. An empty set is silence.
pub fn resynthesize_partials<T: Real>(ps: &PartialSet<T>, duration: T, rate: T) -> Result<Vec<T>> {
    let rate = rate.to_f64_lossy();
    let duration = duration.to_f64_lossy();
    if !(rate.is_finite() && rate > 0.0 && duration.is_finite() && duration > 0.0) {
        return Err(Error::InvalidSpec(format!(
            "bad duration {duration} s or rate {rate} Hz"
        )));
    }
    for p in &ps.partials {
        let f = p.frequency.to_f64_lossy();
        if !(f.is_finite() && f > 0.0 && f < rate / 2.0) {
            return Err(Error::InvalidSpec(format!(
                "partial at {f} Hz outside (0, {}) Hz",
                rate / 2.0
            )));
        }
        if !(p.power.is_finite() && p.power >= T::zero()) {
            return Err(Error::InvalidSpec(format!(
                "partial power {} must be >= 0",
                p.power
            )));
        }
    }
    let n = (duration * rate).round() as usize;
    let mut x = vec![0.0; n];
    for p in &ps.partials {
        let a = (2.0 * p.power.to_f64_lossy()).sqrt();
        let w = TAU * p.frequency.to_f64_lossy() / rate;
        let phi = p.phase.to_f64_lossy();
        for (i, v) in x.iter_mut().enumerate() {
            *v += a * (w * i as f64 + phi).cos();
        }
    }
    normalize_peak(&mut x);
    Ok(x.into_iter().map(T::lit).collect())
}
