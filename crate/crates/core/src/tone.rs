//! Core domain types and frequency/pitch-name arithmetic.
//!
//! Pitch names use scientific pitch notation (C4 is middle C) in 12-tone equal
//! temperament against a tuning reference for A4 (440 Hz unless overridden). A
//! [`PitchName`] carries the nearest equal-tempered note plus a signed cent offset
//! in `[-50, +50)`, so an exact quarter-tone lands on the upper note at -50 ct.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::scalar::Real;

/// MIDI note number of A4.
const A4_MIDI: i32 = 69;

/// A strictly positive, finite frequency in Hz.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize)]
#[serde(transparent)]
pub struct Frequency<T>(T);

impl<T: Real> Frequency<T> {
    pub fn new(hz: T) -> Result<Self> {
        if hz.is_finite() && hz > T::zero() {
            Ok(Frequency(hz))
        } else {
            Err(Error::InvalidFrequency(hz.to_f64_lossy()))
        }
    }

    /// The default tuning reference, A4 = 440 Hz.
    pub fn a4() -> Self {
        Frequency(T::lit(440.0))
    }

    #[inline]
    pub fn hz(self) -> T {
        self.0
    }

    /// Scales by a positive finite factor.
    pub fn scaled(self, factor: T) -> Result<Self> {
        Frequency::new(self.0 * factor)
    }
}

impl<'de, T: Real> Deserialize<'de> for Frequency<T> {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let hz = T::deserialize(deserializer)?;
        Frequency::new(hz).map_err(serde::de::Error::custom)
    }
}

impl<T: Real> fmt::Display for Frequency<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match f.precision() {
            Some(p) => write!(f, "{:.*} Hz", p, self.0),
            None => write!(f, "{} Hz", self.0),
        }
    }
}

/// Signed interval from `a` to `b` in cents: `1200 * log2(b / a)`.
pub fn cents_between<T: Real>(a: Frequency<T>, b: Frequency<T>) -> T {
    cents(a.0, b.0)
}

/// Unchecked interval in cents between two positive values in Hz.
#[inline]
pub(crate) fn cents<T: Real>(a: T, b: T) -> T {
    T::lit(1200.0) * (b / a).log2()
}

/// Twelve equal-tempered pitch classes, spelled with sharps.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum PitchClass {
    C,
    CSharp,
    D,
    DSharp,
    E,
    F,
    FSharp,
    G,
    GSharp,
    A,
    ASharp,
    B,
}

impl PitchClass {
    pub const ALL: [PitchClass; 12] = [
        PitchClass::C,
        PitchClass::CSharp,
        PitchClass::D,
        PitchClass::DSharp,
        PitchClass::E,
        PitchClass::F,
        PitchClass::FSharp,
        PitchClass::G,
        PitchClass::GSharp,
        PitchClass::A,
        PitchClass::ASharp,
        PitchClass::B,
    ];

    /// Semitones above C.
    pub fn index(self) -> i32 {
        self as i32
    }

    pub fn from_index(index: i32) -> Self {
        Self::ALL[index.rem_euclid(12) as usize]
    }

    pub fn name(self) -> &'static str {
        match self {
            PitchClass::C => "C",
            PitchClass::CSharp => "C#",
            PitchClass::D => "D",
            PitchClass::DSharp => "D#",
            PitchClass::E => "E",
            PitchClass::F => "F",
            PitchClass::FSharp => "F#",
            PitchClass::G => "G",
            PitchClass::GSharp => "G#",
            PitchClass::A => "A",
            PitchClass::ASharp => "A#",
            PitchClass::B => "B",
        }
    }
}

impl fmt::Display for PitchClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// An equal-tempered note with a signed cent offset in `[-50, +50)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PitchName<T> {
    pub pitch_class: PitchClass,
    /// Scientific pitch notation octave (C4 = middle C).
    pub octave: i32,
    pub cents: T,
}

impl<T: Real> PitchName<T> {
    /// Builds a pitch name, normalizing the cent offset into `[-50, +50)` by
    /// moving to a neighbouring note when needed.
    pub fn new(pitch_class: PitchClass, octave: i32, cents: T) -> Result<Self> {
        if !cents.is_finite() {
            return Err(Error::Parse(format!("non-finite cent offset {cents}")));
        }
        let midi = (octave + 1) * 12 + pitch_class.index();
        Ok(Self::from_midi_and_cents(midi, cents))
    }

    /// An exact equal-tempered note (zero cent offset).
    pub fn note(pitch_class: PitchClass, octave: i32) -> Self {
        PitchName {
            pitch_class,
            octave,
            cents: T::zero(),
        }
    }

    fn from_midi_and_cents(midi: i32, cents: T) -> Self {
        let hundred = T::lit(100.0);
        let fifty = T::lit(50.0);
        let mut midi = midi;
        let mut c = cents;
        // Shift whole semitones first, then settle the boundary.
        let shift = ((c + fifty) / hundred).floor();
        if shift != T::zero() {
            midi += shift.to_i32().unwrap_or(0);
            c = c - shift * hundred;
        }
        if c >= fifty {
            midi += 1;
            c = c - hundred;
        } else if c < -fifty {
            midi -= 1;
            c = c + hundred;
        }
        PitchName {
            pitch_class: PitchClass::from_index(midi),
            octave: midi.div_euclid(12) - 1,
            cents: c,
        }
    }

    /// MIDI note number of the equal-tempered note (A4 = 69), ignoring cents.
    pub fn midi_number(&self) -> i32 {
        (self.octave + 1) * 12 + self.pitch_class.index()
    }

    /// Fractional MIDI number including the cent offset.
    pub fn fractional_midi(&self) -> T {
        T::from_i32(self.midi_number()).unwrap_or_else(T::zero) + self.cents / T::lit(100.0)
    }

    /// The same note with the cent offset dropped.
    pub fn quantized(&self) -> Self {
        PitchName::note(self.pitch_class, self.octave)
    }

    /// Note label without cents, e.g. `A#3`.
    pub fn note_label(&self) -> String {
        format!("{}{}", self.pitch_class, self.octave)
    }

    /// Lexicographic (octave, class, cents) comparison.
    pub fn cmp_pitch(&self, other: &Self) -> Ordering {
        (self.octave, self.pitch_class)
            .cmp(&(other.octave, other.pitch_class))
            .then(
                self.cents
                    .partial_cmp(&other.cents)
                    .unwrap_or(Ordering::Equal),
            )
    }

    pub fn to_frequency(&self, reference: Frequency<T>) -> Frequency<T> {
        pitch_to_freq(self, reference)
    }
}

/// Nearest equal-tempered pitch of `f` with its signed cent offset.
pub fn freq_to_pitch<T: Real>(f: Frequency<T>, reference: Frequency<T>) -> PitchName<T> {
    let semis = T::lit(12.0) * (f.0 / reference.0).log2();
    let nearest = (semis + T::lit(0.5)).floor();
    let cents = (semis - nearest) * T::lit(100.0);
    let midi = nearest.to_i32().unwrap_or(0) + A4_MIDI;
    PitchName::from_midi_and_cents(midi, cents)
}

/// Frequency of a pitch name; the inverse of [`freq_to_pitch`].
pub fn pitch_to_freq<T: Real>(p: &PitchName<T>, reference: Frequency<T>) -> Frequency<T> {
    let semis =
        T::from_i32(p.midi_number() - A4_MIDI).unwrap_or_else(T::zero) + p.cents / T::lit(100.0);
    Frequency(reference.0 * (semis / T::lit(12.0)).exp2())
}

/// Convenience wrapper validating a raw Hz value first.
pub fn hz_to_pitch<T: Real>(hz: T, reference: Frequency<T>) -> Result<PitchName<T>> {
    Ok(freq_to_pitch(Frequency::new(hz)?, reference))
}

impl<T: Real> fmt::Display for PitchName<T> {
    /// `<class><octave>[+/-<cents>ct]`; the cents suffix is omitted when zero.
    /// A precision (`{:.1}`) rounds the cents and drops the suffix when it rounds to zero.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}{}", self.pitch_class, self.octave)?;
        let c = self.cents.to_f64_lossy();
        match f.precision() {
            Some(p) => {
                let rounded = format!("{:.*}", p, c.abs());
                if rounded.chars().any(|ch| ch.is_ascii_digit() && ch != '0') {
                    let sign = if c < 0.0 { '-' } else { '+' };
                    write!(f, "{sign}{rounded}ct")?;
                }
            }
            None => {
                if c != 0.0 {
                    let sign = if c < 0.0 { '-' } else { '+' };
                    write!(f, "{sign}{}ct", c.abs())?;
                }
            }
        }
        Ok(())
    }
}

impl<T: Real> FromStr for PitchName<T> {
    type Err = Error;

    /// Parses `<class><octave>[+/-<cents>ct]`. Accepts `♯`/`#` sharps and `♭`/`b` flats.
    fn from_str(s: &str) -> Result<Self> {
        let err = || Error::Parse(format!("malformed pitch name {s:?}"));
        let normalized = s.trim().replace('♯', "#").replace('♭', "b");
        let mut chars = normalized.chars().peekable();

        let letter = chars.next().ok_or_else(err)?;
        let base = match letter.to_ascii_uppercase() {
            'C' => 0,
            'D' => 2,
            'E' => 4,
            'F' => 5,
            'G' => 7,
            'A' => 9,
            'B' => 11,
            _ => return Err(err()),
        };
        let mut accidental = 0;
        while let Some(&c) = chars.peek() {
            match c {
                '#' => accidental += 1,
                'b' => accidental -= 1,
                _ => break,
            }
            chars.next();
        }

        let mut octave_str = String::new();
        if chars.peek() == Some(&'-') {
            octave_str.push('-');
            chars.next();
        }
        while let Some(&c) = chars.peek() {
            if c.is_ascii_digit() {
                octave_str.push(c);
                chars.next();
            } else {
                break;
            }
        }
        let octave: i32 = octave_str.parse().map_err(|_| err())?;

        let rest: String = chars.collect();
        let cents = if rest.is_empty() {
            T::zero()
        } else {
            let body = rest.strip_suffix("ct").ok_or_else(err)?;
            if !(body.starts_with('+') || body.starts_with('-')) {
                return Err(err());
            }
            let value: f64 = body.parse().map_err(|_| err())?;
            if !value.is_finite() {
                return Err(err());
            }
            T::lit(value)
        };

        let midi = (octave + 1) * 12 + base + accidental;
        Ok(PitchName::from_midi_and_cents(midi, cents))
    }
}

impl<T: Real> Serialize for PitchName<T> {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de, T: Real> Deserialize<'de> for PitchName<T> {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// One spectral peak.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct Partial<T> {
    pub frequency: Frequency<T>,
    /// Linear power in the units of the spectrum it was read from.
    pub power: T,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub harmonic_index: Option<u32>,
}

impl<T: Real> Partial<T> {
    pub fn new(frequency_hz: T, power: T) -> Result<Self> {
        if !(power.is_finite() && power >= T::zero()) {
            return Err(Error::Parse(format!(
                "partial power must be finite and >= 0, got {power}"
            )));
        }
        Ok(Partial {
            frequency: Frequency::new(frequency_hz)?,
            power,
            harmonic_index: None,
        })
    }

    pub fn hz(&self) -> T {
        self.frequency.hz()
    }
}

/// Which processing stage produced a spectrum.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SpectrumKind {
    Raw,
    Weighted,
    Smoothed,
}

/// One-sided discrete power spectrum.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Spectrum<T> {
    bin_frequencies: Vec<T>,
    bin_powers: Vec<T>,
    sample_rate: T,
    window_length: usize,
    kind: SpectrumKind,
    /// Per-bin gain (dB) applied by loudness weighting, kept so peak refinement
    /// can undo the contour's slope across a lobe.
    #[serde(skip)]
    applied_gain_db: Option<Vec<T>>,
}

impl<T: Real> Spectrum<T> {
    pub fn new(
        bin_frequencies: Vec<T>,
        bin_powers: Vec<T>,
        sample_rate: T,
        window_length: usize,
        kind: SpectrumKind,
    ) -> Result<Self> {
        if bin_frequencies.len() != bin_powers.len() {
            return Err(Error::Config(format!(
                "spectrum arrays differ in length ({} vs {})",
                bin_frequencies.len(),
                bin_powers.len()
            )));
        }
        if bin_frequencies.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::Config(
                "bin frequencies must be strictly ascending".into(),
            ));
        }
        if bin_powers
            .iter()
            .any(|p| !(p.is_finite() && *p >= T::zero()))
        {
            return Err(Error::Config("bin powers must be finite and >= 0".into()));
        }
        if !(sample_rate.is_finite() && sample_rate > T::zero()) {
            return Err(Error::InvalidFrequency(sample_rate.to_f64_lossy()));
        }
        Ok(Spectrum {
            bin_frequencies,
            bin_powers,
            sample_rate,
            window_length,
            kind,
            applied_gain_db: None,
        })
    }

    pub(crate) fn with_gain(mut self, gain_db: Vec<T>) -> Self {
        debug_assert_eq!(gain_db.len(), self.bin_powers.len());
        self.applied_gain_db = Some(gain_db);
        self
    }

    pub fn bin_frequencies(&self) -> &[T] {
        &self.bin_frequencies
    }

    pub fn bin_powers(&self) -> &[T] {
        &self.bin_powers
    }

    pub fn sample_rate(&self) -> T {
        self.sample_rate
    }

    pub fn window_length(&self) -> usize {
        self.window_length
    }

    pub fn kind(&self) -> SpectrumKind {
        self.kind
    }

    pub fn applied_gain_db(&self) -> Option<&[T]> {
        self.applied_gain_db.as_deref()
    }

    pub fn len(&self) -> usize {
        self.bin_powers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bin_powers.is_empty()
    }

    /// Spacing between adjacent bins in Hz (zero for fewer than two bins).
    pub fn bin_spacing(&self) -> T {
        if self.bin_frequencies.len() < 2 {
            T::zero()
        } else {
            self.bin_frequencies[1] - self.bin_frequencies[0]
        }
    }

    pub fn total_power(&self) -> T {
        self.bin_powers.iter().copied().sum()
    }

    /// Index and power of the strongest bin.
    pub fn max_bin(&self) -> Option<(usize, T)> {
        self.bin_powers
            .iter()
            .copied()
            .enumerate()
            .fold(None, |best, (i, p)| match best {
                Some((_, bp)) if bp >= p => best,
                _ => Some((i, p)),
            })
    }

    /// CSV export with header `freq_hz,power_db`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("freq_hz,power_db\n");
        for (f, p) in self.bin_frequencies.iter().zip(&self.bin_powers) {
            out.push_str(&format!(
                "{},{}\n",
                f.to_f64_lossy(),
                power_db(p.to_f64_lossy())
            ));
        }
        out
    }
}

/// Power in dB with a -300 dB floor so that silent bins stay finite.
pub fn power_db(p: f64) -> f64 {
    10.0 * p.max(1e-30).log10()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn hz(x: f64) -> Frequency<f64> {
        Frequency::new(x).unwrap()
    }

    #[test]
    fn reference_maps_to_itself() {
        let p = freq_to_pitch(hz(440.0), Frequency::a4());
        assert_eq!(p.pitch_class, PitchClass::A);
        assert_eq!(p.octave, 4);
        assert_eq!(p.cents, 0.0);
    }

    #[test]
    fn f2_and_a_sharp_3() {
        let p = freq_to_pitch(hz(87.31), Frequency::a4());
        assert_eq!(p.note_label(), "F2");
        assert!(p.cents.abs() < 0.1, "{}", p.cents);

        let p = freq_to_pitch(hz(236.0), Frequency::a4());
        assert_eq!(p.note_label(), "A#3");
        let oracle = 1200.0 * (236.0f64 / (440.0 * 2f64.powf(-11.0 / 12.0))).log2();
        assert!((p.cents - oracle).abs() < 1e-9);
        assert!((p.cents - 21.5).abs() < 0.1, "{}", p.cents);
    }

    #[test]
    fn pitch_to_freq_examples() {
        let a4 = Frequency::<f64>::a4();
        assert!((pitch_to_freq(&PitchName::note(PitchClass::A, 4), a4).hz() - 440.0).abs() < 1e-9);
        assert!((pitch_to_freq(&PitchName::note(PitchClass::A, 3), a4).hz() - 220.0).abs() < 1e-9);
        let e1 = pitch_to_freq(&PitchName::note(PitchClass::E, 1), a4).hz();
        assert!((e1 - 440.0 * 2f64.powf(-41.0 / 12.0)).abs() < 1e-9);
        assert!((e1 - 41.203).abs() < 1e-3);
    }

    #[test]
    fn cents_examples() {
        assert_eq!(cents_between(hz(440.0), hz(440.0)), 0.0);
        assert!((cents_between(hz(220.0), hz(440.0)) - 1200.0).abs() < 1e-9);
        assert!((cents_between(hz(233.082), hz(236.0)) - 21.5).abs() < 0.1);
    }

    #[test]
    fn invalid_frequencies_rejected() {
        assert!(matches!(
            Frequency::new(0.0),
            Err(Error::InvalidFrequency(_))
        ));
        assert!(Frequency::new(-3.0).is_err());
        assert!(Frequency::new(f64::NAN).is_err());
        assert!(Frequency::new(f64::INFINITY).is_err());
        assert!(hz_to_pitch(-1.0, Frequency::a4()).is_err());
    }

    #[test]
    fn quarter_tone_tie_lands_on_upper_note() {
        // Exactly 50 cents above A4.
        let f = 440.0 * 2f64.powf(0.5 / 12.0);
        let p = freq_to_pitch(hz(f), Frequency::a4());
        assert!(p.cents >= -50.0 && p.cents < 50.0);
        assert_eq!(p.note_label(), "A#4");
        assert!((p.cents + 50.0).abs() < 1e-6);
    }

    #[test]
    fn text_format_round_trip() {
        let p: PitchName<f64> = "A#3+21.5ct".parse().unwrap();
        assert_eq!(p.pitch_class, PitchClass::ASharp);
        assert_eq!(p.octave, 3);
        assert_eq!(p.cents, 21.5);
        assert_eq!(p.to_string(), "A#3+21.5ct");

        let q: PitchName<f64> = "A♯3+21.5ct".parse().unwrap();
        assert_eq!(p, q);

        let flat: PitchName<f64> = "Bb3".parse().unwrap();
        assert_eq!(flat.note_label(), "A#3");
        let cflat: PitchName<f64> = "Cb4".parse().unwrap();
        assert_eq!(cflat.note_label(), "B3");

        let low: PitchName<f64> = "C-1".parse().unwrap();
        assert_eq!(low.octave, -1);
        assert_eq!(low.midi_number(), 0);

        let neg: PitchName<f64> = "C4-20ct".parse().unwrap();
        assert_eq!(neg.cents, -20.0);
        assert_eq!(format!("{neg:.1}"), "C4-20.0ct");
        assert_eq!(
            format!("{:.0}", PitchName::<f64>::note(PitchClass::F, 2)),
            "F2"
        );

        for bad in ["", "H2", "A", "A4+3", "A4 3ct", "A4+xct", "A4*2ct"] {
            assert!(
                bad.parse::<PitchName<f64>>().is_err(),
                "{bad:?} should fail"
            );
        }
    }

    #[test]
    fn out_of_range_cents_are_normalized() {
        let p: PitchName<f64> = "A4+130ct".parse().unwrap();
        assert_eq!(p.note_label(), "A#4");
        assert!((p.cents - 30.0).abs() < 1e-9);
        let p = PitchName::new(PitchClass::C, 4, -50.0).unwrap();
        assert_eq!(p.note_label(), "C4");
        let p = PitchName::new(PitchClass::C, 4, 50.0).unwrap();
        assert_eq!(p.note_label(), "C#4");
        assert_eq!(p.cents, -50.0);
    }

    #[test]
    fn works_in_single_precision() {
        let p = freq_to_pitch(Frequency::new(87.31f32).unwrap(), Frequency::a4());
        assert_eq!(p.note_label(), "F2");
        let back = pitch_to_freq(&p, Frequency::a4()).hz();
        assert!(((back - 87.31) / 87.31).abs() < 1e-6);
    }

    #[test]
    fn spectrum_validation() {
        assert!(Spectrum::new(vec![0.0, 1.0], vec![1.0], 10.0, 1024, SpectrumKind::Raw).is_err());
        assert!(Spectrum::new(
            vec![1.0, 1.0],
            vec![1.0, 1.0],
            10.0,
            1024,
            SpectrumKind::Raw
        )
        .is_err());
        assert!(Spectrum::new(
            vec![0.0, 1.0],
            vec![1.0, -1.0],
            10.0,
            1024,
            SpectrumKind::Raw
        )
        .is_err());
        let s = Spectrum::new(
            vec![0.0, 1.0],
            vec![1.0, 3.0],
            10.0,
            1024,
            SpectrumKind::Raw,
        )
        .unwrap();
        assert_eq!(s.max_bin(), Some((1, 3.0)));
        assert_eq!(s.to_csv().lines().next(), Some("freq_hz,power_db"));
    }
}
