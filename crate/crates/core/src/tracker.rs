//! External pitch-tracker traces: ingestion, duration-wide pitch
//! distributions, octave-jump detection, and comparison with listener reports
//! and the harmonic fit.

use std::collections::BTreeMap;
use std::io::Read;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::harmonicity::HarmonicFit;
use crate::perception::{
    associate_perceived_pitch, AssociationConfig, PerceptionAggregate, PitchAssociation,
};
use crate::scalar::Real;
use crate::tone::{cents, freq_to_pitch, Frequency, Partial, PitchName};

pub const TRACE_HEADER: [&str; 3] = ["time_s", "freq_hz", "confidence"];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct TrackerFrame<T> {
    pub time_s: T,
    pub freq_hz: T,
    pub confidence: T,
    pub voiced: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct TrackerTrace<T> {
    pub tracker_name: String,
    pub frames: Vec<TrackerFrame<T>>,
    pub voicing_threshold: T,
}

impl<T: Real> TrackerTrace<T> {
    /// Builds a trace from `(time, frequency, confidence)` triples with the
    /// same validation as [`load_tracker_trace`].
    pub fn new(tracker_name: &str, rows: &[(T, T, T)], voicing_threshold: T) -> Result<Self> {
        check_threshold(voicing_threshold)?;
        let mut frames = Vec::with_capacity(rows.len());
        let mut last_time = T::neg_infinity();
        for (i, &(t, f, c)) in rows.iter().enumerate() {
            frames.push(validate_frame(
                i + 1,
                t,
                f,
                c,
                last_time,
                voicing_threshold,
            )?);
            last_time = t;
        }
        Ok(TrackerTrace {
            tracker_name: tracker_name.to_owned(),
            frames,
            voicing_threshold,
        })
    }

    pub fn voiced(&self) -> impl Iterator<Item = &TrackerFrame<T>> {
        self.frames.iter().filter(|f| f.voiced)
    }

    pub fn voiced_count(&self) -> usize {
        self.voiced().count()
    }

    /// Every frequency multiplied by `factor`.
    pub fn transposed(&self, factor: T) -> Self {
        let mut out = self.clone();
        for f in &mut out.frames {
            f.freq_hz = f.freq_hz * factor;
        }
        out
    }
}

fn check_threshold<T: Real>(threshold: T) -> Result<()> {
    if threshold > T::zero() && threshold <= T::one() {
        Ok(())
    } else {
        Err(Error::Config(format!(
            "voicing threshold {threshold} outside (0, 1]"
        )))
    }
}

fn validate_frame<T: Real>(
    row: usize,
    t: T,
    f: T,
    c: T,
    last_time: T,
    threshold: T,
) -> Result<TrackerFrame<T>> {
    if !t.is_finite() || !f.is_finite() || !c.is_finite() {
        return Err(Error::row(row, "non-finite value"));
    }
    if t < last_time {
        return Err(Error::row(
            row,
            format!("time {t} s precedes the previous frame ({last_time} s)"),
        ));
    }
    if c < T::zero() || c > T::one() {
        return Err(Error::row(row, format!("confidence {c} outside [0, 1]")));
    }
    if c > T::zero() && f <= T::zero() {
        return Err(Error::row(
            row,
            format!("frequency {f} Hz must be > 0 where confidence is > 0"),
        ));
    }
    if f < T::zero() {
        return Err(Error::row(row, format!("negative frequency {f} Hz")));
    }
    Ok(TrackerFrame {
        time_s: t,
        freq_hz: f,
        confidence: c,
        voiced: c >= threshold && f > T::zero(),
    })
}

/// Parses a `time_s,freq_hz,confidence` CSV. Frames below `voicing_threshold`
/// confidence are kept but marked unvoiced.
pub fn load_tracker_trace<T: Real, R: Read>(
    source: R,
    tracker_name: &str,
    voicing_threshold: T,
) -> Result<TrackerTrace<T>> {
    check_threshold(voicing_threshold)?;
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(source);
    let header = reader.headers()?.clone();
    if header.iter().ne(TRACE_HEADER.iter().copied()) {
        return Err(Error::Format(format!(
            "trace header must be `{}`, got `{}`",
            TRACE_HEADER.join(","),
            header.iter().collect::<Vec<_>>().join(",")
        )));
    }
    let mut frames = Vec::new();
    let mut last_time = T::neg_infinity();
    for (i, record) in reader.records().enumerate() {
        let row = i + 1;
        let record = record.map_err(|e| Error::row(row, e.to_string()))?;
        if record.len() != 3 {
            return Err(Error::row(
                row,
                format!("expected 3 fields, found {}", record.len()),
            ));
        }
        let mut values = [0.0f64; 3];
        for (k, v) in values.iter_mut().enumerate() {
            *v = record[k].parse().map_err(|_| {
                Error::row(
                    row,
                    format!("{} {:?} is not a number", TRACE_HEADER[k], &record[k]),
                )
            })?;
        }
        let frame = validate_frame(
            row,
            T::lit(values[0]),
            T::lit(values[1]),
            T::lit(values[2]),
            last_time,
            voicing_threshold,
        )?;
        last_time = frame.time_s;
        frames.push(frame);
    }
    Ok(TrackerTrace {
        tracker_name: tracker_name.to_owned(),
        frames,
        voicing_threshold,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TraceWeighting {
    #[default]
    Confidence,
    Uniform,
}

/// One semitone bin of a trace distribution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct TraceMode<T> {
    /// Bin note with the mean cent offset of its frames.
    pub pitch: PitchName<T>,
    pub note: String,
    pub midi_number: i32,
    pub mass: T,
    pub mean_offset_cents: T,
    pub frame_count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct TraceDistribution<T> {
    pub tracker_name: String,
    pub weighting: TraceWeighting,
    pub total_frames: usize,
    pub voiced_frames: usize,
    /// Descending by mass; ties ascend by pitch.
    pub modes: Vec<TraceMode<T>>,
}

impl<T: Real> TraceDistribution<T> {
    pub fn mass_of(&self, note: &str) -> T {
        self.modes
            .iter()
            .filter(|m| m.note == note)
            .map(|m| m.mass)
            .sum()
    }
}

/// Semitone histogram of the voiced frames, weighted by confidence or
/// uniformly. Fails with insufficient data when nothing is voiced.
pub fn aggregate_trace_distribution<T: Real>(
    trace: &TrackerTrace<T>,
    weighting: TraceWeighting,
    reference: Frequency<T>,
) -> Result<TraceDistribution<T>> {
    struct Bin<T> {
        weight: T,
        weighted_offset: T,
        frames: usize,
    }
    let mut bins: BTreeMap<i32, Bin<T>> = BTreeMap::new();
    let mut total = T::zero();
    for frame in trace.voiced() {
        let w = match weighting {
            TraceWeighting::Confidence => frame.confidence,
            TraceWeighting::Uniform => T::one(),
        };
        let pitch = freq_to_pitch(Frequency::new(frame.freq_hz)?, reference);
        let bin = bins.entry(pitch.midi_number()).or_insert(Bin {
            weight: T::zero(),
            weighted_offset: T::zero(),
            frames: 0,
        });
        bin.weight = bin.weight + w;
        bin.weighted_offset = bin.weighted_offset + w * pitch.cents;
        bin.frames += 1;
        total = total + w;
    }
    if bins.is_empty() || total <= T::zero() {
        return Err(Error::InsufficientData(format!(
            "tracker {:?} has no voiced frames",
            trace.tracker_name
        )));
    }
    let mut modes: Vec<TraceMode<T>> = bins
        .into_iter()
        .filter(|(_, b)| b.weight > T::zero())
        .map(|(midi, b)| {
            let offset = b.weighted_offset / b.weight;
            let note = PitchName::<T>::note(
                crate::tone::PitchClass::from_index(midi.rem_euclid(12)),
                midi.div_euclid(12) - 1,
            );
            let pitch = PitchName::new(note.pitch_class, note.octave, offset).unwrap_or(note);
            TraceMode {
                note: note.note_label(),
                pitch,
                midi_number: midi,
                mass: b.weight / total,
                mean_offset_cents: offset,
                frame_count: b.frames,
            }
        })
        .collect();
    modes.sort_by(|a, b| {
        b.mass
            .partial_cmp(&a.mass)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.midi_number.cmp(&b.midi_number))
    });
    Ok(TraceDistribution {
        tracker_name: trace.tracker_name.clone(),
        weighting,
        total_frames: trace.frames.len(),
        voiced_frames: trace.voiced_count(),
        modes,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct OctaveJumpEvent<T> {
    /// Time of the frame after the jump.
    pub time_s: T,
    pub from: PitchName<T>,
    pub to: PitchName<T>,
    pub interval_cents: T,
}

/// Jumps between consecutive voiced frames whose interval lies within
/// `tolerance_cents` of a nonzero whole number of octaves.
pub fn detect_octave_jumps<T: Real>(
    trace: &TrackerTrace<T>,
    tolerance_cents: T,
    reference: Frequency<T>,
) -> Result<Vec<OctaveJumpEvent<T>>> {
    if !(tolerance_cents >= T::zero() && tolerance_cents < T::lit(600.0)) {
        return Err(Error::Config(format!(
            "jump tolerance {tolerance_cents} ct outside [0, 600)"
        )));
    }
    let voiced: Vec<&TrackerFrame<T>> = trace.voiced().collect();
    let octave = T::lit(1200.0);
    let mut events = Vec::new();
    for pair in voiced.windows(2) {
        let interval = cents(pair[0].freq_hz, pair[1].freq_hz);
        let octaves = (interval / octave).round();
        if octaves != T::zero() && (interval - octaves * octave).abs() <= tolerance_cents {
            events.push(OctaveJumpEvent {
                time_s: pair[1].time_s,
                from: freq_to_pitch(Frequency::new(pair[0].freq_hz)?, reference),
                to: freq_to_pitch(Frequency::new(pair[1].freq_hz)?, reference),
                interval_cents: interval,
            });
        }
    }
    Ok(events)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct ModeComparison<T> {
    pub pitch: PitchName<T>,
    pub note: String,
    pub mass: T,
    pub label: String,
    pub distance_d: Option<u32>,
    pub perceived: Option<bool>,
    pub association: PitchAssociation<T>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct TrackerComparison<T> {
    pub tracker_name: String,
    pub modes: Vec<ModeComparison<T>>,
    /// Tracker mass on notes that at least one listener reported; absent
    /// without listener data.
    pub overlap: Option<T>,
}

/// Associates each distribution mode with the harmonic fit and measures how
/// much tracker mass falls on perceived notes.
pub fn compare_distributions<T: Real>(
    dist: &TraceDistribution<T>,
    perception: Option<&PerceptionAggregate<T>>,
    fit: &HarmonicFit<T>,
    partials: &[Partial<T>],
    cfg: &AssociationConfig<T>,
) -> Result<TrackerComparison<T>> {
    let perceived = perception.map(|p| p.perceived_notes());
    let mut modes = Vec::with_capacity(dist.modes.len());
    for m in &dist.modes {
        let association = associate_perceived_pitch(&m.pitch, fit, partials, cfg)?;
        modes.push(ModeComparison {
            pitch: m.pitch,
            note: m.note.clone(),
            mass: m.mass,
            label: association.label.clone(),
            distance_d: association.distance_d,
            perceived: perceived.as_ref().map(|set| set.contains(&m.note)),
            association,
        });
    }
    let overlap = perceived.as_ref().map(|_| {
        let mut hits: Vec<T> = modes
            .iter()
            .filter(|m| m.perceived == Some(true))
            .map(|m| m.mass)
            .collect();
        hits.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
        hits.into_iter().sum::<T>().min(T::one())
    });
    Ok(TrackerComparison {
        tracker_name: dist.tracker_name.clone(),
        modes,
        overlap,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields, bound = "T: Real")]
pub struct TrackerConfig<T> {
    pub voicing_threshold: T,
    pub weighting: TraceWeighting,
    pub jump_tolerance_cents: T,
}

impl<T: Real> Default for TrackerConfig<T> {
    fn default() -> Self {
        TrackerConfig {
            voicing_threshold: T::lit(0.5),
            weighting: TraceWeighting::Confidence,
            jump_tolerance_cents: T::lit(50.0),
        }
    }
}

/// Everything derived from one trace. `distribution` and `comparison` are
/// absent when the trace has no voiced frames.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct TrackerSummary<T> {
    pub tracker_name: String,
    pub total_frames: usize,
    pub voiced_frames: usize,
    pub distribution: Option<TraceDistribution<T>>,
    pub octave_jumps: Vec<OctaveJumpEvent<T>>,
    pub jump_count: usize,
    pub comparison: Option<TrackerComparison<T>>,
    pub warning: Option<String>,
}

pub fn summarize_trace<T: Real>(
    trace: &TrackerTrace<T>,
    fit: Option<(&HarmonicFit<T>, &[Partial<T>])>,
    perception: Option<&PerceptionAggregate<T>>,
    tracker_cfg: &TrackerConfig<T>,
    assoc_cfg: &AssociationConfig<T>,
) -> Result<TrackerSummary<T>> {
    let reference = Frequency::new(assoc_cfg.reference_hz)?;
    let octave_jumps = detect_octave_jumps(trace, tracker_cfg.jump_tolerance_cents, reference)?;
    let (distribution, warning) =
        match aggregate_trace_distribution(trace, tracker_cfg.weighting, reference) {
            Ok(d) => (Some(d), None),
            Err(Error::InsufficientData(msg)) => (None, Some(msg)),
            Err(e) => return Err(e),
        };
    let comparison = match (&distribution, fit) {
        (Some(d), Some((fit, partials))) => Some(compare_distributions(
            d, perception, fit, partials, assoc_cfg,
        )?),
        _ => None,
    };
    Ok(TrackerSummary {
        tracker_name: trace.tracker_name.clone(),
        total_frames: trace.frames.len(),
        voiced_frames: trace.voiced_count(),
        jump_count: octave_jumps.len(),
        octave_jumps,
        distribution,
        comparison,
        warning,
    })
}
