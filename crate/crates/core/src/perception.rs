//! Listening-test reports: ingestion, the certainty-weighted pitch count, and
//! association of perceived pitches with the analyzed harmonic structure.
//!
//! The association distance `d` is 0 for the fundamental, 1 for any other
//! partial, and grows by one for every octave the perceived pitch is
//! transposed from its target.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::io::Read;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::harmonicity::HarmonicFit;
use crate::scalar::Real;
use crate::tone::{cents, freq_to_pitch, pitch_to_freq, Frequency, Partial, PitchName};

pub const REPORT_HEADER: [&str; 5] = ["sample_id", "listener_id", "pitch", "certainty", "tuning"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TuningFlag {
    InTune,
    TooLow,
    TooHigh,
}

impl FromStr for TuningFlag {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "in-tune" => Ok(TuningFlag::InTune),
            "too-low" => Ok(TuningFlag::TooLow),
            "too-high" => Ok(TuningFlag::TooHigh),
            other => Err(Error::Parse(format!(
                "unknown tuning flag {other:?} (expected in-tune, too-low or too-high)"
            ))),
        }
    }
}

impl fmt::Display for TuningFlag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TuningFlag::InTune => "in-tune",
            TuningFlag::TooLow => "too-low",
            TuningFlag::TooHigh => "too-high",
        })
    }
}

/// One perceived pitch from one listener for one sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct ListenerReport<T> {
    pub sample_id: String,
    pub listener_id: String,
    pub pitch: PitchName<T>,
    pub certainty: T,
    pub tuning: TuningFlag,
    /// 1-based data row in the source CSV (0 when built in code).
    #[serde(default)]
    pub row: usize,
}

impl<T: Real> ListenerReport<T> {
    pub fn new(
        sample_id: &str,
        listener_id: &str,
        pitch: PitchName<T>,
        certainty: T,
        tuning: TuningFlag,
    ) -> Result<Self> {
        if !(certainty >= T::zero() && certainty <= T::one()) {
            return Err(Error::Parse(format!(
                "certainty {certainty} outside [0, 1]"
            )));
        }
        Ok(ListenerReport {
            sample_id: sample_id.to_owned(),
            listener_id: listener_id.to_owned(),
            pitch,
            certainty,
            tuning,
            row: 0,
        })
    }
}

/// Parses report CSV with header `sample_id,listener_id,pitch,certainty,tuning`.
/// Errors name the offending 1-based data row.
pub fn load_reports<T: Real, R: Read>(source: R) -> Result<Vec<ListenerReport<T>>> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(source);
    let header = reader.headers()?.clone();
    if header.iter().ne(REPORT_HEADER.iter().copied()) {
        return Err(Error::Format(format!(
            "report header must be `{}`, got `{}`",
            REPORT_HEADER.join(","),
            header.iter().collect::<Vec<_>>().join(",")
        )));
    }
    let mut out = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let row = i + 1;
        let record = record.map_err(|e| Error::row(row, e.to_string()))?;
        if record.len() != REPORT_HEADER.len() {
            return Err(Error::row(
                row,
                format!("expected 5 fields, found {}", record.len()),
            ));
        }
        let pitch: PitchName<T> = record[2]
            .parse()
            .map_err(|e: Error| Error::row(row, e.to_string()))?;
        let certainty: f64 = record[3]
            .parse()
            .map_err(|_| Error::row(row, format!("certainty {:?} is not a number", &record[3])))?;
        if !(0.0..=1.0).contains(&certainty) {
            return Err(Error::row(
                row,
                format!("certainty {certainty} outside [0, 1]"),
            ));
        }
        let tuning: TuningFlag = record[4]
            .parse()
            .map_err(|e: Error| Error::row(row, e.to_string()))?;
        out.push(ListenerReport {
            sample_id: record[0].to_owned(),
            listener_id: record[1].to_owned(),
            pitch,
            certainty: T::lit(certainty),
            tuning,
            row,
        });
    }
    Ok(out)
}

/// Summed certainty per listener, over the reports for `sample_id`. Sums are
/// taken in sorted order so the result does not depend on report order.
pub fn listener_weighted_counts<T: Real>(
    reports: &[ListenerReport<T>],
    sample_id: &str,
) -> BTreeMap<String, T> {
    let mut per_listener: BTreeMap<String, Vec<T>> = BTreeMap::new();
    for r in reports.iter().filter(|r| r.sample_id == sample_id) {
        per_listener
            .entry(r.listener_id.clone())
            .or_default()
            .push(r.certainty);
    }
    per_listener
        .into_iter()
        .map(|(listener, mut c)| {
            c.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
            (listener, c.into_iter().sum())
        })
        .collect()
}

/// Mean over listeners of each listener's summed certainty for the sample;
/// `None` when nobody reported on it.
pub fn weighted_pitch_count<T: Real>(reports: &[ListenerReport<T>], sample_id: &str) -> Option<T> {
    let counts = listener_weighted_counts(reports, sample_id);
    if counts.is_empty() {
        return None;
    }
    let total: T = counts.values().copied().sum();
    Some(total / T::from_usize_lossy(counts.len()))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields, bound = "T: Real")]
pub struct AssociationConfig<T> {
    pub match_tolerance_cents: T,
    /// Pitches below this frequency match with the wider tolerance and are
    /// merged into shared bins when aggregating.
    pub low_register_hz: T,
    pub low_register_tolerance_cents: T,
    pub max_octave_shift: u32,
    pub reference_hz: T,
}

impl<T: Real> Default for AssociationConfig<T> {
    fn default() -> Self {
        AssociationConfig {
            match_tolerance_cents: T::lit(50.0),
            low_register_hz: T::lit(45.0),
            low_register_tolerance_cents: T::lit(200.0),
            max_octave_shift: 2,
            reference_hz: T::lit(440.0),
        }
    }
}

impl<T: Real> AssociationConfig<T> {
    fn reference(&self) -> Result<Frequency<T>> {
        Frequency::new(self.reference_hz)
    }

    pub fn tolerance_for(&self, pitch_hz: T) -> T {
        if pitch_hz < self.low_register_hz {
            self.low_register_tolerance_cents
        } else {
            self.match_tolerance_cents
        }
    }
}

/// What a perceived pitch was matched to.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case", bound = "T: Real")]
pub enum AssociationTarget<T> {
    F0,
    Harmonic { n: u32 },
    Partial { frequency_hz: T },
    None,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ColorClass {
    D0,
    D1,
    D2,
    None,
}

impl ColorClass {
    pub fn from_distance(d: Option<u32>) -> Self {
        match d {
            Some(0) => ColorClass::D0,
            Some(1) => ColorClass::D1,
            Some(_) => ColorClass::D2,
            None => ColorClass::None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            ColorClass::D0 => "d0",
            ColorClass::D1 => "d1",
            ColorClass::D2 => "d2",
            ColorClass::None => "none",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct PitchAssociation<T> {
    pub pitch: PitchName<T>,
    pub target: AssociationTarget<T>,
    /// Octaves from the target to the pitch (negative when the pitch is lower).
    pub octave_shift: i32,
    pub distance_d: Option<u32>,
    /// `f0`, `f0+1`, `h2`, `h12-1`, `p[C3+26ct]`, or `none`.
    pub label: String,
    pub color: ColorClass,
    /// Offset of the pitch from the transposed target.
    pub offset_cents: Option<T>,
}

impl<T: Real> PitchAssociation<T> {
    fn none(pitch: PitchName<T>) -> Self {
        PitchAssociation {
            pitch,
            target: AssociationTarget::None,
            octave_shift: 0,
            distance_d: None,
            label: "none".into(),
            color: ColorClass::None,
            offset_cents: None,
        }
    }

    /// Ordering key: smaller is a better association.
    fn rank(&self) -> (u32, u32) {
        match self.distance_d {
            Some(d) => (d, self.octave_shift.unsigned_abs()),
            None => (u32::MAX, u32::MAX),
        }
    }
}

/// A spectral component a perceived pitch may be matched to.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AssociationCandidate<T> {
    pub target: AssociationTarget<T>,
    pub frequency_hz: T,
    /// Distance before any octave shift.
    pub base_distance: u32,
    pub power: T,
}

/// The fundamental, each assigned harmonic above the first, and each partial
/// the fit left unassigned.
pub fn association_candidates<T: Real>(
    fit: &HarmonicFit<T>,
    partials: &[Partial<T>],
) -> Vec<AssociationCandidate<T>> {
    let f0_power = fit
        .assignments
        .iter()
        .find(|a| a.harmonic == 1)
        .and_then(|a| partials.get(a.partial_index))
        .map_or(T::zero(), |p| p.power);
    let mut out = vec![AssociationCandidate {
        target: AssociationTarget::F0,
        frequency_hz: fit.f0.hz(),
        base_distance: 0,
        power: f0_power,
    }];
    for a in fit.assignments.iter().filter(|a| a.harmonic >= 2) {
        if let Some(p) = partials.get(a.partial_index) {
            out.push(AssociationCandidate {
                target: AssociationTarget::Harmonic { n: a.harmonic },
                frequency_hz: p.hz(),
                base_distance: 1,
                power: p.power,
            });
        }
    }
    for i in &fit.unassigned_partials {
        if let Some(p) = partials.get(*i) {
            out.push(AssociationCandidate {
                target: AssociationTarget::Partial {
                    frequency_hz: p.hz(),
                },
                frequency_hz: p.hz(),
                base_distance: 1,
                power: p.power,
            });
        }
    }
    out
}

fn shift_suffix(shift: i32) -> String {
    if shift == 0 {
        String::new()
    } else {
        format!("{shift:+}")
    }
}

fn label_for<T: Real>(
    target: &AssociationTarget<T>,
    shift: i32,
    reference: Frequency<T>,
) -> String {
    match target {
        AssociationTarget::F0 => format!("f0{}", shift_suffix(shift)),
        AssociationTarget::Harmonic { n } => format!("h{n}{}", shift_suffix(shift)),
        AssociationTarget::Partial { frequency_hz } => {
            let name = Frequency::new(*frequency_hz)
                .map(|f| format!("{:.0}", freq_to_pitch(f, reference)))
                .unwrap_or_else(|_| "?".into());
            format!("p[{name}]{}", shift_suffix(shift))
        }
        AssociationTarget::None => "none".into(),
    }
}

/// The minimal-distance association of `pitch`.
///
/// Every candidate is tried at octave shifts up to `max_octave_shift`; a match
/// within tolerance has distance `base + |shift|`. Ties prefer the smaller
/// shift, then the louder target, then the closer match.
pub fn associate_perceived_pitch<T: Real>(
    pitch: &PitchName<T>,
    fit: &HarmonicFit<T>,
    partials: &[Partial<T>],
    cfg: &AssociationConfig<T>,
) -> Result<PitchAssociation<T>> {
    let reference = cfg.reference()?;
    let candidates = association_candidates(fit, partials);
    Ok(associate_with_candidates(
        pitch,
        &candidates,
        cfg,
        reference,
    ))
}

/// (d, |octave shift|, -power, |offset cents|), compared in that order.
type RankKey<T> = (u32, u32, T, T);

fn associate_with_candidates<T: Real>(
    pitch: &PitchName<T>,
    candidates: &[AssociationCandidate<T>],
    cfg: &AssociationConfig<T>,
    reference: Frequency<T>,
) -> PitchAssociation<T> {
    let pitch_hz = pitch_to_freq(pitch, reference).hz();
    let tol = cfg.tolerance_for(pitch_hz);
    let max_shift = cfg.max_octave_shift as i32;
    let mut best: Option<(RankKey<T>, &AssociationCandidate<T>, i32)> = None;
    for c in candidates {
        for shift in -max_shift..=max_shift {
            let shifted = c.frequency_hz * T::lit(2.0).powi(shift);
            let offset = cents(shifted, pitch_hz);
            if offset.abs() > tol {
                continue;
            }
            let d = c.base_distance + shift.unsigned_abs();
            let key = (d, shift.unsigned_abs(), -c.power, offset.abs());
            let better = match &best {
                None => true,
                Some((b, _, _)) => {
                    (key.0, key.1) < (b.0, b.1)
                        || ((key.0, key.1) == (b.0, b.1)
                            && (key.2 < b.2 || (key.2 == b.2 && key.3 < b.3)))
                }
            };
            if better {
                best = Some((key, c, shift));
            }
        }
    }
    match best {
        None => PitchAssociation::none(*pitch),
        Some(((d, ..), c, shift)) => {
            let shifted = c.frequency_hz * T::lit(2.0).powi(shift);
            PitchAssociation {
                pitch: *pitch,
                target: c.target,
                octave_shift: shift,
                distance_d: Some(d),
                label: label_for(&c.target, shift, reference),
                color: ColorClass::from_distance(Some(d)),
                offset_cents: Some(cents(shifted, pitch_hz)),
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ClassTally {
    pub d0: usize,
    pub d1: usize,
    pub d2: usize,
    pub none: usize,
}

impl ClassTally {
    fn add(&mut self, c: ColorClass) {
        match c {
            ColorClass::D0 => self.d0 += 1,
            ColorClass::D1 => self.d1 += 1,
            ColorClass::D2 => self.d2 += 1,
            ColorClass::None => self.none += 1,
        }
    }

    pub fn total(&self) -> usize {
        self.d0 + self.d1 + self.d2 + self.none
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct TuningTally {
    pub in_tune: usize,
    pub too_low: usize,
    pub too_high: usize,
}

/// One bar of the perceived-pitch graph.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct PerceptionBin<T> {
    /// Note name, or `/`-joined names for merged low-register bins.
    pub label: String,
    /// Equal-tempered notes reported in this bin.
    pub notes: Vec<String>,
    pub count: usize,
    pub summed_certainty: T,
    /// Best association among the bin's reports.
    pub association: PitchAssociation<T>,
    pub by_class: ClassTally,
    pub tuning: TuningTally,
    /// Reports beyond the first from the same listener in this bin.
    pub duplicate_reports: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct PerceptionAggregate<T> {
    pub sample_id: Option<String>,
    pub report_count: usize,
    /// Ascending by pitch.
    pub bins: Vec<PerceptionBin<T>>,
    pub listener_weighted_counts: BTreeMap<String, T>,
    pub mean_weighted_count: Option<T>,
}

impl<T: Real> PerceptionAggregate<T> {
    /// Equal-tempered note labels (class and octave) perceived by anyone.
    pub fn perceived_notes(&self) -> BTreeSet<String> {
        self.bins
            .iter()
            .flat_map(|b| b.notes.iter().cloned())
            .collect()
    }

    /// Bar-graph CSV: `label,count,summed_certainty,association,color_class,distance_d`.
    pub fn to_bar_csv(&self) -> String {
        let mut out =
            String::from("label,count,summed_certainty,association,color_class,distance_d\n");
        for b in &self.bins {
            out.push_str(&format!(
                "{},{},{},{},{},{}\n",
                b.label,
                b.count,
                b.summed_certainty.to_f64_lossy(),
                b.association.label,
                b.association.color.as_str(),
                b.association
                    .distance_d
                    .map_or(String::new(), |d| d.to_string())
            ));
        }
        out
    }
}

/// Tallies one sample's reports into note bins with their associations.
///
/// Reports below the low-register limit whose pitches lie within the wide
/// tolerance of each other (single linkage) share one bin.
pub fn aggregate_perception<T: Real>(
    reports: &[ListenerReport<T>],
    fit: &HarmonicFit<T>,
    partials: &[Partial<T>],
    cfg: &AssociationConfig<T>,
) -> Result<PerceptionAggregate<T>> {
    let reference = cfg.reference()?;
    let candidates = association_candidates(fit, partials);
    let sample_id = reports.first().map(|r| r.sample_id.clone());
    if let Some(id) = &sample_id {
        if let Some(other) = reports.iter().find(|r| &r.sample_id != id) {
            return Err(Error::Format(format!(
                "aggregation expects one sample, found {id:?} and {:?}",
                other.sample_id
            )));
        }
    }

    // Bin key per report: the fractional MIDI number of the quantized note,
    // with low-register notes chained together.
    let midi_of = |r: &ListenerReport<T>| r.pitch.midi_number();
    let is_low =
        |r: &ListenerReport<T>| pitch_to_freq(&r.pitch, reference).hz() < cfg.low_register_hz;
    let mut low_pitches: Vec<T> = reports
        .iter()
        .filter(|r| is_low(r))
        .map(|r| r.pitch.fractional_midi())
        .collect();
    low_pitches.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
    let link = cfg.low_register_tolerance_cents / T::lit(100.0) + T::lit(1e-9);
    let mut clusters: Vec<(T, T)> = Vec::new();
    for p in low_pitches {
        match clusters.last_mut() {
            Some((_, hi)) if p - *hi <= link => *hi = p,
            _ => clusters.push((p, p)),
        }
    }
    #[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
    enum BinKey {
        Low(usize),
        Note(i32),
    }
    let key_of = |r: &ListenerReport<T>| {
        if is_low(r) {
            let p = r.pitch.fractional_midi();
            let idx = clusters
                .iter()
                .position(|(lo, hi)| p >= *lo && p <= *hi)
                .unwrap_or(0);
            BinKey::Low(idx)
        } else {
            BinKey::Note(midi_of(r))
        }
    };

    struct Acc<T> {
        notes: BTreeSet<(i32, String)>,
        count: usize,
        certainties: Vec<T>,
        best: Option<PitchAssociation<T>>,
        by_class: ClassTally,
        tuning: TuningTally,
        listeners: BTreeMap<String, usize>,
        lowest: T,
    }
    let mut bins: BTreeMap<BinKey, Acc<T>> = BTreeMap::new();
    for r in reports {
        let assoc = associate_with_candidates(&r.pitch, &candidates, cfg, reference);
        let acc = bins.entry(key_of(r)).or_insert_with(|| Acc {
            notes: BTreeSet::new(),
            count: 0,
            certainties: Vec::new(),
            best: None,
            by_class: ClassTally::default(),
            tuning: TuningTally::default(),
            listeners: BTreeMap::new(),
            lowest: T::infinity(),
        });
        acc.notes
            .insert((r.pitch.midi_number(), r.pitch.note_label()));
        acc.count += 1;
        acc.certainties.push(r.certainty);
        acc.by_class.add(assoc.color);
        match r.tuning {
            TuningFlag::InTune => acc.tuning.in_tune += 1,
            TuningFlag::TooLow => acc.tuning.too_low += 1,
            TuningFlag::TooHigh => acc.tuning.too_high += 1,
        }
        *acc.listeners.entry(r.listener_id.clone()).or_insert(0) += 1;
        acc.lowest = acc.lowest.min(r.pitch.fractional_midi());
        let replace = match &acc.best {
            None => true,
            Some(b) => {
                assoc.rank() < b.rank()
                    || (assoc.rank() == b.rank() && assoc.pitch.cmp_pitch(&b.pitch).is_lt())
            }
        };
        if replace {
            acc.best = Some(assoc);
        }
    }

    let mut out_bins: Vec<(T, PerceptionBin<T>)> = bins
        .into_values()
        .map(|mut acc| {
            acc.certainties
                .sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
            let notes: Vec<String> = acc.notes.iter().map(|(_, n)| n.clone()).collect();
            (
                acc.lowest,
                PerceptionBin {
                    label: notes.join("/"),
                    notes,
                    count: acc.count,
                    summed_certainty: acc.certainties.iter().copied().sum(),
                    association: acc.best.expect("every bin has a report"),
                    by_class: acc.by_class,
                    tuning: acc.tuning,
                    duplicate_reports: acc.listeners.values().map(|c| c - 1).sum(),
                },
            )
        })
        .collect();
    out_bins.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap_or(std::cmp::Ordering::Equal));

    let (listener_weighted_counts, mean_weighted_count) = match &sample_id {
        Some(id) => (
            listener_weighted_counts(reports, id),
            weighted_pitch_count(reports, id),
        ),
        None => (BTreeMap::new(), None),
    };
    Ok(PerceptionAggregate {
        sample_id,
        report_count: reports.len(),
        bins: out_bins.into_iter().map(|(_, b)| b).collect(),
        listener_weighted_counts,
        mean_weighted_count,
    })
}
