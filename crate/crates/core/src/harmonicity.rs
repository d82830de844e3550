//! Least-deviating harmonic series, harmonic-number assignment, the
//! quasi-harmonic/inharmonic decision and carrier/modulation decomposition.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::{parabolic_vertex, Real};
use crate::spectral::{
    apply_equal_loudness_weighting, compute_power_spectrum, extract_partials, smooth_spectrum,
    LoudnessContour, PeakConfig, WindowConfig,
};
use crate::temporal::{
    autocorrelation_f0, partial_spacings, F0Estimate, F0Method, SearchRange, SpacingProfile,
};
use crate::tone::{cents, Frequency, Partial};

/// One partial matched to harmonic `harmonic` of the fitted series.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct HarmonicAssignment<T> {
    pub partial_index: usize,
    pub harmonic: u32,
    /// Signed offset of the partial from `harmonic * f0`.
    pub deviation_cents: T,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct HarmonicFit<T> {
    pub f0: Frequency<T>,
    /// Sorted by partial index.
    pub assignments: Vec<HarmonicAssignment<T>>,
    /// Power-weighted RMS of every partial's offset from its nearest harmonic,
    /// assigned or not.
    pub rms_deviation_cents: T,
    pub unassigned_partials: Vec<usize>,
    pub tolerance_cents: T,
    pub partial_count: usize,
    pub lowest_partial_hz: T,
}

impl<T: Real> HarmonicFit<T> {
    pub fn assigned_fraction(&self) -> T {
        if self.partial_count == 0 {
            T::zero()
        } else {
            T::from_usize_lossy(self.assignments.len()) / T::from_usize_lossy(self.partial_count)
        }
    }

    pub fn harmonic_of(&self, partial_index: usize) -> Option<u32> {
        self.assignments
            .iter()
            .find(|a| a.partial_index == partial_index)
            .map(|a| a.harmonic)
    }
}

fn normalized_weights<T: Real>(partials: &[Partial<T>]) -> Vec<T> {
    let total: T = partials.iter().map(|p| p.power).sum();
    if total > T::zero() && total.is_finite() {
        partials.iter().map(|p| p.power / total).collect()
    } else {
        vec![T::one() / T::from_usize_lossy(partials.len().max(1)); partials.len()]
    }
}

fn nearest_harmonic<T: Real>(f: T, f0: T) -> T {
    (f / f0).round().max(T::one())
}

/// Power-weighted sum of squared cent offsets from the nearest harmonics of `f0`.
fn series_cost<T: Real>(freqs: &[T], weights: &[T], f0: T) -> T {
    freqs
        .iter()
        .zip(weights)
        .map(|(f, w)| {
            let d = cents(nearest_harmonic(*f, f0) * f0, *f);
            *w * d * d
        })
        .sum()
}

/// Weighted least squares in log-frequency with harmonic numbers held fixed,
/// re-deriving the numbers until they settle.
fn refine_f0<T: Real>(freqs: &[T], weights: &[T], start: T, range: &SearchRange<T>) -> T {
    let mut f0 = start;
    for _ in 0..6 {
        let log_f0 = freqs
            .iter()
            .zip(weights)
            .map(|(f, w)| *w * (*f / nearest_harmonic(*f, f0)).ln())
            .sum::<T>()
            / weights.iter().copied().sum::<T>();
        let next = log_f0.exp().max(range.min).min(range.max);
        if next == f0 {
            break;
        }
        f0 = next;
    }
    f0
}

/// Fundamental of the harmonic series that deviates least from `partials`.
///
/// The cost is the power-weighted sum of squared cent offsets of each partial
/// from its nearest harmonic `n * f0` (`n >= 1`). It is scanned on a 1-cent
/// grid over `search`; every grid minimum is polished by log-domain least
/// squares. Candidates whose cost ties the minimum resolve to the highest f0,
/// so exact subharmonics never displace the fundamental.
pub fn fit_least_deviating_series<T: Real>(
    partials: &[Partial<T>],
    search: SearchRange<T>,
    tolerance_cents: T,
) -> Result<HarmonicFit<T>> {
    search.validate()?;
    if partials.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "harmonic fit needs at least 2 partials, got {}",
            partials.len()
        )));
    }
    let freqs: Vec<T> = partials.iter().map(Partial::hz).collect();
    let weights = normalized_weights(partials);

    let steps = (T::lit(1200.0) * (search.max / search.min).log2())
        .floor()
        .to_usize()
        .unwrap_or(0);
    let grid = |i: usize| search.min * (T::from_usize_lossy(i) / T::lit(1200.0)).exp2();
    let costs: Vec<T> = (0..=steps)
        .map(|i| series_cost(&freqs, &weights, grid(i)))
        .collect();

    let mut candidates: Vec<(T, T)> = Vec::new();
    for i in 0..=steps {
        let left = if i > 0 { costs[i - 1] } else { T::infinity() };
        let right = if i < steps {
            costs[i + 1]
        } else {
            T::infinity()
        };
        if costs[i] <= left && costs[i] <= right {
            candidates.push((grid(i), costs[i]));
            let polished = refine_f0(&freqs, &weights, grid(i), &search);
            candidates.push((polished, series_cost(&freqs, &weights, polished)));
        }
    }
    let min_cost = candidates.iter().map(|c| c.1).fold(T::infinity(), T::min);
    let tie = min_cost + T::lit(1e-6) * (T::one() + min_cost);
    let f0 = candidates
        .iter()
        .filter(|c| c.1 <= tie)
        .map(|c| c.0)
        .fold(T::neg_infinity(), T::max);

    let fit = assign_harmonic_numbers(partials, Frequency::new(f0)?, tolerance_cents);
    if fit.assignments.is_empty() {
        return Err(Error::DegenerateFit(format!(
            "no partial lies within {tolerance_cents} ct of a harmonic of {f0} Hz"
        )));
    }
    Ok(fit)
}

/// Assigns each partial to `round(f / f0)` when within `tolerance_cents`.
/// When several partials claim the same harmonic the closest keeps it.
pub fn assign_harmonic_numbers<T: Real>(
    partials: &[Partial<T>],
    f0: Frequency<T>,
    tolerance_cents: T,
) -> HarmonicFit<T> {
    let f0_hz = f0.hz();
    let tol = tolerance_cents.max(T::zero());
    let mut best: std::collections::BTreeMap<u32, (usize, T)> = std::collections::BTreeMap::new();
    for (i, p) in partials.iter().enumerate() {
        let n = nearest_harmonic(p.hz(), f0_hz);
        let dev = cents(n * f0_hz, p.hz());
        if dev.abs() > tol {
            continue;
        }
        let n = n.to_u32().unwrap_or(u32::MAX);
        match best.get(&n) {
            Some((_, d)) if d.abs() <= dev.abs() => {}
            _ => {
                best.insert(n, (i, dev));
            }
        }
    }
    let mut assignments: Vec<HarmonicAssignment<T>> = best
        .into_iter()
        .map(
            |(harmonic, (partial_index, deviation_cents))| HarmonicAssignment {
                partial_index,
                harmonic,
                deviation_cents,
            },
        )
        .collect();
    assignments.sort_by_key(|a| a.partial_index);
    let unassigned_partials = (0..partials.len())
        .filter(|i| !assignments.iter().any(|a| a.partial_index == *i))
        .collect();

    let freqs: Vec<T> = partials.iter().map(Partial::hz).collect();
    let weights = normalized_weights(partials);
    let rms = if partials.is_empty() {
        T::zero()
    } else {
        series_cost(&freqs, &weights, f0_hz).sqrt()
    };
    HarmonicFit {
        f0,
        assignments,
        rms_deviation_cents: rms,
        unassigned_partials,
        tolerance_cents: tol,
        partial_count: partials.len(),
        lowest_partial_hz: if freqs.is_empty() {
            T::zero()
        } else {
            freqs.iter().copied().fold(T::infinity(), T::min)
        },
    }
}

/// Series that explains the most partial power within `tolerance_cents`,
/// polished by least squares over those partials only.
fn dominant_series<T: Real>(
    partials: &[Partial<T>],
    search: &SearchRange<T>,
    tolerance_cents: T,
) -> T {
    let freqs: Vec<T> = partials.iter().map(Partial::hz).collect();
    let weights = normalized_weights(partials);
    let steps = (T::lit(1200.0) * (search.max / search.min).log2())
        .floor()
        .to_usize()
        .unwrap_or(0);
    let mut best: Option<(T, T, T)> = None;
    for i in 0..=steps {
        let f0 = search.min * (T::from_usize_lossy(i) / T::lit(1200.0)).exp2();
        let mut score = T::zero();
        let mut cost = T::zero();
        for (f, w) in freqs.iter().zip(&weights) {
            let d = cents(nearest_harmonic(*f, f0) * f0, *f);
            if d.abs() <= tolerance_cents {
                score = score + *w;
                cost = cost + *w * d * d;
            }
        }
        let eps = T::lit(1e-9);
        let better = match best {
            None => true,
            Some((_, s, c)) => score > s + eps || (score >= s - eps && cost <= c + eps),
        };
        if better {
            best = Some((f0, score, cost));
        }
    }
    let f0 = best.map_or(search.min, |b| b.0);
    let (inlier_f, inlier_w): (Vec<T>, Vec<T>) = freqs
        .iter()
        .zip(&weights)
        .filter(|(f, _)| cents(nearest_harmonic(**f, f0) * f0, **f).abs() <= tolerance_cents)
        .map(|(f, w)| (*f, *w))
        .unzip();
    if inlier_f.is_empty() || inlier_w.iter().copied().sum::<T>() <= T::zero() {
        return f0;
    }
    let polished = refine_f0(&inlier_f, &inlier_w, f0, search);
    let kept = |g: T| {
        freqs
            .iter()
            .filter(|f| cents(nearest_harmonic(**f, g) * g, **f).abs() <= tolerance_cents)
            .count()
    };
    if kept(polished) >= inlier_f.len() {
        polished
    } else {
        f0
    }
}

/// Groups partials into several harmonic series: each round takes the series
/// explaining the most remaining power, then continues on what it left
/// unassigned. Indices in every returned fit refer to `partials`.
pub fn fit_multiple_series<T: Real>(
    partials: &[Partial<T>],
    search: SearchRange<T>,
    tolerance_cents: T,
    max_series: usize,
) -> Result<Vec<HarmonicFit<T>>> {
    search.validate()?;
    let mut remaining: Vec<usize> = (0..partials.len()).collect();
    let mut fits = Vec::new();
    while fits.len() < max_series && remaining.len() >= 2 {
        let subset: Vec<Partial<T>> = remaining.iter().map(|i| partials[*i]).collect();
        let f0 = dominant_series(&subset, &search, tolerance_cents);
        let fit = assign_harmonic_numbers(&subset, Frequency::new(f0)?, tolerance_cents);
        if fit.assignments.is_empty() {
            break;
        }
        let mut mapped = fit.clone();
        for a in &mut mapped.assignments {
            a.partial_index = remaining[a.partial_index];
        }
        mapped.unassigned_partials = fit
            .unassigned_partials
            .iter()
            .map(|i| remaining[*i])
            .collect();
        remaining = mapped.unassigned_partials.clone();
        fits.push(mapped);
    }
    Ok(fits)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum HarmonicityLabel {
    QuasiHarmonic,
    Inharmonic,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct HarmonicityEvidence<T> {
    pub rms_deviation_cents: T,
    pub assigned_fraction: T,
    /// Cents from the fitted f0 to the spacing center, folded into (-600, 600].
    pub spacing_offset_cents: T,
    pub spacing_to_first_partial_ratio: T,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct HarmonicityClass<T> {
    pub label: HarmonicityLabel,
    pub evidence: HarmonicityEvidence<T>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields, bound = "T: Real")]
pub struct ClassificationThresholds<T> {
    pub min_assigned_fraction: T,
    pub max_rms_cents: T,
    pub max_spacing_offset_cents: T,
}

impl<T: Real> Default for ClassificationThresholds<T> {
    fn default() -> Self {
        ClassificationThresholds {
            min_assigned_fraction: T::lit(0.8),
            max_rms_cents: T::lit(25.0),
            max_spacing_offset_cents: T::lit(50.0),
        }
    }
}

impl<T: Real> ClassificationThresholds<T> {
    /// The label implied by `evidence`; nothing else is consulted.
    pub fn decide(&self, evidence: &HarmonicityEvidence<T>) -> HarmonicityLabel {
        if evidence.assigned_fraction < self.min_assigned_fraction
            || evidence.rms_deviation_cents > self.max_rms_cents
            || evidence.spacing_offset_cents.abs() > self.max_spacing_offset_cents
        {
            HarmonicityLabel::Inharmonic
        } else {
            HarmonicityLabel::QuasiHarmonic
        }
    }
}

/// Folds an interval into (-600, 600] cents.
pub fn fold_octaves<T: Real>(c: T) -> T {
    let octave = T::lit(1200.0);
    let mut folded = c - octave * (c / octave).round();
    if folded <= -T::lit(600.0) {
        folded = folded + octave;
    }
    folded
}

pub fn classify_harmonicity<T: Real>(
    fit: &HarmonicFit<T>,
    profile: &SpacingProfile<T>,
) -> HarmonicityClass<T> {
    classify_harmonicity_with(fit, profile, &ClassificationThresholds::default())
}

pub fn classify_harmonicity_with<T: Real>(
    fit: &HarmonicFit<T>,
    profile: &SpacingProfile<T>,
    thresholds: &ClassificationThresholds<T>,
) -> HarmonicityClass<T> {
    let evidence = HarmonicityEvidence {
        rms_deviation_cents: fit.rms_deviation_cents,
        assigned_fraction: fit.assigned_fraction(),
        spacing_offset_cents: fold_octaves(cents(fit.f0.hz(), profile.center)),
        spacing_to_first_partial_ratio: profile.center / fit.lowest_partial_hz,
    };
    HarmonicityClass {
        label: thresholds.decide(&evidence),
        evidence,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields, bound = "T: Real")]
pub struct HarmonicityConfig<T> {
    pub search: SearchRange<T>,
    pub tolerance_cents: T,
    /// Restrict the fit to the octave below the spacing center (plus a
    /// semitone either side), so the fitted series explains the spacing.
    pub anchor_to_spacing: bool,
    pub thresholds: ClassificationThresholds<T>,
}

impl<T: Real> Default for HarmonicityConfig<T> {
    fn default() -> Self {
        HarmonicityConfig {
            search: SearchRange {
                min: T::lit(20.0),
                max: T::lit(2000.0),
            },
            tolerance_cents: T::lit(35.0),
            anchor_to_spacing: true,
            thresholds: ClassificationThresholds::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct HarmonicityAnalysis<T> {
    pub profile: SpacingProfile<T>,
    pub fit: HarmonicFit<T>,
    pub class: HarmonicityClass<T>,
    pub fit_range: SearchRange<T>,
}

/// The f0 search range tied to a spacing center: `[center/2, center]`
/// widened by a semitone, intersected with `search`.
pub fn spacing_anchored_range<T: Real>(center: T, search: &SearchRange<T>) -> SearchRange<T> {
    let semitone = T::lit(2f64.powf(1.0 / 12.0));
    let min = (center / T::lit(2.0) / semitone).max(search.min);
    let max = (center * semitone).min(search.max);
    if min < max {
        SearchRange { min, max }
    } else {
        *search
    }
}

/// Spacing profile, harmonic fit and classification of one partial list.
pub fn analyze_harmonicity<T: Real>(
    partials: &[Partial<T>],
    cfg: &HarmonicityConfig<T>,
) -> Result<HarmonicityAnalysis<T>> {
    cfg.search.validate()?;
    let profile = partial_spacings(partials)?;
    let fit_range = if cfg.anchor_to_spacing {
        spacing_anchored_range(profile.center, &cfg.search)
    } else {
        cfg.search
    };
    let fit = fit_least_deviating_series(partials, fit_range, cfg.tolerance_cents)?;
    let class = classify_harmonicity_with(&fit, &profile, &cfg.thresholds);
    Ok(HarmonicityAnalysis {
        profile,
        fit,
        class,
        fit_range,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields, bound = "T: Real")]
pub struct CarrierConfig<T> {
    pub window: WindowConfig,
    pub smoothing_bandwidth_hz: T,
    pub modulation_search: SearchRange<T>,
    pub peaks: PeakConfig<T>,
    /// Loudness level for weighting the envelope before locating the carrier;
    /// `None` reads the carrier from the unweighted envelope.
    pub envelope_phon: Option<T>,
}

impl<T: Real> Default for CarrierConfig<T> {
    fn default() -> Self {
        CarrierConfig {
            window: WindowConfig::default(),
            smoothing_bandwidth_hz: T::lit(128.0),
            modulation_search: SearchRange {
                min: T::lit(20.0),
                max: T::lit(120.0),
            },
            peaks: PeakConfig::default(),
            envelope_phon: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct CarrierModulation<T> {
    /// Peak of the smoothed spectral envelope.
    pub carrier: F0Estimate<T>,
    /// Waveform periodicity over the low search range.
    pub modulation: F0Estimate<T>,
    /// Median spacing of the raw partials.
    pub sideband_spacing: Option<T>,
}

/// Splits a modulated tone into the carrier (where the spectral envelope
/// peaks) and the modulation rate (the waveform's low periodicity).
///
/// A frame with fewer than two raw partials carries no modulation, so its
/// modulation estimate is empty.
pub fn decompose_carrier_modulation<T: Real>(
    samples: &[T],
    rate: T,
    cfg: &CarrierConfig<T>,
) -> Result<CarrierModulation<T>> {
    let raw = compute_power_spectrum(samples, rate, &cfg.window)?;
    let envelope_source = match cfg.envelope_phon {
        Some(phon) => apply_equal_loudness_weighting(&raw, &LoudnessContour::iso226(phon)?)?,
        None => raw.clone(),
    };
    let envelope = smooth_spectrum(&envelope_source, cfg.smoothing_bandwidth_hz)?;
    let carrier = envelope_peak(&envelope);

    let partials = extract_partials(&raw, &cfg.peaks)?;
    let (modulation, sideband_spacing) = if partials.len() >= 2 {
        (
            autocorrelation_f0(samples, rate, cfg.modulation_search)?,
            Some(partial_spacings(&partials)?.center),
        )
    } else {
        (F0Estimate::none(F0Method::Autocorrelation), None)
    };
    Ok(CarrierModulation {
        carrier,
        modulation,
        sideband_spacing,
    })
}

/// Strongest bin of a smoothed spectrum, refined over log-power. Salience is
/// its share of the summed power of all envelope maxima.
fn envelope_peak<T: Real>(s: &crate::tone::Spectrum<T>) -> F0Estimate<T> {
    let p = s.bin_powers();
    let f = s.bin_frequencies();
    let Some((k, peak)) = s.max_bin() else {
        return F0Estimate::none(F0Method::SpectralEnvelope);
    };
    if !(peak > T::zero()) || k == 0 || k + 1 >= p.len() {
        return F0Estimate::none(F0Method::SpectralEnvelope);
    }
    let db = |v: T| T::lit(10.0) * v.max(T::min_positive_value()).log10();
    let (delta, _) = parabolic_vertex(db(p[k - 1]), db(p[k]), db(p[k + 1]));
    let freq = f[k] + delta * (f[k + 1] - f[k]);
    let maxima: T = (1..p.len() - 1)
        .filter(|&i| p[i] > p[i - 1] && p[i] >= p[i + 1])
        .map(|i| p[i])
        .sum();
    match Frequency::new(freq) {
        Ok(freq) => F0Estimate {
            frequency: Some(freq),
            salience: if maxima > T::zero() {
                (peak / maxima).min(T::one())
            } else {
                T::one()
            },
            method: F0Method::SpectralEnvelope,
        },
        Err(_) => F0Estimate::none(F0Method::SpectralEnvelope),
    }
}
