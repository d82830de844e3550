//! Temporal pitch models: waveform autocorrelation, partial spacing and the
//! approximate greatest common divisor of spacings.

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::{median, parabolic_vertex, Real};
use crate::tone::{cents, Frequency, Partial};

/// A closed frequency interval `[min, max]` in Hz.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct SearchRange<T> {
    pub min: T,
    pub max: T,
}

impl<T: Real> SearchRange<T> {
    pub fn new(min: T, max: T) -> Result<Self> {
        let r = SearchRange { min, max };
        r.validate()?;
        Ok(r)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.min.is_finite()
            && self.max.is_finite()
            && self.min > T::zero()
            && self.min < self.max)
        {
            return Err(Error::Config(format!(
                "search range must satisfy 0 < min < max, got [{}, {}]",
                self.min, self.max
            )));
        }
        Ok(())
    }

    pub fn contains(&self, f: T) -> bool {
        f >= self.min && f <= self.max
    }

    pub fn scaled(&self, k: T) -> Self {
        SearchRange {
            min: self.min * k,
            max: self.max * k,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum F0Method {
    Autocorrelation,
    SpacingGcd,
    /// Peak of the smoothed spectral envelope (carrier of a modulated tone).
    SpectralEnvelope,
    /// Least-deviating harmonic series fitted to the partials.
    HarmonicFit,
}

/// An f0 estimate; `frequency` is `None` when the method found nothing.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct F0Estimate<T> {
    pub frequency: Option<Frequency<T>>,
    /// Normalized peak height in `[0, 1]`.
    pub salience: T,
    pub method: F0Method,
}

impl<T: Real> F0Estimate<T> {
    pub fn none(method: F0Method) -> Self {
        F0Estimate {
            frequency: None,
            salience: T::zero(),
            method,
        }
    }

    pub fn hz(&self) -> Option<T> {
        self.frequency.map(Frequency::hz)
    }
}

/// Energy-normalized autocorrelation `r[tau] = sum x[n] x[n+tau] / sum x[n]^2`
/// for lags `0..=max_lag`.
pub fn normalized_autocorrelation<T: Real>(samples: &[T], max_lag: usize) -> Vec<T> {
    let n = samples.len();
    let size = (2 * n).next_power_of_two();
    let mut buf: Vec<Complex<T>> = samples
        .iter()
        .map(|x| Complex::new(*x, T::zero()))
        .chain(std::iter::repeat(Complex::new(T::zero(), T::zero())))
        .take(size)
        .collect();
    let mut planner = FftPlanner::new();
    planner.plan_fft_forward(size).process(&mut buf);
    buf.iter_mut()
        .for_each(|c| *c = Complex::new(c.norm_sqr(), T::zero()));
    planner.plan_fft_inverse(size).process(&mut buf);
    let energy = buf[0].re;
    let max_lag = max_lag.min(n.saturating_sub(1));
    if energy <= T::zero() {
        return vec![T::zero(); max_lag + 1];
    }
    buf[..=max_lag].iter().map(|c| c.re / energy).collect()
}

/// The highest local maximum of the normalized autocorrelation with lag in
/// `[rate/max, rate/min]`, refined by a parabola through neighbouring lags.
pub fn autocorrelation_f0<T: Real>(
    samples: &[T],
    rate: T,
    search: SearchRange<T>,
) -> Result<F0Estimate<T>> {
    search.validate()?;
    if !(rate.is_finite() && rate > T::zero()) {
        return Err(Error::InvalidFrequency(rate.to_f64_lossy()));
    }
    let longest = rate / search.min;
    let needed = (T::lit(2.0) * longest)
        .ceil()
        .to_usize()
        .unwrap_or(usize::MAX);
    if samples.len() < needed {
        return Err(Error::InsufficientData(format!(
            "autocorrelation down to {} Hz needs {} samples, frame has {}",
            search.min,
            needed,
            samples.len()
        )));
    }
    let lo = (rate / search.max).floor().to_usize().unwrap_or(1).max(1);
    let hi = longest.ceil().to_usize().unwrap_or(lo);
    let r = normalized_autocorrelation(samples, hi + 1);
    let hi = hi.min(r.len().saturating_sub(2));

    let mut best: Option<(usize, T)> = None;
    for tau in lo.max(1)..=hi {
        let v = r[tau];
        if v > T::zero() && v > r[tau - 1] && v >= r[tau + 1] && best.is_none_or(|(_, b)| v > b) {
            best = Some((tau, v));
        }
    }
    let Some((tau, _)) = best else {
        return Ok(F0Estimate::none(F0Method::Autocorrelation));
    };
    let (delta, height) = parabolic_vertex(r[tau - 1], r[tau], r[tau + 1]);
    let lag = T::from_usize_lossy(tau) + delta;
    Ok(F0Estimate {
        frequency: Some(Frequency::new(rate / lag)?),
        salience: height.max(T::zero()).min(T::one()),
        method: F0Method::Autocorrelation,
    })
}

/// Differences between consecutive partials with a robust center.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct SpacingProfile<T> {
    pub spacings: Vec<T>,
    /// Median spacing.
    pub center: T,
    /// Median absolute deviation from the center.
    pub dispersion: T,
}

/// Spacing statistics of a list of partials sorted by frequency.
pub fn partial_spacings<T: Real>(partials: &[Partial<T>]) -> Result<SpacingProfile<T>> {
    if partials.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "spacing needs at least 2 partials, got {}",
            partials.len()
        )));
    }
    let spacings: Vec<T> = partials.windows(2).map(|w| w[1].hz() - w[0].hz()).collect();
    if spacings.iter().any(|s| !(*s > T::zero())) {
        return Err(Error::Config(
            "partials must be strictly ascending in frequency".into(),
        ));
    }
    let center = median(&spacings).expect("non-empty");
    let deviations: Vec<T> = spacings.iter().map(|s| (*s - center).abs()).collect();
    let dispersion = median(&deviations).expect("non-empty");
    Ok(SpacingProfile {
        spacings,
        center,
        dispersion,
    })
}

/// Result of [`approximate_gcd`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct GcdFit<T> {
    pub gcd: Frequency<T>,
    /// Fraction of spacings within tolerance of a multiple of `gcd`.
    pub fit_fraction: T,
    /// RMS cent deviation of all spacings from their nearest multiple.
    pub rms_deviation_cents: T,
}

const GCD_GRID_STEP_HZ: f64 = 0.01;

fn multiple_deviation<T: Real>(s: T, g: T) -> (T, T) {
    let n = (s / g).round().max(T::one());
    (n, cents(n * g, s))
}

/// Largest `g` such that every spacing lies within `tolerance_cents` of an
/// integer multiple of `g`.
///
/// Candidates are scanned on a 0.01 Hz grid over `[min/8, 1.05 min]`. The
/// winning candidate maximizes the number of fitting spacings; among grid runs
/// with that count the highest run is chosen, and within it `g` is set to the
/// log-least-squares solution for the run's harmonic numbers. When no
/// candidate fits every spacing the best partial fit is returned and
/// `fit_fraction` says how good it is.
pub fn approximate_gcd<T: Real>(spacings: &[T], tolerance_cents: T) -> Result<GcdFit<T>> {
    if spacings.is_empty() {
        return Err(Error::InsufficientData(
            "approximate gcd of an empty set".into(),
        ));
    }
    if spacings.iter().any(|s| !(s.is_finite() && *s > T::zero())) {
        return Err(Error::InvalidFrequency(
            spacings
                .iter()
                .find(|s| !(s.is_finite() && **s > T::zero()))
                .unwrap()
                .to_f64_lossy(),
        ));
    }
    if !(tolerance_cents.is_finite() && tolerance_cents >= T::zero()) {
        return Err(Error::Config("gcd tolerance must be >= 0 cents".into()));
    }
    let smallest = spacings.iter().copied().fold(T::infinity(), T::min);
    let step = T::lit(GCD_GRID_STEP_HZ);
    let lo = smallest / T::lit(8.0);
    let hi = smallest * T::lit(1.05);
    let steps = ((hi - lo) / step).floor().to_usize().unwrap_or(0);

    // A grid point stands for the half-step neighbourhood around it.
    let cents_per_hz = T::lit(1200.0 / std::f64::consts::LN_2);
    let inliers = |g: T, slack: T| {
        spacings
            .iter()
            .filter(|s| multiple_deviation(**s, g).1.abs() <= tolerance_cents + slack)
            .count()
    };

    let mut best_count = 0usize;
    let mut best_run: Option<(usize, usize)> = None;
    let mut run_start: Option<usize> = None;
    for i in 0..=steps + 1 {
        if i > steps {
            if let Some(start) = run_start {
                best_run = Some((start, steps));
            }
            break;
        }
        let g = lo + step * T::from_usize_lossy(i);
        let count = inliers(g, cents_per_hz * step * T::lit(0.5) / g);
        if count > best_count {
            best_count = count;
            best_run = None;
            run_start = Some(i);
            continue;
        }
        match (count == best_count, run_start) {
            (true, None) => run_start = Some(i),
            (false, Some(start)) => {
                best_run = Some((start, i - 1));
                run_start = None;
            }
            _ => {}
        }
    }
    let (start, end) = best_run.expect("the final step closes the open run");

    // Pick the grid point in the run with the smallest mean-square deviation,
    // then solve for g with those harmonic numbers held fixed.
    let msd = |g: T| {
        spacings
            .iter()
            .map(|s| {
                let d = multiple_deviation(*s, g).1;
                d * d
            })
            .sum::<T>()
    };
    let grid_best = (start..=end)
        .map(|i| lo + step * T::from_usize_lossy(i))
        .min_by(|a, b| {
            msd(*a)
                .partial_cmp(&msd(*b))
                .unwrap_or(std::cmp::Ordering::Equal)
        })
        .expect("run is non-empty");

    let fitting: Vec<(T, T)> = spacings
        .iter()
        .map(|s| (*s, multiple_deviation(*s, grid_best)))
        .filter(|(_, (_, d))| d.abs() <= tolerance_cents + cents_per_hz * step / grid_best)
        .map(|(s, (n, _))| (s, n))
        .collect();
    let mut g = grid_best;
    if !fitting.is_empty() {
        let mean_log = fitting.iter().map(|(s, n)| (*s / *n).ln()).sum::<T>()
            / T::from_usize_lossy(fitting.len());
        let refined = mean_log.exp();
        if inliers(refined, T::zero()) >= inliers(g, T::zero()) {
            g = refined;
        }
    }

    let n = T::from_usize_lossy(spacings.len());
    Ok(GcdFit {
        gcd: Frequency::new(g)?,
        fit_fraction: T::from_usize_lossy(inliers(g, T::zero())) / n,
        rms_deviation_cents: (msd(g) / n).sqrt(),
    })
}
