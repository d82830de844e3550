//! Windowed power spectra, loudness weighting, smoothing and peak picking.

mod loudness;
mod peaks;
mod smoothing;

pub use loudness::{apply_equal_loudness_weighting, LoudnessContour, FLOOR_GAIN_DB};
pub use peaks::{extract_partials, PeakConfig};
pub use smoothing::smooth_spectrum;

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::tone::{Spectrum, SpectrumKind};

/// Tapered-cosine window family.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum WindowShape {
    Hann,
    Hamming,
    /// 4-term Blackman-Harris, sidelobes near -92 dB.
    #[default]
    BlackmanHarris,
}

impl WindowShape {
    fn coefficients(self) -> &'static [f64] {
        match self {
            WindowShape::Hann => &[0.5, 0.5],
            WindowShape::Hamming => &[0.54, 0.46],
            WindowShape::BlackmanHarris => &[0.35875, 0.48829, 0.14128, 0.01168],
        }
    }

    /// Periodic (DFT-even) window of length `n`.
    pub fn samples<T: Real>(self, n: usize) -> Vec<T> {
        let coeffs = self.coefficients();
        (0..n)
            .map(|i| {
                let phase = std::f64::consts::TAU * i as f64 / n as f64;
                let w: f64 = coeffs
                    .iter()
                    .enumerate()
                    .map(|(k, a)| if k % 2 == 0 { *a } else { -*a } * (k as f64 * phase).cos())
                    .sum();
                T::lit(w)
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WindowConfig {
    /// Samples per analysis frame; a power of two, at least 1024.
    pub window_length: usize,
    /// Frame advance for multi-frame averaging.
    pub hop: usize,
    pub zero_pad_factor: usize,
    pub window_shape: WindowShape,
}

impl Default for WindowConfig {
    fn default() -> Self {
        WindowConfig {
            window_length: 8192,
            hop: 4096,
            zero_pad_factor: 4,
            window_shape: WindowShape::BlackmanHarris,
        }
    }
}

impl WindowConfig {
    pub fn validate(&self) -> Result<()> {
        if self.window_length < 1024 || !self.window_length.is_power_of_two() {
            return Err(Error::Config(format!(
                "window_length must be a power of two >= 1024, got {}",
                self.window_length
            )));
        }
        if self.zero_pad_factor < 1 {
            return Err(Error::Config("zero_pad_factor must be >= 1".into()));
        }
        if self.hop < 1 {
            return Err(Error::Config("hop must be >= 1".into()));
        }
        Ok(())
    }

    pub fn fft_length(&self) -> usize {
        self.window_length * self.zero_pad_factor
    }
}

/// One-sided power spectrum of the first `window_length` samples.
///
/// Bin powers are scaled so they sum to the power-normalized energy of the
/// windowed frame, `sum((w x)^2) / sum(w^2)`: a sinusoid of amplitude `A`
/// integrates to `A^2 / 2` across its lobe.
pub fn compute_power_spectrum<T: Real>(
    samples: &[T],
    rate: T,
    cfg: &WindowConfig,
) -> Result<Spectrum<T>> {
    cfg.validate()?;
    check_rate(rate)?;
    if samples.len() < cfg.window_length {
        return Err(Error::InsufficientData(format!(
            "frame has {} samples, window needs {}",
            samples.len(),
            cfg.window_length
        )));
    }
    let mut analyzer = FrameAnalyzer::new(cfg);
    let powers = analyzer.power(&samples[..cfg.window_length]);
    analyzer.into_spectrum(powers, rate)
}

/// Mean of frame power spectra taken every `hop` samples.
pub fn compute_averaged_power_spectrum<T: Real>(
    samples: &[T],
    rate: T,
    cfg: &WindowConfig,
) -> Result<Spectrum<T>> {
    cfg.validate()?;
    check_rate(rate)?;
    if samples.len() < cfg.window_length {
        return Err(Error::InsufficientData(format!(
            "frame has {} samples, window needs {}",
            samples.len(),
            cfg.window_length
        )));
    }
    let mut analyzer = FrameAnalyzer::new(cfg);
    let mut acc: Vec<T> = Vec::new();
    let mut frames = 0usize;
    let mut start = 0;
    while start + cfg.window_length <= samples.len() {
        let p = analyzer.power(&samples[start..start + cfg.window_length]);
        if acc.is_empty() {
            acc = p;
        } else {
            acc.iter_mut().zip(p).for_each(|(a, b)| *a = *a + b);
        }
        frames += 1;
        start += cfg.hop;
    }
    let scale = T::one() / T::from_usize_lossy(frames);
    acc.iter_mut().for_each(|a| *a = *a * scale);
    analyzer.into_spectrum(acc, rate)
}

fn check_rate<T: Real>(rate: T) -> Result<()> {
    if rate.is_finite() && rate > T::zero() {
        Ok(())
    } else {
        Err(Error::InvalidFrequency(rate.to_f64_lossy()))
    }
}

struct FrameAnalyzer<T: Real> {
    window: Vec<T>,
    window_power: T,
    fft: std::sync::Arc<dyn rustfft::Fft<T>>,
    buffer: Vec<Complex<T>>,
    window_length: usize,
}

impl<T: Real> FrameAnalyzer<T> {
    fn new(cfg: &WindowConfig) -> Self {
        let window = cfg.window_shape.samples::<T>(cfg.window_length);
        let window_power = window.iter().map(|w| *w * *w).sum();
        let n = cfg.fft_length();
        let fft = FftPlanner::new().plan_fft_forward(n);
        FrameAnalyzer {
            window,
            window_power,
            fft,
            buffer: vec![Complex::new(T::zero(), T::zero()); n],
            window_length: cfg.window_length,
        }
    }

    fn power(&mut self, frame: &[T]) -> Vec<T> {
        let n = self.buffer.len();
        for (i, slot) in self.buffer.iter_mut().enumerate() {
            *slot = if i < frame.len() {
                Complex::new(frame[i] * self.window[i], T::zero())
            } else {
                Complex::new(T::zero(), T::zero())
            };
        }
        self.fft.process(&mut self.buffer);
        let norm = T::from_usize_lossy(n) * self.window_power;
        let half = n / 2;
        (0..=half)
            .map(|k| {
                let c = if k == 0 || k == half {
                    T::one()
                } else {
                    T::lit(2.0)
                };
                if norm > T::zero() {
                    c * self.buffer[k].norm_sqr() / norm
                } else {
                    T::zero()
                }
            })
            .collect()
    }

    fn into_spectrum(self, powers: Vec<T>, rate: T) -> Result<Spectrum<T>> {
        let n = T::from_usize_lossy(self.buffer.len());
        let freqs = (0..powers.len())
            .map(|k| T::from_usize_lossy(k) * rate / n)
            .collect();
        Spectrum::new(freqs, powers, rate, self.window_length, SpectrumKind::Raw)
    }
}

/// Power-normalized energy of the windowed frame, the quantity the spectrum's bins sum to.
pub fn windowed_frame_power<T: Real>(samples: &[T], cfg: &WindowConfig) -> T {
    let w = cfg.window_shape.samples::<T>(cfg.window_length);
    let wp: T = w.iter().map(|v| *v * *v).sum();
    let e: T = samples
        .iter()
        .zip(&w)
        .map(|(x, w)| (*x * *w) * (*x * *w))
        .sum();
    if wp > T::zero() {
        e / wp
    } else {
        T::zero()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sine(freq: f64, amp: f64, rate: f64, n: usize) -> Vec<f64> {
        (0..n)
            .map(|i| amp * (std::f64::consts::TAU * freq * i as f64 / rate).sin())
            .collect()
    }

    #[test]
    fn parseval_holds() {
        let x: Vec<f64> = (0..8192)
            .map(|i| ((i * 7919) % 113) as f64 / 113.0 - 0.5)
            .collect();
        let cfg = WindowConfig::default();
        let s = compute_power_spectrum(&x, 48000.0, &cfg).unwrap();
        let expected = windowed_frame_power(&x[..8192], &cfg);
        assert!((s.total_power() / expected - 1.0).abs() < 1e-9);
    }

    #[test]
    fn sine_peak_and_power() {
        let x = sine(440.0, 0.5, 48000.0, 8192);
        let s = compute_power_spectrum(&x, 48000.0, &WindowConfig::default()).unwrap();
        let (k, _) = s.max_bin().unwrap();
        assert!((s.bin_frequencies()[k] - 440.0).abs() < 1.5);
        // Amplitude 0.5 sine carries mean-square power 0.125.
        assert!((s.total_power() / 0.125 - 1.0).abs() < 0.01);
    }

    #[test]
    fn silence_gives_zero_bins() {
        let s =
            compute_power_spectrum(&vec![0.0f32; 8192], 44100.0, &WindowConfig::default()).unwrap();
        assert!(s.bin_powers().iter().all(|p| *p == 0.0));
    }

    #[test]
    fn short_frame_rejected() {
        let err = compute_power_spectrum(&vec![0.0; 2400], 48000.0, &WindowConfig::default())
            .unwrap_err();
        assert!(matches!(err, Error::InsufficientData(_)));
    }

    #[test]
    fn bad_window_config_rejected() {
        let cfg = WindowConfig {
            window_length: 3000,
            ..Default::default()
        };
        assert!(matches!(cfg.validate(), Err(Error::Config(_))));
        let cfg = WindowConfig {
            window_length: 512,
            ..Default::default()
        };
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn averaging_matches_single_frame_for_stationary_tone() {
        let x = sine(300.0, 0.3, 48000.0, 48000);
        let cfg = WindowConfig::default();
        let a = compute_averaged_power_spectrum(&x, 48000.0, &cfg).unwrap();
        let s = compute_power_spectrum(&x, 48000.0, &cfg).unwrap();
        assert!((a.total_power() / s.total_power() - 1.0).abs() < 0.01);
    }

    #[test]
    fn window_shapes_peak_near_one() {
        for shape in [
            WindowShape::Hann,
            WindowShape::Hamming,
            WindowShape::BlackmanHarris,
        ] {
            let w = shape.samples::<f64>(1024);
            assert!((w[512] - 1.0).abs() < 1e-9, "{shape:?}");
        }
    }
}
