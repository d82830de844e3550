use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::tone::{Spectrum, SpectrumKind};

/// Gaussian smoothing over linear frequency with `bandwidth_hz` as the kernel's
/// full width at half maximum. Each output bin is a normalized weighted mean of
/// its neighbours, so a flat spectrum stays flat.
pub fn smooth_spectrum<T: Real>(s: &Spectrum<T>, bandwidth_hz: T) -> Result<Spectrum<T>> {
    let spacing = s.bin_spacing();
    if !(bandwidth_hz.is_finite() && bandwidth_hz > spacing) {
        return Err(Error::Config(format!(
            "smoothing bandwidth {bandwidth_hz} Hz must exceed the bin spacing {spacing} Hz"
        )));
    }
    let sigma_bins = bandwidth_hz / T::lit(2.355) / spacing;
    let radius = (sigma_bins * T::lit(4.0))
        .ceil()
        .to_usize()
        .unwrap_or(1)
        .max(1);
    let kernel: Vec<T> = (0..=radius)
        .map(|k| {
            let z = T::from_usize_lossy(k) / sigma_bins;
            (-T::lit(0.5) * z * z).exp()
        })
        .collect();

    let p = s.bin_powers();
    let n = p.len();
    let out = (0..n)
        .map(|i| {
            let lo = i.saturating_sub(radius);
            let hi = (i + radius).min(n - 1);
            let mut acc = T::zero();
            let mut norm = T::zero();
            for (j, pj) in p.iter().enumerate().take(hi + 1).skip(lo) {
                let w = kernel[i.abs_diff(j)];
                acc = acc + w * *pj;
                norm = norm + w;
            }
            acc / norm
        })
        .collect();
    Spectrum::new(
        s.bin_frequencies().to_vec(),
        out,
        s.sample_rate(),
        s.window_length(),
        SpectrumKind::Smoothed,
    )
}
