//! 50-phon (or any level) equal-loudness contour and spectrum weighting.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::tone::{Spectrum, SpectrumKind};

/// Gain applied to bins outside the contour's anchor range.
pub const FLOOR_GAIN_DB: f64 = -120.0;

const ISO_FREQ: [f64; 29] = [
    20.0, 25.0, 31.5, 40.0, 50.0, 63.0, 80.0, 100.0, 125.0, 160.0, 200.0, 250.0, 315.0, 400.0,
    500.0, 630.0, 800.0, 1000.0, 1250.0, 1600.0, 2000.0, 2500.0, 3150.0, 4000.0, 5000.0, 6300.0,
    8000.0, 10000.0, 12500.0,
];
// Exponent for loudness perception.
const ISO_AF: [f64; 29] = [
    0.635, 0.602, 0.569, 0.537, 0.509, 0.482, 0.456, 0.433, 0.412, 0.391, 0.373, 0.357, 0.343,
    0.330, 0.320, 0.311, 0.303, 0.300, 0.295, 0.292, 0.290, 0.290, 0.289, 0.289, 0.289, 0.293,
    0.303, 0.323, 0.354,
];
// Magnitude of the linear transfer function normalized at 1 kHz.
const ISO_LU: [f64; 29] = [
    -31.5, -27.2, -23.1, -19.3, -16.1, -13.1, -10.4, -8.2, -6.3, -4.6, -3.2, -2.1, -1.2, -0.5, 0.0,
    0.4, 0.5, 0.0, -2.7, -4.2, -1.2, 1.4, 2.3, 1.0, -2.3, -7.2, -11.2, -10.9, -3.5,
];
// Threshold of hearing.
const ISO_TF: [f64; 29] = [
    78.1, 68.7, 59.5, 51.1, 44.0, 37.5, 31.5, 26.5, 22.1, 17.9, 14.4, 11.4, 8.6, 6.2, 4.4, 3.0,
    2.2, 2.4, 3.5, 1.7, -1.3, -4.2, -6.0, -5.4, -1.5, 6.0, 12.6, 13.9, 12.3,
];

/// Sound pressure level (dB) at which a tone of `phon` loudness level is heard,
/// per the ISO 226:2023 formula at one tabulated frequency.
fn iso226_spl(phon: f64, af: f64, lu: f64, tf: f64) -> f64 {
    let a = (4e-10f64).powf(0.3 - af) * (10f64.powf(0.03 * phon) - 10f64.powf(0.072));
    let b = 10f64.powf(af * (tf + lu) / 10.0);
    10.0 / af * (a + b).log10() - lu
}

/// An equal-loudness contour: SPL per anchor frequency, interpolated with a
/// monotone cubic in log-frequency.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoudnessContour<T> {
    pub phon_level: T,
    pub anchor_frequencies: Vec<T>,
    pub contour_spl: Vec<T>,
    #[serde(skip)]
    slopes: Vec<T>,
}

impl<T: Real> LoudnessContour<T> {
    pub fn new(phon_level: T, anchor_frequencies: Vec<T>, contour_spl: Vec<T>) -> Result<Self> {
        if anchor_frequencies.len() != contour_spl.len() || anchor_frequencies.len() < 2 {
            return Err(Error::Config(
                "contour needs equal-length arrays with >= 2 anchors".into(),
            ));
        }
        if anchor_frequencies.windows(2).any(|w| !(w[1] > w[0]))
            || anchor_frequencies[0] <= T::zero()
        {
            return Err(Error::Config(
                "contour anchors must be positive and ascending".into(),
            ));
        }
        if contour_spl.iter().any(|v| !v.is_finite()) {
            return Err(Error::Config("contour SPL values must be finite".into()));
        }
        let lo = anchor_frequencies[0];
        let hi = anchor_frequencies[anchor_frequencies.len() - 1];
        if lo > T::lit(20.0) || hi < T::lit(12500.0) {
            return Err(Error::Config(format!(
                "contour domain [{lo}, {hi}] Hz does not cover 20..12500 Hz"
            )));
        }
        let xs: Vec<T> = anchor_frequencies.iter().map(|f| f.ln()).collect();
        let slopes = pchip_slopes(&xs, &contour_spl);
        Ok(LoudnessContour {
            phon_level,
            anchor_frequencies,
            contour_spl,
            slopes,
        })
    }

    /// The ISO 226:2023 contour at `phon` (20..=90 phon).
    pub fn iso226(phon: T) -> Result<Self> {
        let p = phon.to_f64_lossy();
        if !(20.0..=90.0).contains(&p) {
            return Err(Error::Config(format!(
                "loudness level {p} phon outside 20..=90"
            )));
        }
        let spl = (0..ISO_FREQ.len())
            .map(|i| T::lit(iso226_spl(p, ISO_AF[i], ISO_LU[i], ISO_TF[i])))
            .collect();
        Self::new(phon, ISO_FREQ.iter().map(|f| T::lit(*f)).collect(), spl)
    }

    pub fn iso226_50_phon() -> Self {
        Self::iso226(T::lit(50.0)).expect("50 phon is in range")
    }

    /// Interpolated SPL, or `None` outside the anchor range.
    pub fn spl_at(&self, f: T) -> Option<T> {
        let fa = &self.anchor_frequencies;
        if !(f >= fa[0] && f <= fa[fa.len() - 1]) {
            return None;
        }
        let x = f.ln();
        let k = match fa.iter().position(|a| *a >= f) {
            Some(0) => return Some(self.contour_spl[0]),
            Some(k) => k - 1,
            None => return None,
        };
        let x0 = fa[k].ln();
        let x1 = fa[k + 1].ln();
        let h = x1 - x0;
        let t = (x - x0) / h;
        let (y0, y1) = (self.contour_spl[k], self.contour_spl[k + 1]);
        let (d0, d1) = (self.slopes[k], self.slopes[k + 1]);
        let t2 = t * t;
        let t3 = t2 * t;
        let two = T::lit(2.0);
        let three = T::lit(3.0);
        let h00 = two * t3 - three * t2 + T::one();
        let h10 = t3 - two * t2 + t;
        let h01 = -two * t3 + three * t2;
        let h11 = t3 - t2;
        Some(h00 * y0 + h10 * h * d0 + h01 * y1 + h11 * h * d1)
    }

    /// Gain in dB relative to 1 kHz; [`FLOOR_GAIN_DB`] outside the contour.
    pub fn gain_db(&self, f: T) -> T {
        match (self.spl_at(f), self.spl_at(T::lit(1000.0))) {
            (Some(spl), Some(reference)) => reference - spl,
            _ => T::lit(FLOOR_GAIN_DB),
        }
    }
}

/// Fritsch-Carlson style derivative estimates that keep the interpolant monotone
/// between anchors.
fn pchip_slopes<T: Real>(x: &[T], y: &[T]) -> Vec<T> {
    let n = x.len();
    let h: Vec<T> = x.windows(2).map(|w| w[1] - w[0]).collect();
    let delta: Vec<T> = (0..n - 1).map(|k| (y[k + 1] - y[k]) / h[k]).collect();
    let mut d = vec![T::zero(); n];
    if n == 2 {
        d[0] = delta[0];
        d[1] = delta[0];
        return d;
    }
    for k in 1..n - 1 {
        let (a, b) = (delta[k - 1], delta[k]);
        if a == T::zero() || b == T::zero() || (a > T::zero()) != (b > T::zero()) {
            d[k] = T::zero();
        } else {
            let w1 = T::lit(2.0) * h[k] + h[k - 1];
            let w2 = h[k] + T::lit(2.0) * h[k - 1];
            d[k] = (w1 + w2) / (w1 / a + w2 / b);
        }
    }
    d[0] = pchip_end(h[0], h[1], delta[0], delta[1]);
    d[n - 1] = pchip_end(h[n - 2], h[n - 3], delta[n - 2], delta[n - 3]);
    d
}

fn pchip_end<T: Real>(h0: T, h1: T, m0: T, m1: T) -> T {
    let d = ((T::lit(2.0) * h0 + h1) * m0 - h0 * m1) / (h0 + h1);
    if d.signum() != m0.signum() {
        T::zero()
    } else if m0.signum() != m1.signum() && d.abs() > T::lit(3.0) * m0.abs() {
        T::lit(3.0) * m0
    } else {
        d
    }
}

/// Multiplies each raw bin by the contour gain, `10^(gain_db / 10)`.
pub fn apply_equal_loudness_weighting<T: Real>(
    s: &Spectrum<T>,
    contour: &LoudnessContour<T>,
) -> Result<Spectrum<T>> {
    if s.kind() != SpectrumKind::Raw {
        return Err(Error::Config(format!(
            "loudness weighting expects a raw spectrum, got {:?}",
            s.kind()
        )));
    }
    let gains: Vec<T> = s
        .bin_frequencies()
        .iter()
        .map(|f| contour.gain_db(*f))
        .collect();
    let powers = s
        .bin_powers()
        .iter()
        .zip(&gains)
        .map(|(p, g)| *p * T::lit(10.0).powf(*g / T::lit(10.0)))
        .collect();
    Ok(Spectrum::new(
        s.bin_frequencies().to_vec(),
        powers,
        s.sample_rate(),
        s.window_length(),
        SpectrumKind::Weighted,
    )?
    .with_gain(gains))
}
