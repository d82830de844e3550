use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::{parabolic_vertex, Real};
use crate::tone::{Partial, Spectrum};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PeakConfig<T> {
    /// Peaks more than this many dB below the strongest bin are ignored.
    pub relative_floor_db: T,
    pub min_prominence_db: T,
    pub max_partials: usize,
}

impl<T: Real> Default for PeakConfig<T> {
    fn default() -> Self {
        PeakConfig {
            relative_floor_db: T::lit(60.0),
            min_prominence_db: T::lit(6.0),
            max_partials: 64,
        }
    }
}

impl<T: Real> PeakConfig<T> {
    pub fn validate(&self) -> Result<()> {
        if !(self.relative_floor_db.is_finite() && self.relative_floor_db > T::zero()) {
            return Err(Error::Config("relative_floor_db must be > 0".into()));
        }
        if !(self.min_prominence_db.is_finite() && self.min_prominence_db >= T::zero()) {
            return Err(Error::Config("min_prominence_db must be >= 0".into()));
        }
        if self.max_partials < 1 {
            return Err(Error::Config("max_partials must be >= 1".into()));
        }
        Ok(())
    }
}

fn to_db<T: Real>(p: T) -> T {
    T::lit(10.0) * p.max(T::lit(1e-300).max(T::min_positive_value())).log10()
}

/// Picks spectral peaks and refines each by a parabola over log-power.
///
/// Prominence is measured on the dB spectrum clipped at the relative floor.
/// On a weighted spectrum the vertex is located on the unweighted log-power so
/// the contour's slope does not drag partial frequencies, then the gain at the
/// refined frequency is added back.
pub fn extract_partials<T: Real>(s: &Spectrum<T>, cfg: &PeakConfig<T>) -> Result<Vec<Partial<T>>> {
    cfg.validate()?;
    if s.is_empty() {
        return Err(Error::InsufficientData("empty spectrum".into()));
    }
    let p = s.bin_powers();
    let n = p.len();
    let max_power = match s.max_bin() {
        Some((_, m)) if m > T::zero() => m,
        _ => return Ok(Vec::new()),
    };
    let max_db = to_db(max_power);
    let floor_db = max_db - cfg.relative_floor_db;
    let threshold = max_power * T::lit(10.0).powf(-cfg.relative_floor_db / T::lit(10.0));
    let db: Vec<T> = p.iter().map(|v| to_db(*v).max(floor_db)).collect();

    let mut candidates: Vec<(usize, T, T)> = Vec::new();
    for i in 1..n.saturating_sub(1) {
        if !(p[i] > p[i - 1] && p[i] >= p[i + 1] && p[i] >= threshold) {
            continue;
        }
        if prominence(&db, i) < cfg.min_prominence_db {
            continue;
        }
        let (freq, power) = refine(s, i);
        candidates.push((i, freq, power.max(p[i])));
    }

    candidates.sort_by(|a, b| b.2.partial_cmp(&a.2).unwrap_or(std::cmp::Ordering::Equal));
    candidates.truncate(cfg.max_partials);
    candidates.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap_or(std::cmp::Ordering::Equal));
    // Refined vertices of two peaks two bins apart can meet; keep the louder.
    let mut out: Vec<Partial<T>> = Vec::with_capacity(candidates.len());
    for (_, freq, power) in candidates {
        if freq <= T::zero() {
            continue;
        }
        match out.last_mut() {
            Some(last) if last.hz() >= freq => {
                if power > last.power {
                    *last = Partial::new(freq, power)?;
                }
            }
            _ => out.push(Partial::new(freq, power)?),
        }
    }
    Ok(out)
}

/// Topographic prominence of the peak at `i`.
fn prominence<T: Real>(db: &[T], i: usize) -> T {
    let h = db[i];
    let mut left_min = h;
    let mut j = i;
    while j > 0 {
        j -= 1;
        if db[j] > h {
            break;
        }
        left_min = left_min.min(db[j]);
    }
    let mut right_min = h;
    for v in &db[i + 1..] {
        if *v > h {
            break;
        }
        right_min = right_min.min(*v);
    }
    h - left_min.max(right_min)
}

fn refine<T: Real>(s: &Spectrum<T>, i: usize) -> (T, T) {
    let p = s.bin_powers();
    let f = s.bin_frequencies();
    let gain = s.applied_gain_db();
    let g = |k: usize| gain.map_or(T::zero(), |g| g[k]);
    let raw = |k: usize| to_db(p[k]) - g(k);
    let (delta, height) = parabolic_vertex(raw(i - 1), raw(i), raw(i + 1));
    let spacing = f[i + 1] - f[i];
    let freq = f[i] + delta * spacing;
    let gain_at = if delta >= T::zero() {
        g(i) + (g(i + 1) - g(i)) * delta
    } else {
        g(i) + (g(i) - g(i - 1)) * delta
    };
    (freq, T::lit(10.0).powf((height + gain_at) / T::lit(10.0)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::{compute_power_spectrum, WindowConfig};

    fn tone(parts: &[(f64, f64)], rate: f64, n: usize) -> Vec<f64> {
        (0..n)
            .map(|i| {
                let t = i as f64 / rate;
                parts
                    .iter()
                    .map(|(f, a)| a * (std::f64::consts::TAU * f * t).cos())
                    .sum()
            })
            .collect()
    }

    #[test]
    fn single_sine() {
        let x = tone(&[(440.0, 0.5)], 48000.0, 8192);
        let s = compute_power_spectrum(&x, 48000.0, &WindowConfig::default()).unwrap();
        let parts = extract_partials(&s, &PeakConfig::default()).unwrap();
        assert_eq!(parts.len(), 1);
        assert!((parts[0].hz() - 440.0).abs() < 0.5);
        assert!(parts[0].power > 0.0);
    }

    #[test]
    fn equal_sines_equal_powers() {
        let x = tone(&[(100.0, 0.3), (300.0, 0.3)], 48000.0, 8192);
        let s = compute_power_spectrum(&x, 48000.0, &WindowConfig::default()).unwrap();
        let parts = extract_partials(&s, &PeakConfig::default()).unwrap();
        assert_eq!(parts.len(), 2);
        let diff = 10.0 * (parts[0].power / parts[1].power).log10();
        assert!(diff.abs() < 0.5, "{diff}");
    }

    #[test]
    fn silence_yields_nothing() {
        let s =
            compute_power_spectrum(&vec![0.0; 8192], 48000.0, &WindowConfig::default()).unwrap();
        assert!(extract_partials(&s, &PeakConfig::default())
            .unwrap()
            .is_empty());
    }

    #[test]
    fn max_partials_keeps_loudest() {
        let x = tone(&[(200.0, 0.1), (400.0, 0.4), (600.0, 0.2)], 48000.0, 8192);
        let s = compute_power_spectrum(&x, 48000.0, &WindowConfig::default()).unwrap();
        let cfg = PeakConfig {
            max_partials: 2,
            ..PeakConfig::default()
        };
        let parts = extract_partials(&s, &cfg).unwrap();
        assert_eq!(parts.len(), 2);
        assert!((parts[0].hz() - 400.0).abs() < 0.5);
        assert!((parts[1].hz() - 600.0).abs() < 0.5);
    }

    #[test]
    fn prominence_of_plateau_shoulder() {
        let db = [0.0, 10.0, 8.0, 9.0, 0.0];
        assert_eq!(prominence(&db, 1), 10.0);
        assert_eq!(prominence(&db, 3), 1.0);
    }
}
