//! Welch averaged-periodogram PSD and band averaging.

use std::f64::consts::PI;

use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Psd {
    pub frequencies: Vec<f64>,
    /// One-sided density, units²/Hz.
    pub values: Vec<f64>,
}

impl Psd {
    pub fn resolution(&self) -> f64 {
        self.frequencies.get(1).copied().unwrap_or(0.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Band {
    pub name: String,
    pub low_hz: f64,
    pub high_hz: f64,
}

impl Band {
    pub fn new(name: &str, low_hz: f64, high_hz: f64) -> Self {
        Self {
            name: name.to_string(),
            low_hz,
            high_hz,
        }
    }
}

/// low 1–10, alpha 10–13, beta 13–30, gamma 30–50 Hz.
pub fn default_bands() -> Vec<Band> {
    vec![
        Band::new("low", 1.0, 10.0),
        Band::new("alpha", 10.0, 13.0),
        Band::new("beta", 13.0, 30.0),
        Band::new("gamma", 30.0, 50.0),
    ]
}

/// Segment length and hop for `n_windows` equal windows with the given
/// fractional overlap covering `n` samples.
pub fn segment_layout(n: usize, n_windows: usize, overlap: f64) -> Result<(usize, usize)> {
    if n_windows == 0 || !(0.0..1.0).contains(&overlap) {
        return Err(Error::Param(format!(
            "invalid Welch layout: {n_windows} windows, overlap {overlap}"
        )));
    }
    let hop_for = |len: usize| len - (len as f64 * overlap).floor() as usize;
    let mut len = (n as f64 / (1.0 + (n_windows - 1) as f64 * (1.0 - overlap)) + 1e-9).floor() as usize;
    // Rounding the overlap down can push the last window past the end.
    while len >= 4 && (n_windows - 1) * hop_for(len) + len > n {
        len -= 1;
    }
    let hop = if len > 0 { hop_for(len) } else { 0 };
    if len < 4 || hop == 0 || (n_windows - 1) * hop + len > n {
        return Err(Error::Param(format!(
            "{n} samples too short for {n_windows} windows at {:.0}% overlap",
            overlap * 100.0
        )));
    }
    Ok((len, hop))
}

/// Hann-windowed Welch PSD with per-segment mean removal and density
/// scaling (`1 / (fs · Σw²)`), one-sided.
pub fn welch_psd(x: &[f64], rate_hz: f64, n_windows: usize, overlap: f64) -> Result<Psd> {
    let (len, hop) = segment_layout(x.len(), n_windows, overlap)?;
    // periodic Hann
    let window: Vec<f64> = (0..len)
        .map(|i| 0.5 - 0.5 * (2.0 * PI * i as f64 / len as f64).cos())
        .collect();
    let w_power: f64 = window.iter().map(|w| w * w).sum();
    let fft = FftPlanner::new().plan_fft_forward(len);
    let n_bins = len / 2 + 1;
    let mut acc = vec![0.0; n_bins];
    let mut buf = vec![Complex64::new(0.0, 0.0); len];
    for s in 0..n_windows {
        let seg = &x[s * hop..s * hop + len];
        let mean = seg.iter().sum::<f64>() / len as f64;
        for ((b, v), w) in buf.iter_mut().zip(seg).zip(&window) {
            *b = Complex64::new((v - mean) * w, 0.0);
        }
        fft.process(&mut buf);
        for (a, c) in acc.iter_mut().zip(&buf) {
            *a += c.norm_sqr();
        }
    }
    let scale = 1.0 / (rate_hz * w_power * n_windows as f64);
    let values = acc
        .iter()
        .enumerate()
        .map(|(k, p)| {
            let one_sided = if k == 0 || (len % 2 == 0 && k == len / 2) { 1.0 } else { 2.0 };
            p * scale * one_sided
        })
        .collect();
    let frequencies = (0..n_bins).map(|k| k as f64 * rate_hz / len as f64).collect();
    Ok(Psd { frequencies, values })
}

/// Mean PSD over bins with frequency in `[low, high)` for each band.
pub fn band_power(psd: &Psd, bands: &[Band]) -> Result<Vec<f64>> {
    bands
        .iter()
        .map(|band| {
            let (sum, count) = psd
                .frequencies
                .iter()
                .zip(&psd.values)
                .filter(|(f, _)| **f >= band.low_hz && **f < band.high_hz)
                .fold((0.0, 0usize), |(s, c), (_, v)| (s + v, c + 1));
            if count == 0 {
                Err(Error::Param(format!(
                    "band `{}` [{}, {}) Hz holds no frequency bin (resolution {:.3} Hz)",
                    band.name,
                    band.low_hz,
                    band.high_hz,
                    psd.resolution()
                )))
            } else {
                Ok(sum / count as f64)
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn sinusoid(freq: f64, rate: f64, n: usize) -> Vec<f64> {
        (0..n).map(|t| (2.0 * PI * freq * t as f64 / rate).sin()).collect()
    }

    #[test]
    fn four_windows_half_overlap_layout() {
        assert_eq!(segment_layout(256, 4, 0.5).unwrap(), (102, 51));
        assert_eq!(segment_layout(100, 4, 0.5).unwrap(), (40, 20));
        assert_eq!(segment_layout(128, 4, 0.5).unwrap(), (50, 25));
        assert!(segment_layout(8, 4, 0.5).is_err());
    }

    #[test]
    fn sinusoid_peak_at_nearest_bin() {
        let psd = welch_psd(&sinusoid(11.0, 256.0, 256), 256.0, 4, 0.5).unwrap();
        let peak = psd
            .values
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
            .unwrap()
            .0;
        let nearest = psd
            .frequencies
            .iter()
            .enumerate()
            .min_by(|a, b| (a.1 - 11.0).abs().partial_cmp(&(b.1 - 11.0).abs()).unwrap())
            .unwrap()
            .0;
        assert_eq!(peak, nearest);
    }

    #[test]
    fn white_noise_parseval() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let x: Vec<f64> = (0..4096).map(|_| rng.sample(StandardNormal)).collect();
        let mean = x.iter().sum::<f64>() / x.len() as f64;
        let var = x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / x.len() as f64;
        let psd = welch_psd(&x, 256.0, 4, 0.5).unwrap();
        let total: f64 = psd.values.iter().sum::<f64>() * psd.resolution();
        assert!((total - var).abs() < 0.1 * var, "{total} vs {var}");
    }

    #[test]
    fn zero_input_zero_psd() {
        let psd = welch_psd(&[0.0; 256], 256.0, 4, 0.5).unwrap();
        assert!(psd.values.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn too_short_is_param_error() {
        assert!(matches!(welch_psd(&[1.0; 6], 256.0, 4, 0.5), Err(Error::Param(_))));
    }

    #[test]
    fn alpha_sinusoid_dominates_alpha_band() {
        let psd = welch_psd(&sinusoid(11.0, 256.0, 256), 256.0, 4, 0.5).unwrap();
        let bp = band_power(&psd, &default_bands()).unwrap();
        for (i, v) in bp.iter().enumerate() {
            if i != 1 {
                assert!(bp[1] > *v, "{bp:?}");
            }
        }
    }

    #[test]
    fn flat_psd_gives_constant_bands() {
        let psd = Psd {
            frequencies: (0..129).map(|k| k as f64).collect(),
            values: vec![2.5; 129],
        };
        assert_eq!(band_power(&psd, &default_bands()).unwrap(), vec![2.5; 4]);
    }

    #[test]
    fn band_without_bins_rejected() {
        let psd = Psd {
            frequencies: vec![0.0, 5.0, 10.0, 15.0],
            values: vec![1.0; 4],
        };
        let err = band_power(&psd, &[Band::new("narrow", 11.0, 13.0)]).unwrap_err();
        assert!(matches!(err, Error::Param(_)));
    }

    proptest! {
        #[test]
        fn band_means_match_per_bin_average(seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let freqs: Vec<f64> = (0..65).map(|k| k as f64 * 1.7).collect();
            let vals: Vec<f64> = (0..65).map(|_| rng.random_range(0.0..10.0)).collect();
            let psd = Psd { frequencies: freqs.clone(), values: vals.clone() };
            let bands = default_bands();
            let got = band_power(&psd, &bands).unwrap();
            for (b, g) in bands.iter().zip(got) {
                let mut picked = Vec::new();
                for i in 0..freqs.len() {
                    if freqs[i] >= b.low_hz && freqs[i] < b.high_hz {
                        picked.push(vals[i]);
                    }
                }
                let mean = picked.iter().sum::<f64>() / picked.len() as f64;
                prop_assert!((g - mean).abs() <= 1e-12 * mean.abs().max(1.0));
            }
        }

        #[test]
        fn psd_nonnegative_and_offset_invariant(seed in any::<u64>(), offset in -500.0f64..500.0) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let x: Vec<f64> = (0..256).map(|_| rng.random_range(-20.0..20.0)).collect();
            let shifted: Vec<f64> = x.iter().map(|v| v + offset).collect();
            let a = welch_psd(&x, 256.0, 4, 0.5).unwrap();
            prop_assert!(a.values.iter().all(|v| *v >= 0.0));
            let b = welch_psd(&shifted, 256.0, 4, 0.5).unwrap();
            let pa = band_power(&a, &default_bands()).unwrap();
            let pb = band_power(&b, &default_bands()).unwrap();
            for (u, v) in pa.iter().zip(&pb) {
                prop_assert!((u - v).abs() <= 1e-6 * u.abs().max(1e-12));
            }
        }
    }
}
