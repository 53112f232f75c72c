//! Butterworth IIR design in second-order sections and zero-phase filtering.
//!
//! Designs follow the classic analog-prototype route: Butterworth poles on
//! the unit circle, frequency transformation (low/high/band-pass) on
//! pre-warped edges, then the bilinear transform to the z-plane.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Biquad {
    pub b: [f64; 3],
    /// `a[0]` is always 1.
    pub a: [f64; 3],
}

/// Cascade of second-order sections.
#[derive(Debug, Clone, PartialEq)]
pub struct Sos {
    pub sections: Vec<Biquad>,
    order: usize,
}

impl Sos {
    /// Number of poles of the cascade.
    pub fn order(&self) -> usize {
        self.order
    }

    /// Complex frequency response at `freq_hz`.
    pub fn response(&self, freq_hz: f64, fs: f64) -> Complex64 {
        let w = 2.0 * PI * freq_hz / fs;
        let z1 = Complex64::from_polar(1.0, -w);
        let z2 = z1 * z1;
        self.sections.iter().fold(Complex64::new(1.0, 0.0), |acc, s| {
            let num = s.b[0] + z1 * s.b[1] + z2 * s.b[2];
            let den = s.a[0] + z1 * s.a[1] + z2 * s.a[2];
            acc * num / den
        })
    }

    /// Steady-state initial conditions of every section for a unit step.
    fn step_state(&self) -> Vec<[f64; 2]> {
        let mut scale = 1.0;
        self.sections
            .iter()
            .map(|s| {
                let gain = s.b.iter().sum::<f64>() / s.a.iter().sum::<f64>();
                let z1 = gain - s.b[0];
                let z2 = s.b[2] - s.a[2] * gain;
                let zi = [scale * z1, scale * z2];
                scale *= gain;
                zi
            })
            .collect()
    }

    /// Causal filtering (transposed direct form II) with the given state.
    fn run(&self, x: &mut [f64], mut state: Vec<[f64; 2]>) {
        for (s, z) in self.sections.iter().zip(state.iter_mut()) {
            for v in x.iter_mut() {
                let input = *v;
                let y = s.b[0] * input + z[0];
                z[0] = s.b[1] * input - s.a[1] * y + z[1];
                z[1] = s.b[2] * input - s.a[2] * y;
                *v = y;
            }
        }
    }

    /// Causal filtering from rest.
    pub fn filter(&self, x: &[f64]) -> Vec<f64> {
        let mut y = x.to_vec();
        self.run(&mut y, vec![[0.0; 2]; self.sections.len()]);
        y
    }

    /// Forward-backward filtering with odd-reflection padding of
    /// `3 × order` samples per edge and steady-state initial conditions.
    /// Output has zero phase and the squared magnitude response.
    pub fn filtfilt(&self, x: &[f64]) -> Vec<f64> {
        let n = x.len();
        if n < 2 {
            return x.to_vec();
        }
        let pad = (3 * self.order).min(n - 1);
        let mut ext = Vec::with_capacity(n + 2 * pad);
        let (first, last) = (x[0], x[n - 1]);
        ext.extend((1..=pad).rev().map(|i| 2.0 * first - x[i]));
        ext.extend_from_slice(x);
        ext.extend((1..=pad).map(|i| 2.0 * last - x[n - 1 - i]));

        let zi = self.step_state();
        let scaled = |v: f64| zi.iter().map(|z| [z[0] * v, z[1] * v]).collect::<Vec<_>>();

        let s0 = ext[0];
        self.run(&mut ext, scaled(s0));
        ext.reverse();
        let s0 = ext[0];
        self.run(&mut ext, scaled(s0));
        ext.reverse();
        ext[pad..pad + n].to_vec()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BandKind {
    Lowpass(f64),
    Highpass(f64),
    Bandpass(f64, f64),
}

fn check_edge(f: f64, fs: f64) -> Result<()> {
    if !(f.is_finite() && f > 0.0 && f < fs / 2.0) {
        return Err(Error::Param(format!(
            "cutoff {f} Hz must lie strictly between 0 and Nyquist ({} Hz)",
            fs / 2.0
        )));
    }
    Ok(())
}

/// Design a digital Butterworth filter. `order` is the prototype order; a
/// band-pass design has `2 × order` poles.
pub fn butterworth(order: usize, kind: BandKind, fs: f64) -> Result<Sos> {
    if order == 0 {
        return Err(Error::Param("filter order must be at least 1".into()));
    }
    if !(fs.is_finite() && fs > 0.0) {
        return Err(Error::Param(format!("sampling rate {fs} must be positive")));
    }
    let warp = |f: f64| 2.0 * fs * (PI * f / fs).tan();

    // analog prototype, unit cutoff
    let proto: Vec<Complex64> = (0..order)
        .map(|k| {
            let theta = PI * (2 * k + 1 + order) as f64 / (2 * order) as f64;
            Complex64::from_polar(1.0, theta)
        })
        .collect();

    let (zeros, poles, gain) = match kind {
        BandKind::Lowpass(fc) => {
            check_edge(fc, fs)?;
            let w = warp(fc);
            let poles: Vec<_> = proto.iter().map(|p| p * w).collect();
            (Vec::new(), poles, w.powi(order as i32))
        }
        BandKind::Highpass(fc) => {
            check_edge(fc, fs)?;
            let w = warp(fc);
            let poles: Vec<_> = proto.iter().map(|p| w / p).collect();
            let prod: Complex64 = proto.iter().map(|p| -p).product();
            (vec![Complex64::new(0.0, 0.0); order], poles, (1.0 / prod).re)
        }
        BandKind::Bandpass(lo, hi) => {
            check_edge(lo, fs)?;
            check_edge(hi, fs)?;
            if lo >= hi {
                return Err(Error::Param(format!("band edges must satisfy low < high, got {lo} >= {hi}")));
            }
            let (w1, w2) = (warp(lo), warp(hi));
            let bw = w2 - w1;
            let w0sq = w1 * w2;
            let mut poles = Vec::with_capacity(2 * order);
            for p in &proto {
                let half = p * (bw / 2.0);
                let root = (half * half - w0sq).sqrt();
                poles.push(half + root);
                poles.push(half - root);
            }
            (vec![Complex64::new(0.0, 0.0); order], poles, bw.powi(order as i32))
        }
    };

    // bilinear transform
    let fs2 = 2.0 * fs;
    let mut zd: Vec<Complex64> = zeros.iter().map(|z| (fs2 + z) / (fs2 - z)).collect();
    let pd: Vec<Complex64> = poles.iter().map(|p| (fs2 + p) / (fs2 - p)).collect();
    let num: Complex64 = zeros.iter().map(|z| fs2 - z).product();
    let den: Complex64 = poles.iter().map(|p| fs2 - p).product();
    let kd = gain * (num / den).re;
    zd.resize(pd.len(), Complex64::new(-1.0, 0.0));

    Ok(to_sos(&zd, &pd, kd))
}

fn to_sos(zeros: &[Complex64], poles: &[Complex64], gain: f64) -> Sos {
    const TOL: f64 = 1e-10;
    // pole groups: conjugate pairs, then real poles two at a time
    let mut groups: Vec<Vec<f64>> = Vec::new();
    let mut reals: Vec<f64> = Vec::new();
    for p in poles {
        if p.im > TOL {
            groups.push(vec![-2.0 * p.re, p.norm_sqr()]);
        } else if p.im.abs() <= TOL {
            reals.push(p.re);
        }
    }
    reals.sort_by(|a, b| b.partial_cmp(a).unwrap());
    for pair in reals.chunks(2) {
        if pair.len() == 2 {
            groups.push(vec![-(pair[0] + pair[1]), pair[0] * pair[1]]);
        } else {
            groups.push(vec![-pair[0], 0.0]);
        }
    }

    // zeros are real (±1 or 0 after the transforms used here); pair a +1 with
    // a −1 when both exist so band-pass sections are individually band-pass
    let mut pos: Vec<f64> = zeros.iter().filter(|z| z.re >= 0.0).map(|z| z.re).collect();
    let mut neg: Vec<f64> = zeros.iter().filter(|z| z.re < 0.0).map(|z| z.re).collect();
    let mut sections = Vec::with_capacity(groups.len());
    for (i, g) in groups.iter().enumerate() {
        let first_order = g[1] == 0.0 && poles.len() % 2 == 1 && i == groups.len() - 1;
        let b = if first_order {
            let z = pos.pop().or_else(|| neg.pop()).unwrap_or(-1.0);
            [1.0, -z, 0.0]
        } else {
            let z1 = pos.pop().or_else(|| neg.pop()).unwrap_or(-1.0);
            let z2 = neg.pop().or_else(|| pos.pop()).unwrap_or(-1.0);
            [1.0, -(z1 + z2), z1 * z2]
        };
        sections.push(Biquad {
            b,
            a: [1.0, g[0], g[1]],
        });
    }
    if let Some(first) = sections.first_mut() {
        for v in first.b.iter_mut() {
            *v *= gain;
        }
    }
    Sos {
        sections,
        order: poles.len(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lowpass_half_power_at_cutoff() {
        let sos = butterworth(4, BandKind::Lowpass(20.0), 200.0).unwrap();
        assert_eq!(sos.order(), 4);
        assert!((sos.response(0.0, 200.0).norm() - 1.0).abs() < 1e-10);
        assert!((sos.response(20.0, 200.0).norm() - 0.5f64.sqrt()).abs() < 1e-9);
    }

    #[test]
    fn highpass_half_power_at_cutoff() {
        let sos = butterworth(3, BandKind::Highpass(5.0), 100.0).unwrap();
        assert!((sos.response(50.0, 100.0).norm() - 1.0).abs() < 1e-9);
        assert!((sos.response(5.0, 100.0).norm() - 0.5f64.sqrt()).abs() < 1e-9);
        assert!(sos.response(0.0, 100.0).norm() < 1e-12);
    }

    #[test]
    fn bandpass_edges_and_center() {
        let fs = 256.0;
        let sos = butterworth(4, BandKind::Bandpass(1.0, 50.0), fs).unwrap();
        assert_eq!(sos.order(), 8);
        assert!((sos.response(1.0, fs).norm() - 0.5f64.sqrt()).abs() < 1e-8);
        assert!((sos.response(50.0, fs).norm() - 0.5f64.sqrt()).abs() < 1e-8);
        let center = (1.0f64 * 50.0).sqrt();
        assert!((sos.response(center, fs).norm() - 1.0).abs() < 1e-3);
        assert!(sos.response(0.0, fs).norm() < 1e-12);
        assert!(sos.response(fs / 2.0, fs).norm() < 1e-12);
    }

    #[test]
    fn edges_outside_nyquist_rejected() {
        assert!(butterworth(4, BandKind::Bandpass(1.0, 60.0), 100.0).is_err());
        assert!(butterworth(4, BandKind::Bandpass(10.0, 5.0), 100.0).is_err());
        assert!(butterworth(4, BandKind::Lowpass(0.0), 100.0).is_err());
    }

    #[test]
    fn filtfilt_preserves_constant_and_length() {
        let sos = butterworth(4, BandKind::Lowpass(10.0), 100.0).unwrap();
        let x = vec![3.5; 57];
        let y = sos.filtfilt(&x);
        assert_eq!(y.len(), x.len());
        for v in y {
            assert!((v - 3.5).abs() < 1e-9);
        }
    }

    #[test]
    fn filtfilt_is_zero_phase() {
        // a symmetric pulse stays symmetric about its centre
        let sos = butterworth(2, BandKind::Lowpass(8.0), 100.0).unwrap();
        let n = 201;
        let x: Vec<f64> = (0..n).map(|i| (-((i as f64 - 100.0) / 6.0).powi(2)).exp()).collect();
        let y = sos.filtfilt(&x);
        for i in 0..100 {
            assert!((y[100 - i] - y[100 + i]).abs() < 1e-9);
        }
    }
}
