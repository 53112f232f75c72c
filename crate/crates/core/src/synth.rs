//! Synthetic multi-subject ERP datasets with tunable subject separability and
//! session drift.
//!
//! Each subject-session recording is spectrally shaped Gaussian noise (a
//! per-subject AR(2) spectrum times per-band gains) plus a Gaussian-bump ERP
//! with a per-subject latency, amplitude and scalp topography. With
//! `subject_separability = 0` every subject draws from one distribution.

use std::f64::consts::PI;

use ndarray::Array2;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::bundle::{layout_manifest, DatasetManifest, EventMarker, Paradigm, RawRecording, SessionEntry, SubjectEntry};
use crate::error::{Error, Result};
use crate::features::welch::default_bands;
use crate::rng;

pub const EVENT_CODE: i32 = 1;
const ERP_AMPLITUDE_UV: f64 = 10.0;
const FIRST_EVENT_S: f64 = 1.0;
const MIN_SPACING_S: f64 = 2.0;
const SPACING_JITTER_S: f64 = 0.5;
const TAIL_S: f64 = 2.5;
/// Shared AR(2) pole: radius and frequency.
const BASE_POLE: (f64, f64) = (0.9, 10.0);
const TRIAL_JITTER_MS: f64 = 10.0;
const ARTIFACT_UV: f64 = 400.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    pub n_subjects: usize,
    pub n_sessions: usize,
    pub epochs_per_session: usize,
    pub sampling_rate_hz: f64,
    pub n_channels: usize,
    pub erp_latency_ms: f64,
    pub erp_width_ms: f64,
    pub subject_separability: f64,
    pub session_drift: f64,
    pub noise_std_uv: f64,
    /// Fraction of epochs carrying a large boxcar artifact.
    pub artifact_rate: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            n_subjects: 10,
            n_sessions: 1,
            epochs_per_session: 100,
            sampling_rate_hz: 256.0,
            n_channels: 8,
            erp_latency_ms: 300.0,
            erp_width_ms: 80.0,
            subject_separability: 0.8,
            session_drift: 0.0,
            noise_std_uv: 5.0,
            artifact_rate: 0.0,
            seed: 42,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |path: &str, msg: &str| Err(Error::validation(path, msg));
        if self.n_subjects == 0 || self.n_sessions == 0 || self.epochs_per_session == 0 || self.n_channels == 0 {
            return fail("counts", "all counts must be at least 1");
        }
        if !(self.sampling_rate_hz > 0.0) || !self.sampling_rate_hz.is_finite() {
            return fail("sampling_rate_hz", "must be positive");
        }
        if !(0.0..=1.0).contains(&self.subject_separability) {
            return fail("subject_separability", "must lie in [0, 1]");
        }
        if !(0.0..=1.0).contains(&self.session_drift) {
            return fail("session_drift", "must lie in [0, 1]");
        }
        if !(self.noise_std_uv >= 0.0) {
            return fail("noise_std_uv", "must be non-negative");
        }
        if !(0.0..=1.0).contains(&self.artifact_rate) {
            return fail("artifact_rate", "must lie in [0, 1]");
        }
        if !(self.erp_width_ms > 0.0) || !(self.erp_latency_ms >= 0.0) {
            return fail("erp", "latency must be non-negative and width positive");
        }
        Ok(())
    }

    pub fn subject_ids(&self) -> Vec<String> {
        (1..=self.n_subjects).map(|s| format!("S{s:02}")).collect()
    }

    pub fn session_ids(&self) -> Vec<String> {
        (1..=self.n_sessions).map(|s| s.to_string()).collect()
    }

    pub fn channel_names(&self) -> Vec<String> {
        (1..=self.n_channels).map(|c| format!("Ch{c:02}")).collect()
    }
}

/// Generative parameters of one subject in one session.
#[derive(Debug, Clone)]
struct Profile {
    latency_s: f64,
    amplitude: f64,
    topography: Vec<f64>,
    band_gains: Vec<f64>,
    pole_radius: f64,
    pole_hz: f64,
}

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    rng.sample(StandardNormal)
}

fn subject_profile(cfg: &SynthConfig, subject: usize) -> Profile {
    let sep = cfg.subject_separability;
    let mut r = rng::stream(cfg.seed, &[1, subject as u64]);
    let width_s = cfg.erp_width_ms / 1000.0;
    let latency_s = cfg.erp_latency_ms / 1000.0 + sep * 0.5 * width_s * normal(&mut r);
    let amplitude = ERP_AMPLITUDE_UV * (sep * 0.3 * normal(&mut r)).exp();
    let topography = (0..cfg.n_channels)
        .map(|c| {
            let base = 1.0 - 0.6 * c as f64 / cfg.n_channels.max(2).saturating_sub(1) as f64;
            base * (sep * 0.5 * normal(&mut r)).exp()
        })
        .collect();
    let band_gains = default_bands()
        .iter()
        .map(|_| (sep * 0.5 * normal(&mut r)).exp())
        .collect();
    // own pole drawn inside the unit circle, then blended with the shared one
    let own_radius = r.random_range(0.75..0.97);
    let own_hz = r.random_range(4.0..20.0);
    Profile {
        latency_s,
        amplitude,
        topography,
        band_gains,
        pole_radius: (1.0 - sep) * BASE_POLE.0 + sep * own_radius,
        pole_hz: (1.0 - sep) * BASE_POLE.1 + sep * own_hz,
    }
}

fn session_profile(cfg: &SynthConfig, base: &Profile, subject: usize, session: usize) -> Profile {
    let drift = cfg.session_drift;
    let mut r = rng::stream(cfg.seed, &[2, subject as u64, session as u64]);
    let width_s = cfg.erp_width_ms / 1000.0;
    let mut p = base.clone();
    p.latency_s += drift * 0.5 * width_s * normal(&mut r);
    p.amplitude *= (drift * 0.3 * normal(&mut r)).exp();
    for g in &mut p.band_gains {
        *g *= (drift * 0.5 * normal(&mut r)).exp();
    }
    p
}

/// AR(2) coefficients `(a1, a2)` for a conjugate pole pair.
fn ar2_coefficients(radius: f64, freq_hz: f64, rate_hz: f64) -> (f64, f64) {
    let theta = 2.0 * PI * freq_hz / rate_hz;
    (2.0 * radius * theta.cos(), -radius * radius)
}

/// Gaussian noise with amplitude spectrum `|H_AR(f)| · gain(f)`, scaled to
/// the requested standard deviation.
fn shaped_noise(n_out: usize, rate: f64, profile: &Profile, std: f64, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let (a1, a2) = ar2_coefficients(profile.pole_radius, profile.pole_hz, rate);
    let bands = default_bands();
    // shape on a power-of-two grid, then keep the first n_out samples
    let n = n_out.next_power_of_two();
    let mut buf: Vec<Complex64> = (0..n).map(|_| Complex64::new(normal(rng), 0.0)).collect();
    let mut planner = FftPlanner::new();
    planner.plan_fft_forward(n).process(&mut buf);
    for (k, v) in buf.iter_mut().enumerate() {
        let kk = k.min(n - k);
        let f = kk as f64 * rate / n as f64;
        let w = 2.0 * PI * f / rate;
        let denom = Complex64::new(1.0, 0.0) - a1 * Complex64::from_polar(1.0, -w) - a2 * Complex64::from_polar(1.0, -2.0 * w);
        let gain = bands
            .iter()
            .zip(&profile.band_gains)
            .find(|(b, _)| f >= b.low_hz && f < b.high_hz)
            .map_or(1.0, |(_, g)| *g);
        *v *= gain / denom.norm();
    }
    planner.plan_fft_inverse(n).process(&mut buf);
    let mut x: Vec<f64> = buf[..n_out].iter().map(|c| c.re).collect();
    let mean = x.iter().sum::<f64>() / n_out as f64;
    let sd = (x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n_out as f64).sqrt();
    let scale = if sd > 0.0 { std / sd } else { 0.0 };
    for v in &mut x {
        *v = (*v - mean) * scale;
    }
    x
}

fn event_onsets(cfg: &SynthConfig, subject: usize, session: usize) -> Vec<u64> {
    let rate = cfg.sampling_rate_hz;
    let mut r = rng::stream(cfg.seed, &[4, subject as u64, session as u64]);
    let mut at = (FIRST_EVENT_S * rate).ceil() as u64;
    let mut out = Vec::with_capacity(cfg.epochs_per_session);
    for _ in 0..cfg.epochs_per_session {
        out.push(at);
        let gap = MIN_SPACING_S + r.random_range(0.0..SPACING_JITTER_S);
        at += (gap * rate).ceil() as u64;
    }
    out
}

fn session_recording(cfg: &SynthConfig, subject: usize, session: usize, base: &Profile) -> RawRecording {
    let rate = cfg.sampling_rate_hz;
    let profile = session_profile(cfg, base, subject, session);
    let onsets = event_onsets(cfg, subject, session);
    let n = (*onsets.last().expect("at least one epoch") as f64 + TAIL_S * rate).ceil() as usize;
    let mut signal = Array2::<f32>::zeros((cfg.n_channels, n));
    let mut r = rng::stream(cfg.seed, &[3, subject as u64, session as u64]);
    for c in 0..cfg.n_channels {
        let noise = shaped_noise(n, rate, &profile, cfg.noise_std_uv, &mut r);
        for (s, v) in signal.row_mut(c).iter_mut().zip(noise) {
            *s = v as f32;
        }
    }
    let sigma = cfg.erp_width_ms / 1000.0;
    let half = (5.0 * sigma * rate).ceil() as i64;
    for &onset in &onsets {
        let jitter = TRIAL_JITTER_MS / 1000.0 * normal(&mut r);
        let centre = onset as f64 + (profile.latency_s + jitter) * rate;
        let lo = (centre as i64 - half).max(0);
        let hi = (centre as i64 + half).min(n as i64 - 1);
        for t in lo..=hi {
            let z = (t as f64 - centre) / (sigma * rate);
            let bump = profile.amplitude * (-0.5 * z * z).exp();
            for (c, w) in profile.topography.iter().enumerate() {
                signal[[c, t as usize]] += (bump * w) as f32;
            }
        }
        if cfg.artifact_rate > 0.0 && r.random::<f64>() < cfg.artifact_rate {
            let c = r.random_range(0..cfg.n_channels);
            let start = onset as usize + r.random_range(0..rate as usize / 2);
            let len = (0.1 * rate).ceil() as usize;
            let sign = if r.random::<bool>() { 1.0 } else { -1.0 };
            for t in start..(start + len).min(n) {
                signal[[c, t]] += (sign * ARTIFACT_UV) as f32;
            }
        }
    }
    RawRecording {
        subject_id: format!("S{:02}", subject + 1),
        session_id: (session + 1).to_string(),
        sampling_rate_hz: rate,
        signal,
        events: onsets
            .into_iter()
            .map(|sample_index| EventMarker {
                sample_index,
                code: EVENT_CODE,
            })
            .collect(),
    }
}

/// Generate a laid-out manifest and its recordings in manifest order.
pub fn generate(cfg: &SynthConfig) -> Result<(DatasetManifest, Vec<RawRecording>)> {
    cfg.validate()?;
    let profiles: Vec<Profile> = (0..cfg.n_subjects).map(|s| subject_profile(cfg, s)).collect();
    let jobs: Vec<(usize, usize)> = (0..cfg.n_subjects)
        .flat_map(|s| (0..cfg.n_sessions).map(move |e| (s, e)))
        .collect();
    let recordings: Vec<RawRecording> = jobs
        .par_iter()
        .map(|&(s, e)| session_recording(cfg, s, e, &profiles[s]))
        .collect();
    let mut manifest = DatasetManifest::new("Synthetic", Paradigm::Synthetic, cfg.sampling_rate_hz, cfg.channel_names());
    manifest.subjects = cfg
        .subject_ids()
        .into_iter()
        .map(|subject_id| SubjectEntry {
            subject_id,
            sessions: cfg
                .session_ids()
                .into_iter()
                .map(|session_id| SessionEntry {
                    session_id,
                    n_samples: 0,
                    n_events: 0,
                    data_offset_bytes: 0,
                    events_file: String::new(),
                })
                .collect(),
        })
        .collect();
    let manifest = layout_manifest(&manifest, &recordings)?;
    Ok((manifest, recordings))
}
