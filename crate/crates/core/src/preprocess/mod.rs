//! Preprocessing chain: band-pass filtering, stimulus-locked epoching,
//! baseline correction, peak-to-peak rejection and optional downsampling.
//!
//! The order of the chain is fixed; [`run_chain`] is the only entry point
//! the runner uses.

pub mod filter;

use ndarray::{s, Array2, Array3, Axis};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bundle::{EventMarker, RawRecording};
use crate::error::{Error, Result};
use filter::{butterworth, BandKind};

/// Prototype order of the band-pass and anti-alias filters.
pub const FILTER_ORDER: usize = 4;
const EPS: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PreprocessParams {
    pub band_low_hz: f64,
    pub band_high_hz: f64,
    pub epoch_tmin_s: f64,
    pub epoch_tmax_s: f64,
    pub baseline_window_s: (f64, f64),
    pub ptp_reject_uv: Option<f64>,
    pub target_rate_hz: Option<f64>,
}

impl Default for PreprocessParams {
    fn default() -> Self {
        Self {
            band_low_hz: 1.0,
            band_high_hz: 50.0,
            epoch_tmin_s: -0.2,
            epoch_tmax_s: 0.8,
            baseline_window_s: (-0.2, 0.0),
            ptp_reject_uv: None,
            target_rate_hz: None,
        }
    }
}

impl PreprocessParams {
    pub fn validate(&self, sampling_rate_hz: f64) -> Result<()> {
        let nyq = sampling_rate_hz / 2.0;
        if !(self.band_low_hz > 0.0 && self.band_low_hz < self.band_high_hz && self.band_high_hz < nyq) {
            return Err(Error::Param(format!(
                "band [{}, {}] Hz must satisfy 0 < low < high < Nyquist ({nyq} Hz)",
                self.band_low_hz, self.band_high_hz
            )));
        }
        if !(self.epoch_tmin_s < self.epoch_tmax_s) {
            return Err(Error::Param(format!(
                "epoch window requires tmin < tmax, got [{}, {}]",
                self.epoch_tmin_s, self.epoch_tmax_s
            )));
        }
        let (b0, b1) = self.baseline_window_s;
        if !(b0 <= b1 && b0 >= self.epoch_tmin_s - EPS && b1 <= self.epoch_tmax_s + EPS) {
            return Err(Error::Param(format!(
                "baseline window ({b0}, {b1}) must lie inside [{}, {}]",
                self.epoch_tmin_s, self.epoch_tmax_s
            )));
        }
        if let Some(t) = self.ptp_reject_uv {
            if !(t > 0.0) {
                return Err(Error::Param(format!("rejection threshold must be positive, got {t}")));
            }
        }
        if let Some(r) = self.target_rate_hz {
            if !(r > 0.0 && r < sampling_rate_hz) {
                return Err(Error::Param(format!(
                    "target rate {r} Hz must be positive and below the source rate {sampling_rate_hz} Hz"
                )));
            }
        }
        Ok(())
    }
}

/// Continuous recording in double precision, as produced by [`bandpass`].
#[derive(Debug, Clone, PartialEq)]
pub struct Recording {
    pub subject_id: String,
    pub session_id: String,
    pub sampling_rate_hz: f64,
    /// `[n_channels × n_samples]`, microvolts.
    pub signal: Array2<f64>,
    pub events: Vec<EventMarker>,
}

impl From<&RawRecording> for Recording {
    fn from(raw: &RawRecording) -> Self {
        Self {
            subject_id: raw.subject_id.clone(),
            session_id: raw.session_id.clone(),
            sampling_rate_hz: raw.sampling_rate_hz,
            signal: raw.signal.mapv(f64::from),
            events: raw.events.clone(),
        }
    }
}

/// Stacked stimulus-locked epochs with per-epoch labels.
#[derive(Debug, Clone, PartialEq)]
pub struct EpochSet {
    /// `[n_epochs × n_channels × n_times]`, microvolts.
    pub data: Array3<f64>,
    pub subject_ids: Vec<String>,
    pub session_ids: Vec<String>,
    pub event_codes: Vec<i32>,
    /// Stable row identifiers, kept through filtering for leakage audits.
    pub epoch_ids: Vec<usize>,
    pub sampling_rate_hz: f64,
    pub tmin_s: f64,
    pub tmax_s: f64,
    /// Time of the first sample relative to stimulus onset.
    pub first_sample_s: f64,
    pub channel_names: Vec<String>,
}

impl EpochSet {
    pub fn n_epochs(&self) -> usize {
        self.data.shape()[0]
    }

    pub fn n_channels(&self) -> usize {
        self.data.shape()[1]
    }

    pub fn n_times(&self) -> usize {
        self.data.shape()[2]
    }

    pub fn time_of(&self, sample: usize) -> f64 {
        self.first_sample_s + sample as f64 / self.sampling_rate_hz
    }

    /// Keep the epochs at `rows`, in the given order.
    pub fn select(&self, rows: &[usize]) -> EpochSet {
        let pick = |v: &Vec<String>| rows.iter().map(|&r| v[r].clone()).collect();
        EpochSet {
            data: self.data.select(Axis(0), rows),
            subject_ids: pick(&self.subject_ids),
            session_ids: pick(&self.session_ids),
            event_codes: rows.iter().map(|&r| self.event_codes[r]).collect(),
            epoch_ids: rows.iter().map(|&r| self.epoch_ids[r]).collect(),
            sampling_rate_hz: self.sampling_rate_hz,
            tmin_s: self.tmin_s,
            tmax_s: self.tmax_s,
            first_sample_s: self.first_sample_s,
            channel_names: self.channel_names.clone(),
        }
    }

    /// Stack sets with identical geometry; epoch ids are renumbered `0..n`.
    pub fn concat(sets: &[EpochSet]) -> Result<EpochSet> {
        let first = sets.first().ok_or_else(|| Error::Empty("no epoch sets to concatenate".into()))?;
        for s in sets {
            if s.n_channels() != first.n_channels()
                || s.n_times() != first.n_times()
                || s.sampling_rate_hz != first.sampling_rate_hz
            {
                return Err(Error::Param("epoch sets differ in geometry".into()));
            }
        }
        let views: Vec<_> = sets.iter().map(|s| s.data.view()).collect();
        let data = ndarray::concatenate(Axis(0), &views).expect("geometry checked");
        let n = data.shape()[0];
        Ok(EpochSet {
            data,
            subject_ids: sets.iter().flat_map(|s| s.subject_ids.iter().cloned()).collect(),
            session_ids: sets.iter().flat_map(|s| s.session_ids.iter().cloned()).collect(),
            event_codes: sets.iter().flat_map(|s| s.event_codes.iter().copied()).collect(),
            epoch_ids: (0..n).collect(),
            sampling_rate_hz: first.sampling_rate_hz,
            tmin_s: first.tmin_s,
            tmax_s: first.tmax_s,
            first_sample_s: first.first_sample_s,
            channel_names: first.channel_names.clone(),
        })
    }
}

/// Zero-phase Butterworth band-pass of every channel.
pub fn bandpass(recording: &RawRecording, low_hz: f64, high_hz: f64) -> Result<Recording> {
    let sos = butterworth(FILTER_ORDER, BandKind::Bandpass(low_hz, high_hz), recording.sampling_rate_hz)?;
    let mut out = Recording::from(recording);
    for mut row in out.signal.rows_mut() {
        let filtered = sos.filtfilt(row.as_slice().expect("standard layout"));
        row.assign(&ndarray::ArrayView1::from(&filtered));
    }
    Ok(out)
}

fn window_offsets(rate: f64, tmin_s: f64, tmax_s: f64) -> (i64, i64) {
    ((tmin_s * rate + EPS).floor() as i64, (tmax_s * rate + EPS).floor() as i64)
}

/// Cut one epoch per event whose full window lies inside the recording.
/// Returns the epochs and the number of events skipped at the edges.
/// `codes`, when given, restricts epoching to those event codes.
pub fn extract_epochs(
    recording: &Recording,
    tmin_s: f64,
    tmax_s: f64,
    codes: Option<&[i32]>,
    channel_names: &[String],
) -> Result<(EpochSet, usize)> {
    if !(tmin_s < tmax_s) {
        return Err(Error::Param(format!("tmin {tmin_s} must be below tmax {tmax_s}")));
    }
    let events: Vec<&EventMarker> = recording
        .events
        .iter()
        .filter(|e| codes.is_none_or(|c| c.contains(&e.code)))
        .collect();
    if events.is_empty() {
        return Err(Error::Empty(format!(
            "recording {}/{} has no events to epoch",
            recording.subject_id, recording.session_id
        )));
    }
    let rate = recording.sampling_rate_hz;
    let (start_off, end_off) = window_offsets(rate, tmin_s, tmax_s);
    let n_times = (end_off - start_off + 1) as usize;
    let n_samples = recording.signal.ncols() as i64;
    let n_channels = recording.signal.nrows();

    let kept: Vec<(&EventMarker, usize)> = events
        .iter()
        .filter_map(|e| {
            let start = e.sample_index as i64 + start_off;
            let end = e.sample_index as i64 + end_off;
            (start >= 0 && end < n_samples).then_some((*e, start as usize))
        })
        .collect();
    let skipped = events.len() - kept.len();

    let mut data = Array3::zeros((kept.len(), n_channels, n_times));
    for (i, (_, start)) in kept.iter().enumerate() {
        data.slice_mut(s![i, .., ..])
            .assign(&recording.signal.slice(s![.., *start..*start + n_times]));
    }
    let n = kept.len();
    Ok((
        EpochSet {
            data,
            subject_ids: vec![recording.subject_id.clone(); n],
            session_ids: vec![recording.session_id.clone(); n],
            event_codes: kept.iter().map(|(e, _)| e.code).collect(),
            epoch_ids: (0..n).collect(),
            sampling_rate_hz: rate,
            tmin_s,
            tmax_s,
            first_sample_s: start_off as f64 / rate,
            channel_names: channel_names.to_vec(),
        },
        skipped,
    ))
}

/// Subtract, per epoch and channel, the mean over the baseline window
/// (inclusive bounds) from every sample.
pub fn baseline_correct(epochs: &EpochSet, window_s: (f64, f64)) -> Result<EpochSet> {
    let (b0, b1) = window_s;
    let t_first = epochs.time_of(0);
    let t_last = epochs.time_of(epochs.n_times().saturating_sub(1));
    let half = 0.5 / epochs.sampling_rate_hz;
    if !(b0 <= b1 && b0 >= t_first - half && b1 <= t_last + half) {
        return Err(Error::Param(format!(
            "baseline window ({b0}, {b1}) outside epoch span [{t_first}, {t_last}]"
        )));
    }
    let idx: Vec<usize> = (0..epochs.n_times())
        .filter(|&i| {
            let t = epochs.time_of(i);
            t >= b0 - EPS && t <= b1 + EPS
        })
        .collect();
    if idx.is_empty() {
        return Err(Error::Param(format!("baseline window ({b0}, {b1}) contains no samples")));
    }
    let (lo, hi) = (idx[0], idx[idx.len() - 1] + 1);
    let mut out = epochs.clone();
    for mut epoch in out.data.outer_iter_mut() {
        for mut channel in epoch.outer_iter_mut() {
            let mean = channel.slice(s![lo..hi]).mean().unwrap_or(0.0);
            channel -= mean;
        }
    }
    Ok(out)
}

/// Largest per-channel peak-to-peak amplitude of one epoch.
pub fn peak_to_peak(epoch: ndarray::ArrayView2<f64>) -> f64 {
    epoch
        .outer_iter()
        .map(|ch| {
            let (lo, hi) = ch
                .iter()
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
            hi - lo
        })
        .fold(0.0, f64::max)
}

/// Drop epochs whose peak-to-peak amplitude on any channel exceeds the
/// threshold. Returns the kept epochs and the rejected count.
pub fn ptp_reject(epochs: &EpochSet, threshold_uv: f64) -> Result<(EpochSet, usize)> {
    if !(threshold_uv > 0.0) {
        return Err(Error::Param(format!("rejection threshold must be positive, got {threshold_uv}")));
    }
    let keep: Vec<usize> = epochs
        .data
        .outer_iter()
        .enumerate()
        .filter(|(_, e)| peak_to_peak(e.view()) <= threshold_uv)
        .map(|(i, _)| i)
        .collect();
    if keep.is_empty() && epochs.n_epochs() > 0 {
        return Err(Error::Empty(format!(
            "all {} epochs exceed the {threshold_uv} µV peak-to-peak threshold",
            epochs.n_epochs()
        )));
    }
    let rejected = epochs.n_epochs() - keep.len();
    Ok((epochs.select(&keep), rejected))
}

/// Anti-alias low-pass at `0.45 × target`, then linear interpolation onto a
/// uniform grid at the target rate spanning the same interval.
pub fn downsample(epochs: &EpochSet, target_rate_hz: f64) -> Result<EpochSet> {
    let src = epochs.sampling_rate_hz;
    if !(target_rate_hz > 0.0 && target_rate_hz < src) {
        return Err(Error::Param(format!(
            "target rate {target_rate_hz} Hz must be positive and below the source rate {src} Hz"
        )));
    }
    let sos = butterworth(FILTER_ORDER, BandKind::Lowpass(0.45 * target_rate_hz), src)?;
    let n_in = epochs.n_times();
    let duration = (n_in - 1) as f64 / src;
    let n_out = (duration * target_rate_hz).round() as usize + 1;
    let ratio = src / target_rate_hz;

    let (n_e, n_c) = (epochs.n_epochs(), epochs.n_channels());
    let mut data = Array3::zeros((n_e, n_c, n_out));
    for e in 0..n_e {
        for c in 0..n_c {
            let x: Vec<f64> = epochs.data.slice(s![e, c, ..]).to_vec();
            let y = sos.filtfilt(&x);
            for i in 0..n_out {
                let p = (i as f64 * ratio).min((n_in - 1) as f64);
                let j = (p.floor() as usize).min(n_in - 1);
                let frac = p - j as f64;
                let v = if j + 1 < n_in { y[j] + frac * (y[j + 1] - y[j]) } else { y[j] };
                data[[e, c, i]] = v;
            }
        }
    }
    let mut out = epochs.clone();
    out.data = data;
    out.sampling_rate_hz = target_rate_hz;
    Ok(out)
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ChainStats {
    pub n_events: usize,
    pub skipped: usize,
    pub rejected: usize,
    pub n_epochs: usize,
}

/// bandpass → extract → baseline → reject → (downsample), over every
/// recording. Recordings are processed independently and stacked in input
/// order.
pub fn run_chain(
    recordings: &[RawRecording],
    channel_names: &[String],
    params: &PreprocessParams,
    codes: Option<&[i32]>,
) -> Result<(EpochSet, ChainStats)> {
    let rate = recordings
        .first()
        .ok_or_else(|| Error::Empty("no recordings".into()))?
        .sampling_rate_hz;
    params.validate(rate)?;
    let per_recording: Vec<(EpochSet, usize, usize)> = recordings
        .par_iter()
        .map(|raw| {
            let filtered = bandpass(raw, params.band_low_hz, params.band_high_hz)?;
            let n_events = filtered
                .events
                .iter()
                .filter(|e| codes.is_none_or(|c| c.contains(&e.code)))
                .count();
            let (epochs, skipped) =
                extract_epochs(&filtered, params.epoch_tmin_s, params.epoch_tmax_s, codes, channel_names)?;
            Ok((baseline_correct(&epochs, params.baseline_window_s)?, skipped, n_events))
        })
        .collect::<Result<_>>()?;

    let mut stats = ChainStats::default();
    for (_, skipped, n_events) in &per_recording {
        stats.skipped += skipped;
        stats.n_events += n_events;
    }
    let sets: Vec<EpochSet> = per_recording.into_iter().map(|(e, _, _)| e).collect();
    let mut epochs = EpochSet::concat(&sets)?;
    if epochs.n_epochs() == 0 {
        return Err(Error::Empty("no epoch fits inside its recording".into()));
    }
    if let Some(t) = params.ptp_reject_uv {
        let (kept, rejected) = ptp_reject(&epochs, t)?;
        stats.rejected = rejected;
        epochs = kept;
    }
    if let Some(r) = params.target_rate_hz {
        epochs = downsample(&epochs, r)?;
    }
    stats.n_epochs = epochs.n_epochs();
    Ok((epochs, stats))
}
