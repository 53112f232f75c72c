//! Neutral on-disk "epoch bundle" dataset format.
//!
//! A bundle is a directory holding
//!
//! * `manifest.json`: dataset metadata and per-session layout,
//! * `data.f32`: little-endian binary32 samples, each session stored
//!   channel-major (`[n_channels × n_samples]`) at its declared byte offset,
//! * `events_<subject>_<session>.csv`: `sample_index,code` rows.
//!
//! Only continuous recordings are stored. Epoching happens downstream so
//! every dataset goes through the same preprocessing chain.

use std::collections::{BTreeMap, HashSet};
use std::fs::{self, File};
use std::io::{Read, Seek, SeekFrom, Write};
use std::path::{Path, PathBuf};

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const MANIFEST_FILE: &str = "manifest.json";
pub const DATA_FILE: &str = "data.f32";
pub const UNIT: &str = "microvolt";
const EVENTS_HEADER: &str = "sample_index,code";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Paradigm {
    P300,
    N400,
    #[serde(rename = "synthetic")]
    Synthetic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetManifest {
    pub dataset_name: String,
    pub paradigm: Paradigm,
    pub sampling_rate_hz: f64,
    pub channel_names: Vec<String>,
    pub unit: String,
    pub subjects: Vec<SubjectEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SubjectEntry {
    pub subject_id: String,
    /// Sessions in chronological order.
    pub sessions: Vec<SessionEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SessionEntry {
    pub session_id: String,
    pub n_samples: u64,
    pub n_events: u64,
    pub data_offset_bytes: u64,
    pub events_file: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EventMarker {
    pub sample_index: u64,
    pub code: i32,
}

/// Continuous multichannel EEG of one subject-session, in microvolts.
#[derive(Debug, Clone, PartialEq)]
pub struct RawRecording {
    pub subject_id: String,
    pub session_id: String,
    pub sampling_rate_hz: f64,
    /// `[n_channels × n_samples]`
    pub signal: Array2<f32>,
    pub events: Vec<EventMarker>,
}

impl RawRecording {
    pub fn n_channels(&self) -> usize {
        self.signal.nrows()
    }

    pub fn n_samples(&self) -> usize {
        self.signal.ncols()
    }
}

impl DatasetManifest {
    /// An empty manifest; subjects and layout are filled in by the caller or
    /// by [`layout_manifest`].
    pub fn new(
        dataset_name: impl Into<String>,
        paradigm: Paradigm,
        sampling_rate_hz: f64,
        channel_names: Vec<String>,
    ) -> Self {
        Self {
            dataset_name: dataset_name.into(),
            paradigm,
            sampling_rate_hz,
            channel_names,
            unit: UNIT.to_string(),
            subjects: Vec::new(),
        }
    }

    pub fn n_channels(&self) -> usize {
        self.channel_names.len()
    }

    /// All (subject, session) pairs in manifest order.
    pub fn session_keys(&self) -> Vec<(String, String)> {
        self.subjects
            .iter()
            .flat_map(|s| {
                s.sessions
                    .iter()
                    .map(move |e| (s.subject_id.clone(), e.session_id.clone()))
            })
            .collect()
    }

    /// Session ids in chronological order, merged across subjects.
    pub fn session_order(&self) -> Vec<String> {
        let mut order: Vec<String> = Vec::new();
        for subject in &self.subjects {
            for session in &subject.sessions {
                if !order.contains(&session.session_id) {
                    order.push(session.session_id.clone());
                }
            }
        }
        order
    }

    fn session_bytes(&self, entry: &SessionEntry) -> u64 {
        entry.n_samples * self.n_channels() as u64 * 4
    }

    /// Check every invariant that does not need the data file.
    pub fn validate(&self) -> Result<()> {
        if !(self.sampling_rate_hz.is_finite() && self.sampling_rate_hz > 0.0) {
            return Err(Error::validation("sampling_rate_hz", "must be a positive finite number"));
        }
        if self.channel_names.is_empty() {
            return Err(Error::validation("channel_names", "must not be empty"));
        }
        let mut seen = HashSet::new();
        for (i, name) in self.channel_names.iter().enumerate() {
            if !seen.insert(name) {
                return Err(Error::validation(
                    format!("channel_names[{i}]"),
                    format!("duplicate channel name `{name}`"),
                ));
            }
        }
        if self.unit != UNIT {
            return Err(Error::validation(
                "unit",
                format!("expected `{UNIT}`, found `{}`", self.unit),
            ));
        }

        let mut subject_ids = HashSet::new();
        // session id -> rank; ranks must agree across subjects
        let order = self.session_order();
        let rank: BTreeMap<&str, usize> = order.iter().enumerate().map(|(i, s)| (s.as_str(), i)).collect();
        for (si, subject) in self.subjects.iter().enumerate() {
            if !subject_ids.insert(subject.subject_id.as_str()) {
                return Err(Error::validation(
                    format!("subjects[{si}].subject_id"),
                    format!("duplicate subject `{}`", subject.subject_id),
                ));
            }
            let mut session_ids = HashSet::new();
            let mut last_rank = None;
            for (ei, session) in subject.sessions.iter().enumerate() {
                let path = format!("subjects[{si}].sessions[{ei}]");
                if !session_ids.insert(session.session_id.as_str()) {
                    return Err(Error::validation(
                        format!("{path}.session_id"),
                        format!("duplicate session `{}`", session.session_id),
                    ));
                }
                let r = rank[session.session_id.as_str()];
                if last_rank.is_some_and(|l| r < l) {
                    return Err(Error::validation(
                        format!("{path}.session_id"),
                        "session order conflicts with the order declared by earlier subjects",
                    ));
                }
                last_rank = Some(r);
                if session.events_file != events_file_name(&subject.subject_id, &session.session_id) {
                    return Err(Error::validation(
                        format!("{path}.events_file"),
                        format!(
                            "expected `{}`",
                            events_file_name(&subject.subject_id, &session.session_id)
                        ),
                    ));
                }
                if session.data_offset_bytes % 4 != 0 {
                    return Err(Error::validation(
                        format!("{path}.data_offset_bytes"),
                        "offset must be a multiple of 4",
                    ));
                }
            }
        }

        // offsets must not overlap
        let mut spans: Vec<(u64, u64, String)> = Vec::new();
        for (si, subject) in self.subjects.iter().enumerate() {
            for (ei, session) in subject.sessions.iter().enumerate() {
                let len = self.session_bytes(session);
                if len > 0 {
                    spans.push((
                        session.data_offset_bytes,
                        session.data_offset_bytes + len,
                        format!("subjects[{si}].sessions[{ei}].data_offset_bytes"),
                    ));
                }
            }
        }
        spans.sort();
        for pair in spans.windows(2) {
            if pair[1].0 < pair[0].1 {
                return Err(Error::validation(
                    pair[1].2.clone(),
                    "session data overlaps the preceding session",
                ));
            }
        }
        Ok(())
    }

    /// Bytes of `data.f32` the manifest accounts for.
    pub fn declared_data_bytes(&self) -> u64 {
        self.subjects
            .iter()
            .flat_map(|s| s.sessions.iter())
            .map(|e| self.session_bytes(e))
            .sum()
    }

    fn required_data_bytes(&self) -> u64 {
        self.subjects
            .iter()
            .flat_map(|s| s.sessions.iter())
            .map(|e| e.data_offset_bytes + self.session_bytes(e))
            .max()
            .unwrap_or(0)
    }

    fn find(&self, subject_id: &str, session_id: &str) -> Option<&SessionEntry> {
        self.subjects
            .iter()
            .find(|s| s.subject_id == subject_id)?
            .sessions
            .iter()
            .find(|e| e.session_id == session_id)
    }
}

pub fn events_file_name(subject_id: &str, session_id: &str) -> String {
    format!("events_{subject_id}_{session_id}.csv")
}

/// An opened, validated bundle. Recordings are decoded on demand.
#[derive(Debug, Clone)]
pub struct Bundle {
    root: PathBuf,
    manifest: DatasetManifest,
}

/// Open a bundle directory and validate its manifest against the data file.
pub fn read_bundle(path: impl AsRef<Path>) -> Result<Bundle> {
    let root = path.as_ref().to_path_buf();
    let manifest_path = root.join(MANIFEST_FILE);
    let text = fs::read_to_string(&manifest_path)
        .map_err(|e| Error::Format(format!("cannot read {}: {e}", manifest_path.display())))?;
    let manifest: DatasetManifest = serde_json::from_str(&text)
        .map_err(|e| Error::Format(format!("{}: {e}", manifest_path.display())))?;
    manifest.validate()?;

    let data_path = root.join(DATA_FILE);
    let data_len = fs::metadata(&data_path)
        .map_err(|e| Error::Format(format!("cannot stat {}: {e}", data_path.display())))?
        .len();
    let required = manifest.required_data_bytes();
    if data_len < required {
        return Err(Error::Truncation(format!(
            "{} holds {data_len} bytes but the manifest requires {required}",
            data_path.display()
        )));
    }
    if data_len != manifest.declared_data_bytes() {
        return Err(Error::validation(
            "subjects",
            format!(
                "session sizes sum to {} bytes but {} holds {data_len}",
                manifest.declared_data_bytes(),
                data_path.display()
            ),
        ));
    }
    for subject in &manifest.subjects {
        for session in &subject.sessions {
            let p = root.join(&session.events_file);
            if !p.is_file() {
                return Err(Error::Format(format!("missing events file {}", p.display())));
            }
        }
    }
    Ok(Bundle { root, manifest })
}

impl Bundle {
    pub fn manifest(&self) -> &DatasetManifest {
        &self.manifest
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    /// Decode one subject-session.
    pub fn recording(&self, subject_id: &str, session_id: &str) -> Result<RawRecording> {
        let entry = self.manifest.find(subject_id, session_id).ok_or_else(|| {
            Error::Param(format!("no session `{session_id}` for subject `{subject_id}`"))
        })?;
        let n_channels = self.manifest.n_channels();
        let n_samples = entry.n_samples as usize;

        let data_path = self.root.join(DATA_FILE);
        let mut file = File::open(&data_path).map_err(|e| Error::io(&data_path, e))?;
        file.seek(SeekFrom::Start(entry.data_offset_bytes))
            .map_err(|e| Error::io(&data_path, e))?;
        let mut bytes = vec![0u8; n_channels * n_samples * 4];
        file.read_exact(&mut bytes).map_err(|e| {
            if e.kind() == std::io::ErrorKind::UnexpectedEof {
                Error::Truncation(format!("session {subject_id}/{session_id} runs past end of data"))
            } else {
                Error::io(&data_path, e)
            }
        })?;
        let values: Vec<f32> = bytes
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
            .collect();
        let signal = Array2::from_shape_vec((n_channels, n_samples), values)
            .expect("buffer length matches shape");

        let events = read_events(&self.root.join(&entry.events_file), entry)?;
        Ok(RawRecording {
            subject_id: subject_id.to_string(),
            session_id: session_id.to_string(),
            sampling_rate_hz: self.manifest.sampling_rate_hz,
            signal,
            events,
        })
    }

    /// Decode every recording in manifest order.
    pub fn recordings(&self) -> Result<Vec<RawRecording>> {
        self.manifest
            .session_keys()
            .iter()
            .map(|(s, e)| self.recording(s, e))
            .collect()
    }
}

fn read_events(path: &Path, entry: &SessionEntry) -> Result<Vec<EventMarker>> {
    let text = fs::read_to_string(path)
        .map_err(|e| Error::Format(format!("cannot read {}: {e}", path.display())))?;
    let mut lines = text.split('\n');
    match lines.next() {
        Some(EVENTS_HEADER) => {}
        other => {
            return Err(Error::Format(format!(
                "{}: expected header `{EVENTS_HEADER}`, found {:?}",
                path.display(),
                other
            )))
        }
    }
    let mut events = Vec::new();
    for (i, line) in lines.enumerate() {
        if line.is_empty() {
            continue;
        }
        let field = format!("{}:{}", entry.events_file, i + 2);
        let (idx, code) = line
            .split_once(',')
            .ok_or_else(|| Error::Format(format!("{field}: expected two columns")))?;
        let sample_index: u64 = idx
            .parse()
            .map_err(|_| Error::Format(format!("{field}: bad sample_index `{idx}`")))?;
        let code: i32 = code
            .parse()
            .map_err(|_| Error::Format(format!("{field}: bad code `{code}`")))?;
        if sample_index >= entry.n_samples {
            return Err(Error::validation(
                field,
                format!("event index {sample_index} outside [0, {})", entry.n_samples),
            ));
        }
        events.push(EventMarker { sample_index, code });
    }
    if events.len() as u64 != entry.n_events {
        return Err(Error::validation(
            entry.events_file.clone(),
            format!("manifest declares {} events, file holds {}", entry.n_events, events.len()),
        ));
    }
    Ok(events)
}

/// Fill in sample counts, event counts, offsets and event file names from
/// the recordings, in manifest order.
pub fn layout_manifest(manifest: &DatasetManifest, recordings: &[RawRecording]) -> Result<DatasetManifest> {
    let mut out = manifest.clone();
    let n_channels = manifest.n_channels();
    let mut offset = 0u64;
    let mut used = vec![false; recordings.len()];
    for (si, subject) in out.subjects.iter_mut().enumerate() {
        for (ei, session) in subject.sessions.iter_mut().enumerate() {
            let path = format!("subjects[{si}].sessions[{ei}]");
            let idx = recordings
                .iter()
                .position(|r| r.subject_id == subject.subject_id && r.session_id == session.session_id)
                .ok_or_else(|| Error::validation(path.clone(), "no recording for this session"))?;
            let rec = &recordings[idx];
            used[idx] = true;
            if rec.n_channels() != n_channels {
                return Err(Error::validation(
                    path,
                    format!("recording has {} channels, manifest {n_channels}", rec.n_channels()),
                ));
            }
            if rec.sampling_rate_hz != manifest.sampling_rate_hz {
                return Err(Error::validation(path, "sampling rate differs from manifest"));
            }
            if let Some(ev) = rec.events.iter().find(|e| e.sample_index >= rec.n_samples() as u64) {
                return Err(Error::validation(
                    path,
                    format!("event index {} outside recording", ev.sample_index),
                ));
            }
            session.n_samples = rec.n_samples() as u64;
            session.n_events = rec.events.len() as u64;
            session.data_offset_bytes = offset;
            session.events_file = events_file_name(&subject.subject_id, &session.session_id);
            offset += session.n_samples * n_channels as u64 * 4;
        }
    }
    if let Some(i) = used.iter().position(|u| !u) {
        return Err(Error::validation(
            "subjects",
            format!(
                "recording {}/{} is not listed in the manifest",
                recordings[i].subject_id, recordings[i].session_id
            ),
        ));
    }
    out.validate()?;
    Ok(out)
}

/// Write a bundle directory. Output bytes depend only on the inputs.
pub fn write_bundle(manifest: &DatasetManifest, recordings: &[RawRecording], path: impl AsRef<Path>) -> Result<()> {
    let root = path.as_ref();
    let laid_out = layout_manifest(manifest, recordings)?;
    fs::create_dir_all(root).map_err(|e| Error::io(root, e))?;

    let mut json = serde_json::to_string_pretty(&laid_out).expect("manifest serializes");
    json.push('\n');
    let manifest_path = root.join(MANIFEST_FILE);
    fs::write(&manifest_path, json).map_err(|e| Error::io(&manifest_path, e))?;

    let data_path = root.join(DATA_FILE);
    let mut data = std::io::BufWriter::new(File::create(&data_path).map_err(|e| Error::io(&data_path, e))?);
    for subject in &laid_out.subjects {
        for session in &subject.sessions {
            let rec = recordings
                .iter()
                .find(|r| r.subject_id == subject.subject_id && r.session_id == session.session_id)
                .expect("layout checked every session");
            for v in rec.signal.iter() {
                data.write_all(&v.to_le_bytes()).map_err(|e| Error::io(&data_path, e))?;
            }
            let mut csv = String::from(EVENTS_HEADER);
            csv.push('\n');
            for ev in &rec.events {
                csv.push_str(&format!("{},{}\n", ev.sample_index, ev.code));
            }
            let events_path = root.join(&session.events_file);
            fs::write(&events_path, csv).map_err(|e| Error::io(&events_path, e))?;
        }
    }
    data.flush().map_err(|e| Error::io(&data_path, e))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn recording(subject: &str, session: &str, n_ch: usize, n: usize) -> RawRecording {
        RawRecording {
            subject_id: subject.into(),
            session_id: session.into(),
            sampling_rate_hz: 100.0,
            signal: Array2::from_shape_fn((n_ch, n), |(c, t)| (c * 1000 + t) as f32 * 0.5),
            events: vec![EventMarker { sample_index: (n as u64 - 1).min(10), code: 1 }],
        }
    }

    fn manifest(subjects: &[(&str, &[&str])], n_ch: usize) -> DatasetManifest {
        let mut m = DatasetManifest::new(
            "test",
            Paradigm::Synthetic,
            100.0,
            (0..n_ch).map(|c| format!("C{c}")).collect(),
        );
        m.subjects = subjects
            .iter()
            .map(|(s, sessions)| SubjectEntry {
                subject_id: s.to_string(),
                sessions: sessions
                    .iter()
                    .map(|e| SessionEntry {
                        session_id: e.to_string(),
                        n_samples: 0,
                        n_events: 0,
                        data_offset_bytes: 0,
                        events_file: String::new(),
                    })
                    .collect(),
            })
            .collect();
        m
    }

    #[test]
    fn minimal_bundle_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let m = manifest(&[("S1", &["1"])], 2);
        let rec = recording("S1", "1", 2, 100);
        write_bundle(&m, std::slice::from_ref(&rec), dir.path()).unwrap();
        let b = read_bundle(dir.path()).unwrap();
        assert_eq!(b.manifest().subjects[0].sessions[0].n_samples, 100);
        assert_eq!(b.recording("S1", "1").unwrap(), rec);
        let text = fs::read_to_string(dir.path().join("events_S1_1.csv")).unwrap();
        assert_eq!(text, "sample_index,code\n10,1\n");
    }

    #[test]
    fn empty_subject_list_writes_empty_data() {
        let dir = tempfile::tempdir().unwrap();
        write_bundle(&manifest(&[], 2), &[], dir.path()).unwrap();
        assert!(dir.path().join(MANIFEST_FILE).is_file());
        assert_eq!(fs::metadata(dir.path().join(DATA_FILE)).unwrap().len(), 0);
        assert!(read_bundle(dir.path()).unwrap().manifest().subjects.is_empty());
    }

    #[test]
    fn data_size_arithmetic() {
        let dir = tempfile::tempdir().unwrap();
        let m = manifest(&[("A", &["1", "2"])], 2);
        let recs = vec![recording("A", "1", 2, 10), recording("A", "2", 2, 10)];
        write_bundle(&m, &recs, dir.path()).unwrap();
        assert_eq!(fs::metadata(dir.path().join(DATA_FILE)).unwrap().len(), 160);
    }

    #[test]
    fn channel_count_mismatch_is_truncation() {
        let dir = tempfile::tempdir().unwrap();
        let m = manifest(&[("S1", &["1"])], 2);
        write_bundle(&m, &[recording("S1", "1", 2, 100)], dir.path()).unwrap();
        // declare a third channel without adding data
        let mut laid: DatasetManifest =
            serde_json::from_str(&fs::read_to_string(dir.path().join(MANIFEST_FILE)).unwrap()).unwrap();
        laid.channel_names.push("C2".into());
        fs::write(dir.path().join(MANIFEST_FILE), serde_json::to_string_pretty(&laid).unwrap()).unwrap();
        assert!(matches!(read_bundle(dir.path()), Err(Error::Truncation(_))));
    }

    #[test]
    fn missing_manifest_is_format_error() {
        let dir = tempfile::tempdir().unwrap();
        assert!(matches!(read_bundle(dir.path()), Err(Error::Format(_))));
    }

    #[test]
    fn duplicate_channels_rejected_with_path() {
        let mut m = manifest(&[], 2);
        m.channel_names = vec!["Cz".into(), "Cz".into()];
        match m.validate() {
            Err(Error::Validation { path, .. }) => assert_eq!(path, "channel_names[1]"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn write_rejects_inconsistent_channels() {
        let dir = tempfile::tempdir().unwrap();
        let m = manifest(&[("S1", &["1"])], 3);
        let err = write_bundle(&m, &[recording("S1", "1", 2, 10)], dir.path()).unwrap_err();
        assert!(matches!(err, Error::Validation { .. }));
    }

    #[test]
    fn conflicting_session_order_rejected() {
        let m = manifest(&[("A", &["1", "2"]), ("B", &["2", "1"])], 1);
        let recs: Vec<_> = [("A", "1"), ("A", "2"), ("B", "2"), ("B", "1")]
            .iter()
            .map(|(s, e)| recording(s, e, 1, 20))
            .collect();
        assert!(matches!(layout_manifest(&m, &recs), Err(Error::Validation { .. })));
    }

    #[test]
    fn event_count_mismatch_detected() {
        let dir = tempfile::tempdir().unwrap();
        let m = manifest(&[("S1", &["1"])], 2);
        write_bundle(&m, &[recording("S1", "1", 2, 100)], dir.path()).unwrap();
        fs::write(dir.path().join("events_S1_1.csv"), "sample_index,code\n10,1\n20,1\n").unwrap();
        let b = read_bundle(dir.path()).unwrap();
        assert!(matches!(b.recording("S1", "1"), Err(Error::Validation { .. })));
    }
}
