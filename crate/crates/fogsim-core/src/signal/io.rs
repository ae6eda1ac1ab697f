//! On-disk dataset format.
//!
//! A dataset is a directory with one TOML manifest plus, per subject, one
//! columnar text file per stream and one annotation file:
//!
//! ```text
//! <root>/manifest.toml
//! <root>/<subject_id>/<channel>.txt      one stream per file
//! <root>/<subject_id>/annotations.tsv    FoG intervals
//! ```
//!
//! Stream file grammar: `#`-prefixed comment lines are skipped; the first
//! data line is the header `modality<TAB>channel<TAB>rate_hz<TAB>unit`;
//! every following line is one sample in the declared unit. Annotation file
//! grammar: lines of `start_s<TAB>end_s`, `#` comments allowed.
//!
//! Units are normalized at load: EEG/EMG to microvolts (accepted source
//! units `uV`, `mV`, `V`), ACC to g (accepted `g`, `mg`). Samples are
//! written with Rust's shortest round-trip float formatting, so a
//! save/load cycle reproduces `f64` values exactly.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use super::{DatasetManifest, ModalityKind, Recording, Stream};
use crate::error::{Error, Result};

pub const MANIFEST_FILE: &str = "manifest.toml";
pub const MANIFEST_SCHEMA_VERSION: u32 = 1;

/// One subject in the manifest: stream file references plus the annotation
/// file reference.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct SubjectEntry {
    pub subject_id: String,
    pub duration_s: f64,
    pub annotations: String,
    pub streams: Vec<StreamRef>,
}

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct StreamRef {
    pub modality: ModalityKind,
    pub channel: String,
    pub sample_rate_hz: f64,
    pub unit: String,
    pub path: String,
}

fn unit_to_canonical(modality: ModalityKind, unit: &str) -> Option<f64> {
    match modality {
        ModalityKind::Eeg | ModalityKind::Emg => match unit {
            "uV" => Some(1.0),
            "mV" => Some(1e3),
            "V" => Some(1e6),
            _ => None,
        },
        ModalityKind::Acc => match unit {
            "g" => Some(1.0),
            "mg" => Some(1e-3),
            _ => None,
        },
    }
}

/// Load one subject's recording from its manifest entry.
pub fn load_recording(manifest: &DatasetManifest, entry: &SubjectEntry) -> Result<Recording> {
    let mut streams = Vec::with_capacity(entry.streams.len());
    for stream_ref in &entry.streams {
        streams.push(load_stream(&manifest.root, stream_ref)?);
    }
    let fog_intervals = load_annotations(&manifest.root.join(&entry.annotations))?;
    Recording::new(
        entry.subject_id.clone(),
        streams,
        fog_intervals,
        entry.duration_s,
    )
}

fn load_stream(root: &Path, stream_ref: &StreamRef) -> Result<Stream> {
    let path = root.join(&stream_ref.path);
    let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    let mut header: Option<(ModalityKind, String, f64, f64)> = None;
    let mut samples = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line_number = lineno + 1;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        match &header {
            None => {
                let fields: Vec<&str> = trimmed.split('\t').collect();
                if fields.len() != 4 {
                    return Err(Error::parse(
                        &path,
                        line_number,
                        format!("expected header 'modality\\tchannel\\trate\\tunit', got {trimmed:?}"),
                    ));
                }
                let modality = ModalityKind::from_tag(fields[0]).ok_or_else(|| {
                    Error::parse(&path, line_number, format!("unknown modality tag {:?}", fields[0]))
                })?;
                let rate: f64 = fields[2].parse().map_err(|_| {
                    Error::parse(&path, line_number, format!("bad sample rate {:?}", fields[2]))
                })?;
                if !(rate > 0.0) {
                    return Err(Error::parse(
                        &path,
                        line_number,
                        format!("sample rate must be positive, got {rate}"),
                    ));
                }
                let scale = unit_to_canonical(modality, fields[3]).ok_or_else(|| {
                    Error::parse(
                        &path,
                        line_number,
                        format!("unknown unit {:?} for modality {}", fields[3], modality),
                    )
                })?;
                if modality != stream_ref.modality || fields[1] != stream_ref.channel {
                    return Err(Error::parse(
                        &path,
                        line_number,
                        format!(
                            "header {}/{} does not match manifest entry {}/{}",
                            fields[0], fields[1], stream_ref.modality, stream_ref.channel
                        ),
                    ));
                }
                header = Some((modality, fields[1].to_string(), rate, scale));
            }
            Some((_, _, _, scale)) => {
                let v: f64 = trimmed.parse().map_err(|_| {
                    Error::parse(&path, line_number, format!("malformed sample {trimmed:?}"))
                })?;
                samples.push(v * scale);
            }
        }
    }
    let (modality, channel, sample_rate_hz, _) = header.ok_or_else(|| {
        Error::parse(&path, 1, "stream file has no header line".to_string())
    })?;
    Ok(Stream {
        modality,
        channel,
        sample_rate_hz,
        samples,
    })
}

fn load_annotations(path: &Path) -> Result<Vec<(f64, f64)>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut intervals = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = trimmed.split('\t').collect();
        if fields.len() != 2 {
            return Err(Error::parse(
                path,
                lineno + 1,
                format!("expected 'start_s\\tend_s', got {trimmed:?}"),
            ));
        }
        let parse = |s: &str| -> Result<f64> {
            s.parse().map_err(|_| {
                Error::parse(path, lineno + 1, format!("malformed number {s:?}"))
            })
        };
        intervals.push((parse(fields[0])?, parse(fields[1])?));
    }
    Ok(intervals)
}

/// Load a dataset manifest and all recordings it references.
pub fn load_dataset(manifest_path: &Path) -> Result<(DatasetManifest, Vec<Recording>)> {
    let text = fs::read_to_string(manifest_path).map_err(|e| Error::io(manifest_path, e))?;
    let mut manifest: DatasetManifest = toml::from_str(&text).map_err(|e| {
        Error::parse(manifest_path, 1, format!("manifest does not parse: {e}"))
    })?;
    manifest.root = manifest_path
        .parent()
        .map(Path::to_path_buf)
        .unwrap_or_else(|| PathBuf::from("."));
    manifest.validate()?;
    let mut recordings = Vec::with_capacity(manifest.subjects.len());
    for entry in &manifest.subjects {
        recordings.push(load_recording(&manifest, entry)?);
    }
    Ok((manifest, recordings))
}

/// Write one subject's stream and annotation files under `root`, returning
/// its manifest entry.
pub fn save_recording(root: &Path, rec: &Recording) -> Result<SubjectEntry> {
    let subject_dir = root.join(&rec.subject_id);
    fs::create_dir_all(&subject_dir).map_err(|e| Error::io(&subject_dir, e))?;

    let mut stream_refs = Vec::with_capacity(rec.streams.len());
    for s in &rec.streams {
        let file_name = format!("{}.txt", s.channel);
        let rel_path = format!("{}/{}", rec.subject_id, file_name);
        let unit = s.modality.canonical_unit();
        let mut text = String::with_capacity(s.samples.len() * 20 + 64);
        let _ = writeln!(
            text,
            "{}\t{}\t{}\t{}",
            s.modality.tag(),
            s.channel,
            s.sample_rate_hz,
            unit
        );
        for v in &s.samples {
            let _ = writeln!(text, "{v}");
        }
        let path = subject_dir.join(&file_name);
        fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
        stream_refs.push(StreamRef {
            modality: s.modality,
            channel: s.channel.clone(),
            sample_rate_hz: s.sample_rate_hz,
            unit: unit.to_string(),
            path: rel_path,
        });
    }

    let ann_rel = format!("{}/annotations.tsv", rec.subject_id);
    let mut ann = String::from("# start_s\tend_s\n");
    for (a, b) in &rec.fog_intervals {
        let _ = writeln!(ann, "{a}\t{b}");
    }
    let ann_path = root.join(&ann_rel);
    fs::write(&ann_path, ann).map_err(|e| Error::io(&ann_path, e))?;

    Ok(SubjectEntry {
        subject_id: rec.subject_id.clone(),
        duration_s: rec.duration_s,
        annotations: ann_rel,
        streams: stream_refs,
    })
}

/// Write a whole cohort plus its manifest under `root`.
pub fn save_dataset(root: &Path, recordings: &[Recording]) -> Result<DatasetManifest> {
    fs::create_dir_all(root).map_err(|e| Error::io(root, e))?;
    let mut subjects = Vec::with_capacity(recordings.len());
    for rec in recordings {
        subjects.push(save_recording(root, rec)?);
    }
    let manifest = DatasetManifest {
        schema_version: MANIFEST_SCHEMA_VERSION,
        root: root.to_path_buf(),
        subjects,
    };
    manifest.validate()?;
    let text = toml::to_string_pretty(&manifest)
        .map_err(|e| Error::InvalidConfig(format!("manifest serialization failed: {e}")))?;
    let path = root.join(MANIFEST_FILE);
    fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
    Ok(manifest)
}
