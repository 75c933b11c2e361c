//! Dataset I/O and the deterministic synthetic corpus generator.
//!
//! A corpus is a line-delimited manifest binding, per utterance, the audio,
//! forced-alignment TSV, listener feature CSV and an optional reference
//! rendering used for speech representations.

mod synth;
mod wav;

pub use synth::{
    generate_utterance, write_corpus, FeedbackRule, GeneratedUtterance, ListenerPattern,
    PhonemeParams, SyntheticSpec, SYNTH_LATENCY_S,
};
pub use wav::{read_wav, write_wav};

use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};
use thiserror::Error;

/// Speakers in the conversational corpus this pipeline targets.
pub const SPEAKER_COUNT: usize = 10;

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("{path}: {message}")]
    Wav { path: String, message: String },
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: malformed manifest record: {message}")]
    Manifest {
        path: String,
        line: usize,
        message: String,
    },
    #[error("synthetic spec invalid: {0}")]
    BadSpec(String),
}

/// One utterance of a dataset; paths are relative to the manifest file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestRecord {
    pub id: String,
    pub speaker: usize,
    pub wav: String,
    pub align_tsv: String,
    pub listener_csv: String,
    pub fps: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ref_wav: Option<String>,
}

impl ManifestRecord {
    pub fn resolve(&self, manifest_dir: &Path, relative: &str) -> PathBuf {
        let p = Path::new(relative);
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            manifest_dir.join(p)
        }
    }
}

/// Load a line-delimited manifest; an empty file is an empty corpus.
pub fn load_manifest(path: &Path) -> Result<Vec<ManifestRecord>, CorpusError> {
    let display = path.display().to_string();
    let text = std::fs::read_to_string(path).map_err(|source| CorpusError::Io {
        path: display.clone(),
        source,
    })?;
    let mut records = Vec::new();
    let mut seen = std::collections::HashSet::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let record: ManifestRecord =
            serde_json::from_str(line).map_err(|e| CorpusError::Manifest {
                path: display.clone(),
                line: i + 1,
                message: e.to_string(),
            })?;
        if !seen.insert(record.id.clone()) {
            return Err(CorpusError::Manifest {
                path: display.clone(),
                line: i + 1,
                message: format!("duplicate id {:?}", record.id),
            });
        }
        records.push(record);
    }
    Ok(records)
}

pub fn write_manifest(path: &Path, records: &[ManifestRecord]) -> Result<(), CorpusError> {
    let mut out = String::new();
    for r in records {
        out.push_str(&serde_json::to_string(r).expect("manifest record serializes"));
        out.push('\n');
    }
    std::fs::write(path, out).map_err(|source| CorpusError::Io {
        path: path.display().to_string(),
        source,
    })
}

/// Check one record against its files. Returns human-readable diagnostics;
/// an empty list means the record is usable.
pub fn validate_record(record: &ManifestRecord, manifest_dir: &Path) -> Vec<String> {
    let mut diags = Vec::new();
    if !(record.fps > 0.0) {
        diags.push(format!("{}: fps must be positive, got {}", record.id, record.fps));
    }
    if record.speaker >= SPEAKER_COUNT {
        diags.push(format!(
            "{}: speaker {} outside [0, {SPEAKER_COUNT})",
            record.id, record.speaker
        ));
    }

    let wav_path = record.resolve(manifest_dir, &record.wav);
    let align_path = record.resolve(manifest_dir, &record.align_tsv);
    let listener_path = record.resolve(manifest_dir, &record.listener_csv);
    for (label, p) in [
        ("wav", &wav_path),
        ("align_tsv", &align_path),
        ("listener_csv", &listener_path),
    ] {
        if !p.exists() {
            diags.push(format!("{}: {label} missing: {}", record.id, p.display()));
        }
    }
    if let Some(ref_wav) = &record.ref_wav {
        let p = record.resolve(manifest_dir, ref_wav);
        if !p.exists() {
            diags.push(format!("{}: ref_wav missing: {}", record.id, p.display()));
        }
    }
    if !diags.is_empty() {
        return diags;
    }

    let audio = match read_wav(&wav_path) {
        Ok(a) => Some(a),
        Err(e) => {
            diags.push(format!("{}: {e}", record.id));
            None
        }
    };
    let align = match crate::align::PhonemeAlignment::from_tsv(&align_path) {
        Ok(a) => Some(a),
        Err(e) => {
            diags.push(format!("{}: {e}", record.id));
            None
        }
    };
    if record.fps > 0.0 {
        if let Err(e) = crate::features::load_listener_features(&listener_path, record.fps) {
            diags.push(format!("{}: {e}", record.id));
        }
    }
    if let (Some(audio), Some(align)) = (audio, align) {
        let slack = 1.0 / record.fps.max(1e-9);
        if align.end_s() > audio.duration_s() + slack {
            diags.push(format!(
                "{}: alignment ends at {:.3} s but audio lasts {:.3} s",
                record.id,
                align.end_s(),
                audio.duration_s()
            ));
        }
    }
    diags
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_manifest_is_empty_corpus() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("manifest.jsonl");
        std::fs::write(&path, "").unwrap();
        assert!(load_manifest(&path).unwrap().is_empty());
    }

    #[test]
    fn malformed_line_names_its_number() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("manifest.jsonl");
        let good = ManifestRecord {
            id: "u0".into(),
            speaker: 0,
            wav: "a.wav".into(),
            align_tsv: "a.tsv".into(),
            listener_csv: "a.csv".into(),
            fps: 30.0,
            ref_wav: None,
        };
        std::fs::write(
            &path,
            format!("{}\n{{not json\n", serde_json::to_string(&good).unwrap()),
        )
        .unwrap();
        let err = load_manifest(&path).unwrap_err();
        assert!(matches!(err, CorpusError::Manifest { line: 2, .. }), "{err}");
    }

    #[test]
    fn validation_flags_alignment_longer_than_audio() {
        let dir = tempfile::tempdir().unwrap();
        let audio = crate::dsp::AudioBuffer::new(vec![0.0; 22050], 22050);
        write_wav(&dir.path().join("u.wav"), &audio).unwrap();
        std::fs::write(dir.path().join("u.tsv"), "aa\t0.000\t3.000\n").unwrap();
        let row = vec!["0.0"; crate::features::LISTENER_DIM].join(",");
        std::fs::write(dir.path().join("u.csv"), format!("{row}\n")).unwrap();
        let record = ManifestRecord {
            id: "u".into(),
            speaker: 1,
            wav: "u.wav".into(),
            align_tsv: "u.tsv".into(),
            listener_csv: "u.csv".into(),
            fps: 30.0,
            ref_wav: None,
        };
        let diags = validate_record(&record, dir.path());
        assert_eq!(diags.len(), 1);
        assert!(diags[0].contains("alignment ends"), "{}", diags[0]);
    }

    #[test]
    fn manifest_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("manifest.jsonl");
        let records = vec![
            ManifestRecord {
                id: "a".into(),
                speaker: 0,
                wav: "wav/a.wav".into(),
                align_tsv: "align/a.tsv".into(),
                listener_csv: "listener/a.csv".into(),
                fps: 30.0,
                ref_wav: Some("ref/a.wav".into()),
            },
            ManifestRecord {
                id: "b".into(),
                speaker: 3,
                wav: "wav/b.wav".into(),
                align_tsv: "align/b.tsv".into(),
                listener_csv: "listener/b.csv".into(),
                fps: 25.0,
                ref_wav: None,
            },
        ];
        write_manifest(&path, &records).unwrap();
        assert_eq!(load_manifest(&path).unwrap(), records);
    }
}
