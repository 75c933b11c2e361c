//! Shared dataset loading for the pipeline commands.

use crate::error::CliError;
use std::collections::BTreeSet;
use std::path::{Path, PathBuf};
use vatts_core::align::{align_offline, PhonemeAlignment, StreamClock};
use vatts_core::corpus::{self, ManifestRecord};
use vatts_core::dsp::{AudioBuffer, F0Config, SpectralConfig};
use vatts_core::features::{self, ListenerFeatureStream};
use vatts_core::model::Utterance;

/// Manifest records sorted by id, so every parallel stage reduces in a
/// deterministic order.
pub fn load_sorted_records(manifest: &Path) -> Result<(PathBuf, Vec<ManifestRecord>), CliError> {
    if !manifest.exists() {
        return Err(CliError::data(format!(
            "manifest not found: {}",
            manifest.display()
        )));
    }
    let mut records = corpus::load_manifest(manifest)?;
    records.sort_by(|a, b| a.id.cmp(&b.id));
    let dir = manifest
        .parent()
        .map(Path::to_path_buf)
        .unwrap_or_else(|| PathBuf::from("."));
    Ok((dir, records))
}

/// Worker pool honoring the VATTS_THREADS cap.
pub fn thread_pool() -> Result<rayon::ThreadPool, CliError> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Ok(raw) = std::env::var("VATTS_THREADS") {
        let n: usize = raw
            .parse()
            .map_err(|_| CliError::Usage(format!("VATTS_THREADS={raw:?} is not a number")))?;
        if n == 0 {
            return Err(CliError::Usage("VATTS_THREADS must be >= 1".into()));
        }
        builder = builder.num_threads(n);
    }
    builder
        .build()
        .map_err(|e| CliError::Data(format!("failed to build worker pool: {e}")))
}

/// Everything one manifest record points at, loaded and validated.
pub struct LoadedRecord {
    pub record: ManifestRecord,
    pub audio: AudioBuffer,
    /// Reference rendering for speech representations; falls back to `audio`.
    pub reference: AudioBuffer,
    pub alignment: PhonemeAlignment,
    pub listener: ListenerFeatureStream,
}

pub fn load_record(dir: &Path, record: &ManifestRecord) -> Result<LoadedRecord, CliError> {
    let audio = corpus::read_wav(&record.resolve(dir, &record.wav))?;
    let alignment = PhonemeAlignment::from_tsv(&record.resolve(dir, &record.align_tsv))?;
    let listener =
        features::load_listener_features(&record.resolve(dir, &record.listener_csv), record.fps)?;
    let reference = match &record.ref_wav {
        Some(p) => corpus::read_wav(&record.resolve(dir, p))?,
        None => audio.clone(),
    };
    Ok(LoadedRecord {
        record: record.clone(),
        audio,
        reference,
        alignment,
        listener,
    })
}

/// Sorted union of phoneme symbols across a corpus; the embedding table
/// index of a symbol is its position here.
pub fn collect_vocabulary(
    dir: &Path,
    records: &[ManifestRecord],
) -> Result<Vec<String>, CliError> {
    let mut vocab = BTreeSet::new();
    for record in records {
        let alignment = PhonemeAlignment::from_tsv(&record.resolve(dir, &record.align_tsv))?;
        for e in alignment.entries() {
            vocab.insert(e.phoneme.clone());
        }
    }
    Ok(vocab.into_iter().collect())
}

pub fn symbol_id(symbols: &[String], symbol: &str, id_context: &str) -> Result<usize, CliError> {
    symbols
        .binary_search_by(|s| s.as_str().cmp(symbol))
        .map_err(|_| {
            CliError::data(format!(
                "{id_context}: phoneme {symbol:?} is not in the model vocabulary"
            ))
        })
}

/// Turn a loaded record into a model utterance with teacher cutoffs.
pub fn build_utterance(
    loaded: &LoadedRecord,
    symbols: &[String],
    latency_s: f64,
    f0_cfg: &F0Config,
    spec_cfg: &SpectralConfig,
) -> Result<Utterance, CliError> {
    let clock = StreamClock::derive(loaded.record.fps, latency_s)?;
    let targets =
        features::extract_prosody_targets(&loaded.audio, &loaded.alignment, f0_cfg, spec_cfg)?;
    let reprs = features::extract_speech_reprs(&loaded.reference, &loaded.alignment, spec_cfg)?;
    let cutoffs = align_offline(&loaded.alignment, &clock, loaded.listener.frame_count());
    for w in &cutoffs.warnings {
        eprintln!("warning: {}: {w}", loaded.record.id);
    }
    let phoneme_ids = loaded
        .alignment
        .entries()
        .iter()
        .map(|e| symbol_id(symbols, &e.phoneme, &loaded.record.id))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(Utterance {
        id: loaded.record.id.clone(),
        speaker: loaded.record.speaker,
        phoneme_ids,
        speech_reprs: reprs.into_iter().map(|r| r.vector).collect(),
        listener_frames: loaded.listener.frames.clone(),
        cutoffs: cutoffs.cutoffs,
        targets,
    })
}
