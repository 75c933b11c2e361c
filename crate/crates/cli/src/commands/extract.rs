use crate::data;
use crate::error::CliError;
use crate::formats::ExtractDoc;
use rayon::prelude::*;
use std::path::Path;
use vatts_core::align::{align_offline, StreamClock};
use vatts_core::dsp::{F0Config, SpectralConfig};
use vatts_core::features;

pub fn run(manifest: &Path, out: &Path, latency_ms: f64) -> Result<(), CliError> {
    println!(
        "extract: manifest={} out={} latency_ms={latency_ms}",
        manifest.display(),
        out.display()
    );
    let (dir, records) = data::load_sorted_records(manifest)?;
    std::fs::create_dir_all(out)?;
    let f0_cfg = F0Config::default();
    let spec_cfg = SpectralConfig::default();
    let latency_s = latency_ms / 1000.0;

    let pool = data::thread_pool()?;
    let docs: Vec<ExtractDoc> = pool.install(|| {
        records
            .par_iter()
            .map(|record| -> Result<ExtractDoc, CliError> {
                let loaded = data::load_record(&dir, record)?;
                let clock = StreamClock::derive(record.fps, latency_s)?;
                let targets = features::extract_prosody_targets(
                    &loaded.audio,
                    &loaded.alignment,
                    &f0_cfg,
                    &spec_cfg,
                )?;
                let reprs = features::extract_speech_reprs(
                    &loaded.reference,
                    &loaded.alignment,
                    &spec_cfg,
                )?;
                let cutoffs =
                    align_offline(&loaded.alignment, &clock, loaded.listener.frame_count());
                for w in &cutoffs.warnings {
                    eprintln!("warning: {}: {w}", record.id);
                }
                Ok(ExtractDoc {
                    id: record.id.clone(),
                    speaker: record.speaker,
                    phonemes: loaded
                        .alignment
                        .entries()
                        .iter()
                        .map(|e| e.phoneme.clone())
                        .collect(),
                    cutoffs: cutoffs.cutoffs,
                    targets,
                    speech_reprs: reprs.into_iter().map(|r| r.vector).collect(),
                })
            })
            .collect::<Result<Vec<_>, _>>()
    })?;

    for doc in &docs {
        let path = out.join(format!("{}.json", doc.id));
        let mut text = serde_json::to_string_pretty(doc)?;
        text.push('\n');
        std::fs::write(&path, text)?;
    }
    println!("extracted {} utterances", docs.len());
    Ok(())
}
