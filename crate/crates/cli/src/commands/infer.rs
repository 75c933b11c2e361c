use crate::data;
use crate::error::CliError;
use crate::formats::{InferDoc, PredictedPhoneme};
use rayon::prelude::*;
use std::path::Path;
use vatts_core::align::StreamClock;
use vatts_core::dsp::SpectralConfig;
use vatts_core::features;
use vatts_core::model::{self, infer_streaming};

pub fn run(ckpt: &Path, manifest: &Path, out: &Path, latency_ms: f64) -> Result<(), CliError> {
    println!(
        "infer: ckpt={} manifest={} out={} latency_ms={latency_ms}",
        ckpt.display(),
        manifest.display(),
        out.display()
    );
    let text = std::fs::read_to_string(ckpt)
        .map_err(|e| CliError::data(format!("checkpoint {}: {e}", ckpt.display())))?;
    let checkpoint = model::load_checkpoint(&text)?;
    if checkpoint.phoneme_symbols.is_empty() {
        return Err(CliError::data(format!(
            "checkpoint {} carries no phoneme symbol table",
            ckpt.display()
        )));
    }

    let (dir, records) = data::load_sorted_records(manifest)?;
    std::fs::create_dir_all(out)?;
    let spec_cfg = SpectralConfig::default();
    let latency_s = latency_ms / 1000.0;

    let pool = data::thread_pool()?;
    let docs: Vec<InferDoc> = pool.install(|| {
        records
            .par_iter()
            .map(|record| -> Result<InferDoc, CliError> {
                let mut loaded = data::load_record(&dir, record)?;
                // A blind-trained model stays blind: an empty stream clamps
                // every cutoff to 0, i.e. the zero listener state.
                if checkpoint.visual_blind {
                    loaded.listener.frames.clear();
                }
                let clock = StreamClock::derive(record.fps, latency_s)?;
                let reprs = features::extract_speech_reprs(
                    &loaded.reference,
                    &loaded.alignment,
                    &spec_cfg,
                )?;
                let phoneme_ids = loaded
                    .alignment
                    .entries()
                    .iter()
                    .map(|e| data::symbol_id(&checkpoint.phoneme_symbols, &e.phoneme, &record.id))
                    .collect::<Result<Vec<_>, _>>()?;
                let speech: Vec<Vec<f64>> = reprs.into_iter().map(|r| r.vector).collect();
                let result = infer_streaming(
                    &checkpoint.params,
                    &phoneme_ids,
                    record.speaker,
                    &speech,
                    &loaded.listener,
                    &clock,
                )?;
                let phonemes = loaded
                    .alignment
                    .entries()
                    .iter()
                    .zip(&result.predictions)
                    .zip(&result.cutoffs)
                    .map(|((e, p), &cutoff)| PredictedPhoneme {
                        phoneme: e.phoneme.clone(),
                        log_pitch: p.log_pitch,
                        log_energy: p.log_energy,
                        log_duration: p.log_duration,
                        cutoff,
                    })
                    .collect();
                Ok(InferDoc {
                    id: record.id.clone(),
                    speaker: record.speaker,
                    phonemes,
                })
            })
            .collect::<Result<Vec<_>, _>>()
    })?;

    for doc in &docs {
        let mut text = serde_json::to_string_pretty(doc)?;
        text.push('\n');
        std::fs::write(out.join(format!("{}.json", doc.id)), text)?;
    }
    println!("inferred prosody for {} utterances", docs.len());
    Ok(())
}
