//! Shared fixtures for the criterion benchmarks.

use vatts_core::align::{align_offline, StreamClock};
use vatts_core::corpus::{generate_utterance, SyntheticSpec, SYNTH_LATENCY_S};
use vatts_core::dsp::{AudioBuffer, F0Config, SpectralConfig};
use vatts_core::features;
use vatts_core::model::{ModelConfig, ModelParameters, Utterance};

/// A one-second, three-harmonic 220 Hz tone at 22.05 kHz.
pub fn bench_tone() -> AudioBuffer {
    let rate = 22050u32;
    AudioBuffer::new(
        (0..rate as usize)
            .map(|i| {
                let w = 2.0 * std::f64::consts::PI * 220.0 * i as f64 / rate as f64;
                0.5 / 1.75 * (w.sin() + 0.5 * (2.0 * w).sin() + 0.25 * (3.0 * w).sin())
            })
            .collect(),
        rate,
    )
}

/// One generated utterance turned into a model-ready example, plus matching
/// default-config parameters.
pub fn bench_example() -> (ModelParameters, Utterance) {
    let spec = SyntheticSpec::new(1, 99);
    let g = generate_utterance(&spec, 0).unwrap();
    let f0_cfg = F0Config::default();
    let spec_cfg = SpectralConfig::default();
    let clock = StreamClock::derive(spec.fps, SYNTH_LATENCY_S).unwrap();

    let mut symbols: Vec<String> = g
        .alignment
        .entries()
        .iter()
        .map(|e| e.phoneme.clone())
        .collect();
    symbols.sort();
    symbols.dedup();

    let targets =
        features::extract_prosody_targets(&g.audio, &g.alignment, &f0_cfg, &spec_cfg).unwrap();
    let reprs = features::extract_speech_reprs(&g.reference, &g.alignment, &spec_cfg).unwrap();
    let cutoffs = align_offline(&g.alignment, &clock, g.listener.frame_count()).cutoffs;
    let utt = Utterance {
        id: "bench".into(),
        speaker: g.speaker,
        phoneme_ids: g
            .alignment
            .entries()
            .iter()
            .map(|e| symbols.binary_search(&e.phoneme).unwrap())
            .collect(),
        speech_reprs: reprs.into_iter().map(|r| r.vector).collect(),
        listener_frames: g.listener.frames,
        cutoffs,
        targets,
    };
    let cfg = ModelConfig {
        phoneme_vocab: symbols.len(),
        ..ModelConfig::default()
    };
    let params = ModelParameters::init(&cfg, 7).unwrap();
    (params, utt)
}
