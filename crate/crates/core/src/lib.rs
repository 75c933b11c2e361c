//! Listener-aware prosody prediction pipeline.
//!
//! The crate covers the full desk-scale loop:
//!
//! - [`dsp`] — deterministic signal processing (STFT, mel cepstra, YIN pitch,
//!   framewise energy),
//! - [`align`] — the causal timing contract mapping phonemes to the last
//!   usable listener video frame,
//! - [`features`] — listener feature ingestion and per-phoneme prosody
//!   target / speech representation extraction,
//! - [`model`] — the prosody predictor (recurrent listener encoder, fusion
//!   attention stack, prediction head) with hand-written gradients, Adam and
//!   a streaming inference loop,
//! - [`metrics`] — objective evaluation (MCD13 with DTW, GPE/VDE/FFE,
//!   phoneme-level prosody MAE),
//! - [`corpus`] — WAV and manifest I/O plus a deterministic synthetic corpus
//!   generator that makes every stage oracle-testable.

pub mod align;
pub mod corpus;
pub mod dsp;
pub mod features;
pub mod metrics;
pub mod model;

pub use align::{PhonemeAlignment, PhonemeEntry, StreamClock};
pub use corpus::{ManifestRecord, SyntheticSpec};
pub use dsp::{AudioBuffer, F0Config, F0Track, SpectralConfig};
pub use features::{ListenerFeatureStream, ProsodyPrediction, ProsodyTarget, SpeechRepr};
pub use metrics::MetricReport;
pub use model::{AdamState, ModelConfig, ModelParameters, TrainConfig};
