//! On-disk JSON document shapes shared between pipeline stages.

use serde::{Deserialize, Serialize};
use vatts_core::features::ProsodyTarget;
use vatts_core::metrics::{MetricReport, ProsodyMae};

/// `extract` output: one document per utterance.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExtractDoc {
    pub id: String,
    pub speaker: usize,
    pub phonemes: Vec<String>,
    /// Teacher cutoffs from the forced alignment.
    pub cutoffs: Vec<usize>,
    pub targets: Vec<ProsodyTarget>,
    pub speech_reprs: Vec<Vec<f64>>,
}

/// One predicted phoneme: the adapter payload for a downstream synthesizer.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PredictedPhoneme {
    pub phoneme: String,
    pub log_pitch: f64,
    pub log_energy: f64,
    pub log_duration: f64,
    /// Last listener frame this prediction was conditioned on.
    pub cutoff: usize,
}

/// `infer` output: one document per utterance.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct InferDoc {
    pub id: String,
    pub speaker: usize,
    pub phonemes: Vec<PredictedPhoneme>,
}

impl InferDoc {
    pub fn predictions(&self) -> Vec<ProsodyTarget> {
        self.phonemes
            .iter()
            .map(|p| ProsodyTarget {
                log_pitch: p.log_pitch,
                pitch_mask: true,
                log_energy: p.log_energy,
                log_duration: p.log_duration,
            })
            .collect()
    }
}

/// Per-utterance evaluation detail.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct UtteranceEval {
    pub id: String,
    pub mae: ProsodyMae,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mcd13: Option<f64>,
}

/// `eval` output document; `report` consumes it to emit plot data.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EvalDoc {
    pub system: String,
    pub ref_manifest: String,
    pub pred_dir: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub est_audio_dir: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stamp: Option<String>,
    pub report: MetricReport,
    pub utterances: Vec<UtteranceEval>,
}
