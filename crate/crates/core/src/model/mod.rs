//! The visual-aware prosody predictor.
//!
//! A gated recurrent encoder summarizes listener frames causally; per
//! phoneme, a 5-token sequence (fusion token, speaker embedding, projected
//! speech representation, phoneme embedding, projected listener state) runs
//! through pre-LN self-attention blocks and the fusion token's final state is
//! mapped to (log pitch, log energy, log duration). Gradients are exact
//! reverse-mode, written by hand and checked against finite differences.

mod backward;
mod checkpoint;
mod forward;
mod infer;
pub(crate) mod math;
mod optim;
mod train;

pub use backward::{utterance_gradients, utterance_loss};
pub use checkpoint::{load_checkpoint, save_checkpoint, Checkpoint, CHECKPOINT_SCHEMA_VERSION};
pub use forward::{
    forward_utterance, fuse_forward, gather_listener_states, lstm_encode, prosody_loss,
    UtteranceForward,
};
pub use infer::{infer_streaming, StreamingInference};
pub use optim::{adam_step, cosine_lr, AdamState};
pub use train::{train, EpochStats, TrainOutcome, Utterance};

use math::{Affine, Mat};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("invalid model config: {0}")]
    BadConfig(String),
    #[error("unknown speaker id {id} (speaker table has {count})")]
    UnknownSpeaker { id: usize, count: usize },
    #[error("unknown phoneme id {id} (vocabulary has {count})")]
    UnknownPhoneme { id: usize, count: usize },
    #[error("{what}: expected {want}, got {got}")]
    DimMismatch {
        what: &'static str,
        want: usize,
        got: usize,
    },
    #[error("{what} length mismatch: {left} vs {right}")]
    LengthMismatch {
        what: &'static str,
        left: usize,
        right: usize,
    },
    #[error("cutoff {cutoff} exceeds {frames} listener states")]
    CutoffOutOfRange { cutoff: usize, frames: usize },
    #[error("non-finite loss at epoch {epoch}, utterance {utterance}")]
    NonFiniteLoss { epoch: usize, utterance: String },
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("checkpoint: {0}")]
    Checkpoint(String),
}

/// Architecture hyperparameters.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub d_model: usize,
    pub heads: usize,
    pub blocks_k: usize,
    pub lstm_hidden: usize,
    pub lstm_layers: usize,
    pub ffn_mult: usize,
    pub phoneme_vocab: usize,
    pub speaker_count: usize,
    pub listener_dim: usize,
    pub speech_dim: usize,
    pub out_dim: usize,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            d_model: 64,
            heads: 4,
            blocks_k: 2,
            lstm_hidden: 64,
            lstm_layers: 2,
            ffn_mult: 4,
            phoneme_vocab: 24,
            speaker_count: 10,
            listener_dim: crate::features::LISTENER_DIM,
            speech_dim: 80,
            out_dim: 3,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<(), ModelError> {
        if self.d_model == 0 || self.d_model % self.heads != 0 {
            return Err(ModelError::BadConfig(format!(
                "d_model {} must be a positive multiple of heads {}",
                self.d_model, self.heads
            )));
        }
        for (name, v) in [
            ("heads", self.heads),
            ("blocks_k", self.blocks_k),
            ("lstm_hidden", self.lstm_hidden),
            ("lstm_layers", self.lstm_layers),
            ("ffn_mult", self.ffn_mult),
            ("phoneme_vocab", self.phoneme_vocab),
            ("speaker_count", self.speaker_count),
            ("listener_dim", self.listener_dim),
            ("speech_dim", self.speech_dim),
        ] {
            if v == 0 {
                return Err(ModelError::BadConfig(format!("{name} must be >= 1")));
            }
        }
        if self.out_dim != 3 {
            return Err(ModelError::BadConfig(format!(
                "out_dim is fixed to 3 (pitch, energy, duration), got {}",
                self.out_dim
            )));
        }
        Ok(())
    }

    pub fn head_dim(&self) -> usize {
        self.d_model / self.heads
    }

    pub fn ffn_hidden(&self) -> usize {
        self.ffn_mult * self.d_model
    }
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) struct LstmLayer {
    /// 4 gate blocks (input, forget, cell, output) stacked along rows.
    pub w_x: Mat,
    pub w_h: Mat,
    pub b: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) struct LayerNormParams {
    pub gain: Vec<f64>,
    pub bias: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Block {
    pub ln_attn: LayerNormParams,
    pub attn_q: Affine,
    pub attn_k: Affine,
    pub attn_v: Affine,
    pub attn_o: Affine,
    pub ln_ffn: LayerNormParams,
    pub ffn_in: Affine,
    pub ffn_out: Affine,
}

/// All learnable tensors. The same struct doubles as a gradient container
/// and as Adam moment storage (see [`ModelParameters::zeros_like`]).
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParameters {
    pub config: ModelConfig,
    pub(crate) speaker_embed: Mat,
    pub(crate) phoneme_embed: Mat,
    pub(crate) lstm: Vec<LstmLayer>,
    pub(crate) proj_speech: Affine,
    pub(crate) proj_listener: Affine,
    pub(crate) fusion_token: Vec<f64>,
    pub(crate) blocks: Vec<Block>,
    pub(crate) head: Affine,
}

impl ModelParameters {
    /// Deterministic initialization: uniform +-1/sqrt(fan_in) everywhere,
    /// layer-norm gain 1 / bias 0. Same seed, same bits.
    pub fn init(config: &ModelConfig, seed: u64) -> Result<Self, ModelError> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut params = Self::zeros(config);
        for (name, tensor) in params.named_tensors_mut() {
            if name.ends_with("gain") {
                tensor.fill(1.0);
            } else if name.ends_with("ln_attn.bias") || name.ends_with("ln_ffn.bias") {
                tensor.fill(0.0);
            } else {
                let fan_in = fan_in_of(&name, config);
                let bound = 1.0 / (fan_in as f64).sqrt();
                for v in tensor.iter_mut() {
                    *v = rng.random_range(-bound..bound);
                }
            }
        }
        Ok(params)
    }

    /// All-zero tensors with the same shapes; gradient / moment storage.
    pub fn zeros_like(&self) -> Self {
        Self::zeros(&self.config)
    }

    fn zeros(config: &ModelConfig) -> Self {
        let d = config.d_model;
        let hidden = config.ffn_hidden();
        let lstm = (0..config.lstm_layers)
            .map(|l| {
                let in_dim = if l == 0 { config.listener_dim } else { config.lstm_hidden };
                LstmLayer {
                    w_x: Mat::zeros(4 * config.lstm_hidden, in_dim),
                    w_h: Mat::zeros(4 * config.lstm_hidden, config.lstm_hidden),
                    b: vec![0.0; 4 * config.lstm_hidden],
                }
            })
            .collect();
        let blocks = (0..config.blocks_k)
            .map(|_| Block {
                ln_attn: LayerNormParams {
                    gain: vec![0.0; d],
                    bias: vec![0.0; d],
                },
                attn_q: Affine::zeros(d, d),
                attn_k: Affine::zeros(d, d),
                attn_v: Affine::zeros(d, d),
                attn_o: Affine::zeros(d, d),
                ln_ffn: LayerNormParams {
                    gain: vec![0.0; d],
                    bias: vec![0.0; d],
                },
                ffn_in: Affine::zeros(hidden, d),
                ffn_out: Affine::zeros(d, hidden),
            })
            .collect();
        Self {
            config: config.clone(),
            speaker_embed: Mat::zeros(config.speaker_count, d),
            phoneme_embed: Mat::zeros(config.phoneme_vocab, d),
            lstm,
            proj_speech: Affine::zeros(d, config.speech_dim),
            proj_listener: Affine::zeros(d, config.lstm_hidden),
            fusion_token: vec![0.0; d],
            blocks,
            head: Affine::zeros(config.out_dim, d),
        }
    }

    /// Named tensors with shapes, in checkpoint (lexicographic) order.
    pub fn named_tensors(&self) -> Vec<(String, Vec<usize>, &[f64])> {
        let mut out: Vec<(String, Vec<usize>, &[f64])> = Vec::new();
        for (k, b) in self.blocks.iter().enumerate() {
            let p = format!("blocks.{k:02}");
            for (suffix, affine) in [
                ("attn_k", &b.attn_k),
                ("attn_o", &b.attn_o),
                ("attn_q", &b.attn_q),
                ("attn_v", &b.attn_v),
                ("ffn_in", &b.ffn_in),
                ("ffn_out", &b.ffn_out),
            ] {
                out.push((
                    format!("{p}.{suffix}.bias"),
                    vec![affine.b.len()],
                    &affine.b,
                ));
                out.push((
                    format!("{p}.{suffix}.weight"),
                    vec![affine.w.rows, affine.w.cols],
                    &affine.w.data,
                ));
            }
            out.push((format!("{p}.ln_attn.bias"), vec![b.ln_attn.bias.len()], &b.ln_attn.bias));
            out.push((format!("{p}.ln_attn.gain"), vec![b.ln_attn.gain.len()], &b.ln_attn.gain));
            out.push((format!("{p}.ln_ffn.bias"), vec![b.ln_ffn.bias.len()], &b.ln_ffn.bias));
            out.push((format!("{p}.ln_ffn.gain"), vec![b.ln_ffn.gain.len()], &b.ln_ffn.gain));
        }
        out.push(("fusion_token".into(), vec![self.fusion_token.len()], &self.fusion_token));
        out.push(("head.bias".into(), vec![self.head.b.len()], &self.head.b));
        out.push((
            "head.weight".into(),
            vec![self.head.w.rows, self.head.w.cols],
            &self.head.w.data,
        ));
        for (l, layer) in self.lstm.iter().enumerate() {
            let p = format!("lstm.{l:02}");
            out.push((format!("{p}.bias"), vec![layer.b.len()], &layer.b));
            out.push((
                format!("{p}.input_weight"),
                vec![layer.w_x.rows, layer.w_x.cols],
                &layer.w_x.data,
            ));
            out.push((
                format!("{p}.recurrent_weight"),
                vec![layer.w_h.rows, layer.w_h.cols],
                &layer.w_h.data,
            ));
        }
        out.push((
            "phoneme_embed".into(),
            vec![self.phoneme_embed.rows, self.phoneme_embed.cols],
            &self.phoneme_embed.data,
        ));
        out.push((
            "proj_listener.bias".into(),
            vec![self.proj_listener.b.len()],
            &self.proj_listener.b,
        ));
        out.push((
            "proj_listener.weight".into(),
            vec![self.proj_listener.w.rows, self.proj_listener.w.cols],
            &self.proj_listener.w.data,
        ));
        out.push((
            "proj_speech.bias".into(),
            vec![self.proj_speech.b.len()],
            &self.proj_speech.b,
        ));
        out.push((
            "proj_speech.weight".into(),
            vec![self.proj_speech.w.rows, self.proj_speech.w.cols],
            &self.proj_speech.w.data,
        ));
        out.push((
            "speaker_embed".into(),
            vec![self.speaker_embed.rows, self.speaker_embed.cols],
            &self.speaker_embed.data,
        ));
        out.sort_by(|a, b| a.0.cmp(&b.0));
        out
    }

    /// Mutable tensor slices in the same order as [`Self::named_tensors`].
    pub fn named_tensors_mut(&mut self) -> Vec<(String, &mut [f64])> {
        let mut out: Vec<(String, &mut [f64])> = Vec::new();
        for (k, b) in self.blocks.iter_mut().enumerate() {
            let p = format!("blocks.{k:02}");
            for (suffix, affine) in [
                ("attn_k", &mut b.attn_k),
                ("attn_o", &mut b.attn_o),
                ("attn_q", &mut b.attn_q),
                ("attn_v", &mut b.attn_v),
                ("ffn_in", &mut b.ffn_in),
                ("ffn_out", &mut b.ffn_out),
            ] {
                out.push((format!("{p}.{suffix}.bias"), affine.b.as_mut_slice()));
                out.push((format!("{p}.{suffix}.weight"), affine.w.data.as_mut_slice()));
            }
            out.push((format!("{p}.ln_attn.bias"), b.ln_attn.bias.as_mut_slice()));
            out.push((format!("{p}.ln_attn.gain"), b.ln_attn.gain.as_mut_slice()));
            out.push((format!("{p}.ln_ffn.bias"), b.ln_ffn.bias.as_mut_slice()));
            out.push((format!("{p}.ln_ffn.gain"), b.ln_ffn.gain.as_mut_slice()));
        }
        out.push(("fusion_token".into(), self.fusion_token.as_mut_slice()));
        out.push(("head.bias".into(), self.head.b.as_mut_slice()));
        out.push(("head.weight".into(), self.head.w.data.as_mut_slice()));
        for (l, layer) in self.lstm.iter_mut().enumerate() {
            let p = format!("lstm.{l:02}");
            out.push((format!("{p}.bias"), layer.b.as_mut_slice()));
            out.push((format!("{p}.input_weight"), layer.w_x.data.as_mut_slice()));
            out.push((format!("{p}.recurrent_weight"), layer.w_h.data.as_mut_slice()));
        }
        out.push(("phoneme_embed".into(), self.phoneme_embed.data.as_mut_slice()));
        out.push(("proj_listener.bias".into(), self.proj_listener.b.as_mut_slice()));
        out.push(("proj_listener.weight".into(), self.proj_listener.w.data.as_mut_slice()));
        out.push(("proj_speech.bias".into(), self.proj_speech.b.as_mut_slice()));
        out.push(("proj_speech.weight".into(), self.proj_speech.w.data.as_mut_slice()));
        out.push(("speaker_embed".into(), self.speaker_embed.data.as_mut_slice()));
        out.sort_by(|a, b| a.0.cmp(&b.0));
        out
    }
}

/// Fan-in per tensor name, for the uniform init bound.
fn fan_in_of(name: &str, cfg: &ModelConfig) -> usize {
    if name.starts_with("lstm") {
        if name.contains("input_weight") {
            let layer: usize = name["lstm.".len().."lstm.".len() + 2].parse().unwrap();
            if layer == 0 {
                cfg.listener_dim
            } else {
                cfg.lstm_hidden
            }
        } else {
            cfg.lstm_hidden
        }
    } else if name.starts_with("proj_speech") {
        cfg.speech_dim
    } else if name.starts_with("proj_listener") {
        cfg.lstm_hidden
    } else if name.contains("ffn_out") {
        cfg.ffn_hidden()
    } else {
        cfg.d_model
    }
}

/// Optimizer hyperparameters plus run identity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub lr_max: f64,
    pub lr_min: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub epochs: usize,
    pub seed: u64,
    /// Causal lag the teacher cutoffs were computed with.
    pub phi: usize,
    /// Zero out listener states: the classical-TTS ablation.
    pub visual_blind: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            lr_max: 5e-4,
            lr_min: 0.0,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            epochs: 240,
            seed: 0,
            phi: 1,
            visual_blind: false,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), ModelError> {
        if !(self.beta1 > 0.0 && self.beta1 < 1.0 && self.beta2 > 0.0 && self.beta2 < 1.0) {
            return Err(ModelError::BadConfig(format!(
                "betas ({}, {}) must lie in (0, 1)",
                self.beta1, self.beta2
            )));
        }
        if !(self.lr_max >= self.lr_min && self.lr_min >= 0.0) {
            return Err(ModelError::BadConfig(format!(
                "lr range [{}, {}] invalid",
                self.lr_min, self.lr_max
            )));
        }
        if self.epochs == 0 {
            return Err(ModelError::BadConfig("epochs must be >= 1".into()));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn init_is_deterministic_and_shaped() {
        let cfg = ModelConfig::default();
        let a = ModelParameters::init(&cfg, 7).unwrap();
        let b = ModelParameters::init(&cfg, 7).unwrap();
        assert_eq!(a, b);
        let c = ModelParameters::init(&cfg, 8).unwrap();
        assert_ne!(a, c);

        let names: Vec<String> = a.named_tensors().into_iter().map(|(n, ..)| n).collect();
        let mut sorted = names.clone();
        sorted.sort();
        assert_eq!(names, sorted, "tensor order must be lexicographic");
        for (name, shape, data) in a.named_tensors() {
            assert_eq!(shape.iter().product::<usize>(), data.len(), "{name}");
        }
    }

    #[test]
    fn layer_norm_gains_start_at_one() {
        let p = ModelParameters::init(&ModelConfig::default(), 3).unwrap();
        assert!(p.blocks[0].ln_attn.gain.iter().all(|&g| g == 1.0));
        assert!(p.blocks[0].ln_attn.bias.iter().all(|&b| b == 0.0));
    }

    #[test]
    fn config_rejects_bad_shapes() {
        let mut cfg = ModelConfig::default();
        cfg.heads = 5; // 64 % 5 != 0
        assert!(cfg.validate().is_err());
        let mut cfg2 = ModelConfig::default();
        cfg2.out_dim = 4;
        assert!(cfg2.validate().is_err());
    }

    #[test]
    fn mutable_and_shared_traversals_agree() {
        let mut p = ModelParameters::init(&ModelConfig::default(), 1).unwrap();
        let shared: Vec<(String, usize)> = p
            .named_tensors()
            .into_iter()
            .map(|(n, _, d)| (n, d.len()))
            .collect();
        let muts: Vec<(String, usize)> = p
            .named_tensors_mut()
            .into_iter()
            .map(|(n, d)| (n, d.len()))
            .collect();
        assert_eq!(shared, muts);
    }
}
