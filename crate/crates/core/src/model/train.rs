//! Deterministic training loop: one Adam step per utterance, seeded
//! per-epoch shuffling, cosine-annealed learning rate.

use super::backward::accumulate_gradients;
use super::forward::forward_utterance;
use super::optim::{adam_step, cosine_lr, AdamState};
use super::{ModelConfig, ModelError, ModelParameters, TrainConfig};
use crate::features::ProsodyTarget;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// One training example: a phoneme sequence with its teacher cutoffs and
/// ground-truth prosody.
#[derive(Debug, Clone)]
pub struct Utterance {
    pub id: String,
    pub speaker: usize,
    pub phoneme_ids: Vec<usize>,
    pub speech_reprs: Vec<Vec<f64>>,
    pub listener_frames: Vec<Vec<f64>>,
    /// Offline causal cutoffs a_i (1-based frames, 0 = no history).
    pub cutoffs: Vec<usize>,
    pub targets: Vec<ProsodyTarget>,
}

impl Utterance {
    pub fn len(&self) -> usize {
        self.phoneme_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.phoneme_ids.is_empty()
    }

    pub(crate) fn validate(&self, cfg: &ModelConfig) -> Result<(), ModelError> {
        let n = self.phoneme_ids.len();
        for (what, len) in [
            ("speech_reprs", self.speech_reprs.len()),
            ("cutoffs", self.cutoffs.len()),
            ("targets", self.targets.len()),
        ] {
            if len != n {
                return Err(ModelError::LengthMismatch {
                    what,
                    left: len,
                    right: n,
                });
            }
        }
        if self.speaker >= cfg.speaker_count {
            return Err(ModelError::UnknownSpeaker {
                id: self.speaker,
                count: cfg.speaker_count,
            });
        }
        for &p in &self.phoneme_ids {
            if p >= cfg.phoneme_vocab {
                return Err(ModelError::UnknownPhoneme {
                    id: p,
                    count: cfg.phoneme_vocab,
                });
            }
        }
        for s in &self.speech_reprs {
            if s.len() != cfg.speech_dim {
                return Err(ModelError::DimMismatch {
                    what: "speech representation",
                    want: cfg.speech_dim,
                    got: s.len(),
                });
            }
        }
        for &a in &self.cutoffs {
            if a > self.listener_frames.len() {
                return Err(ModelError::CutoffOutOfRange {
                    cutoff: a,
                    frames: self.listener_frames.len(),
                });
            }
        }
        Ok(())
    }
}

/// Per-epoch training statistics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochStats {
    pub epoch: usize,
    pub mean_loss: f64,
    pub lr_last: f64,
}

/// A trained model plus its loss curve.
#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub params: ModelParameters,
    pub curve: Vec<EpochStats>,
}

/// Train from scratch. Deterministic: the same dataset, configs and seed
/// produce a bit-identical model.
pub fn train(
    dataset: &[Utterance],
    model_cfg: &ModelConfig,
    train_cfg: &TrainConfig,
) -> Result<TrainOutcome, ModelError> {
    train_cfg.validate()?;
    if dataset.is_empty() {
        return Err(ModelError::EmptyDataset);
    }
    for utt in dataset {
        utt.validate(model_cfg)?;
    }

    let mut params = ModelParameters::init(model_cfg, train_cfg.seed)?;
    let mut state = AdamState::new(&params);
    let total_steps = train_cfg.epochs * dataset.len();
    let mut step = 0usize;
    let mut curve = Vec::with_capacity(train_cfg.epochs);

    let mut order: Vec<usize> = (0..dataset.len()).collect();
    for epoch in 0..train_cfg.epochs {
        let mut rng = ChaCha8Rng::seed_from_u64(train_cfg.seed ^ (epoch as u64).wrapping_mul(0x9E3779B97F4A7C15));
        order.shuffle(&mut rng);

        let mut epoch_loss = 0.0;
        let mut lr_last = 0.0;
        for &idx in &order {
            let utt = &dataset[idx];
            let fwd = forward_utterance(&params, utt, train_cfg.visual_blind)?;
            if !fwd.loss.is_finite() {
                return Err(ModelError::NonFiniteLoss {
                    epoch,
                    utterance: utt.id.clone(),
                });
            }
            let mut grads = params.zeros_like();
            accumulate_gradients(&params, utt, &fwd, train_cfg.visual_blind, &mut grads);
            lr_last = cosine_lr(step, total_steps, train_cfg);
            adam_step(&mut params, &grads, &mut state, lr_last, train_cfg)?;
            step += 1;
            epoch_loss += fwd.loss;
        }
        curve.push(EpochStats {
            epoch,
            mean_loss: epoch_loss / dataset.len() as f64,
            lr_last,
        });
    }
    Ok(TrainOutcome { params, curve })
}
