//! Streaming inference: cutoffs come from the accumulated predicted
//! durations, and the recurrent encoder only ever consumes frames up to the
//! current cutoff.

use super::forward::fuse_forward_traced;
use super::math;
use super::{ModelError, ModelParameters};
use crate::align::{self, StreamClock};
use crate::features::{ListenerFeatureStream, ProsodyPrediction};

/// Predictions plus the causal cutoff each phoneme was conditioned on.
#[derive(Debug, Clone, PartialEq)]
pub struct StreamingInference {
    pub predictions: Vec<ProsodyPrediction>,
    pub cutoffs: Vec<usize>,
}

/// Incrementally advanced LSTM state (one (h, c) pair per layer).
struct LstmCursor {
    h: Vec<Vec<f64>>,
    c: Vec<Vec<f64>>,
    consumed: usize,
}

impl LstmCursor {
    fn new(params: &ModelParameters) -> Self {
        let hidden = params.config.lstm_hidden;
        Self {
            h: vec![vec![0.0; hidden]; params.config.lstm_layers],
            c: vec![vec![0.0; hidden]; params.config.lstm_layers],
            consumed: 0,
        }
    }

    /// Feed frames until `upto` frames (1-based count) have been consumed.
    fn advance(
        &mut self,
        params: &ModelParameters,
        frames: &[Vec<f64>],
        upto: usize,
    ) -> Result<(), ModelError> {
        let cfg = &params.config;
        let hidden = cfg.lstm_hidden;
        while self.consumed < upto {
            let frame = &frames[self.consumed];
            if frame.len() != cfg.listener_dim {
                return Err(ModelError::DimMismatch {
                    what: "listener frame",
                    want: cfg.listener_dim,
                    got: frame.len(),
                });
            }
            let mut input = frame.clone();
            for (l, layer) in params.lstm.iter().enumerate() {
                let mut pre = layer.w_x.matvec(&input);
                let rec = layer.w_h.matvec(&self.h[l]);
                for ((p, r), b) in pre.iter_mut().zip(&rec).zip(&layer.b) {
                    *p += r + b;
                }
                let mut h = vec![0.0; hidden];
                for j in 0..hidden {
                    let gi = math::sigmoid(pre[j]);
                    let gf = math::sigmoid(pre[hidden + j]);
                    let gg = pre[2 * hidden + j].tanh();
                    let go = math::sigmoid(pre[3 * hidden + j]);
                    self.c[l][j] = gf * self.c[l][j] + gi * gg;
                    h[j] = go * self.c[l][j].tanh();
                }
                self.h[l] = h.clone();
                input = h;
            }
            self.consumed += 1;
        }
        Ok(())
    }
}

/// Run the sequential inference loop. Phoneme `i`'s cutoff is derived from
/// the predicted durations of phonemes `0..i`; a cutoff beyond the stream is
/// clamped to the last available frame. Each prediction is a pure function
/// of listener frames `1..=a_i`.
pub fn infer_streaming(
    params: &ModelParameters,
    phoneme_ids: &[usize],
    speaker_id: usize,
    speech_reprs: &[Vec<f64>],
    stream: &ListenerFeatureStream,
    clock: &StreamClock,
) -> Result<StreamingInference, ModelError> {
    if phoneme_ids.len() != speech_reprs.len() {
        return Err(ModelError::LengthMismatch {
            what: "phoneme/speech sequences",
            left: phoneme_ids.len(),
            right: speech_reprs.len(),
        });
    }

    let hidden = params.config.lstm_hidden;
    let mut cursor = LstmCursor::new(params);
    let mut predictions = Vec::with_capacity(phoneme_ids.len());
    let mut cutoffs = Vec::with_capacity(phoneme_ids.len());
    let mut elapsed_s = 0.0f64;

    for (&pid, speech) in phoneme_ids.iter().zip(speech_reprs) {
        let a_hat = align::start_frame(elapsed_s, clock.tau_s);
        let cutoff = align::causal_cutoff(a_hat, clock.phi).min(stream.frame_count());
        cursor.advance(params, &stream.frames, cutoff)?;
        let state = if cutoff == 0 {
            vec![0.0; hidden]
        } else {
            cursor.h.last().expect("at least one layer").clone()
        };
        let trace = fuse_forward_traced(params, speaker_id, speech, pid, &state)?;
        let [log_pitch, log_energy, log_duration] = trace.prediction;
        predictions.push(ProsodyPrediction {
            log_pitch,
            pitch_mask: true,
            log_energy,
            log_duration,
        });
        cutoffs.push(cutoff);
        // Predicted duration is ln(ms); the stream clock runs in seconds.
        elapsed_s += log_duration.exp() / 1000.0;
    }
    Ok(StreamingInference {
        predictions,
        cutoffs,
    })
}
