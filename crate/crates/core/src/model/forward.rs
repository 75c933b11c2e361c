//! Forward passes with the intermediate caches the backward pass needs.

use super::math::{self, layer_norm, softmax_in_place};
use super::train::Utterance;
use super::{ModelError, ModelParameters};
use crate::features::ProsodyTarget;

/// Tokens per fused phoneme: fusion, speaker, speech, phoneme, listener.
pub(crate) const N_TOKENS: usize = 5;

/// Per-layer LSTM activations kept for backpropagation through time.
pub(crate) struct LstmLayerTrace {
    /// Post-activation gates (input, forget, cell, output) concatenated, per step.
    pub gates: Vec<Vec<f64>>,
    pub c: Vec<Vec<f64>>,
    pub h: Vec<Vec<f64>>,
    pub tanh_c: Vec<Vec<f64>>,
}

pub(crate) struct LstmTrace {
    pub layers: Vec<LstmLayerTrace>,
}

impl LstmTrace {
    pub fn top_hidden(&self) -> &[Vec<f64>] {
        &self.layers.last().expect("at least one lstm layer").h
    }
}

pub(crate) fn lstm_forward(
    params: &ModelParameters,
    frames: &[Vec<f64>],
) -> Result<LstmTrace, ModelError> {
    let cfg = &params.config;
    let hidden = cfg.lstm_hidden;
    for f in frames {
        if f.len() != cfg.listener_dim {
            return Err(ModelError::DimMismatch {
                what: "listener frame",
                want: cfg.listener_dim,
                got: f.len(),
            });
        }
        if let Some(bad) = f.iter().find(|v| !v.is_finite()) {
            return Err(ModelError::BadConfig(format!("non-finite listener value {bad}")));
        }
    }

    let mut layers: Vec<LstmLayerTrace> = Vec::with_capacity(cfg.lstm_layers);
    for (l, layer) in params.lstm.iter().enumerate() {
        let mut trace = LstmLayerTrace {
            gates: Vec::with_capacity(frames.len()),
            c: Vec::with_capacity(frames.len()),
            h: Vec::with_capacity(frames.len()),
            tanh_c: Vec::with_capacity(frames.len()),
        };
        let mut h_prev = vec![0.0; hidden];
        let mut c_prev = vec![0.0; hidden];
        for t in 0..frames.len() {
            let x: &[f64] = if l == 0 {
                &frames[t]
            } else {
                &layers[l - 1].h[t]
            };
            let mut pre = layer.w_x.matvec(x);
            let rec = layer.w_h.matvec(&h_prev);
            for ((p, r), b) in pre.iter_mut().zip(&rec).zip(&layer.b) {
                *p += r + b;
            }
            // Gate order: input, forget, cell candidate, output.
            let mut gates = vec![0.0; 4 * hidden];
            for j in 0..hidden {
                gates[j] = math::sigmoid(pre[j]);
                gates[hidden + j] = math::sigmoid(pre[hidden + j]);
                gates[2 * hidden + j] = pre[2 * hidden + j].tanh();
                gates[3 * hidden + j] = math::sigmoid(pre[3 * hidden + j]);
            }
            let mut c = vec![0.0; hidden];
            let mut tanh_c = vec![0.0; hidden];
            let mut h = vec![0.0; hidden];
            for j in 0..hidden {
                c[j] = gates[hidden + j] * c_prev[j] + gates[j] * gates[2 * hidden + j];
                tanh_c[j] = c[j].tanh();
                h[j] = gates[3 * hidden + j] * tanh_c[j];
            }
            h_prev.clone_from(&h);
            c_prev.clone_from(&c);
            trace.gates.push(gates);
            trace.c.push(c);
            trace.h.push(h);
            trace.tanh_c.push(tanh_c);
        }
        layers.push(trace);
    }
    Ok(LstmTrace { layers })
}

/// Encode a listener stream into its causal hidden-state sequence (top
/// layer). `h[t]` depends only on frames `0..=t`.
pub fn lstm_encode(
    params: &ModelParameters,
    frames: &[Vec<f64>],
) -> Result<Vec<Vec<f64>>, ModelError> {
    Ok(lstm_forward(params, frames)?
        .layers
        .pop()
        .expect("at least one lstm layer")
        .h)
}

/// Pick `h[a_i]` per phoneme; cutoff 0 is the empty-history zero state.
/// Cutoffs are 1-based frame indices.
pub fn gather_listener_states(
    hidden: &[Vec<f64>],
    cutoffs: &[usize],
    hidden_dim: usize,
) -> Result<Vec<Vec<f64>>, ModelError> {
    cutoffs
        .iter()
        .map(|&a| {
            if a == 0 {
                Ok(vec![0.0; hidden_dim])
            } else if a <= hidden.len() {
                Ok(hidden[a - 1].clone())
            } else {
                Err(ModelError::CutoffOutOfRange {
                    cutoff: a,
                    frames: hidden.len(),
                })
            }
        })
        .collect()
}

pub(crate) struct LayerNormTrace {
    pub u: Vec<Vec<f64>>, // normalized pre-gain, per token
    pub rstd: Vec<f64>,
}

pub(crate) struct BlockTrace {
    pub x_in: Vec<Vec<f64>>,
    pub ln_attn: LayerNormTrace,
    pub q: Vec<Vec<f64>>,
    pub k: Vec<Vec<f64>>,
    pub v: Vec<Vec<f64>>,
    /// probs[head][query][key]
    pub probs: Vec<Vec<Vec<f64>>>,
    /// Concatenated per-head context, pre output projection.
    pub ctx: Vec<Vec<f64>>,
    pub ln_ffn: LayerNormTrace,
    pub ffn_pre: Vec<Vec<f64>>,
    pub ffn_act: Vec<Vec<f64>>,
}

pub(crate) struct FusionTrace {
    pub tokens0: Vec<Vec<f64>>,
    pub blocks: Vec<BlockTrace>,
    pub final_tokens: Vec<Vec<f64>>,
    pub prediction: [f64; 3],
}

/// Build the 5-token input sequence for one phoneme.
fn fusion_tokens(
    params: &ModelParameters,
    speaker_id: usize,
    speech: &[f64],
    phoneme_id: usize,
    listener_state: &[f64],
) -> Result<Vec<Vec<f64>>, ModelError> {
    let cfg = &params.config;
    if speaker_id >= cfg.speaker_count {
        return Err(ModelError::UnknownSpeaker {
            id: speaker_id,
            count: cfg.speaker_count,
        });
    }
    if phoneme_id >= cfg.phoneme_vocab {
        return Err(ModelError::UnknownPhoneme {
            id: phoneme_id,
            count: cfg.phoneme_vocab,
        });
    }
    if speech.len() != cfg.speech_dim {
        return Err(ModelError::DimMismatch {
            what: "speech representation",
            want: cfg.speech_dim,
            got: speech.len(),
        });
    }
    if listener_state.len() != cfg.lstm_hidden {
        return Err(ModelError::DimMismatch {
            what: "listener state",
            want: cfg.lstm_hidden,
            got: listener_state.len(),
        });
    }
    let mut speech_tok = params.proj_speech.apply(speech);
    for v in speech_tok.iter_mut() {
        *v = v.tanh();
    }
    let mut listener_tok = params.proj_listener.apply(listener_state);
    for v in listener_tok.iter_mut() {
        *v = v.tanh();
    }
    Ok(vec![
        params.fusion_token.clone(),
        params.speaker_embed.row(speaker_id).to_vec(),
        speech_tok,
        params.phoneme_embed.row(phoneme_id).to_vec(),
        listener_tok,
    ])
}

/// Run the pre-LN attention stack over a token sequence and read the head
/// off token 0.
pub(crate) fn attention_stack(
    params: &ModelParameters,
    tokens0: Vec<Vec<f64>>,
) -> FusionTrace {
    let cfg = &params.config;
    let d = cfg.d_model;
    let heads = cfg.heads;
    let dh = cfg.head_dim();
    let scale = 1.0 / (dh as f64).sqrt();
    let n = tokens0.len();

    let mut x = tokens0.clone();
    let mut blocks = Vec::with_capacity(params.blocks.len());
    for block in &params.blocks {
        let x_in = x.clone();
        // Pre-LN, attention, residual.
        let mut u = Vec::with_capacity(n);
        let mut rstd = Vec::with_capacity(n);
        let mut normed = Vec::with_capacity(n);
        for tok in &x_in {
            let (out, uu, _, r) = layer_norm(tok, &block.ln_attn.gain, &block.ln_attn.bias);
            normed.push(out);
            u.push(uu);
            rstd.push(r);
        }
        let q: Vec<Vec<f64>> = normed.iter().map(|t| block.attn_q.apply(t)).collect();
        let k: Vec<Vec<f64>> = normed.iter().map(|t| block.attn_k.apply(t)).collect();
        let v: Vec<Vec<f64>> = normed.iter().map(|t| block.attn_v.apply(t)).collect();

        let mut probs = vec![vec![vec![0.0; n]; n]; heads];
        let mut ctx = vec![vec![0.0; d]; n];
        for h in 0..heads {
            let lo = h * dh;
            let hi = lo + dh;
            for i in 0..n {
                let row = &mut probs[h][i];
                for (j, kv) in k.iter().enumerate() {
                    row[j] = math::dot(&q[i][lo..hi], &kv[lo..hi]) * scale;
                }
                softmax_in_place(row);
                for (j, vv) in v.iter().enumerate() {
                    math::add_scaled(&mut ctx[i][lo..hi], &vv[lo..hi], row[j]);
                }
            }
        }
        let mut y = x_in.clone();
        for (yi, c) in y.iter_mut().zip(&ctx) {
            let attn = block.attn_o.apply(c);
            for (a, b) in yi.iter_mut().zip(&attn) {
                *a += b;
            }
        }

        // Pre-LN, feed-forward, residual.
        let mut u2 = Vec::with_capacity(n);
        let mut rstd2 = Vec::with_capacity(n);
        let mut normed2 = Vec::with_capacity(n);
        for tok in &y {
            let (out, uu, _, r) = layer_norm(tok, &block.ln_ffn.gain, &block.ln_ffn.bias);
            normed2.push(out);
            u2.push(uu);
            rstd2.push(r);
        }
        let ffn_pre: Vec<Vec<f64>> = normed2.iter().map(|t| block.ffn_in.apply(t)).collect();
        let ffn_act: Vec<Vec<f64>> = ffn_pre
            .iter()
            .map(|z| z.iter().map(|&zv| math::gelu(zv)).collect())
            .collect();
        let mut x_next = y.clone();
        for (xi, a) in x_next.iter_mut().zip(&ffn_act) {
            let f = block.ffn_out.apply(a);
            for (av, bv) in xi.iter_mut().zip(&f) {
                *av += bv;
            }
        }

        blocks.push(BlockTrace {
            x_in,
            ln_attn: LayerNormTrace { u, rstd },
            q,
            k,
            v,
            probs,
            ctx,
            ln_ffn: LayerNormTrace { u: u2, rstd: rstd2 },
            ffn_pre,
            ffn_act,
        });
        x = x_next;
    }

    let pred = params.head.apply(&x[0]);
    FusionTrace {
        tokens0,
        blocks,
        final_tokens: x,
        prediction: [pred[0], pred[1], pred[2]],
    }
}

pub(crate) fn fuse_forward_traced(
    params: &ModelParameters,
    speaker_id: usize,
    speech: &[f64],
    phoneme_id: usize,
    listener_state: &[f64],
) -> Result<FusionTrace, ModelError> {
    let tokens = fusion_tokens(params, speaker_id, speech, phoneme_id, listener_state)?;
    debug_assert_eq!(tokens.len(), N_TOKENS);
    Ok(attention_stack(params, tokens))
}

/// Fuse one phoneme's modalities and predict its prosody. Returns the final
/// fusion-token state and (log pitch, log energy, log duration).
pub fn fuse_forward(
    params: &ModelParameters,
    speaker_id: usize,
    speech: &[f64],
    phoneme_id: usize,
    listener_state: &[f64],
) -> Result<(Vec<f64>, [f64; 3]), ModelError> {
    let trace = fuse_forward_traced(params, speaker_id, speech, phoneme_id, listener_state)?;
    Ok((trace.final_tokens[0].clone(), trace.prediction))
}

/// Masked L2 objective: squared error summed over (pitch where masked,
/// energy, duration), divided by the number of counted scalar terms.
pub fn prosody_loss(
    predictions: &[[f64; 3]],
    targets: &[ProsodyTarget],
) -> Result<f64, ModelError> {
    if predictions.len() != targets.len() {
        return Err(ModelError::LengthMismatch {
            what: "prediction/target",
            left: predictions.len(),
            right: targets.len(),
        });
    }
    let mut sum = 0.0;
    let mut terms = 0usize;
    for (p, t) in predictions.iter().zip(targets) {
        if t.pitch_mask {
            sum += (p[0] - t.log_pitch).powi(2);
            terms += 1;
        }
        sum += (p[1] - t.log_energy).powi(2);
        sum += (p[2] - t.log_duration).powi(2);
        terms += 2;
    }
    if terms == 0 {
        return Ok(0.0);
    }
    Ok(sum / terms as f64)
}

/// d(loss)/d(predictions) for [`prosody_loss`].
pub(crate) fn prosody_loss_grad(
    predictions: &[[f64; 3]],
    targets: &[ProsodyTarget],
) -> Vec<[f64; 3]> {
    let terms: usize = targets.iter().map(|t| 2 + t.pitch_mask as usize).sum();
    if terms == 0 {
        return vec![[0.0; 3]; predictions.len()];
    }
    let norm = 2.0 / terms as f64;
    predictions
        .iter()
        .zip(targets)
        .map(|(p, t)| {
            [
                if t.pitch_mask { norm * (p[0] - t.log_pitch) } else { 0.0 },
                norm * (p[1] - t.log_energy),
                norm * (p[2] - t.log_duration),
            ]
        })
        .collect()
}

/// Forward state for one utterance in teacher-cutoff (training) mode.
pub struct UtteranceForward {
    pub predictions: Vec<[f64; 3]>,
    pub loss: f64,
    pub(crate) lstm: Option<LstmTrace>,
    pub(crate) listener_states: Vec<Vec<f64>>,
    pub(crate) fusions: Vec<FusionTrace>,
}

/// Run the full teacher-aligned forward pass over one utterance.
/// With `visual_blind` all listener states are zero and the stream is never
/// read.
pub fn forward_utterance(
    params: &ModelParameters,
    utt: &Utterance,
    visual_blind: bool,
) -> Result<UtteranceForward, ModelError> {
    utt.validate(&params.config)?;
    let (lstm, listener_states) = if visual_blind {
        (
            None,
            vec![vec![0.0; params.config.lstm_hidden]; utt.phoneme_ids.len()],
        )
    } else {
        let trace = lstm_forward(params, &utt.listener_frames)?;
        let states = gather_listener_states(
            trace.top_hidden(),
            &utt.cutoffs,
            params.config.lstm_hidden,
        )?;
        (Some(trace), states)
    };

    let mut fusions = Vec::with_capacity(utt.phoneme_ids.len());
    let mut predictions = Vec::with_capacity(utt.phoneme_ids.len());
    for (i, (&pid, state)) in utt.phoneme_ids.iter().zip(&listener_states).enumerate() {
        let trace =
            fuse_forward_traced(params, utt.speaker, &utt.speech_reprs[i], pid, state)?;
        predictions.push(trace.prediction);
        fusions.push(trace);
    }
    let loss = prosody_loss(&predictions, &utt.targets)?;
    Ok(UtteranceForward {
        predictions,
        loss,
        lstm,
        listener_states,
        fusions,
    })
}
