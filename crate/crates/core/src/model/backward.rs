//! Exact reverse-mode gradients of the prosody loss.
//!
//! Mirrors forward.rs step by step; every rule here is pinned by the
//! finite-difference checks in the tests and the acceptance suite.

use super::forward::{
    forward_utterance, prosody_loss_grad, BlockTrace, FusionTrace, LstmTrace, UtteranceForward,
};
use super::math::{self, gelu_grad, layer_norm_backward, softmax_backward};
use super::train::Utterance;
use super::{Block, ModelError, ModelParameters};

/// Loss and parameter gradients for one utterance.
pub fn utterance_gradients(
    params: &ModelParameters,
    utt: &Utterance,
    visual_blind: bool,
) -> Result<(f64, ModelParameters), ModelError> {
    let fwd = forward_utterance(params, utt, visual_blind)?;
    let mut grads = params.zeros_like();
    accumulate_gradients(params, utt, &fwd, visual_blind, &mut grads);
    Ok((fwd.loss, grads))
}

pub(crate) fn accumulate_gradients(
    params: &ModelParameters,
    utt: &Utterance,
    fwd: &UtteranceForward,
    visual_blind: bool,
    grads: &mut ModelParameters,
) {
    let dpreds = prosody_loss_grad(&fwd.predictions, &utt.targets);

    // Gradient flowing into the top-layer hidden states, scattered at the
    // cutoff positions.
    let hidden = params.config.lstm_hidden;
    let mut dh_top = vec![vec![0.0; hidden]; utt.listener_frames.len()];

    for (i, trace) in fwd.fusions.iter().enumerate() {
        let dh_i = fusion_backward(
            params,
            trace,
            &dpreds[i],
            utt.speaker,
            utt.phoneme_ids[i],
            &utt.speech_reprs[i],
            &fwd.listener_states[i],
            grads,
        );
        if !visual_blind {
            let cutoff = utt.cutoffs[i];
            if cutoff > 0 {
                math::add_scaled(&mut dh_top[cutoff - 1], &dh_i, 1.0);
            }
        }
    }

    if !visual_blind {
        if let Some(lstm_trace) = &fwd.lstm {
            lstm_backward(params, lstm_trace, &utt.listener_frames, dh_top, grads);
        }
    }
}

/// Backward through head, attention stack and input tokens for one phoneme.
/// Returns the gradient on the listener state h_{a_i}.
#[allow(clippy::too_many_arguments)]
fn fusion_backward(
    params: &ModelParameters,
    trace: &FusionTrace,
    dpred: &[f64; 3],
    speaker_id: usize,
    phoneme_id: usize,
    speech: &[f64],
    listener_state: &[f64],
    grads: &mut ModelParameters,
) -> Vec<f64> {
    let d = params.config.d_model;
    let n = trace.tokens0.len();

    // Head reads token 0 of the final sequence.
    grads.head.w.add_outer(dpred, &trace.final_tokens[0]);
    math::add_scaled(&mut grads.head.b, dpred, 1.0);
    let mut dx = vec![vec![0.0; d]; n];
    params.head.w.add_t_matvec(dpred, &mut dx[0]);

    for k in (0..params.blocks.len()).rev() {
        dx = block_backward(&params.blocks[k], &mut grads.blocks[k], &trace.blocks[k], dx);
    }

    // Input tokens: fusion token, speaker row, tanh-projected speech,
    // phoneme row, tanh-projected listener state.
    math::add_scaled(&mut grads.fusion_token, &dx[0], 1.0);
    math::add_scaled(grads.speaker_embed.row_mut(speaker_id), &dx[1], 1.0);

    let dpre_s: Vec<f64> = dx[2]
        .iter()
        .zip(&trace.tokens0[2])
        .map(|(g, t)| g * (1.0 - t * t))
        .collect();
    grads.proj_speech.w.add_outer(&dpre_s, speech);
    math::add_scaled(&mut grads.proj_speech.b, &dpre_s, 1.0);

    math::add_scaled(grads.phoneme_embed.row_mut(phoneme_id), &dx[3], 1.0);

    let dpre_h: Vec<f64> = dx[4]
        .iter()
        .zip(&trace.tokens0[4])
        .map(|(g, t)| g * (1.0 - t * t))
        .collect();
    grads.proj_listener.w.add_outer(&dpre_h, listener_state);
    math::add_scaled(&mut grads.proj_listener.b, &dpre_h, 1.0);
    let mut dh = vec![0.0; listener_state.len()];
    params.proj_listener.w.add_t_matvec(&dpre_h, &mut dh);
    dh
}

fn block_backward(
    block: &Block,
    gblock: &mut Block,
    trace: &BlockTrace,
    dx_out: Vec<Vec<f64>>,
) -> Vec<Vec<f64>> {
    let n = trace.x_in.len();
    let d = block.attn_q.w.cols;
    let heads = trace.probs.len();
    let dh = d / heads;
    let scale = 1.0 / (dh as f64).sqrt();

    // x_out = y + ffn_out(gelu(ffn_in(LN_ffn(y))))
    let mut dy = dx_out.clone();
    for t in 0..n {
        let df = &dx_out[t];
        gblock.ffn_out.w.add_outer(df, &trace.ffn_act[t]);
        math::add_scaled(&mut gblock.ffn_out.b, df, 1.0);
        let mut dact = vec![0.0; trace.ffn_act[t].len()];
        block.ffn_out.w.add_t_matvec(df, &mut dact);
        let dz: Vec<f64> = dact
            .iter()
            .zip(&trace.ffn_pre[t])
            .map(|(g, &z)| g * gelu_grad(z))
            .collect();
        let normed: Vec<f64> = trace.ln_ffn.u[t]
            .iter()
            .zip(&block.ln_ffn.gain)
            .zip(&block.ln_ffn.bias)
            .map(|((u, g), b)| u * g + b)
            .collect();
        gblock.ffn_in.w.add_outer(&dz, &normed);
        math::add_scaled(&mut gblock.ffn_in.b, &dz, 1.0);
        let mut dnormed = vec![0.0; d];
        block.ffn_in.w.add_t_matvec(&dz, &mut dnormed);
        let dyt = layer_norm_backward(
            &dnormed,
            &trace.ln_ffn.u[t],
            trace.ln_ffn.rstd[t],
            &block.ln_ffn.gain,
            &mut gblock.ln_ffn.gain,
            &mut gblock.ln_ffn.bias,
        );
        math::add_scaled(&mut dy[t], &dyt, 1.0);
    }

    // y = x_in + attn_o(ctx)
    let mut dx_in = dy.clone();
    let mut dctx = vec![vec![0.0; d]; n];
    for t in 0..n {
        gblock.attn_o.w.add_outer(&dy[t], &trace.ctx[t]);
        math::add_scaled(&mut gblock.attn_o.b, &dy[t], 1.0);
        block.attn_o.w.add_t_matvec(&dy[t], &mut dctx[t]);
    }

    let mut dq = vec![vec![0.0; d]; n];
    let mut dk = vec![vec![0.0; d]; n];
    let mut dv = vec![vec![0.0; d]; n];
    let mut dprobs = vec![0.0; n];
    let mut dscores = vec![0.0; n];
    for h in 0..heads {
        let lo = h * dh;
        let hi = lo + dh;
        for i in 0..n {
            for (j, dpj) in dprobs.iter_mut().enumerate() {
                *dpj = math::dot(&dctx[i][lo..hi], &trace.v[j][lo..hi]);
            }
            for j in 0..n {
                math::add_scaled(&mut dv[j][lo..hi], &dctx[i][lo..hi], trace.probs[h][i][j]);
            }
            softmax_backward(&trace.probs[h][i], &dprobs, &mut dscores);
            for j in 0..n {
                let ds = dscores[j] * scale;
                math::add_scaled(&mut dq[i][lo..hi], &trace.k[j][lo..hi], ds);
                math::add_scaled(&mut dk[j][lo..hi], &trace.q[i][lo..hi], ds);
            }
        }
    }

    for t in 0..n {
        let normed: Vec<f64> = trace.ln_attn.u[t]
            .iter()
            .zip(&block.ln_attn.gain)
            .zip(&block.ln_attn.bias)
            .map(|((u, g), b)| u * g + b)
            .collect();
        let mut dnormed = vec![0.0; d];
        for (affine, gaffine, grad) in [
            (&block.attn_q, &mut gblock.attn_q, &dq[t]),
            (&block.attn_k, &mut gblock.attn_k, &dk[t]),
            (&block.attn_v, &mut gblock.attn_v, &dv[t]),
        ] {
            gaffine.w.add_outer(grad, &normed);
            math::add_scaled(&mut gaffine.b, grad, 1.0);
            affine.w.add_t_matvec(grad, &mut dnormed);
        }
        let dxt = layer_norm_backward(
            &dnormed,
            &trace.ln_attn.u[t],
            trace.ln_attn.rstd[t],
            &block.ln_attn.gain,
            &mut gblock.ln_attn.gain,
            &mut gblock.ln_attn.bias,
        );
        math::add_scaled(&mut dx_in[t], &dxt, 1.0);
    }
    dx_in
}

/// Backpropagation through time over all LSTM layers.
/// `dh_ext_top[t]` is the gradient scattered onto the top hidden state at t.
fn lstm_backward(
    params: &ModelParameters,
    trace: &LstmTrace,
    frames: &[Vec<f64>],
    dh_ext_top: Vec<Vec<f64>>,
    grads: &mut ModelParameters,
) {
    let hidden = params.config.lstm_hidden;
    let steps = frames.len();
    if steps == 0 {
        return;
    }
    let zeros = vec![0.0; hidden];

    let mut dh_ext = dh_ext_top;
    for l in (0..params.lstm.len()).rev() {
        let layer = &params.lstm[l];
        let layer_trace = &trace.layers[l];
        let in_dim = layer.w_x.cols;
        let mut dx_all = vec![vec![0.0; in_dim]; steps];
        let mut dh_next = vec![0.0; hidden];
        let mut dc_next = vec![0.0; hidden];
        let mut da = vec![0.0; 4 * hidden];

        for t in (0..steps).rev() {
            let gates = &layer_trace.gates[t];
            let tanh_c = &layer_trace.tanh_c[t];
            let c_prev = if t > 0 { &layer_trace.c[t - 1] } else { &zeros };
            let h_prev = if t > 0 { &layer_trace.h[t - 1] } else { &zeros };
            let x_t: &[f64] = if l == 0 {
                &frames[t]
            } else {
                &trace.layers[l - 1].h[t]
            };

            for j in 0..hidden {
                let dh = dh_ext[t][j] + dh_next[j];
                let (gi, gf, gg, go) = (
                    gates[j],
                    gates[hidden + j],
                    gates[2 * hidden + j],
                    gates[3 * hidden + j],
                );
                let do_ = dh * tanh_c[j];
                let dc = dc_next[j] + dh * go * (1.0 - tanh_c[j] * tanh_c[j]);
                let di = dc * gg;
                let dg = dc * gi;
                let df = dc * c_prev[j];
                dc_next[j] = dc * gf;
                da[j] = di * gi * (1.0 - gi);
                da[hidden + j] = df * gf * (1.0 - gf);
                da[2 * hidden + j] = dg * (1.0 - gg * gg);
                da[3 * hidden + j] = do_ * go * (1.0 - go);
            }
            let glayer = &mut grads.lstm[l];
            glayer.w_x.add_outer(&da, x_t);
            glayer.w_h.add_outer(&da, h_prev);
            math::add_scaled(&mut glayer.b, &da, 1.0);

            dh_next.fill(0.0);
            layer.w_h.add_t_matvec(&da, &mut dh_next);
            layer.w_x.add_t_matvec(&da, &mut dx_all[t]);
        }
        dh_ext = dx_all;
    }
}

/// Loss as a pure function of the parameters; the probe the
/// finite-difference checks differentiate numerically.
pub fn utterance_loss(
    params: &ModelParameters,
    utt: &Utterance,
    visual_blind: bool,
) -> Result<f64, ModelError> {
    Ok(forward_utterance(params, utt, visual_blind)?.loss)
}
