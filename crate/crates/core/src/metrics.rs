//! Objective evaluation: MCD13 with DTW alignment, the F0-track error rates
//! GPE / VDE / FFE, and phoneme-level prosody MAE with the 50 ms duration
//! gate.
//!
//! All metrics are zero on self-comparison. Error rates are reported as
//! percentages together with the counts that produced them, so empty
//! denominators stay visible instead of turning into NaN.

use crate::dsp::{self, AudioBuffer, DspError, F0Track, SpectralConfig};
use crate::features::{ProsodyPrediction, ProsodyTarget};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Gate for pitch contributions to MAE: duration error must stay below this.
pub const DURATION_GATE_MS: f64 = 50.0;

#[derive(Debug, Error)]
pub enum MetricError {
    #[error("{what} length mismatch: {left} vs {right}")]
    LengthMismatch {
        what: &'static str,
        left: usize,
        right: usize,
    },
    #[error("hop mismatch: {left} ms vs {right} ms")]
    HopMismatch { left: f64, right: f64 },
    #[error("sample rate mismatch: {left} Hz vs {right} Hz")]
    SampleRateMismatch { left: u32, right: u32 },
    #[error("cost matrix is empty")]
    EmptyCostMatrix,
    #[error("cost matrix row {row} has {found} columns, expected {expected}")]
    RaggedCostMatrix {
        row: usize,
        found: usize,
        expected: usize,
    },
    #[error("non-finite cost at ({row}, {col})")]
    NonFiniteCost { row: usize, col: usize },
    #[error(transparent)]
    Dsp(#[from] DspError),
}

/// Relative-deviation threshold for a gross pitch error (default 20%).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct F0CompareConfig {
    pub rel_threshold: f64,
}

impl Default for F0CompareConfig {
    fn default() -> Self {
        Self { rel_threshold: 0.20 }
    }
}

/// An error rate with its numerator and denominator kept visible.
/// `denominator == 0` marks an empty comparison; `percent` is 0 then.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RatioMetric {
    pub percent: f64,
    pub errors: usize,
    pub denominator: usize,
}

impl RatioMetric {
    fn from_counts(errors: usize, denominator: usize) -> Self {
        let percent = if denominator == 0 {
            0.0
        } else {
            100.0 * errors as f64 / denominator as f64
        };
        Self {
            percent,
            errors,
            denominator,
        }
    }
}

/// Minimal-cost warping path over a cost matrix with steps
/// (1,0), (0,1), (1,1), anchored at both corners. Ties during backtracking
/// prefer (1,1), then (1,0).
pub fn dtw_align(costs: &[Vec<f64>]) -> Result<Vec<(usize, usize)>, MetricError> {
    let rows = costs.len();
    if rows == 0 || costs[0].is_empty() {
        return Err(MetricError::EmptyCostMatrix);
    }
    let cols = costs[0].len();
    for (row, r) in costs.iter().enumerate() {
        if r.len() != cols {
            return Err(MetricError::RaggedCostMatrix {
                row,
                found: r.len(),
                expected: cols,
            });
        }
        if let Some(col) = r.iter().position(|c| !c.is_finite()) {
            return Err(MetricError::NonFiniteCost { row, col });
        }
    }

    let mut acc = vec![vec![f64::INFINITY; cols]; rows];
    acc[0][0] = costs[0][0];
    for j in 1..cols {
        acc[0][j] = acc[0][j - 1] + costs[0][j];
    }
    for i in 1..rows {
        acc[i][0] = acc[i - 1][0] + costs[i][0];
        for j in 1..cols {
            let best = acc[i - 1][j - 1].min(acc[i - 1][j]).min(acc[i][j - 1]);
            acc[i][j] = best + costs[i][j];
        }
    }

    let mut path = vec![(rows - 1, cols - 1)];
    let (mut i, mut j) = (rows - 1, cols - 1);
    while i > 0 || j > 0 {
        let (ni, nj) = if i == 0 {
            (0, j - 1)
        } else if j == 0 {
            (i - 1, 0)
        } else {
            let diag = acc[i - 1][j - 1];
            let up = acc[i - 1][j];
            let left = acc[i][j - 1];
            if diag <= up && diag <= left {
                (i - 1, j - 1)
            } else if up <= left {
                (i - 1, j)
            } else {
                (i, j - 1)
            }
        };
        path.push((ni, nj));
        i = ni;
        j = nj;
    }
    path.reverse();
    Ok(path)
}

/// Mel-cepstral distortion from precomputed `c_1..c_13` frames.
///
/// The DTW cost is the Euclidean cepstral distance; the reported value is
/// `(10/ln 10) * mean over the path of sqrt(2 * sum of squared diffs)`.
pub fn mcd13_from_cepstra(
    ref_cep: &[Vec<f64>],
    est_cep: &[Vec<f64>],
) -> Result<f64, MetricError> {
    if ref_cep.is_empty() || est_cep.is_empty() {
        return Err(MetricError::EmptyCostMatrix);
    }
    let costs: Vec<Vec<f64>> = ref_cep
        .iter()
        .map(|a| {
            est_cep
                .iter()
                .map(|b| {
                    a.iter()
                        .zip(b)
                        .map(|(x, y)| (x - y) * (x - y))
                        .sum::<f64>()
                        .sqrt()
                })
                .collect()
        })
        .collect();
    let path = dtw_align(&costs)?;
    let scale = 10.0 / std::f64::consts::LN_10;
    let total: f64 = path
        .iter()
        .map(|&(i, j)| (2.0f64).sqrt() * costs[i][j])
        .sum();
    Ok(scale * total / path.len() as f64)
}

/// MCD13 between two audio buffers using the frozen 40-band cepstral front
/// end and DTW frame alignment.
pub fn mcd13(
    reference: &AudioBuffer,
    estimate: &AudioBuffer,
    cfg: &SpectralConfig,
) -> Result<f64, MetricError> {
    if reference.sample_rate != estimate.sample_rate {
        return Err(MetricError::SampleRateMismatch {
            left: reference.sample_rate,
            right: estimate.sample_rate,
        });
    }
    let ref_cep = dsp::mel_cepstra(reference, cfg)?;
    let est_cep = dsp::mel_cepstra(estimate, cfg)?;
    mcd13_from_cepstra(&ref_cep, &est_cep)
}

fn check_tracks(reference: &F0Track, estimate: &F0Track) -> Result<(), MetricError> {
    if reference.len() != estimate.len() {
        return Err(MetricError::LengthMismatch {
            what: "f0 track",
            left: reference.len(),
            right: estimate.len(),
        });
    }
    if reference.hop_ms != estimate.hop_ms {
        return Err(MetricError::HopMismatch {
            left: reference.hop_ms,
            right: estimate.hop_ms,
        });
    }
    Ok(())
}

fn is_gross(ref_hz: f64, est_hz: f64, cfg: &F0CompareConfig) -> bool {
    (est_hz - ref_hz).abs() > cfg.rel_threshold * ref_hz
}

/// Gross pitch error: share of both-voiced frames whose estimate deviates by
/// more than the relative threshold.
pub fn gpe(
    reference: &F0Track,
    estimate: &F0Track,
    cfg: &F0CompareConfig,
) -> Result<RatioMetric, MetricError> {
    check_tracks(reference, estimate)?;
    let mut both = 0usize;
    let mut gross = 0usize;
    for t in 0..reference.len() {
        if reference.voiced[t] && estimate.voiced[t] {
            both += 1;
            if is_gross(reference.f0_hz[t], estimate.f0_hz[t], cfg) {
                gross += 1;
            }
        }
    }
    Ok(RatioMetric::from_counts(gross, both))
}

/// Voicing decision error: share of all frames whose voicing flags disagree.
pub fn vde(reference: &F0Track, estimate: &F0Track) -> Result<RatioMetric, MetricError> {
    check_tracks(reference, estimate)?;
    let mismatches = reference
        .voiced
        .iter()
        .zip(&estimate.voiced)
        .filter(|(a, b)| a != b)
        .count();
    Ok(RatioMetric::from_counts(mismatches, reference.len()))
}

/// F0 frame error: voicing mismatches plus both-voiced gross errors, over all
/// frames.
pub fn ffe(
    reference: &F0Track,
    estimate: &F0Track,
    cfg: &F0CompareConfig,
) -> Result<RatioMetric, MetricError> {
    check_tracks(reference, estimate)?;
    let mut bad = 0usize;
    for t in 0..reference.len() {
        let (rv, ev) = (reference.voiced[t], estimate.voiced[t]);
        if rv != ev || (rv && ev && is_gross(reference.f0_hz[t], estimate.f0_hz[t], cfg)) {
            bad += 1;
        }
    }
    Ok(RatioMetric::from_counts(bad, reference.len()))
}

/// Phoneme-level MAE in linear units (Hz, energy, ms) with counts.
///
/// Duration MAE covers every phoneme. Pitch and energy contributions are
/// gated out when the duration error reaches [`DURATION_GATE_MS`]; pitch
/// additionally requires both voicing masks.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProsodyMae {
    pub pitch_hz: f64,
    pub energy: f64,
    pub duration_ms: f64,
    pub pitch_count: usize,
    pub energy_count: usize,
    pub duration_count: usize,
}

pub fn prosody_mae(
    reference: &[ProsodyTarget],
    estimate: &[ProsodyPrediction],
) -> Result<ProsodyMae, MetricError> {
    if reference.len() != estimate.len() {
        return Err(MetricError::LengthMismatch {
            what: "prosody sequence",
            left: reference.len(),
            right: estimate.len(),
        });
    }
    let mut acc = MaeAccumulator::default();
    for (r, e) in reference.iter().zip(estimate) {
        acc.push(r, e);
    }
    Ok(acc.finish())
}

/// Streaming accumulator so utterance-level sums reduce associatively.
#[derive(Debug, Default, Clone, Copy)]
pub struct MaeAccumulator {
    pitch_sum: f64,
    energy_sum: f64,
    duration_sum: f64,
    pitch_count: usize,
    energy_count: usize,
    duration_count: usize,
}

impl MaeAccumulator {
    pub fn push(&mut self, reference: &ProsodyTarget, estimate: &ProsodyPrediction) {
        let dur_err = (reference.duration_ms() - estimate.duration_ms()).abs();
        self.duration_sum += dur_err;
        self.duration_count += 1;
        if dur_err < DURATION_GATE_MS {
            self.energy_sum += (reference.energy() - estimate.energy()).abs();
            self.energy_count += 1;
            if reference.pitch_mask && estimate.pitch_mask {
                self.pitch_sum += (reference.pitch_hz() - estimate.pitch_hz()).abs();
                self.pitch_count += 1;
            }
        }
    }

    pub fn merge(&mut self, other: &MaeAccumulator) {
        self.pitch_sum += other.pitch_sum;
        self.energy_sum += other.energy_sum;
        self.duration_sum += other.duration_sum;
        self.pitch_count += other.pitch_count;
        self.energy_count += other.energy_count;
        self.duration_count += other.duration_count;
    }

    pub fn finish(&self) -> ProsodyMae {
        let mean = |sum: f64, count: usize| if count == 0 { 0.0 } else { sum / count as f64 };
        ProsodyMae {
            pitch_hz: mean(self.pitch_sum, self.pitch_count),
            energy: mean(self.energy_sum, self.energy_count),
            duration_ms: mean(self.duration_sum, self.duration_count),
            pitch_count: self.pitch_count,
            energy_count: self.energy_count,
            duration_count: self.duration_count,
        }
    }
}

/// One evaluated system, shaped like the objective-score tables.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub system: String,
    pub gpe: Option<RatioMetric>,
    pub vde: Option<RatioMetric>,
    pub ffe: Option<RatioMetric>,
    pub mcd13: Option<f64>,
    pub mae: ProsodyMae,
}

impl MetricReport {
    /// CSV header matching the report contract.
    pub fn csv_header() -> &'static str {
        "system,GPE,VDE,FFE,MCD13,MAE_pitch,MAE_energy,MAE_duration_ms"
    }

    pub fn csv_row(&self) -> String {
        let pct = |m: &Option<RatioMetric>| {
            m.map(|r| format!("{:.4}", r.percent)).unwrap_or_default()
        };
        format!(
            "{},{},{},{},{},{:.6},{:.6},{:.6}",
            self.system,
            pct(&self.gpe),
            pct(&self.vde),
            pct(&self.ffe),
            self.mcd13.map(|v| format!("{v:.4}")).unwrap_or_default(),
            self.mae.pitch_hz,
            self.mae.energy,
            self.mae.duration_ms
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn track(f0: &[f64]) -> F0Track {
        F0Track {
            voiced: f0.iter().map(|&f| f > 0.0).collect(),
            f0_hz: f0.to_vec(),
            hop_ms: 10.0,
        }
    }

    fn target(pitch_hz: f64, energy: f64, dur_ms: f64) -> ProsodyTarget {
        ProsodyTarget {
            log_pitch: if pitch_hz > 0.0 { pitch_hz.ln() } else { 0.0 },
            pitch_mask: pitch_hz > 0.0,
            log_energy: energy.ln(),
            log_duration: dur_ms.ln(),
        }
    }

    /// Every boundary-anchored path over the step set, by brute force.
    fn brute_force_min_path_cost(costs: &[Vec<f64>]) -> f64 {
        fn go(costs: &[Vec<f64>], i: usize, j: usize) -> f64 {
            let here = costs[i][j];
            if i == 0 && j == 0 {
                return here;
            }
            let mut best = f64::INFINITY;
            if i > 0 && j > 0 {
                best = best.min(go(costs, i - 1, j - 1));
            }
            if i > 0 {
                best = best.min(go(costs, i - 1, j));
            }
            if j > 0 {
                best = best.min(go(costs, i, j - 1));
            }
            here + best
        }
        go(costs, costs.len() - 1, costs[0].len() - 1)
    }

    fn path_cost(costs: &[Vec<f64>], path: &[(usize, usize)]) -> f64 {
        path.iter().map(|&(i, j)| costs[i][j]).sum()
    }

    #[test]
    fn dtw_prefers_cheap_diagonal() {
        let n = 5;
        let costs: Vec<Vec<f64>> = (0..n)
            .map(|i| (0..n).map(|j| if i == j { 0.0 } else { 10.0 }).collect())
            .collect();
        let path = dtw_align(&costs).unwrap();
        let expect: Vec<(usize, usize)> = (0..n).map(|i| (i, i)).collect();
        assert_eq!(path, expect);
    }

    #[test]
    fn dtw_single_row_walks_the_row() {
        let costs = vec![vec![1.0, 2.0, 3.0, 4.0]];
        let path = dtw_align(&costs).unwrap();
        assert_eq!(path, vec![(0, 0), (0, 1), (0, 2), (0, 3)]);
    }

    #[test]
    fn dtw_matches_exhaustive_minimum() {
        let mut state = 0xDEADBEEFu64;
        let mut next = || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            (state >> 11) as f64 / (1u64 << 53) as f64
        };
        for _ in 0..50 {
            let rows = 2 + (next() * 5.0) as usize;
            let cols = 2 + (next() * 6.0) as usize;
            let costs: Vec<Vec<f64>> =
                (0..rows).map(|_| (0..cols).map(|_| next()).collect()).collect();
            let path = dtw_align(&costs).unwrap();
            let got = path_cost(&costs, &path);
            let want = brute_force_min_path_cost(&costs);
            assert!((got - want).abs() < 1e-9, "{got} vs {want}");
        }
    }

    #[test]
    fn dtw_rejects_empty_matrix() {
        assert!(matches!(dtw_align(&[]), Err(MetricError::EmptyCostMatrix)));
    }

    #[test]
    fn mcd_identical_audio_is_zero() {
        let audio = crate::dsp::AudioBuffer::new(
            (0..8000)
                .map(|i| 0.4 * (2.0 * std::f64::consts::PI * 220.0 * i as f64 / 16000.0).sin())
                .collect(),
            16000,
        );
        let v = mcd13(&audio, &audio, &SpectralConfig::for_cepstra()).unwrap();
        assert_eq!(v, 0.0);
    }

    #[test]
    fn mcd_single_coefficient_offset_closed_form() {
        let ref_cep: Vec<Vec<f64>> = (0..20)
            .map(|t| (0..13).map(|d| ((t + d) as f64 * 0.37).sin()).collect())
            .collect();
        let est_cep: Vec<Vec<f64>> = ref_cep
            .iter()
            .map(|frame| {
                let mut f = frame.clone();
                f[4] += 1.0;
                f
            })
            .collect();
        let v = mcd13_from_cepstra(&ref_cep, &est_cep).unwrap();
        let closed_form = 10.0 / std::f64::consts::LN_10 * 2f64.sqrt();
        assert!((v - closed_form).abs() < 1e-9);
        assert!((v - 6.1421).abs() <= 1e-3, "{v}");
    }

    #[test]
    fn mcd_absorbs_frame_duplication() {
        let ref_cep: Vec<Vec<f64>> = (0..15)
            .map(|t| (0..13).map(|d| ((t * 13 + d) as f64 * 0.21).cos()).collect())
            .collect();
        let stretched: Vec<Vec<f64>> = ref_cep
            .iter()
            .flat_map(|f| [f.clone(), f.clone()])
            .collect();
        let v = mcd13_from_cepstra(&ref_cep, &stretched).unwrap();
        assert!(v <= 0.1, "{v}");
    }

    #[test]
    fn gpe_counts_only_both_voiced_frames() {
        let r = track(&[100.0, 100.0, 0.0, 100.0]);
        let e = track(&[100.0, 125.0, 0.0, 100.0]);
        let m = gpe(&r, &e, &F0CompareConfig::default()).unwrap();
        assert_eq!(m.denominator, 3);
        assert_eq!(m.errors, 1);
        assert!((m.percent - 100.0 / 3.0).abs() < 1e-9);
    }

    #[test]
    fn gpe_is_zero_below_threshold() {
        let r = track(&[100.0, 200.0, 300.0]);
        let e = track(&[119.0, 238.0, 357.0]);
        let m = gpe(&r, &e, &F0CompareConfig::default()).unwrap();
        assert_eq!(m.percent, 0.0);
    }

    #[test]
    fn gpe_flags_empty_denominator() {
        let r = track(&[0.0, 0.0]);
        let e = track(&[100.0, 0.0]);
        let m = gpe(&r, &e, &F0CompareConfig::default()).unwrap();
        assert_eq!(m.percent, 0.0);
        assert_eq!(m.denominator, 0);
    }

    #[test]
    fn vde_counts_voicing_mismatches() {
        let r = track(&[100.0, 100.0, 0.0, 0.0]);
        let e = track(&[100.0, 0.0, 0.0, 100.0]);
        let m = vde(&r, &e).unwrap();
        assert_eq!(m.percent, 50.0);
        let m0 = vde(&r, &r).unwrap();
        assert_eq!(m0.percent, 0.0);
    }

    #[test]
    fn vde_complementary_voicing_is_total() {
        let r = track(&[100.0, 0.0, 100.0]);
        let e = track(&[0.0, 100.0, 0.0]);
        assert_eq!(vde(&r, &e).unwrap().percent, 100.0);
    }

    #[test]
    fn ffe_unions_voicing_and_gross_errors() {
        let r = track(&[100.0, 100.0, 0.0, 100.0]);
        let e = track(&[100.0, 125.0, 0.0, 100.0]);
        let m = ffe(&r, &e, &F0CompareConfig::default()).unwrap();
        assert_eq!(m.percent, 25.0);
        assert_eq!(ffe(&r, &r, &F0CompareConfig::default()).unwrap().percent, 0.0);
    }

    #[test]
    fn metric_length_mismatch_is_an_error() {
        let r = track(&[100.0, 100.0]);
        let e = track(&[100.0]);
        assert!(gpe(&r, &e, &F0CompareConfig::default()).is_err());
        assert!(vde(&r, &e).is_err());
        assert!(ffe(&r, &e, &F0CompareConfig::default()).is_err());
    }

    #[test]
    fn mae_self_comparison_is_zero() {
        let seq = vec![target(220.0, 5.0, 100.0), target(0.0, 2.0, 80.0)];
        let m = prosody_mae(&seq, &seq).unwrap();
        assert_eq!((m.pitch_hz, m.energy, m.duration_ms), (0.0, 0.0, 0.0));
    }

    #[test]
    fn mae_example_with_gate_open() {
        let r = vec![target(220.0, 5.0, 100.0)];
        let e = vec![target(210.0, 5.0, 120.0)];
        let m = prosody_mae(&r, &e).unwrap();
        assert!((m.pitch_hz - 10.0).abs() < 1e-9);
        assert!(m.energy.abs() < 1e-9);
        assert!((m.duration_ms - 20.0).abs() < 1e-9);
        assert_eq!(m.pitch_count, 1);
    }

    #[test]
    fn mae_gate_excludes_pitch_and_energy() {
        let r = vec![target(220.0, 5.0, 100.0)];
        let e = vec![target(210.0, 6.0, 180.0)];
        let m = prosody_mae(&r, &e).unwrap();
        assert_eq!(m.pitch_count, 0);
        assert_eq!(m.energy_count, 0);
        assert_eq!(m.pitch_hz, 0.0);
        assert!((m.duration_ms - 80.0).abs() < 1e-9);
    }

    /// Independent per-frame classification used to cross-check the rates.
    fn frame_oracle(
        r: &F0Track,
        e: &F0Track,
        cfg: &F0CompareConfig,
    ) -> (RatioMetric, RatioMetric, RatioMetric) {
        let mut both = 0;
        let mut gross = 0;
        let mut vmis = 0;
        let mut union = 0;
        for t in 0..r.len() {
            match (r.voiced[t], e.voiced[t]) {
                (true, true) => {
                    both += 1;
                    if (e.f0_hz[t] - r.f0_hz[t]).abs() > cfg.rel_threshold * r.f0_hz[t] {
                        gross += 1;
                        union += 1;
                    }
                }
                (a, b) if a != b => {
                    vmis += 1;
                    union += 1;
                }
                _ => {}
            }
        }
        (
            RatioMetric::from_counts(gross, both),
            RatioMetric::from_counts(vmis, r.len()),
            RatioMetric::from_counts(union, r.len()),
        )
    }

    #[test]
    fn rates_match_frame_oracle_exhaustively_small() {
        let cfg = F0CompareConfig::default();
        for n in 1..=8usize {
            for rbits in 0..(1u32 << n) {
                for ebits in 0..(1u32 << n) {
                    let f0 = |bits: u32, t: usize, base: f64| {
                        if bits >> t & 1 == 1 {
                            base + 3.0 * t as f64
                        } else {
                            0.0
                        }
                    };
                    let r = track(&(0..n).map(|t| f0(rbits, t, 100.0)).collect::<Vec<_>>());
                    // Mix gross and acceptable deviations across frames.
                    let e = track(
                        &(0..n)
                            .map(|t| {
                                let v = f0(ebits, t, 100.0);
                                if v > 0.0 && t % 3 == 0 {
                                    v * 1.25
                                } else if v > 0.0 {
                                    v * 1.1
                                } else {
                                    0.0
                                }
                            })
                            .collect::<Vec<_>>(),
                    );
                    let (og, ov, of) = frame_oracle(&r, &e, &cfg);
                    assert_eq!(gpe(&r, &e, &cfg).unwrap(), og);
                    assert_eq!(vde(&r, &e).unwrap(), ov);
                    assert_eq!(ffe(&r, &e, &cfg).unwrap(), of);
                }
            }
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn ffe_dominates_vde(
            rf in proptest::collection::vec(0.0f64..400.0, 1..30),
            ef in proptest::collection::vec(0.0f64..400.0, 1..30),
        ) {
            let n = rf.len().min(ef.len());
            let clean = |v: &[f64]| {
                v[..n].iter().map(|&f| if f < 60.0 { 0.0 } else { f }).collect::<Vec<_>>()
            };
            let r = track(&clean(&rf));
            let e = track(&clean(&ef));
            let cfg = F0CompareConfig::default();
            let f = ffe(&r, &e, &cfg).unwrap();
            let v = vde(&r, &e).unwrap();
            let g = gpe(&r, &e, &cfg).unwrap();
            prop_assert!(f.percent >= v.percent - 1e-12);
            prop_assert!(f.errors >= g.errors);
        }

        #[test]
        fn mcd_symmetric_on_equal_lengths(seed in 0u64..1000) {
            let mut state = seed.wrapping_mul(0x9E3779B97F4A7C15).wrapping_add(1);
            let mut next = || {
                state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                (state >> 11) as f64 / (1u64 << 53) as f64 - 0.5
            };
            let a: Vec<Vec<f64>> = (0..8).map(|_| (0..13).map(|_| next()).collect()).collect();
            let b: Vec<Vec<f64>> = (0..8).map(|_| (0..13).map(|_| next()).collect()).collect();
            let ab = mcd13_from_cepstra(&a, &b).unwrap();
            let ba = mcd13_from_cepstra(&b, &a).unwrap();
            prop_assert!((ab - ba).abs() < 1e-9);
        }

        #[test]
        fn mcd_is_gain_invariant(gain in 0.2f64..4.0) {
            let audio = crate::dsp::AudioBuffer::new(
                (0..6000)
                    .map(|i| {
                        let w = 2.0 * std::f64::consts::PI * 180.0 * i as f64 / 16000.0;
                        0.3 * (w.sin() + 0.5 * (2.0 * w).sin())
                    })
                    .collect(),
                16000,
            );
            let gained = crate::dsp::AudioBuffer::new(
                audio.samples.iter().map(|s| gain * s).collect(),
                16000,
            );
            let v = mcd13(&audio, &gained, &SpectralConfig::for_cepstra()).unwrap();
            prop_assert!(v < 1e-6, "{}", v);
        }
    }
}
