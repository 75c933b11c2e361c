//! Deterministic synthetic corpus generator.
//!
//! Utterances are sequences of 3-harmonic tones whose pitch, energy and
//! duration are exactly known, paired with a listener feature stream. When a
//! listener pattern (a pose step or an expression oscillation) has fully
//! played out inside a phoneme's causal frame window, that phoneme's prosody
//! is modified by the corresponding feedback rule — this is the ground truth
//! a visual-aware predictor is supposed to pick up and a visual-blind one
//! cannot.

use super::{CorpusError, ManifestRecord, SPEAKER_COUNT};
use crate::align::{self, PhonemeAlignment, PhonemeEntry, StreamClock};
use crate::dsp::{hann_window, AudioBuffer, SpectralConfig};
use crate::features::{ListenerFeatureStream, ProsodyTarget, LISTENER_DIM};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::path::Path;

/// Per-phoneme prosody synthesis budget the causal lag must cover.
pub const SYNTH_LATENCY_S: f64 = 0.00267;

const VOCAB_SIZE: usize = 24;
const AMPLITUDE_GRID: [f64; 3] = [0.40, 0.48, 0.56];
const FADE_S: f64 = 0.005;
const POSE_STEP_OFFSET: f64 = 2.0;
const EXPR_WAVE_AMPLITUDE: f64 = 1.5;
const EXPR_WAVE_PERIOD_FRAMES: f64 = 6.0;
const EXPR_WAVE_DIMS: usize = 16;

/// Listener behaviours the generator can inject into the feature stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ListenerPattern {
    /// Step offset on the 6 pose dimensions (a sustained head turn).
    PoseStep,
    /// Sinusoidal wave on the leading expression dimensions (e.g. nodding).
    ExpressionOscillation,
}

/// Prosody modifiers applied once a pattern is fully visible in the causal
/// window of a phoneme.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeedbackRule {
    pub pattern: ListenerPattern,
    pub pitch_mult: f64,
    pub energy_mult: f64,
    pub duration_mult: f64,
}

impl FeedbackRule {
    /// Negative feedback: lower pitch, longer duration.
    pub fn negative_pose_step() -> Self {
        Self {
            pattern: ListenerPattern::PoseStep,
            pitch_mult: 0.9,
            energy_mult: 1.0,
            duration_mult: 1.3,
        }
    }

    /// Positive feedback: more energy.
    pub fn positive_expression_wave() -> Self {
        Self {
            pattern: ListenerPattern::ExpressionOscillation,
            pitch_mult: 1.0,
            energy_mult: 1.2,
            duration_mult: 1.0,
        }
    }
}

/// Parameters of a synthetic corpus.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub n_utterances: usize,
    pub phonemes_per_utterance: (usize, usize),
    pub base_f0_hz: (f64, f64),
    pub sample_rate: u32,
    pub fps: f64,
    pub seed: u64,
    pub feedback_rules: Vec<FeedbackRule>,
}

impl SyntheticSpec {
    pub fn new(n_utterances: usize, seed: u64) -> Self {
        Self {
            n_utterances,
            phonemes_per_utterance: (6, 12),
            base_f0_hz: (170.0, 255.0),
            sample_rate: 22050,
            fps: 30.0,
            seed,
            feedback_rules: vec![
                FeedbackRule::negative_pose_step(),
                FeedbackRule::positive_expression_wave(),
            ],
        }
    }

    fn validate(&self) -> Result<(), CorpusError> {
        if self.phonemes_per_utterance.0 == 0
            || self.phonemes_per_utterance.0 > self.phonemes_per_utterance.1
        {
            return Err(CorpusError::BadSpec(format!(
                "phonemes_per_utterance range {:?} is degenerate",
                self.phonemes_per_utterance
            )));
        }
        if !(self.base_f0_hz.0 > 0.0 && self.base_f0_hz.0 < self.base_f0_hz.1) {
            return Err(CorpusError::BadSpec(format!(
                "base_f0_hz range {:?} is degenerate",
                self.base_f0_hz
            )));
        }
        if !(self.fps > 0.0) {
            return Err(CorpusError::BadSpec(format!("fps {} not positive", self.fps)));
        }
        if self.sample_rate < 8000 {
            return Err(CorpusError::BadSpec(format!(
                "sample rate {} too low for the tone harmonics",
                self.sample_rate
            )));
        }
        for r in &self.feedback_rules {
            if !(r.pitch_mult > 0.0 && r.energy_mult > 0.0 && r.duration_mult > 0.0) {
                return Err(CorpusError::BadSpec(format!("non-positive multiplier in {r:?}")));
            }
        }
        Ok(())
    }
}

/// Ground-truth parameters a generated phoneme was rendered with.
#[derive(Debug, Clone, PartialEq)]
pub struct PhonemeParams {
    pub symbol: String,
    pub f0_hz: f64,
    pub amplitude: f64,
    pub duration_s: f64,
    pub modified: bool,
    pub cutoff_frame: usize,
}

/// One generated utterance with everything the pipeline consumes plus the
/// exact generation parameters for oracle checks.
#[derive(Debug, Clone)]
pub struct GeneratedUtterance {
    pub audio: AudioBuffer,
    /// Neutral rendering of the same spans with unmodified pitch/energy; the
    /// stand-in for a classical TTS reference.
    pub reference: AudioBuffer,
    pub alignment: PhonemeAlignment,
    pub listener: ListenerFeatureStream,
    pub targets: Vec<ProsodyTarget>,
    pub speaker: usize,
    pub pattern: Option<ListenerPattern>,
    /// 1-based frame window the pattern occupies, when present.
    pub pattern_window: Option<(usize, usize)>,
    pub phonemes: Vec<PhonemeParams>,
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E3779B97F4A7C15);
    let mut z = x;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58476D1CE4E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D049BB133111EB);
    z ^ (z >> 31)
}

fn utterance_rng(seed: u64, index: usize) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(splitmix64(seed ^ splitmix64(index as u64)))
}

/// Per-symbol base prosody, fixed for a whole corpus.
struct SymbolTable {
    duration_ms: Vec<f64>,
    f0_hz: Vec<f64>,
}

impl SymbolTable {
    fn derive(spec: &SyntheticSpec) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(splitmix64(spec.seed ^ 0x5EED_7AB1E));
        let duration_ms = (0..VOCAB_SIZE)
            .map(|_| rng.random_range(80.0..300.0))
            .collect();
        let f0_hz = (0..VOCAB_SIZE)
            .map(|_| rng.random_range(spec.base_f0_hz.0..spec.base_f0_hz.1))
            .collect();
        Self { duration_ms, f0_hz }
    }
}

/// Steady-state framewise spectral energy of the 3-harmonic tone at peak
/// amplitude `a`, under the default analysis configuration. Parseval over the
/// one-sided spectrum: the harmonic stack carries 3/14 * a^2 mean power.
fn steady_tone_energy(a: f64, sample_rate: u32) -> f64 {
    let cfg = SpectralConfig::default();
    let win = cfg.window_samples(sample_rate);
    let fft_len = cfg.fft_len(sample_rate) as f64;
    let window_power: f64 = hann_window(win).iter().map(|w| w * w).sum();
    a * (fft_len * window_power * 3.0 / 28.0).sqrt()
}

fn render_tone(samples: &mut [f64], f0: f64, amplitude: f64, sample_rate: u32) {
    let rate = sample_rate as f64;
    let fade = (FADE_S * rate).round() as usize;
    let n = samples.len();
    for (i, s) in samples.iter_mut().enumerate() {
        let w = 2.0 * std::f64::consts::PI * f0 * i as f64 / rate;
        let mut v = amplitude / 1.75
            * (w.sin() + 0.5 * (2.0 * w).sin() + 0.25 * (3.0 * w).sin());
        if fade > 0 {
            if i < fade {
                v *= i as f64 / fade as f64;
            }
            if n - 1 - i < fade {
                v *= (n - 1 - i) as f64 / fade as f64;
            }
        }
        *s = v;
    }
}

/// Generate utterance `index` of the corpus described by `spec`.
/// Bit-identical for identical `(spec, index)`.
pub fn generate_utterance(
    spec: &SyntheticSpec,
    index: usize,
) -> Result<GeneratedUtterance, CorpusError> {
    spec.validate()?;
    let symbols = SymbolTable::derive(spec);
    let mut rng = utterance_rng(spec.seed, index);
    let clock = StreamClock::derive(spec.fps, SYNTH_LATENCY_S)
        .expect("validated fps yields a clock");

    let n_phonemes =
        rng.random_range(spec.phonemes_per_utterance.0..=spec.phonemes_per_utterance.1);

    // Pattern class: none or one of the configured rules, equally likely.
    let rule_choice = rng.random_range(0..=spec.feedback_rules.len());
    let rule = if rule_choice == 0 {
        None
    } else {
        Some(spec.feedback_rules[rule_choice - 1])
    };
    let window_start = rng.random_range(2usize..=8);
    let window_end = window_start + rng.random_range(6usize..=12) - 1;

    // Lay out phonemes sequentially; a phoneme is modified exactly when the
    // pattern window is fully contained in its causal history.
    let mut entries = Vec::with_capacity(n_phonemes);
    let mut phonemes = Vec::with_capacity(n_phonemes);
    let mut start_s = 0.0f64;
    for _ in 0..n_phonemes {
        let sym = rng.random_range(0..VOCAB_SIZE);
        let amplitude_base = AMPLITUDE_GRID[rng.random_range(0..AMPLITUDE_GRID.len())];

        let a_hat = align::start_frame(start_s, clock.tau_s);
        let cutoff = align::causal_cutoff(a_hat, clock.phi);
        let modified = rule.is_some() && cutoff >= window_end;
        let (pitch_mult, energy_mult, duration_mult) = match (&rule, modified) {
            (Some(r), true) => (r.pitch_mult, r.energy_mult, r.duration_mult),
            _ => (1.0, 1.0, 1.0),
        };

        let duration_s = symbols.duration_ms[sym] / 1000.0 * duration_mult;
        let end_s = start_s + duration_s;
        entries.push(PhonemeEntry {
            phoneme: format!("p{sym:02}"),
            start_s,
            end_s,
        });
        phonemes.push(PhonemeParams {
            symbol: format!("p{sym:02}"),
            f0_hz: symbols.f0_hz[sym] * pitch_mult,
            amplitude: amplitude_base * energy_mult,
            duration_s,
            modified,
            cutoff_frame: cutoff,
        });
        start_s = end_s;
    }
    let alignment = PhonemeAlignment::new(entries).expect("generator emits valid spans");
    let total_s = alignment.end_s();

    // Render actual and neutral-reference audio over the same spans.
    let total_samples = (total_s * spec.sample_rate as f64).round() as usize;
    let mut actual = vec![0.0f64; total_samples];
    let mut neutral = vec![0.0f64; total_samples];
    for (e, p) in alignment.entries().iter().zip(&phonemes) {
        let s0 = (e.start_s * spec.sample_rate as f64).round() as usize;
        let s1 = ((e.end_s * spec.sample_rate as f64).round() as usize).min(total_samples);
        render_tone(&mut actual[s0..s1], p.f0_hz, p.amplitude, spec.sample_rate);
        let base_f0 = symbols.f0_hz[p.symbol[1..].parse::<usize>().unwrap()];
        let base_amp = p.amplitude / if p.modified { rule.unwrap().energy_mult } else { 1.0 };
        render_tone(&mut neutral[s0..s1], base_f0, base_amp, spec.sample_rate);
    }

    // Listener stream: slow AR(1) noise, plus the pattern over its window.
    let frame_count = (total_s / clock.tau_s).ceil() as usize;
    let mut frames = vec![vec![0.0f64; LISTENER_DIM]; frame_count];
    let mut state = vec![0.0f64; LISTENER_DIM];
    for frame in frames.iter_mut() {
        for (d, slot) in frame.iter_mut().enumerate() {
            state[d] = 0.92 * state[d] + 0.08 * rng.random_range(-1.0..1.0);
            *slot = state[d];
        }
    }
    if let Some(r) = &rule {
        for t in window_start..=window_end.min(frame_count) {
            let frame = &mut frames[t - 1]; // frames are 1-based in time
            match r.pattern {
                ListenerPattern::PoseStep => {
                    for d in LISTENER_DIM - 6..LISTENER_DIM {
                        frame[d] += POSE_STEP_OFFSET;
                    }
                }
                ListenerPattern::ExpressionOscillation => {
                    let phase = 2.0 * std::f64::consts::PI * (t - window_start) as f64
                        / EXPR_WAVE_PERIOD_FRAMES;
                    for d in 0..EXPR_WAVE_DIMS {
                        frame[d] += EXPR_WAVE_AMPLITUDE * phase.sin();
                    }
                }
            }
        }
    }
    let listener = ListenerFeatureStream::new(spec.fps, frames).expect("validated stream");

    // Targets are the exact generation parameters; duration comes from the
    // emitted spans so extraction can recover it bit-exactly.
    let targets = alignment
        .entries()
        .iter()
        .zip(&phonemes)
        .map(|(e, p)| ProsodyTarget {
            log_pitch: p.f0_hz.ln(),
            pitch_mask: true,
            log_energy: steady_tone_energy(p.amplitude, spec.sample_rate).ln(),
            log_duration: (e.duration_s() * 1000.0).ln(),
        })
        .collect();

    Ok(GeneratedUtterance {
        audio: AudioBuffer::new(actual, spec.sample_rate),
        reference: AudioBuffer::new(neutral, spec.sample_rate),
        alignment,
        listener,
        targets,
        speaker: index % SPEAKER_COUNT,
        pattern: rule.map(|r| r.pattern),
        pattern_window: rule.map(|_| (window_start, window_end)),
        phonemes,
    })
}

/// Write a full corpus under `dir` (wav/, ref/, align/, listener/ and
/// manifest.jsonl) and return the manifest records.
pub fn write_corpus(spec: &SyntheticSpec, dir: &Path) -> Result<Vec<ManifestRecord>, CorpusError> {
    spec.validate()?;
    for sub in ["wav", "ref", "align", "listener"] {
        std::fs::create_dir_all(dir.join(sub)).map_err(|source| CorpusError::Io {
            path: dir.join(sub).display().to_string(),
            source,
        })?;
    }
    let write_text = |path: &Path, text: String| -> Result<(), CorpusError> {
        std::fs::write(path, text).map_err(|source| CorpusError::Io {
            path: path.display().to_string(),
            source,
        })
    };

    let mut records = Vec::with_capacity(spec.n_utterances);
    for index in 0..spec.n_utterances {
        let utt = generate_utterance(spec, index)?;
        let id = format!("utt{index:04}");
        super::write_wav(&dir.join(format!("wav/{id}.wav")), &utt.audio)?;
        super::write_wav(&dir.join(format!("ref/{id}.wav")), &utt.reference)?;
        write_text(&dir.join(format!("align/{id}.tsv")), utt.alignment.to_tsv())?;
        write_text(
            &dir.join(format!("listener/{id}.csv")),
            crate::features::write_listener_csv(&utt.listener),
        )?;
        records.push(ManifestRecord {
            id,
            speaker: utt.speaker,
            wav: format!("wav/utt{index:04}.wav"),
            align_tsv: format!("align/utt{index:04}.tsv"),
            listener_csv: format!("listener/utt{index:04}.csv"),
            fps: spec.fps,
            ref_wav: Some(format!("ref/utt{index:04}.wav")),
        });
    }
    super::write_manifest(&dir.join("manifest.jsonl"), &records)?;
    Ok(records)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsp::F0Config;
    use crate::features;

    #[test]
    fn same_seed_and_index_is_bit_identical() {
        let spec = SyntheticSpec::new(4, 7);
        let a = generate_utterance(&spec, 2).unwrap();
        let b = generate_utterance(&spec, 2).unwrap();
        assert_eq!(a.audio, b.audio);
        assert_eq!(a.listener.frames, b.listener.frames);
        assert_eq!(a.targets, b.targets);
        assert_eq!(a.alignment, b.alignment);
    }

    #[test]
    fn different_indices_differ() {
        let spec = SyntheticSpec::new(4, 7);
        let a = generate_utterance(&spec, 0).unwrap();
        let b = generate_utterance(&spec, 1).unwrap();
        assert_ne!(a.audio.samples, b.audio.samples);
    }

    #[test]
    fn no_rules_means_base_parameters() {
        let mut spec = SyntheticSpec::new(2, 11);
        spec.feedback_rules.clear();
        let utt = generate_utterance(&spec, 0).unwrap();
        assert!(utt.pattern.is_none());
        assert!(utt.phonemes.iter().all(|p| !p.modified));
    }

    #[test]
    fn negative_pattern_scales_duration_by_rule() {
        let mut spec = SyntheticSpec::new(1, 3);
        spec.feedback_rules = vec![FeedbackRule::negative_pose_step()];
        // Find a seed whose utterance has at least one modified phoneme.
        let utt = (0..64)
            .filter_map(|s| {
                let mut sp = spec.clone();
                sp.seed = s;
                let u = generate_utterance(&sp, 0).unwrap();
                u.phonemes.iter().any(|p| p.modified).then_some(u)
            })
            .next()
            .expect("some seed produces a modified phoneme");
        let symbols = SymbolTable::derive(&SyntheticSpec {
            seed: utt_seed_of(&utt),
            ..spec.clone()
        });
        for (p, e) in utt.phonemes.iter().zip(utt.alignment.entries()) {
            let sym: usize = p.symbol[1..].parse().unwrap();
            let base_ms = symbols.duration_ms[sym];
            let expect = if p.modified {
                1.3f64.ln() + base_ms.ln()
            } else {
                base_ms.ln()
            };
            let got = (e.duration_s() * 1000.0).ln();
            assert!((got - expect).abs() < 1e-9, "{got} vs {expect}");
        }
    }

    // The symbol table only depends on the corpus seed; recover it for the
    // assertion above by noting which seed produced the utterance.
    fn utt_seed_of(utt: &GeneratedUtterance) -> u64 {
        // Re-derive by brute force over the small seed range used in the test.
        for s in 0..64u64 {
            let mut sp = SyntheticSpec::new(1, s);
            sp.feedback_rules = vec![FeedbackRule::negative_pose_step()];
            let u = generate_utterance(&sp, 0).unwrap();
            if u.alignment == utt.alignment {
                return s;
            }
        }
        panic!("seed not found");
    }

    #[test]
    fn pattern_window_never_extends_past_modified_cutoffs() {
        let spec = SyntheticSpec::new(16, 99);
        for index in 0..spec.n_utterances {
            let utt = generate_utterance(&spec, index).unwrap();
            if let Some((_, w_end)) = utt.pattern_window {
                for p in utt.phonemes.iter().filter(|p| p.modified) {
                    assert!(w_end <= p.cutoff_frame);
                }
            }
        }
    }

    #[test]
    fn extraction_recovers_generator_targets() {
        let spec = SyntheticSpec::new(16, 42);
        let f0_cfg = F0Config::default();
        let spec_cfg = SpectralConfig::default();
        for index in 0..spec.n_utterances {
            let utt = generate_utterance(&spec, index).unwrap();
            let got =
                features::extract_prosody_targets(&utt.audio, &utt.alignment, &f0_cfg, &spec_cfg)
                    .unwrap();
            for (i, (g, want)) in got.iter().zip(&utt.targets).enumerate() {
                assert!(g.pitch_mask, "utt {index} phoneme {i} unvoiced");
                let pitch_rel = (g.log_pitch.exp() - want.log_pitch.exp()).abs()
                    / want.log_pitch.exp();
                assert!(pitch_rel <= 0.03, "utt {index} phoneme {i}: pitch off {pitch_rel}");
                let energy_rel = (g.log_energy.exp() - want.log_energy.exp()).abs()
                    / want.log_energy.exp();
                assert!(
                    energy_rel <= 0.10,
                    "utt {index} phoneme {i}: energy off {energy_rel}"
                );
                assert_eq!(g.log_duration, want.log_duration, "utt {index} phoneme {i}");
            }
        }
    }

    #[test]
    fn corpus_writes_n_loadable_records() {
        let dir = tempfile::tempdir().unwrap();
        let spec = SyntheticSpec::new(3, 5);
        let written = write_corpus(&spec, dir.path()).unwrap();
        assert_eq!(written.len(), 3);
        let loaded = super::super::load_manifest(&dir.path().join("manifest.jsonl")).unwrap();
        assert_eq!(loaded, written);
        for r in &loaded {
            assert!(super::super::validate_record(r, dir.path()).is_empty());
        }
    }

    #[test]
    fn degenerate_spec_is_rejected() {
        let mut spec = SyntheticSpec::new(1, 0);
        spec.phonemes_per_utterance = (5, 3);
        assert!(matches!(generate_utterance(&spec, 0), Err(CorpusError::BadSpec(_))));
        let mut spec2 = SyntheticSpec::new(1, 0);
        spec2.base_f0_hz = (300.0, 200.0);
        assert!(generate_utterance(&spec2, 0).is_err());
    }
}
