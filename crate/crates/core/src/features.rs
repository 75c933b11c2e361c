//! Listener feature ingestion and per-phoneme feature extraction.
//!
//! A listener stream is a CSV of 70 reals per frame (64 expression + 6 pose
//! coefficients) at a declared frame rate. From audio plus a phoneme
//! alignment we extract per-phoneme prosody targets (log pitch, log energy,
//! log duration with a voicing mask) and per-phoneme speech representations
//! (mean log-mel vectors). Frames belong to a phoneme iff their center time
//! falls in `[start, end)`.

use crate::align::PhonemeAlignment;
use crate::dsp::{self, AudioBuffer, DspError, F0Config, SpectralConfig};
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;
use std::path::Path;
use thiserror::Error;

/// Expression (64) + pose (6) coefficients per listener frame.
pub const LISTENER_DIM: usize = 70;

/// Floor applied to the mean frame energy before taking the log.
pub const ENERGY_FLOOR: f64 = 1e-8;

#[derive(Debug, Error)]
pub enum FeatureError {
    #[error("{path}:{row}: expected {LISTENER_DIM} columns, found {found}")]
    WrongColumnCount {
        path: String,
        row: usize,
        found: usize,
    },
    #[error("{path}:{row}: column {col}: bad number {value:?}")]
    BadNumber {
        path: String,
        row: usize,
        col: usize,
        value: String,
    },
    #[error("{path}: listener feature file is empty")]
    EmptyFile { path: String },
    #[error("fps must be positive, got {0}")]
    BadFps(f64),
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("phoneme {index} ({phoneme:?}) starts at {start_s} s, outside {audio_s} s of audio")]
    PhonemeOutsideAudio {
        index: usize,
        phoneme: String,
        start_s: f64,
        audio_s: f64,
    },
    #[error("alignment ends at {align_end_s} s, beyond audio of {audio_s} s (+ slack)")]
    AlignmentBeyondAudio { align_end_s: f64, audio_s: f64 },
    #[error(transparent)]
    Dsp(#[from] DspError),
}

/// Per-frame listener feature rows at a fixed frame rate.
#[derive(Debug, Clone, PartialEq)]
pub struct ListenerFeatureStream {
    pub fps: f64,
    pub frames: Vec<Vec<f64>>,
}

impl ListenerFeatureStream {
    pub fn new(fps: f64, frames: Vec<Vec<f64>>) -> Result<Self, FeatureError> {
        if !(fps > 0.0) {
            return Err(FeatureError::BadFps(fps));
        }
        for (row, frame) in frames.iter().enumerate() {
            if frame.len() != LISTENER_DIM {
                return Err(FeatureError::WrongColumnCount {
                    path: "<memory>".into(),
                    row: row + 1,
                    found: frame.len(),
                });
            }
        }
        Ok(Self { fps, frames })
    }

    pub fn frame_count(&self) -> usize {
        self.frames.len()
    }

    pub fn tau_s(&self) -> f64 {
        1.0 / self.fps
    }
}

/// Load a listener feature CSV: no header, one frame per row, exactly 70
/// comma-separated reals.
pub fn load_listener_features(
    path: &Path,
    fps: f64,
) -> Result<ListenerFeatureStream, FeatureError> {
    if !(fps > 0.0) {
        return Err(FeatureError::BadFps(fps));
    }
    let display = path.display().to_string();
    let text = std::fs::read_to_string(path).map_err(|source| FeatureError::Io {
        path: display.clone(),
        source,
    })?;
    let mut frames = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.is_empty() {
            continue;
        }
        let mut frame = Vec::with_capacity(LISTENER_DIM);
        for (col, field) in line.split(',').enumerate() {
            let value = field.trim().parse::<f64>().map_err(|_| FeatureError::BadNumber {
                path: display.clone(),
                row: i + 1,
                col: col + 1,
                value: field.to_string(),
            })?;
            frame.push(value);
        }
        if frame.len() != LISTENER_DIM {
            return Err(FeatureError::WrongColumnCount {
                path: display.clone(),
                row: i + 1,
                found: frame.len(),
            });
        }
        frames.push(frame);
    }
    if frames.is_empty() {
        return Err(FeatureError::EmptyFile { path: display });
    }
    ListenerFeatureStream::new(fps, frames)
}

/// Serialize a stream back to the CSV contract with round-trip-exact floats.
pub fn write_listener_csv(stream: &ListenerFeatureStream) -> String {
    let mut out = String::new();
    for frame in &stream.frames {
        for (i, v) in frame.iter().enumerate() {
            if i > 0 {
                out.push(',');
            }
            let _ = write!(out, "{v}");
        }
        out.push('\n');
    }
    out
}

/// Per-phoneme prosody in log scale with a voicing mask.
///
/// `pitch_mask == false` forces `log_pitch == 0`; duration is in ln(ms).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProsodyTarget {
    pub log_pitch: f64,
    pub pitch_mask: bool,
    pub log_energy: f64,
    pub log_duration: f64,
}

/// Model output; same layout and conventions as the targets it is trained on.
pub type ProsodyPrediction = ProsodyTarget;

impl ProsodyTarget {
    pub fn pitch_hz(&self) -> f64 {
        if self.pitch_mask {
            self.log_pitch.exp()
        } else {
            0.0
        }
    }

    pub fn energy(&self) -> f64 {
        self.log_energy.exp()
    }

    pub fn duration_ms(&self) -> f64 {
        self.log_duration.exp()
    }
}

/// Per-phoneme acoustic summary of a reference rendering (mean log-mel row).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpeechRepr {
    pub vector: Vec<f64>,
}

fn check_alignment_span(
    audio: &AudioBuffer,
    align: &PhonemeAlignment,
    slack_s: f64,
) -> Result<(), FeatureError> {
    let audio_s = audio.duration_s();
    if align.end_s() > audio_s + slack_s {
        return Err(FeatureError::AlignmentBeyondAudio {
            align_end_s: align.end_s(),
            audio_s,
        });
    }
    Ok(())
}

fn check_phoneme_inside(
    audio: &AudioBuffer,
    align: &PhonemeAlignment,
) -> Result<(), FeatureError> {
    let audio_s = audio.duration_s();
    for (index, e) in align.entries().iter().enumerate() {
        if e.start_s >= audio_s {
            return Err(FeatureError::PhonemeOutsideAudio {
                index,
                phoneme: e.phoneme.clone(),
                start_s: e.start_s,
                audio_s,
            });
        }
    }
    Ok(())
}

/// Indices of frames whose centers fall in `[start, end)`; frame centers are
/// supplied by the caller in seconds.
fn frames_in_span(centers: &[f64], start_s: f64, end_s: f64) -> std::ops::Range<usize> {
    let lo = centers.partition_point(|&c| c < start_s);
    let hi = centers.partition_point(|&c| c < end_s);
    lo..hi
}

fn nearest_frame(centers: &[f64], midpoint_s: f64) -> usize {
    centers
        .iter()
        .enumerate()
        .min_by(|a, b| (a.1 - midpoint_s).abs().total_cmp(&(b.1 - midpoint_s).abs()))
        .map(|(i, _)| i)
        .unwrap_or(0)
}

/// Extract per-phoneme prosody targets from ground-truth audio.
///
/// Pitch is the mean F0 over voiced pitch frames inside the phoneme (mask
/// false when there are none), energy the mean framewise spectral energy
/// (nearest frame when the span covers none), duration the interval length.
pub fn extract_prosody_targets(
    audio: &AudioBuffer,
    align: &PhonemeAlignment,
    f0_cfg: &F0Config,
    spec_cfg: &SpectralConfig,
) -> Result<Vec<ProsodyTarget>, FeatureError> {
    check_phoneme_inside(audio, align)?;
    check_alignment_span(audio, align, spec_cfg.window_ms / 1000.0)?;

    let track = dsp::estimate_f0(audio, f0_cfg)?;
    let energies = dsp::frame_energy(audio, spec_cfg)?;
    let f0_centers: Vec<f64> = (0..track.len())
        .map(|t| f0_cfg.frame_center_s(t, audio.sample_rate))
        .collect();
    let energy_centers: Vec<f64> = (0..energies.len())
        .map(|t| spec_cfg.frame_center_s(t, audio.sample_rate))
        .collect();

    let mut targets = Vec::with_capacity(align.len());
    for e in align.entries() {
        let span = frames_in_span(&f0_centers, e.start_s, e.end_s);
        let voiced: Vec<f64> = span
            .clone()
            .filter(|&t| track.voiced[t])
            .map(|t| track.f0_hz[t])
            .collect();
        let pitch_mask = !voiced.is_empty();
        let log_pitch = if pitch_mask {
            (voiced.iter().sum::<f64>() / voiced.len() as f64).ln()
        } else {
            0.0
        };

        let espan = frames_in_span(&energy_centers, e.start_s, e.end_s);
        let energy = if espan.is_empty() {
            energies[nearest_frame(&energy_centers, 0.5 * (e.start_s + e.end_s))]
        } else {
            energies[espan.clone()].iter().sum::<f64>() / espan.len() as f64
        };

        targets.push(ProsodyTarget {
            log_pitch,
            pitch_mask,
            log_energy: energy.max(ENERGY_FLOOR).ln(),
            log_duration: (e.duration_s() * 1000.0).ln(),
        });
    }
    Ok(targets)
}

/// Extract per-phoneme speech representations from a reference rendering:
/// the mean log-mel frame over each phoneme's span (nearest frame if empty).
pub fn extract_speech_reprs(
    reference: &AudioBuffer,
    align: &PhonemeAlignment,
    spec_cfg: &SpectralConfig,
) -> Result<Vec<SpeechRepr>, FeatureError> {
    check_phoneme_inside(reference, align)?;
    check_alignment_span(reference, align, spec_cfg.window_ms / 1000.0)?;

    let log_mel = dsp::log_mel_spectrogram(reference, spec_cfg)?;
    let centers: Vec<f64> = (0..log_mel.len())
        .map(|t| spec_cfg.frame_center_s(t, reference.sample_rate))
        .collect();

    let mut reprs = Vec::with_capacity(align.len());
    for e in align.entries() {
        let span = frames_in_span(&centers, e.start_s, e.end_s);
        let rows: Vec<usize> = if span.is_empty() {
            vec![nearest_frame(&centers, 0.5 * (e.start_s + e.end_s))]
        } else {
            span.collect()
        };
        let mut vector = vec![0.0; spec_cfg.mel_bands];
        for &t in &rows {
            for (acc, v) in vector.iter_mut().zip(&log_mel[t]) {
                *acc += v;
            }
        }
        for v in &mut vector {
            *v /= rows.len() as f64;
        }
        reprs.push(SpeechRepr { vector });
    }
    Ok(reprs)
}
