//! Deterministic signal-processing primitives.
//!
//! STFT with Hann windowing, HTK-style mel filterbank, mel cepstra for MCD,
//! YIN fundamental-frequency estimation with a voicing decision, and
//! framewise spectral energy. All functions are pure: same input, bit-same
//! output.

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use thiserror::Error;

/// Log floor applied to mel energies before the cepstral DCT.
pub const LOG_MEL_FLOOR: f64 = 1e-10;

#[derive(Debug, Error)]
pub enum DspError {
    #[error("audio is empty")]
    EmptyAudio,
    #[error("audio too short: {samples} samples, analysis window needs {needed}")]
    TooShort { samples: usize, needed: usize },
    #[error("non-finite sample at index {0}")]
    NonFiniteSample(usize),
    #[error("invalid config: {0}")]
    InvalidConfig(String),
}

/// Mono audio in [-1, 1] at a fixed sample rate.
#[derive(Debug, Clone, PartialEq)]
pub struct AudioBuffer {
    pub samples: Vec<f64>,
    pub sample_rate: u32,
}

impl AudioBuffer {
    pub fn new(samples: Vec<f64>, sample_rate: u32) -> Self {
        Self {
            samples,
            sample_rate,
        }
    }

    pub fn duration_s(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate as f64
    }

    fn check_finite(&self) -> Result<(), DspError> {
        if self.samples.is_empty() {
            return Err(DspError::EmptyAudio);
        }
        if let Some(i) = self.samples.iter().position(|s| !s.is_finite()) {
            return Err(DspError::NonFiniteSample(i));
        }
        Ok(())
    }
}

/// Spectral analysis parameters shared by STFT, mel features and energy.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralConfig {
    pub window_ms: f64,
    pub hop_ms: f64,
    pub mel_bands: usize,
    pub fmin: f64,
    /// Upper mel edge; `None` resolves to min(8000, Nyquist) at use time.
    pub fmax: Option<f64>,
    pub cepstral_order: usize,
}

impl Default for SpectralConfig {
    fn default() -> Self {
        Self {
            window_ms: 25.0,
            hop_ms: 10.0,
            mel_bands: 80,
            fmin: 0.0,
            fmax: None,
            cepstral_order: 13,
        }
    }
}

impl SpectralConfig {
    /// Defaults with the 40-band front end frozen for cepstral distortion.
    pub fn for_cepstra() -> Self {
        Self {
            mel_bands: 40,
            ..Self::default()
        }
    }

    pub fn window_samples(&self, sample_rate: u32) -> usize {
        ms_to_samples(self.window_ms, sample_rate)
    }

    pub fn hop_samples(&self, sample_rate: u32) -> usize {
        ms_to_samples(self.hop_ms, sample_rate)
    }

    /// FFT length: smallest power of two holding one window.
    pub fn fft_len(&self, sample_rate: u32) -> usize {
        self.window_samples(sample_rate).next_power_of_two()
    }

    /// Center time (seconds) of analysis frame `t`.
    pub fn frame_center_s(&self, t: usize, sample_rate: u32) -> f64 {
        let hop = self.hop_samples(sample_rate);
        let win = self.window_samples(sample_rate);
        (t * hop) as f64 / sample_rate as f64 + win as f64 / (2.0 * sample_rate as f64)
    }

    pub fn effective_fmax(&self, sample_rate: u32) -> f64 {
        let nyquist = sample_rate as f64 / 2.0;
        self.fmax.unwrap_or_else(|| nyquist.min(8000.0))
    }

    fn validate(&self, sample_rate: u32) -> Result<(), DspError> {
        if self.hop_ms <= 0.0 || self.window_ms <= 0.0 {
            return Err(DspError::InvalidConfig(
                "window_ms and hop_ms must be positive".into(),
            ));
        }
        if self.hop_ms > self.window_ms {
            return Err(DspError::InvalidConfig(format!(
                "hop_ms {} exceeds window_ms {}",
                self.hop_ms, self.window_ms
            )));
        }
        if self.mel_bands < self.cepstral_order {
            return Err(DspError::InvalidConfig(format!(
                "mel_bands {} < cepstral_order {}",
                self.mel_bands, self.cepstral_order
            )));
        }
        let fmax = self.effective_fmax(sample_rate);
        if fmax > sample_rate as f64 / 2.0 {
            return Err(DspError::InvalidConfig(format!(
                "fmax {} Hz above Nyquist for {} Hz audio",
                fmax, sample_rate
            )));
        }
        if self.fmin < 0.0 || self.fmin >= fmax {
            return Err(DspError::InvalidConfig(format!(
                "fmin {} must lie in [0, fmax)",
                self.fmin
            )));
        }
        Ok(())
    }
}

/// YIN pitch-estimation parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct F0Config {
    pub frame_ms: f64,
    pub hop_ms: f64,
    pub fmin: f64,
    pub fmax: f64,
    pub cmnd_threshold: f64,
    pub silence_floor_db: f64,
}

impl Default for F0Config {
    fn default() -> Self {
        Self {
            frame_ms: 40.0,
            hop_ms: 10.0,
            fmin: 60.0,
            fmax: 500.0,
            cmnd_threshold: 0.15,
            silence_floor_db: -60.0,
        }
    }
}

impl F0Config {
    pub fn frame_samples(&self, sample_rate: u32) -> usize {
        ms_to_samples(self.frame_ms, sample_rate)
    }

    pub fn hop_samples(&self, sample_rate: u32) -> usize {
        ms_to_samples(self.hop_ms, sample_rate)
    }

    /// Center time (seconds) of pitch frame `t`.
    pub fn frame_center_s(&self, t: usize, sample_rate: u32) -> f64 {
        let hop = self.hop_samples(sample_rate);
        let frame = self.frame_samples(sample_rate);
        (t * hop) as f64 / sample_rate as f64 + frame as f64 / (2.0 * sample_rate as f64)
    }

    fn validate(&self) -> Result<(), DspError> {
        if !(self.fmin > 0.0 && self.fmin < self.fmax) {
            return Err(DspError::InvalidConfig(format!(
                "f0 range [{}, {}] invalid",
                self.fmin, self.fmax
            )));
        }
        if !(self.cmnd_threshold > 0.0 && self.cmnd_threshold < 1.0) {
            return Err(DspError::InvalidConfig(format!(
                "cmnd_threshold {} outside (0, 1)",
                self.cmnd_threshold
            )));
        }
        Ok(())
    }
}

/// Per-frame F0 with a voicing decision. `f0_hz[t] > 0` iff `voiced[t]`.
#[derive(Debug, Clone, PartialEq)]
pub struct F0Track {
    pub f0_hz: Vec<f64>,
    pub voiced: Vec<bool>,
    pub hop_ms: f64,
}

impl F0Track {
    pub fn len(&self) -> usize {
        self.f0_hz.len()
    }

    pub fn is_empty(&self) -> bool {
        self.f0_hz.is_empty()
    }
}

fn ms_to_samples(ms: f64, sample_rate: u32) -> usize {
    (ms * sample_rate as f64 / 1000.0).round() as usize
}

/// Periodic Hann window.
pub fn hann_window(len: usize) -> Vec<f64> {
    (0..len)
        .map(|n| 0.5 * (1.0 - (2.0 * std::f64::consts::PI * n as f64 / len as f64).cos()))
        .collect()
}

/// Number of full analysis frames for `len` samples (window `win`, hop `hop`).
fn frame_count(len: usize, win: usize, hop: usize) -> usize {
    if len < win {
        0
    } else {
        (len - win) / hop + 1
    }
}

/// STFT magnitude matrix, one row per frame, `fft_len/2 + 1` bins per row.
///
/// Frame `t` covers samples `[t*hop, t*hop + window)`; trailing samples
/// shorter than a window are dropped.
pub fn stft(audio: &AudioBuffer, cfg: &SpectralConfig) -> Result<Vec<Vec<f64>>, DspError> {
    audio.check_finite()?;
    cfg.validate(audio.sample_rate)?;
    let win = cfg.window_samples(audio.sample_rate);
    let hop = cfg.hop_samples(audio.sample_rate);
    if audio.samples.len() < win {
        return Err(DspError::TooShort {
            samples: audio.samples.len(),
            needed: win,
        });
    }

    let fft_len = cfg.fft_len(audio.sample_rate);
    let window = hann_window(win);
    let fft = FftPlanner::<f64>::new().plan_fft_forward(fft_len);

    let n_frames = frame_count(audio.samples.len(), win, hop);
    let n_bins = fft_len / 2 + 1;
    let mut out = Vec::with_capacity(n_frames);
    let mut buf = vec![Complex::new(0.0, 0.0); fft_len];
    for t in 0..n_frames {
        let start = t * hop;
        for (i, w) in window.iter().enumerate() {
            buf[i] = Complex::new(audio.samples[start + i] * w, 0.0);
        }
        for slot in buf.iter_mut().skip(win) {
            *slot = Complex::new(0.0, 0.0);
        }
        fft.process(&mut buf);
        out.push(buf[..n_bins].iter().map(|c| c.norm()).collect());
    }
    Ok(out)
}

fn hz_to_mel(hz: f64) -> f64 {
    2595.0 * (1.0 + hz / 700.0).log10()
}

fn mel_to_hz(mel: f64) -> f64 {
    700.0 * (10f64.powf(mel / 2595.0) - 1.0)
}

/// Triangular HTK-mel filterbank (`bands` x `fft_len/2 + 1`), peaks at 1.0.
///
/// Triangles are evaluated in continuous frequency at the bin centers, so a
/// peak may fall between bins; no area normalization is applied.
pub fn mel_filterbank(
    bands: usize,
    fft_len: usize,
    sample_rate: u32,
    fmin: f64,
    fmax: f64,
) -> Vec<Vec<f64>> {
    let n_bins = fft_len / 2 + 1;
    let mel_lo = hz_to_mel(fmin);
    let mel_hi = hz_to_mel(fmax);
    let edges: Vec<f64> = (0..bands + 2)
        .map(|i| mel_to_hz(mel_lo + (mel_hi - mel_lo) * i as f64 / (bands + 1) as f64))
        .collect();

    let bin_hz = sample_rate as f64 / fft_len as f64;
    let mut fb = vec![vec![0.0; n_bins]; bands];
    for b in 0..bands {
        let (lo, center, hi) = (edges[b], edges[b + 1], edges[b + 2]);
        for (k, w) in fb[b].iter_mut().enumerate() {
            let f = k as f64 * bin_hz;
            if f > lo && f < hi {
                *w = if f <= center {
                    (f - lo) / (center - lo)
                } else {
                    (hi - f) / (hi - center)
                };
            }
        }
    }
    fb
}

/// Orthonormal DCT-II matrix (`out_rows` x `n`).
fn dct_ortho_matrix(out_rows: usize, n: usize) -> Vec<Vec<f64>> {
    let mut m = vec![vec![0.0; n]; out_rows];
    for (k, row) in m.iter_mut().enumerate() {
        let scale = if k == 0 {
            (1.0 / n as f64).sqrt()
        } else {
            (2.0 / n as f64).sqrt()
        };
        for (j, v) in row.iter_mut().enumerate() {
            *v = scale
                * (std::f64::consts::PI * k as f64 * (2.0 * j as f64 + 1.0) / (2.0 * n as f64))
                    .cos();
        }
    }
    m
}

/// Log-mel spectrogram: STFT magnitudes through the mel filterbank, natural
/// log with floor [`LOG_MEL_FLOOR`]. One row per frame, `cfg.mel_bands` wide.
pub fn log_mel_spectrogram(
    audio: &AudioBuffer,
    cfg: &SpectralConfig,
) -> Result<Vec<Vec<f64>>, DspError> {
    let mag = stft(audio, cfg)?;
    let fb = mel_filterbank(
        cfg.mel_bands,
        cfg.fft_len(audio.sample_rate),
        audio.sample_rate,
        cfg.fmin,
        cfg.effective_fmax(audio.sample_rate),
    );
    Ok(mag
        .iter()
        .map(|row| {
            fb.iter()
                .map(|filt| {
                    let e: f64 = filt.iter().zip(row).map(|(w, m)| w * m).sum();
                    e.max(LOG_MEL_FLOOR).ln()
                })
                .collect()
        })
        .collect())
}

/// Mel cepstra `c_1..c_order` per frame (c0 dropped).
///
/// Pipeline: STFT -> mel filterbank -> ln with floor -> orthonormal DCT-II.
pub fn mel_cepstra(audio: &AudioBuffer, cfg: &SpectralConfig) -> Result<Vec<Vec<f64>>, DspError> {
    let log_mel = log_mel_spectrogram(audio, cfg)?;
    // Rows 0..=order of the DCT; row 0 (overall gain) is discarded.
    let dct = dct_ortho_matrix(cfg.cepstral_order + 1, cfg.mel_bands);
    Ok(log_mel
        .iter()
        .map(|frame| {
            dct[1..]
                .iter()
                .map(|row| row.iter().zip(frame).map(|(d, v)| d * v).sum())
                .collect()
        })
        .collect())
}

/// Framewise energy: L2 norm of each STFT magnitude row.
pub fn frame_energy(audio: &AudioBuffer, cfg: &SpectralConfig) -> Result<Vec<f64>, DspError> {
    let mag = stft(audio, cfg)?;
    Ok(mag
        .iter()
        .map(|row| row.iter().map(|m| m * m).sum::<f64>().sqrt())
        .collect())
}

/// YIN pitch estimation with an absolute CMND threshold and parabolic
/// interpolation. A frame is voiced iff the CMND dip is below the threshold
/// and the frame RMS clears the silence floor.
pub fn estimate_f0(audio: &AudioBuffer, cfg: &F0Config) -> Result<F0Track, DspError> {
    audio.check_finite()?;
    cfg.validate()?;
    let rate = audio.sample_rate as f64;
    let frame = cfg.frame_samples(audio.sample_rate);
    let hop = cfg.hop_samples(audio.sample_rate);
    if audio.samples.len() < frame {
        return Err(DspError::TooShort {
            samples: audio.samples.len(),
            needed: frame,
        });
    }

    let lag_min = ((rate / cfg.fmax).ceil() as usize).max(2);
    // Keep a fixed difference-function support of at least half a frame.
    let lag_max = ((rate / cfg.fmin).floor() as usize).min(frame / 2);
    if lag_min >= lag_max {
        return Err(DspError::InvalidConfig(format!(
            "f0 search range empty: lags [{lag_min}, {lag_max}] for frame of {frame} samples"
        )));
    }
    let support = frame - lag_max;

    let n_frames = frame_count(audio.samples.len(), frame, hop);
    let mut f0 = Vec::with_capacity(n_frames);
    let mut voiced = Vec::with_capacity(n_frames);
    let mut diff = vec![0.0f64; lag_max + 1];
    let mut cmnd = vec![1.0f64; lag_max + 1];

    for t in 0..n_frames {
        let x = &audio.samples[t * hop..t * hop + frame];
        let rms = (x.iter().map(|s| s * s).sum::<f64>() / frame as f64).sqrt();
        let loud_enough = rms > 0.0 && 20.0 * rms.log10() > cfg.silence_floor_db;

        for (lag, d) in diff.iter_mut().enumerate().skip(1) {
            *d = (0..support).map(|j| (x[j] - x[j + lag]).powi(2)).sum();
        }
        let mut running = 0.0;
        for lag in 1..=lag_max {
            running += diff[lag];
            cmnd[lag] = if running > 0.0 {
                diff[lag] * lag as f64 / running
            } else {
                1.0
            };
        }

        // First lag under the threshold selects the dip; descend to its
        // bottom, else fall back to the global minimum of the range.
        let mut lag = match (lag_min..=lag_max).find(|&l| cmnd[l] < cfg.cmnd_threshold) {
            Some(mut l) => {
                while l + 1 <= lag_max && cmnd[l + 1] < cmnd[l] {
                    l += 1;
                }
                l
            }
            None => (lag_min..=lag_max)
                .min_by(|&a, &b| cmnd[a].total_cmp(&cmnd[b]))
                .expect("non-empty lag range"),
        };
        // Sub-harmonic guard: on mixed frames a dip can slip under the
        // threshold at an integer multiple of the true period while the true
        // dip misses it narrowly. A genuine period has no plausible dip at
        // any sub-period (the fundamental misaligns there), so a clearly
        // qualifying dip near lag/k wins, smallest lag first.
        let guard = 2.0 * cfg.cmnd_threshold;
        loop {
            let better = (2..=4usize)
                .filter(|k| lag / k >= lag_min)
                .filter_map(|k| {
                    let center = lag / k;
                    let dip = (center.saturating_sub(3).max(lag_min)
                        ..=(center + 3).min(lag_max))
                        .min_by(|&a, &b| cmnd[a].total_cmp(&cmnd[b]))?;
                    (cmnd[dip] < guard).then_some(dip)
                })
                .min();
            match better {
                Some(l) => lag = l,
                None => break,
            }
        }
        if lag >= lag_max {
            lag = lag_max - 1;
        }

        let is_voiced = cmnd[lag] < cfg.cmnd_threshold && loud_enough;
        if is_voiced {
            let refined = lag as f64 + parabolic_offset(cmnd[lag - 1], cmnd[lag], cmnd[lag + 1]);
            let hz = (rate / refined).clamp(cfg.fmin, cfg.fmax);
            f0.push(hz);
        } else {
            f0.push(0.0);
        }
        voiced.push(is_voiced);
    }

    Ok(F0Track {
        f0_hz: f0,
        voiced,
        hop_ms: cfg.hop_ms,
    })
}

/// Vertex offset in [-0.5, 0.5] of the parabola through three equidistant
/// points with `y0` the middle (local minimum) sample.
fn parabolic_offset(y_prev: f64, y0: f64, y_next: f64) -> f64 {
    let denom = y_prev - 2.0 * y0 + y_next;
    if denom.abs() < 1e-12 {
        return 0.0;
    }
    (0.5 * (y_prev - y_next) / denom).clamp(-0.5, 0.5)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    pub(crate) fn sine(freq: f64, dur_s: f64, rate: u32, amp: f64) -> AudioBuffer {
        let n = (dur_s * rate as f64).round() as usize;
        let samples = (0..n)
            .map(|i| amp * (2.0 * std::f64::consts::PI * freq * i as f64 / rate as f64).sin())
            .collect();
        AudioBuffer::new(samples, rate)
    }

    /// Three decaying harmonics, peak-normalized to `amp`.
    pub(crate) fn harmonic_tone(f0: f64, dur_s: f64, rate: u32, amp: f64) -> AudioBuffer {
        let n = (dur_s * rate as f64).round() as usize;
        let samples = (0..n)
            .map(|i| {
                let t = i as f64 / rate as f64;
                let w = 2.0 * std::f64::consts::PI * f0 * t;
                amp / 1.75 * (w.sin() + 0.5 * (2.0 * w).sin() + 0.25 * (3.0 * w).sin())
            })
            .collect();
        AudioBuffer::new(samples, rate)
    }

    #[test]
    fn stft_zero_audio_is_zero_matrix() {
        let audio = AudioBuffer::new(vec![0.0; 8000], 16000);
        let mag = stft(&audio, &SpectralConfig::default()).unwrap();
        assert!(!mag.is_empty());
        for row in &mag {
            assert!(row.iter().all(|&m| m == 0.0));
        }
    }

    #[test]
    fn stft_frame_count_matches_arithmetic() {
        let audio = AudioBuffer::new(vec![0.1; 16000], 16000);
        let mag = stft(&audio, &SpectralConfig::default()).unwrap();
        // (16000 - 400) / 160 + 1
        assert_eq!(mag.len(), 98);
    }

    #[test]
    fn stft_sine_peak_bin_maps_to_frequency() {
        let audio = sine(1000.0, 0.5, 16000, 0.8);
        let cfg = SpectralConfig::default();
        let mag = stft(&audio, &cfg).unwrap();
        let bin_hz = 16000.0 / cfg.fft_len(16000) as f64; // 31.25
        for row in &mag {
            let argmax = row
                .iter()
                .enumerate()
                .max_by(|a, b| a.1.total_cmp(b.1))
                .unwrap()
                .0;
            assert!((argmax as f64 * bin_hz - 1000.0).abs() <= bin_hz);
        }
    }

    #[test]
    fn stft_rejects_short_audio() {
        let audio = AudioBuffer::new(vec![0.0; 100], 16000);
        assert!(matches!(
            stft(&audio, &SpectralConfig::default()),
            Err(DspError::TooShort { .. })
        ));
    }

    #[test]
    fn mel_cepstra_deterministic() {
        let audio = harmonic_tone(180.0, 0.3, 16000, 0.5);
        let cfg = SpectralConfig::for_cepstra();
        let a = mel_cepstra(&audio, &cfg).unwrap();
        let b = mel_cepstra(&audio, &cfg).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn mel_cepstra_of_silence_has_zero_ac_terms() {
        // Constant log-floor vector: only c0 (dropped) is nonzero.
        let audio = AudioBuffer::new(vec![0.0; 8000], 16000);
        let ceps = mel_cepstra(&audio, &SpectralConfig::for_cepstra()).unwrap();
        for frame in &ceps {
            assert_eq!(frame.len(), 13);
            for &c in frame {
                assert!(c.abs() < 1e-9, "expected zero AC cepstrum, got {c}");
            }
        }
    }

    #[test]
    fn mel_cepstra_finite_on_noise() {
        // Fixed LCG noise; no NaNs allowed anywhere downstream.
        let mut state = 0x2545F4914F6CDD1Du64;
        let samples: Vec<f64> = (0..4000)
            .map(|_| {
                state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                (state >> 11) as f64 / (1u64 << 53) as f64 - 0.5
            })
            .collect();
        let audio = AudioBuffer::new(samples, 16000);
        let ceps = mel_cepstra(&audio, &SpectralConfig::for_cepstra()).unwrap();
        assert!(ceps.iter().flatten().all(|c| c.is_finite()));
    }

    #[test]
    fn f0_tracks_steady_tone() {
        let audio = harmonic_tone(220.0, 1.0, 22050, 0.5);
        let track = estimate_f0(&audio, &F0Config::default()).unwrap();
        let ok = track
            .f0_hz
            .iter()
            .zip(&track.voiced)
            .filter(|(f, &v)| v && (**f - 220.0).abs() <= 5.0)
            .count();
        assert!(
            ok as f64 >= 0.95 * track.len() as f64,
            "only {ok}/{} frames within 5 Hz",
            track.len()
        );
    }

    #[test]
    fn f0_silence_is_unvoiced() {
        let audio = AudioBuffer::new(vec![0.0; 22050], 22050);
        let track = estimate_f0(&audio, &F0Config::default()).unwrap();
        assert!(track.voiced.iter().all(|v| !v));
        assert!(track.f0_hz.iter().all(|&f| f == 0.0));
    }

    #[test]
    fn f0_voicing_transition_near_tone_end() {
        let rate = 22050;
        let mut samples = harmonic_tone(220.0, 0.5, rate, 0.5).samples;
        samples.extend(std::iter::repeat(0.0).take((0.5 * rate as f64) as usize));
        let audio = AudioBuffer::new(samples, rate);
        let cfg = F0Config::default();
        let track = estimate_f0(&audio, &cfg).unwrap();
        let last_voiced = track.voiced.iter().rposition(|&v| v).unwrap();
        // Frame starting at the 0.5 s boundary is index 50 (hop 10 ms).
        let boundary = (0.5 / (cfg.hop_ms / 1000.0)).round() as isize;
        assert!(
            (last_voiced as isize - boundary).abs() <= 2,
            "voicing ended at frame {last_voiced}, boundary frame {boundary}"
        );
    }

    #[test]
    fn f0_octave_sanity_on_harmonic_tones() {
        for &truth in &[80.0, 150.0, 220.0, 380.0] {
            let audio = harmonic_tone(truth, 1.0, 22050, 0.5);
            let track = estimate_f0(&audio, &F0Config::default()).unwrap();
            let mut voiced: Vec<f64> = track
                .f0_hz
                .iter()
                .zip(&track.voiced)
                .filter(|(_, &v)| v)
                .map(|(f, _)| *f)
                .collect();
            assert!(!voiced.is_empty());
            voiced.sort_by(|a, b| a.total_cmp(b));
            let median = voiced[voiced.len() / 2];
            assert!(
                (median - truth).abs() <= 0.03 * truth,
                "median {median} for {truth} Hz tone"
            );
        }
    }

    #[test]
    fn energy_zero_audio_is_zero() {
        let audio = AudioBuffer::new(vec![0.0; 8000], 16000);
        let e = frame_energy(&audio, &SpectralConfig::default()).unwrap();
        assert!(e.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn energy_steady_sine_is_flat() {
        let audio = sine(440.0, 0.5, 16000, 0.5);
        let e = frame_energy(&audio, &SpectralConfig::default()).unwrap();
        let mid = &e[2..e.len() - 2];
        let mean = mid.iter().sum::<f64>() / mid.len() as f64;
        for &v in mid {
            assert!((v - mean).abs() / mean < 0.01);
        }
    }

    #[test]
    fn energy_doubles_exactly_with_gain_two() {
        let audio = sine(330.0, 0.3, 16000, 0.4);
        let doubled = AudioBuffer::new(audio.samples.iter().map(|s| 2.0 * s).collect(), 16000);
        let cfg = SpectralConfig::default();
        let e1 = frame_energy(&audio, &cfg).unwrap();
        let e2 = frame_energy(&doubled, &cfg).unwrap();
        for (a, b) in e1.iter().zip(&e2) {
            assert_eq!(2.0 * a, *b);
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]

        #[test]
        fn stft_scales_linearly_with_gain(gain in 0.05f64..4.0, freq in 100.0f64..3000.0) {
            let audio = sine(freq, 0.2, 16000, 0.2);
            let scaled = AudioBuffer::new(
                audio.samples.iter().map(|s| gain * s).collect(),
                16000,
            );
            let cfg = SpectralConfig::default();
            let a = stft(&audio, &cfg).unwrap();
            let b = stft(&scaled, &cfg).unwrap();
            for (ra, rb) in a.iter().zip(&b) {
                // Near-zero bins are cancellation noise; bound the error
                // relative to the frame peak.
                let peak = ra.iter().fold(0.0f64, |m, &v| m.max(v)) * gain;
                for (ma, mb) in ra.iter().zip(rb) {
                    prop_assert!((mb - gain * ma).abs() <= 1e-6 * peak.max(1e-12));
                }
            }
        }

        #[test]
        fn cepstra_ignore_gain(gain in 0.1f64..3.0) {
            let audio = harmonic_tone(200.0, 0.2, 16000, 0.3);
            let scaled = AudioBuffer::new(
                audio.samples.iter().map(|s| gain * s).collect(),
                16000,
            );
            let cfg = SpectralConfig::for_cepstra();
            let a = mel_cepstra(&audio, &cfg).unwrap();
            let b = mel_cepstra(&scaled, &cfg).unwrap();
            for (ra, rb) in a.iter().zip(&b) {
                for (ca, cb) in ra.iter().zip(rb) {
                    prop_assert!((ca - cb).abs() <= 1e-6 * ca.abs().max(1.0));
                }
            }
        }
    }
}
