//! Causal alignment of phonemes to listener video frames.
//!
//! Frames are 1-based; frame `j` covers `[(j-1)*tau, j*tau)`. For phoneme `i`
//! starting at frame `a_hat_i`, only frames up to `a_i = a_hat_i - phi` may be
//! consumed, where `phi` is the smallest integer (clamped to >= 1) whose lead
//! time `phi*tau` covers the per-phoneme synthesis latency. `a_i = 0` means no
//! listener history is available at all.

use std::fmt::Write as _;
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum AlignError {
    #[error("tau must be positive, got {0}")]
    NonPositiveTau(f64),
    #[error("latency must be non-negative, got {0}")]
    NegativeLatency(f64),
    #[error("predicted duration at phoneme {index} is negative ({value})")]
    NegativeDuration { index: usize, value: f64 },
    #[error("alignment has no entries")]
    EmptyAlignment,
    #[error("entry {index}: end {end} not after start {start}")]
    BadInterval { index: usize, start: f64, end: f64 },
    #[error("entry {index} starts at {start}, before previous end {prev_end}")]
    Overlap {
        index: usize,
        start: f64,
        prev_end: f64,
    },
    #[error("{path}:{line}: {message}")]
    Tsv {
        path: String,
        line: usize,
        message: String,
    },
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

/// One phoneme with its forced-alignment interval in seconds.
#[derive(Debug, Clone, PartialEq)]
pub struct PhonemeEntry {
    pub phoneme: String,
    pub start_s: f64,
    pub end_s: f64,
}

impl PhonemeEntry {
    pub fn duration_s(&self) -> f64 {
        self.end_s - self.start_s
    }
}

/// Ordered, non-overlapping phoneme intervals. Gaps (silences) are allowed.
#[derive(Debug, Clone, PartialEq)]
pub struct PhonemeAlignment {
    entries: Vec<PhonemeEntry>,
}

impl PhonemeAlignment {
    pub fn new(entries: Vec<PhonemeEntry>) -> Result<Self, AlignError> {
        if entries.is_empty() {
            return Err(AlignError::EmptyAlignment);
        }
        let mut prev_end = f64::NEG_INFINITY;
        for (index, e) in entries.iter().enumerate() {
            if !(e.end_s > e.start_s) || e.start_s < 0.0 {
                return Err(AlignError::BadInterval {
                    index,
                    start: e.start_s,
                    end: e.end_s,
                });
            }
            if e.start_s < prev_end {
                return Err(AlignError::Overlap {
                    index,
                    start: e.start_s,
                    prev_end,
                });
            }
            prev_end = e.end_s;
        }
        Ok(Self { entries })
    }

    pub fn entries(&self) -> &[PhonemeEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn end_s(&self) -> f64 {
        self.entries.last().map(|e| e.end_s).unwrap_or(0.0)
    }

    /// Parse the forced-aligner export: `phoneme<TAB>start_s<TAB>end_s`,
    /// one line per phoneme, no header.
    pub fn from_tsv(path: &Path) -> Result<Self, AlignError> {
        let text = std::fs::read_to_string(path).map_err(|source| AlignError::Io {
            path: path.display().to_string(),
            source,
        })?;
        let mut entries = Vec::new();
        for (i, line) in text.lines().enumerate() {
            if line.is_empty() {
                continue;
            }
            let mut fields = line.split('\t');
            let tsv_err = |message: String| AlignError::Tsv {
                path: path.display().to_string(),
                line: i + 1,
                message,
            };
            let phoneme = fields
                .next()
                .filter(|p| !p.is_empty())
                .ok_or_else(|| tsv_err("missing phoneme".into()))?;
            let mut number = |name: &str| -> Result<f64, AlignError> {
                let raw = fields
                    .next()
                    .ok_or_else(|| tsv_err(format!("missing {name}")))?;
                raw.parse::<f64>()
                    .map_err(|_| tsv_err(format!("bad {name} {raw:?}")))
            };
            let start_s = number("start")?;
            let end_s = number("end")?;
            if fields.next().is_some() {
                return Err(tsv_err("trailing fields".into()));
            }
            entries.push(PhonemeEntry {
                phoneme: phoneme.to_string(),
                start_s,
                end_s,
            });
        }
        Self::new(entries)
    }

    /// Serialize to the TSV contract. Seconds keep full precision and are
    /// padded to at least three fractional digits.
    pub fn to_tsv(&self) -> String {
        let mut out = String::new();
        for e in &self.entries {
            let _ = writeln!(
                out,
                "{}\t{}\t{}",
                e.phoneme,
                format_seconds(e.start_s),
                format_seconds(e.end_s)
            );
        }
        out
    }
}

/// Round-trip-exact decimal seconds with at least 3 fractional digits.
pub(crate) fn format_seconds(value: f64) -> String {
    let mut s = format!("{value}");
    if !s.contains('.') {
        s.push('.');
    }
    let frac = s.len() - s.find('.').unwrap() - 1;
    for _ in frac..3 {
        s.push('0');
    }
    s
}

/// Stream timing: frame interval, causal lag and the latency it covers.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StreamClock {
    pub tau_s: f64,
    pub phi: usize,
    pub latency_s: f64,
}

impl StreamClock {
    /// Derive the clock for a frame rate and a per-phoneme synthesis budget.
    pub fn derive(fps: f64, latency_s: f64) -> Result<Self, AlignError> {
        if !(fps > 0.0) {
            return Err(AlignError::NonPositiveTau(fps));
        }
        let tau_s = 1.0 / fps;
        Ok(Self {
            tau_s,
            phi: compute_phi(tau_s, latency_s)?,
            latency_s,
        })
    }
}

/// Smallest integer lag `phi >= 1` with `phi * tau >= latency`.
pub fn compute_phi(tau_s: f64, latency_s: f64) -> Result<usize, AlignError> {
    if !(tau_s > 0.0) {
        return Err(AlignError::NonPositiveTau(tau_s));
    }
    if !(latency_s >= 0.0) {
        return Err(AlignError::NegativeLatency(latency_s));
    }
    let mut phi = (latency_s / tau_s).ceil() as usize;
    // Settle ties exactly in f64: phi*tau == latency is accepted, and the
    // division above may land one step off either way.
    while (phi as f64) * tau_s < latency_s {
        phi += 1;
    }
    while phi > 0 && (phi as f64 - 1.0) * tau_s >= latency_s {
        phi -= 1;
    }
    Ok(phi.max(1))
}

/// 1-based index of the frame containing `start_s`; boundary times belong to
/// the later frame.
pub fn start_frame(start_s: f64, tau_s: f64) -> usize {
    (start_s / tau_s).floor() as usize + 1
}

/// Last usable listener frame: `max(a_hat - phi, 0)`, 0 meaning no history.
pub fn causal_cutoff(a_hat: usize, phi: usize) -> usize {
    a_hat.saturating_sub(phi)
}

/// Offline cutoffs plus any coverage diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct OfflineCutoffs {
    pub cutoffs: Vec<usize>,
    pub warnings: Vec<String>,
}

/// Per-phoneme cutoffs from forced-alignment start times, clamped to the
/// number of frames actually available.
pub fn align_offline(
    align: &PhonemeAlignment,
    clock: &StreamClock,
    frame_count: usize,
) -> OfflineCutoffs {
    let cutoffs = align
        .entries()
        .iter()
        .map(|e| causal_cutoff(start_frame(e.start_s, clock.tau_s), clock.phi).min(frame_count))
        .collect();
    let mut warnings = Vec::new();
    let covered_s = frame_count as f64 * clock.tau_s;
    if align.end_s() > covered_s + clock.tau_s {
        warnings.push(format!(
            "alignment ends at {:.3} s but the listener stream covers only {:.3} s",
            align.end_s(),
            covered_s
        ));
    }
    OfflineCutoffs { cutoffs, warnings }
}

/// Streaming cutoffs from predicted durations: phoneme `i` starts at the
/// prefix sum of the previous predicted durations.
pub fn align_streaming(
    pred_durations_s: &[f64],
    clock: &StreamClock,
) -> Result<Vec<usize>, AlignError> {
    let mut cutoffs = Vec::with_capacity(pred_durations_s.len());
    let mut start_s = 0.0;
    for (index, &d) in pred_durations_s.iter().enumerate() {
        if !(d >= 0.0) {
            return Err(AlignError::NegativeDuration { index, value: d });
        }
        cutoffs.push(causal_cutoff(start_frame(start_s, clock.tau_s), clock.phi));
        start_s += d;
    }
    Ok(cutoffs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn clock_30fps() -> StreamClock {
        StreamClock::derive(30.0, 0.00267).unwrap()
    }

    fn alignment(starts_and_ends: &[(f64, f64)]) -> PhonemeAlignment {
        PhonemeAlignment::new(
            starts_and_ends
                .iter()
                .enumerate()
                .map(|(i, &(start_s, end_s))| PhonemeEntry {
                    phoneme: format!("p{i:02}"),
                    start_s,
                    end_s,
                })
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn phi_covers_measured_latency_with_one_frame() {
        assert_eq!(compute_phi(1.0 / 30.0, 0.00267).unwrap(), 1);
    }

    #[test]
    fn phi_rounds_up_to_cover_latency() {
        assert_eq!(compute_phi(1.0 / 30.0, 0.040).unwrap(), 2);
    }

    #[test]
    fn phi_clamps_to_one_for_zero_latency() {
        assert_eq!(compute_phi(1.0 / 30.0, 0.0).unwrap(), 1);
    }

    #[test]
    fn phi_accepts_exact_tie() {
        // 2 * 0.02 == 0.04 exactly in f64.
        assert_eq!(compute_phi(0.02, 0.04).unwrap(), 2);
    }

    #[test]
    fn phi_rejects_bad_tau() {
        assert!(compute_phi(0.0, 0.1).is_err());
        assert!(compute_phi(-1.0, 0.1).is_err());
    }

    #[test]
    fn start_frame_examples() {
        let tau = 1.0 / 30.0;
        assert_eq!(start_frame(0.0, tau), 1);
        assert_eq!(start_frame(0.1, tau), 4); // 0.1/tau = 3.0 exactly, later frame
        assert_eq!(start_frame(0.095, tau), 3); // floor(2.85) + 1
    }

    #[test]
    fn causal_cutoff_examples() {
        assert_eq!(causal_cutoff(4, 1), 3);
        assert_eq!(causal_cutoff(1, 1), 0);
        assert_eq!(causal_cutoff(10, 3), 7);
    }

    #[test]
    fn offline_cutoffs_example() {
        let align = alignment(&[(0.0, 0.1), (0.1, 0.3), (0.3, 0.5)]);
        let got = align_offline(&align, &clock_30fps(), 100);
        assert_eq!(got.cutoffs, vec![0, 3, 9]);
        assert!(got.warnings.is_empty());
    }

    #[test]
    fn offline_with_no_frames_is_all_zero() {
        let align = alignment(&[(0.0, 0.1), (0.5, 0.9)]);
        let got = align_offline(&align, &clock_30fps(), 0);
        assert_eq!(got.cutoffs, vec![0, 0]);
    }

    #[test]
    fn offline_single_phoneme_at_origin() {
        let align = alignment(&[(0.0, 0.2)]);
        assert_eq!(align_offline(&align, &clock_30fps(), 50).cutoffs, vec![0]);
    }

    #[test]
    fn offline_warns_when_alignment_outruns_stream() {
        let align = alignment(&[(0.0, 5.0)]);
        let got = align_offline(&align, &clock_30fps(), 30);
        assert_eq!(got.warnings.len(), 1);
    }

    #[test]
    fn streaming_cutoffs_example() {
        let got = align_streaming(&[0.1, 0.2], &clock_30fps()).unwrap();
        assert_eq!(got, vec![0, 3]);
    }

    #[test]
    fn streaming_zero_durations_stay_at_zero() {
        let got = align_streaming(&[0.0, 0.0, 0.0], &clock_30fps()).unwrap();
        assert_eq!(got, vec![0, 0, 0]);
    }

    #[test]
    fn streaming_first_phoneme_has_no_past() {
        assert_eq!(align_streaming(&[1.0], &clock_30fps()).unwrap(), vec![0]);
    }

    #[test]
    fn streaming_rejects_negative_duration() {
        assert!(matches!(
            align_streaming(&[0.1, -0.2], &clock_30fps()),
            Err(AlignError::NegativeDuration { index: 1, .. })
        ));
    }

    #[test]
    fn tsv_round_trip() {
        let align = alignment(&[(0.0, 0.08), (0.08, 0.203), (0.31, 0.52)]);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("a.tsv");
        std::fs::write(&path, align.to_tsv()).unwrap();
        let back = PhonemeAlignment::from_tsv(&path).unwrap();
        assert_eq!(align, back);
    }

    #[test]
    fn tsv_keeps_three_fraction_digits() {
        assert_eq!(format_seconds(0.08), "0.080");
        assert_eq!(format_seconds(0.0), "0.000");
        assert_eq!(format_seconds(1.5), "1.500");
        assert_eq!(format_seconds(0.12345), "0.12345");
    }

    #[test]
    fn tsv_errors_name_the_line() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.tsv");
        std::fs::write(&path, "aa\t0.0\t0.1\nbb\tnope\t0.2\n").unwrap();
        let err = PhonemeAlignment::from_tsv(&path).unwrap_err();
        assert!(matches!(err, AlignError::Tsv { line: 2, .. }), "{err}");
    }

    #[test]
    fn alignment_rejects_overlap_and_bad_intervals() {
        assert!(PhonemeAlignment::new(vec![PhonemeEntry {
            phoneme: "a".into(),
            start_s: 0.2,
            end_s: 0.1,
        }])
        .is_err());
        assert!(PhonemeAlignment::new(vec![
            PhonemeEntry {
                phoneme: "a".into(),
                start_s: 0.0,
                end_s: 0.3,
            },
            PhonemeEntry {
                phoneme: "b".into(),
                start_s: 0.2,
                end_s: 0.4,
            },
        ])
        .is_err());
    }

    /// Frame membership by linear scan instead of arithmetic.
    fn brute_force_start_frame(start_s: f64, tau_s: f64) -> usize {
        let mut j = 1usize;
        loop {
            let lo = (j - 1) as f64 * tau_s;
            let hi = j as f64 * tau_s;
            if start_s >= lo && start_s < hi {
                return j;
            }
            j += 1;
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(256))]

        #[test]
        fn phi_is_minimal(tau_ms in 1.0f64..100.0, latency_ms in 0.0f64..500.0) {
            let tau = tau_ms / 1000.0;
            let latency = latency_ms / 1000.0;
            let phi = compute_phi(tau, latency).unwrap();
            prop_assert!(phi as f64 * tau >= latency);
            if phi > 1 {
                prop_assert!((phi as f64 - 1.0) * tau < latency);
            }
        }

        #[test]
        fn start_frame_matches_frame_scan(start_ms in 0.0f64..5000.0, fps in 5.0f64..120.0) {
            let tau = 1.0 / fps;
            let start = start_ms / 1000.0;
            prop_assert_eq!(start_frame(start, tau), brute_force_start_frame(start, tau));
        }

        #[test]
        fn offline_cutoffs_monotone_and_causal(
            durations in proptest::collection::vec(0.02f64..0.5, 1..20),
            gap in 0.0f64..0.05,
            fps in 10.0f64..60.0,
            latency_ms in 0.0f64..80.0,
        ) {
            let mut t = 0.0;
            let mut spans = Vec::new();
            for d in &durations {
                spans.push((t, t + d));
                t += d + gap;
            }
            let align = alignment(&spans);
            let clock = StreamClock::derive(fps, latency_ms / 1000.0).unwrap();
            let got = align_offline(&align, &clock, 10_000);
            for w in got.cutoffs.windows(2) {
                prop_assert!(w[0] <= w[1]);
            }
            // No consumed frame may touch the phoneme's own start frame.
            for (e, &a) in align.entries().iter().zip(&got.cutoffs) {
                let a_hat = start_frame(e.start_s, clock.tau_s);
                prop_assert!(a + clock.phi <= a_hat || a == 0);
            }
        }

        #[test]
        fn streaming_agrees_with_offline_on_gapless_alignments(
            durations in proptest::collection::vec(0.02f64..0.5, 1..20),
            fps in 10.0f64..60.0,
        ) {
            let mut t = 0.0;
            let mut spans = Vec::new();
            for d in &durations {
                spans.push((t, t + d));
                t += d;
            }
            let starts: Vec<f64> = spans.iter().map(|s| s.0).collect();
            let align = alignment(&spans);
            let clock = StreamClock::derive(fps, 0.00267).unwrap();
            let offline = align_offline(&align, &clock, usize::MAX);
            let streaming = align_streaming(&durations, &clock).unwrap();
            // Prefix sums must reproduce the offline starts for the check to
            // be meaningful; both sides use the same accumulation here.
            let mut acc = 0.0;
            for (i, &s) in starts.iter().enumerate() {
                prop_assert!((acc - s).abs() < 1e-12);
                acc += durations[i];
            }
            prop_assert_eq!(offline.cutoffs, streaming);
        }
    }
}
