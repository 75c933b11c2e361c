use crate::error::CliError;
use std::path::Path;
use vatts_core::corpus::{self, SyntheticSpec};

#[allow(clippy::too_many_arguments)]
pub fn run(
    n: usize,
    seed: u64,
    out: &Path,
    fps: f64,
    sample_rate: u32,
    phonemes: (usize, usize),
    f0_range: (f64, f64),
    no_feedback: bool,
) -> Result<(), CliError> {
    let mut spec = SyntheticSpec::new(n, seed);
    spec.fps = fps;
    spec.sample_rate = sample_rate;
    spec.phonemes_per_utterance = phonemes;
    spec.base_f0_hz = f0_range;
    if no_feedback {
        spec.feedback_rules.clear();
    }
    println!(
        "synth: n={n} seed={seed} fps={fps} sample_rate={sample_rate} \
         phonemes={}..={} f0={}..{} feedback={} out={}",
        phonemes.0,
        phonemes.1,
        f0_range.0,
        f0_range.1,
        !no_feedback,
        out.display()
    );
    std::fs::create_dir_all(out)?;
    let records = corpus::write_corpus(&spec, out)?;
    println!(
        "wrote {} utterances and {}",
        records.len(),
        out.join("manifest.jsonl").display()
    );
    Ok(())
}
