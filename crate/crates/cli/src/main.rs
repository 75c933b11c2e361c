//! Command-line surface for the listener-aware prosody pipeline.
//!
//! Exit codes: 0 success, 1 usage error, 2 data error, 3 numeric failure.

mod commands;
mod data;
mod error;
mod formats;

use clap::{Parser, Subcommand};
use error::CliError;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "vatts",
    version,
    about = "Listener-aware prosody prediction pipeline",
    arg_required_else_help = true
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print the causal frame lag covering a synthesis latency budget.
    Phi {
        /// Listener video frame rate.
        #[arg(long)]
        fps: f64,
        /// Per-phoneme synthesis latency budget in milliseconds.
        #[arg(long)]
        latency_ms: f64,
    },
    /// Generate a synthetic corpus with known prosody ground truth.
    Synth {
        /// Number of utterances.
        #[arg(long)]
        n: usize,
        #[arg(long)]
        seed: u64,
        /// Output corpus directory.
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 30.0)]
        fps: f64,
        #[arg(long, default_value_t = 22050)]
        sample_rate: u32,
        #[arg(long, default_value_t = 6)]
        min_phonemes: usize,
        #[arg(long, default_value_t = 12)]
        max_phonemes: usize,
        #[arg(long, default_value_t = 170.0)]
        f0_min: f64,
        #[arg(long, default_value_t = 255.0)]
        f0_max: f64,
        /// Disable listener feedback rules (prosody stays at base values).
        #[arg(long)]
        no_feedback: bool,
    },
    /// Extract per-phoneme prosody targets and speech representations.
    Extract {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 2.67)]
        latency_ms: f64,
    },
    /// Train the prosody predictor.
    Train {
        #[arg(long)]
        manifest: PathBuf,
        /// Checkpoint output path; the loss curve lands next to it.
        #[arg(long)]
        out: PathBuf,
        /// JSON file with optional "model" and "train" sections.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        epochs: Option<usize>,
        /// Zero all listener states: the classical-TTS baseline ablation.
        #[arg(long)]
        visual_blind: bool,
        #[arg(long, default_value_t = 2.67)]
        latency_ms: f64,
    },
    /// Predict prosody with streaming (duration-accumulated) cutoffs.
    Infer {
        #[arg(long)]
        ckpt: PathBuf,
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 2.67)]
        latency_ms: f64,
    },
    /// Score predictions (and optionally estimated audio) against ground truth.
    Eval {
        #[arg(long)]
        ref_manifest: PathBuf,
        /// Directory of per-utterance prediction JSON files.
        #[arg(long)]
        pred: PathBuf,
        /// Directory of estimated audio (<id>.wav) for MCD/GPE/VDE/FFE.
        #[arg(long)]
        est_audio: Option<PathBuf>,
        /// Output base path; writes <out>.csv and <out>.json.
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value = "pred")]
        system: String,
        /// Include a timestamp in the report (off by default: reruns stay
        /// byte-identical).
        #[arg(long)]
        stamp: bool,
    },
    /// Emit per-utterance frame-indexed F0/energy data for plotting.
    Report {
        /// An eval JSON document.
        #[arg(long, value_name = "REPORT_JSON")]
        r#in: PathBuf,
        #[arg(long)]
        plots: PathBuf,
    },
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Phi { fps, latency_ms } => commands::phi::run(fps, latency_ms),
        Command::Synth {
            n,
            seed,
            out,
            fps,
            sample_rate,
            min_phonemes,
            max_phonemes,
            f0_min,
            f0_max,
            no_feedback,
        } => commands::synth::run(
            n,
            seed,
            &out,
            fps,
            sample_rate,
            (min_phonemes, max_phonemes),
            (f0_min, f0_max),
            no_feedback,
        ),
        Command::Extract {
            manifest,
            out,
            latency_ms,
        } => commands::extract::run(&manifest, &out, latency_ms),
        Command::Train {
            manifest,
            out,
            config,
            seed,
            epochs,
            visual_blind,
            latency_ms,
        } => commands::train::run(
            &manifest,
            &out,
            config.as_deref(),
            seed,
            epochs,
            visual_blind,
            latency_ms,
        ),
        Command::Infer {
            ckpt,
            manifest,
            out,
            latency_ms,
        } => commands::infer::run(&ckpt, &manifest, &out, latency_ms),
        Command::Eval {
            ref_manifest,
            pred,
            est_audio,
            out,
            system,
            stamp,
        } => commands::eval::run(
            &ref_manifest,
            &pred,
            est_audio.as_deref(),
            &out,
            &system,
            stamp,
        ),
        Command::Report { r#in, plots } => commands::report::run(&r#in, &plots),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
