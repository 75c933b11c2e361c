use crate::data;
use crate::error::CliError;
use rayon::prelude::*;
use serde::Deserialize;
use std::fmt::Write as _;
use std::path::Path;
use vatts_core::align::StreamClock;
use vatts_core::dsp::{F0Config, SpectralConfig};
use vatts_core::model::{self, ModelConfig, TrainConfig};

/// Optional config file: either section may be omitted.
#[derive(Debug, Default, Deserialize)]
struct ConfigFile {
    #[serde(default)]
    model: Option<ModelConfig>,
    #[serde(default)]
    train: Option<TrainConfig>,
}

#[allow(clippy::too_many_arguments)]
pub fn run(
    manifest: &Path,
    out: &Path,
    config_path: Option<&Path>,
    seed: Option<u64>,
    epochs: Option<usize>,
    visual_blind: bool,
    latency_ms: f64,
) -> Result<(), CliError> {
    let file: ConfigFile = match config_path {
        Some(p) => serde_json::from_str(
            &std::fs::read_to_string(p)
                .map_err(|e| CliError::data(format!("config {}: {e}", p.display())))?,
        )
        .map_err(|e| CliError::Usage(format!("config {}: {e}", p.display())))?,
        None => ConfigFile::default(),
    };

    let (dir, records) = data::load_sorted_records(manifest)?;
    if records.is_empty() {
        return Err(CliError::data(format!(
            "manifest {} has no records",
            manifest.display()
        )));
    }
    let symbols = data::collect_vocabulary(&dir, &records)?;
    let mut model_cfg = file.model.unwrap_or_default();
    // The embedding table always matches the data.
    model_cfg.phoneme_vocab = symbols.len();

    let mut train_cfg = file.train.unwrap_or_default();
    if let Some(s) = seed {
        train_cfg.seed = s;
    }
    if let Some(e) = epochs {
        train_cfg.epochs = e;
    }
    train_cfg.visual_blind = visual_blind;
    let latency_s = latency_ms / 1000.0;
    train_cfg.phi = StreamClock::derive(records[0].fps, latency_s)?.phi;

    println!(
        "train: manifest={} out={} utterances={} vocab={} seed={} epochs={} lr_max={} \
         visual_blind={visual_blind} latency_ms={latency_ms} d_model={} heads={} blocks={} \
         lstm={}x{}",
        manifest.display(),
        out.display(),
        records.len(),
        symbols.len(),
        train_cfg.seed,
        train_cfg.epochs,
        train_cfg.lr_max,
        model_cfg.d_model,
        model_cfg.heads,
        model_cfg.blocks_k,
        model_cfg.lstm_layers,
        model_cfg.lstm_hidden,
    );

    let f0_cfg = F0Config::default();
    let spec_cfg = SpectralConfig::default();
    let pool = data::thread_pool()?;
    let dataset: Vec<model::Utterance> = pool.install(|| {
        records
            .par_iter()
            .map(|record| {
                let loaded = data::load_record(&dir, record)?;
                data::build_utterance(&loaded, &symbols, latency_s, &f0_cfg, &spec_cfg)
            })
            .collect::<Result<Vec<_>, CliError>>()
    })?;

    let outcome = model::train(&dataset, &model_cfg, &train_cfg)?;

    if let Some(parent) = out.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent)?;
        }
    }
    std::fs::write(
        out,
        model::save_checkpoint(&outcome.params, train_cfg.seed, &symbols, train_cfg.visual_blind),
    )?;

    let mut curve = String::from("epoch,mean_loss,lr_last\n");
    for stats in &outcome.curve {
        let _ = writeln!(curve, "{},{},{}", stats.epoch, stats.mean_loss, stats.lr_last);
    }
    let curve_path = loss_curve_path(out);
    std::fs::write(&curve_path, curve)?;

    let first = outcome.curve.first().unwrap().mean_loss;
    let last = outcome.curve.last().unwrap().mean_loss;
    println!(
        "trained {} epochs: loss {first:.6} -> {last:.6}; checkpoint {}, loss curve {}",
        train_cfg.epochs,
        out.display(),
        curve_path.display()
    );
    Ok(())
}

pub fn loss_curve_path(ckpt: &Path) -> std::path::PathBuf {
    let mut s = ckpt.as_os_str().to_os_string();
    s.push(".loss.csv");
    std::path::PathBuf::from(s)
}
