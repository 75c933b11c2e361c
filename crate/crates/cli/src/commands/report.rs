use crate::data;
use crate::error::CliError;
use crate::formats::EvalDoc;
use rayon::prelude::*;
use std::fmt::Write as _;
use std::path::Path;
use vatts_core::dsp::{self, F0Config, SpectralConfig};

/// Emit per-utterance frame-indexed F0/energy columns for external plotting.
pub fn run(input: &Path, plots: &Path) -> Result<(), CliError> {
    println!("report: in={} plots={}", input.display(), plots.display());
    let doc: EvalDoc = serde_json::from_str(
        &std::fs::read_to_string(input)
            .map_err(|e| CliError::data(format!("report {}: {e}", input.display())))?,
    )?;
    let (dir, records) = data::load_sorted_records(Path::new(&doc.ref_manifest))?;
    std::fs::create_dir_all(plots)?;
    let f0_cfg = F0Config::default();
    let spec_cfg = SpectralConfig::default();
    let est_dir = doc.est_audio_dir.as_ref().map(Path::new);

    let pool = data::thread_pool()?;
    let files: Vec<(String, String)> = pool.install(|| {
        records
            .par_iter()
            .map(|record| -> Result<(String, String), CliError> {
                let loaded = data::load_record(&dir, record)?;
                let ref_track = dsp::estimate_f0(&loaded.audio, &f0_cfg)?;
                let ref_energy = dsp::frame_energy(&loaded.audio, &spec_cfg)?;
                let est = est_dir
                    .map(|d| -> Result<_, CliError> {
                        let audio =
                            vatts_core::corpus::read_wav(&d.join(format!("{}.wav", record.id)))?;
                        Ok((
                            dsp::estimate_f0(&audio, &f0_cfg)?,
                            dsp::frame_energy(&audio, &spec_cfg)?,
                        ))
                    })
                    .transpose()?;

                let mut csv = String::new();
                if est.is_some() {
                    csv.push_str("frame,time_s,f0_ref_hz,energy_ref,f0_est_hz,energy_est\n");
                } else {
                    csv.push_str("frame,time_s,f0_ref_hz,energy_ref\n");
                }
                let rows = ref_track.len().max(ref_energy.len());
                for t in 0..rows {
                    let time_s = t as f64 * f0_cfg.hop_ms / 1000.0;
                    let f0 = ref_track.f0_hz.get(t).copied().unwrap_or(0.0);
                    let en = ref_energy.get(t).copied().unwrap_or(0.0);
                    match &est {
                        Some((track, energy)) => {
                            let ef = track.f0_hz.get(t).copied().unwrap_or(0.0);
                            let ee = energy.get(t).copied().unwrap_or(0.0);
                            let _ = writeln!(csv, "{t},{time_s},{f0},{en},{ef},{ee}");
                        }
                        None => {
                            let _ = writeln!(csv, "{t},{time_s},{f0},{en}");
                        }
                    }
                }
                Ok((record.id.clone(), csv))
            })
            .collect::<Result<Vec<_>, _>>()
    })?;

    for (id, csv) in &files {
        std::fs::write(plots.join(format!("{id}.csv")), csv)?;
    }
    println!("wrote {} prosody-curve files", files.len());
    Ok(())
}
