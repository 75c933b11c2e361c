use crate::data;
use crate::error::CliError;
use crate::formats::{EvalDoc, InferDoc, UtteranceEval};
use rayon::prelude::*;
use std::path::{Path, PathBuf};
use vatts_core::dsp::{self, F0Config, F0Track, SpectralConfig};
use vatts_core::features;
use vatts_core::metrics::{
    self, F0CompareConfig, MaeAccumulator, MetricReport, RatioMetric,
};

struct UtteranceScores {
    id: String,
    mae: MaeAccumulator,
    mcd13: Option<f64>,
    gpe: Option<(usize, usize)>,
    vde: Option<(usize, usize)>,
    ffe: Option<(usize, usize)>,
}

pub fn out_paths(base: &Path) -> (PathBuf, PathBuf) {
    let mut csv = base.as_os_str().to_os_string();
    csv.push(".csv");
    let mut json = base.as_os_str().to_os_string();
    json.push(".json");
    (PathBuf::from(csv), PathBuf::from(json))
}

fn truncate_tracks(a: F0Track, b: F0Track) -> (F0Track, F0Track) {
    let n = a.len().min(b.len());
    (
        F0Track {
            f0_hz: a.f0_hz[..n].to_vec(),
            voiced: a.voiced[..n].to_vec(),
            hop_ms: a.hop_ms,
        },
        F0Track {
            f0_hz: b.f0_hz[..n].to_vec(),
            voiced: b.voiced[..n].to_vec(),
            hop_ms: b.hop_ms,
        },
    )
}

#[allow(clippy::too_many_arguments)]
pub fn run(
    ref_manifest: &Path,
    pred_dir: &Path,
    est_audio_dir: Option<&Path>,
    out_base: &Path,
    system: &str,
    stamp: bool,
) -> Result<(), CliError> {
    println!(
        "eval: ref_manifest={} pred={} est_audio={} out={} system={system}",
        ref_manifest.display(),
        pred_dir.display(),
        est_audio_dir.map(|p| p.display().to_string()).unwrap_or_else(|| "-".into()),
        out_base.display()
    );
    let (dir, records) = data::load_sorted_records(ref_manifest)?;
    let f0_cfg = F0Config::default();
    let spec_cfg = SpectralConfig::default();
    let cep_cfg = SpectralConfig::for_cepstra();
    let cmp_cfg = F0CompareConfig::default();

    let pool = data::thread_pool()?;
    let scores: Vec<UtteranceScores> = pool.install(|| {
        records
            .par_iter()
            .map(|record| -> Result<UtteranceScores, CliError> {
                let loaded = data::load_record(&dir, record)?;
                let targets = features::extract_prosody_targets(
                    &loaded.audio,
                    &loaded.alignment,
                    &f0_cfg,
                    &spec_cfg,
                )?;
                let pred_path = pred_dir.join(format!("{}.json", record.id));
                let doc: InferDoc = serde_json::from_str(
                    &std::fs::read_to_string(&pred_path).map_err(|e| {
                        CliError::data(format!("predictions {}: {e}", pred_path.display()))
                    })?,
                )?;
                let predictions = doc.predictions();
                if predictions.len() != targets.len() {
                    return Err(CliError::data(format!(
                        "{}: {} predictions for {} phonemes",
                        record.id,
                        predictions.len(),
                        targets.len()
                    )));
                }
                let mut mae = MaeAccumulator::default();
                for (t, p) in targets.iter().zip(&predictions) {
                    mae.push(t, p);
                }

                let mut scores = UtteranceScores {
                    id: record.id.clone(),
                    mae,
                    mcd13: None,
                    gpe: None,
                    vde: None,
                    ffe: None,
                };
                if let Some(est_dir) = est_audio_dir {
                    let est_path = est_dir.join(format!("{}.wav", record.id));
                    let est = vatts_core::corpus::read_wav(&est_path)?;
                    scores.mcd13 = Some(metrics::mcd13(&loaded.audio, &est, &cep_cfg)?);
                    let ref_track = dsp::estimate_f0(&loaded.audio, &f0_cfg)?;
                    let est_track = dsp::estimate_f0(&est, &f0_cfg)?;
                    let (ref_track, est_track) = truncate_tracks(ref_track, est_track);
                    let g = metrics::gpe(&ref_track, &est_track, &cmp_cfg)?;
                    let v = metrics::vde(&ref_track, &est_track)?;
                    let f = metrics::ffe(&ref_track, &est_track, &cmp_cfg)?;
                    scores.gpe = Some((g.errors, g.denominator));
                    scores.vde = Some((v.errors, v.denominator));
                    scores.ffe = Some((f.errors, f.denominator));
                }
                Ok(scores)
            })
            .collect::<Result<Vec<_>, _>>()
    })?;

    // Deterministic reduction: scores arrive in manifest (id-sorted) order.
    let mut mae_total = MaeAccumulator::default();
    let mut rate_totals = [(0usize, 0usize); 3]; // gpe, vde, ffe
    let mut mcd_sum = 0.0;
    let mut mcd_count = 0usize;
    let mut utterances = Vec::with_capacity(scores.len());
    for s in &scores {
        mae_total.merge(&s.mae);
        for (slot, counts) in rate_totals.iter_mut().zip([s.gpe, s.vde, s.ffe]) {
            if let Some((e, d)) = counts {
                slot.0 += e;
                slot.1 += d;
            }
        }
        if let Some(m) = s.mcd13 {
            mcd_sum += m;
            mcd_count += 1;
        }
        utterances.push(UtteranceEval {
            id: s.id.clone(),
            mae: s.mae.finish(),
            mcd13: s.mcd13,
        });
    }
    let ratio = |(errors, denominator): (usize, usize)| RatioMetric {
        percent: if denominator == 0 {
            0.0
        } else {
            100.0 * errors as f64 / denominator as f64
        },
        errors,
        denominator,
    };
    let have_audio = mcd_count > 0;
    let report = MetricReport {
        system: system.to_string(),
        gpe: have_audio.then(|| ratio(rate_totals[0])),
        vde: have_audio.then(|| ratio(rate_totals[1])),
        ffe: have_audio.then(|| ratio(rate_totals[2])),
        mcd13: have_audio.then(|| mcd_sum / mcd_count as f64),
        mae: mae_total.finish(),
    };

    let doc = EvalDoc {
        system: system.to_string(),
        ref_manifest: ref_manifest.display().to_string(),
        pred_dir: pred_dir.display().to_string(),
        est_audio_dir: est_audio_dir.map(|p| p.display().to_string()),
        stamp: stamp.then(|| {
            let now = std::time::SystemTime::now()
                .duration_since(std::time::UNIX_EPOCH)
                .map(|d| d.as_secs())
                .unwrap_or(0);
            format!("unix:{now}")
        }),
        report: report.clone(),
        utterances,
    };

    let (csv_path, json_path) = out_paths(out_base);
    if let Some(parent) = out_base.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent)?;
        }
    }
    std::fs::write(
        &csv_path,
        format!("{}\n{}\n", MetricReport::csv_header(), report.csv_row()),
    )?;
    let mut text = serde_json::to_string_pretty(&doc)?;
    text.push('\n');
    std::fs::write(&json_path, text)?;

    println!(
        "MAE: pitch {:.4} Hz, energy {:.4}, duration {:.4} ms (over {} phonemes)",
        report.mae.pitch_hz, report.mae.energy, report.mae.duration_ms, report.mae.duration_count
    );
    if let Some(m) = report.mcd13 {
        println!(
            "MCD13 {:.4}, GPE {:.2}%, VDE {:.2}%, FFE {:.2}%",
            m,
            report.gpe.unwrap().percent,
            report.vde.unwrap().percent,
            report.ffe.unwrap().percent
        );
    }
    println!("wrote {} and {}", csv_path.display(), json_path.display());
    Ok(())
}
