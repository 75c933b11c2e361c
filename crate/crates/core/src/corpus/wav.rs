//! PCM 16-bit mono RIFF/WAVE reading and writing.
//!
//! Samples map to [-1, 1] by 1/32768 on read; writing rounds half away from
//! zero and clamps, so a write/read round trip deviates by at most one
//! quantization step.

use super::CorpusError;
use crate::dsp::AudioBuffer;
use std::path::Path;

fn err(path: &Path, message: impl Into<String>) -> CorpusError {
    CorpusError::Wav {
        path: path.display().to_string(),
        message: message.into(),
    }
}

pub fn read_wav(path: &Path) -> Result<AudioBuffer, CorpusError> {
    let bytes = std::fs::read(path).map_err(|source| CorpusError::Io {
        path: path.display().to_string(),
        source,
    })?;
    decode_wav(&bytes).map_err(|message| err(path, message))
}

pub(crate) fn decode_wav(bytes: &[u8]) -> Result<AudioBuffer, String> {
    if bytes.len() < 12 || &bytes[0..4] != b"RIFF" || &bytes[8..12] != b"WAVE" {
        return Err("truncated or missing RIFF/WAVE header".into());
    }
    let mut pos = 12;
    let mut format: Option<(u16, u16, u32, u16)> = None;
    let mut data: Option<&[u8]> = None;
    while pos + 8 <= bytes.len() {
        let id = &bytes[pos..pos + 4];
        let size = u32::from_le_bytes(bytes[pos + 4..pos + 8].try_into().unwrap()) as usize;
        let body_start = pos + 8;
        if body_start + size > bytes.len() {
            return Err(format!(
                "chunk {:?} claims {size} bytes past end of file",
                String::from_utf8_lossy(id)
            ));
        }
        let body = &bytes[body_start..body_start + size];
        match id {
            b"fmt " => {
                if size < 16 {
                    return Err("fmt chunk shorter than 16 bytes".into());
                }
                let audio_format = u16::from_le_bytes(body[0..2].try_into().unwrap());
                let channels = u16::from_le_bytes(body[2..4].try_into().unwrap());
                let sample_rate = u32::from_le_bytes(body[4..8].try_into().unwrap());
                let bits = u16::from_le_bytes(body[14..16].try_into().unwrap());
                format = Some((audio_format, channels, sample_rate, bits));
            }
            b"data" => data = Some(body),
            _ => {} // skip LIST, fact, ...
        }
        // Chunks are word-aligned.
        pos = body_start + size + (size & 1);
    }

    let (audio_format, channels, sample_rate, bits) =
        format.ok_or("missing fmt chunk")?;
    if audio_format != 1 {
        return Err(format!("PCM required, got format tag {audio_format}"));
    }
    if channels != 1 {
        return Err(format!("mono required, got {channels} channels"));
    }
    if bits != 16 {
        return Err(format!("16-bit depth required, got {bits}"));
    }
    if sample_rate == 0 {
        return Err("sample rate is zero".into());
    }
    let data = data.ok_or("missing data chunk")?;
    if data.len() % 2 != 0 {
        return Err("data chunk has odd byte length".into());
    }
    let samples = data
        .chunks_exact(2)
        .map(|b| i16::from_le_bytes([b[0], b[1]]) as f64 / 32768.0)
        .collect();
    Ok(AudioBuffer::new(samples, sample_rate))
}

pub fn write_wav(path: &Path, audio: &AudioBuffer) -> Result<(), CorpusError> {
    let bytes = encode_wav(audio);
    std::fs::write(path, bytes).map_err(|source| CorpusError::Io {
        path: path.display().to_string(),
        source,
    })
}

pub(crate) fn encode_wav(audio: &AudioBuffer) -> Vec<u8> {
    let data_len = (audio.samples.len() * 2) as u32;
    let mut out = Vec::with_capacity(44 + data_len as usize);
    out.extend_from_slice(b"RIFF");
    out.extend_from_slice(&(36 + data_len).to_le_bytes());
    out.extend_from_slice(b"WAVE");
    out.extend_from_slice(b"fmt ");
    out.extend_from_slice(&16u32.to_le_bytes());
    out.extend_from_slice(&1u16.to_le_bytes()); // PCM
    out.extend_from_slice(&1u16.to_le_bytes()); // mono
    out.extend_from_slice(&audio.sample_rate.to_le_bytes());
    out.extend_from_slice(&(audio.sample_rate * 2).to_le_bytes());
    out.extend_from_slice(&2u16.to_le_bytes());
    out.extend_from_slice(&16u16.to_le_bytes());
    out.extend_from_slice(b"data");
    out.extend_from_slice(&data_len.to_le_bytes());
    for &s in &audio.samples {
        let q = (s * 32768.0).round().clamp(-32768.0, 32767.0) as i16;
        out.extend_from_slice(&q.to_le_bytes());
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_stays_within_one_quantization_step() {
        let samples: Vec<f64> = (0..4000)
            .map(|i| 0.9 * (2.0 * std::f64::consts::PI * 330.0 * i as f64 / 22050.0).sin())
            .collect();
        let audio = AudioBuffer::new(samples, 22050);
        let back = decode_wav(&encode_wav(&audio)).unwrap();
        assert_eq!(back.sample_rate, 22050);
        assert_eq!(back.samples.len(), audio.samples.len());
        for (a, b) in audio.samples.iter().zip(&back.samples) {
            assert!((a - b).abs() <= 1.0 / 32768.0);
        }
    }

    #[test]
    fn high_rate_files_keep_their_sample_rate() {
        let audio = AudioBuffer::new(vec![0.0; 480], 48000);
        let back = decode_wav(&encode_wav(&audio)).unwrap();
        assert_eq!(back.sample_rate, 48000);
    }

    #[test]
    fn stereo_is_rejected() {
        let mut bytes = encode_wav(&AudioBuffer::new(vec![0.0; 16], 16000));
        bytes[22] = 2; // channel count
        let msg = decode_wav(&bytes).unwrap_err();
        assert!(msg.contains("mono required"), "{msg}");
    }

    #[test]
    fn non_pcm_is_rejected() {
        let mut bytes = encode_wav(&AudioBuffer::new(vec![0.0; 16], 16000));
        bytes[20] = 3; // IEEE float format tag
        let msg = decode_wav(&bytes).unwrap_err();
        assert!(msg.contains("PCM required"), "{msg}");
    }

    #[test]
    fn truncated_header_is_rejected() {
        assert!(decode_wav(b"RIFFxx").is_err());
        assert!(decode_wav(b"RIFF\x00\x00\x00\x00WAV!").is_err());
    }

    #[test]
    fn clipping_samples_clamp_instead_of_wrapping() {
        let audio = AudioBuffer::new(vec![1.5, -1.5], 8000);
        let back = decode_wav(&encode_wav(&audio)).unwrap();
        assert!((back.samples[0] - 32767.0 / 32768.0).abs() < 1e-9);
        assert!((back.samples[1] + 1.0).abs() < 1e-9);
    }
}
