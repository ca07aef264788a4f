//! WAV ingestion: PCM decode, stereo downmix, canonical-rate resampling.

use std::path::Path;

use crate::dsp::{resample, Waveform};
use crate::error::{Error, Result};

/// Reads a PCM WAV file (16-bit integer or 32-bit float, mono or stereo)
/// into a mono [`Waveform`] at `canonical_rate`.
///
/// Integer samples are scaled by 1/32768, stereo is downmixed by averaging
/// the channels, and any other source rate is resampled.
pub fn read_wav(path: &Path, canonical_rate: u32) -> Result<Waveform> {
    let mut reader = hound::WavReader::open(path).map_err(|e| Error::wav(path, e.to_string()))?;
    let spec = reader.spec();
    if spec.channels == 0 || spec.channels > 2 {
        return Err(Error::wav(
            path,
            format!("{} channels; only mono and stereo are supported", spec.channels),
        ));
    }

    let interleaved: Vec<f32> = match (spec.sample_format, spec.bits_per_sample) {
        (hound::SampleFormat::Int, 16) => reader
            .samples::<i16>()
            .map(|s| s.map(|v| v as f32 / 32768.0))
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::wav(path, format!("decode error: {e}")))?,
        (hound::SampleFormat::Float, 32) => reader
            .samples::<f32>()
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::wav(path, format!("decode error: {e}")))?,
        (fmt, bits) => {
            return Err(Error::wav(path, format!("unsupported codec: {bits}-bit {fmt:?}")));
        }
    };

    let mono: Vec<f32> = if spec.channels == 2 {
        interleaved
            .chunks_exact(2)
            .map(|pair| (pair[0] + pair[1]) / 2.0)
            .collect()
    } else {
        interleaved
    };
    if mono.is_empty() {
        return Err(Error::wav(path, "no samples"));
    }

    let samples = if spec.sample_rate == canonical_rate {
        mono
    } else {
        resample(&mono, spec.sample_rate, canonical_rate)?
    };
    Waveform::new(samples, canonical_rate)
}

/// Writes a mono 16-bit PCM WAV. Samples are clamped to `[-1, 1]` and
/// quantized with the same 32768 scale [`read_wav`] divides by.
pub fn write_wav_mono(path: &Path, samples: &[f32], sample_rate: u32) -> Result<()> {
    let spec = hound::WavSpec {
        channels: 1,
        sample_rate,
        bits_per_sample: 16,
        sample_format: hound::SampleFormat::Int,
    };
    let mut writer = hound::WavWriter::create(path, spec)
        .map_err(|e| Error::wav(path, format!("create failed: {e}")))?;
    for &s in samples {
        let v = (s.clamp(-1.0, 1.0) * 32768.0).round().clamp(-32768.0, 32767.0) as i16;
        writer
            .write_sample(v)
            .map_err(|e| Error::wav(path, format!("write failed: {e}")))?;
    }
    writer
        .finalize()
        .map_err(|e| Error::wav(path, format!("finalize failed: {e}")))?;
    Ok(())
}
