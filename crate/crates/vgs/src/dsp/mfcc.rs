//! MFCC extraction: framing, Hamming window, power spectrum, mel filterbank,
//! log, DCT, per-utterance normalization and regression deltas.
//!
//! All arithmetic runs in `f64` and is rounded to `f32` only when the final
//! feature matrix is assembled, so the pipeline is bit-deterministic and easy
//! to compare against a reference implementation.

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use crate::autodiff::tensor::{Scalar, Tensor};
use crate::dsp::resample::resample;
use crate::dsp::{AudioFeatures, FeatureConfig, Waveform};
use crate::error::{Error, Result};

/// Columns with standard deviation below this keep their scale after mean
/// removal instead of being divided by a near-zero std.
const VARIANCE_FLOOR: f64 = 1e-8;

/// Runs the full front-end on one utterance.
///
/// The waveform is resampled to the configured canonical rate, pre-emphasized
/// and cut into overlapping frames; each frame yields `num_ceps` cepstral
/// coefficients which are normalized per utterance and augmented with first
/// and second derivatives. Output is `T×(3·num_ceps)` (39 columns with the
/// default 13 coefficients).
pub fn extract_features(wav: &Waveform, cfg: &FeatureConfig) -> Result<AudioFeatures> {
    cfg.validate()?;
    if wav.samples.is_empty() {
        return Err(Error::Audio("extract_features: empty waveform".into()));
    }
    if wav.samples.iter().any(|v| !v.is_finite()) {
        return Err(Error::Audio(
            "extract_features: waveform contains non-finite samples".into(),
        ));
    }

    let samples = if wav.sample_rate == cfg.sample_rate {
        wav.samples.clone()
    } else {
        resample(&wav.samples, wav.sample_rate, cfg.sample_rate)?
    };

    let frame_len = cfg.frame_samples();
    let shift = cfg.shift_samples();
    if samples.len() < frame_len {
        return Err(Error::Audio(format!(
            "utterance too short: {} samples at {} Hz is less than one {} ms frame ({} samples)",
            samples.len(),
            cfg.sample_rate,
            cfg.frame_length_ms,
            frame_len
        )));
    }

    // Pre-emphasis over the whole signal, not per frame.
    let pre = cfg.pre_emphasis as f64;
    let mut emphasized = Vec::with_capacity(samples.len());
    emphasized.push(samples[0] as f64);
    for i in 1..samples.len() {
        emphasized.push(samples[i] as f64 - pre * samples[i - 1] as f64);
    }

    let num_frames = 1 + (samples.len() - frame_len) / shift;
    let window = hamming(frame_len);
    let filterbank = mel_filterbank(cfg);
    let dct = dct_matrix(cfg.num_ceps, cfg.mel_filters);

    let mut planner = FftPlanner::<f64>::new();
    let fft = planner.plan_fft_forward(cfg.fft_size);
    let num_bins = cfg.fft_size / 2 + 1;
    let log_floor = cfg.log_floor as f64;

    let mut cepstra = vec![vec![0.0_f64; cfg.num_ceps]; num_frames];
    let mut buf = vec![Complex::new(0.0, 0.0); cfg.fft_size];
    for (t, ceps) in cepstra.iter_mut().enumerate() {
        let start = t * shift;
        for i in 0..cfg.fft_size {
            let v = if i < frame_len {
                emphasized[start + i] * window[i]
            } else {
                0.0
            };
            buf[i] = Complex::new(v, 0.0);
        }
        fft.process(&mut buf);

        let power: Vec<f64> = buf[..num_bins].iter().map(|c| c.norm_sqr()).collect();
        for (m, filter) in filterbank.iter().enumerate() {
            let energy: f64 = filter.iter().map(|&(bin, w)| w * power[bin]).sum();
            let log_e = energy.max(log_floor).ln();
            for (k, c) in ceps.iter_mut().enumerate() {
                *c += dct[k][m] * log_e;
            }
        }
    }

    let normalized = cmvn_rows(&cepstra);
    let d1 = deltas_rows(&normalized, cfg.delta_window);
    let d2 = deltas_rows(&d1, cfg.delta_window);

    let width = 3 * cfg.num_ceps;
    let mut data = Vec::with_capacity(num_frames * width);
    for t in 0..num_frames {
        data.extend(normalized[t].iter().map(|&v| v as f32));
        data.extend(d1[t].iter().map(|&v| v as f32));
        data.extend(d2[t].iter().map(|&v| v as f32));
    }
    Ok(AudioFeatures {
        frames: Tensor::new(vec![num_frames, width], data)?,
        frame_length_ms: cfg.frame_length_ms,
        frame_shift_ms: cfg.frame_shift_ms,
    })
}

/// Per-utterance cepstral mean-variance normalization.
///
/// Each column gets its (population) mean subtracted and is divided by its
/// std; columns with std below the variance floor are only mean-centered.
pub fn cmvn<S: Scalar>(seq: &Tensor<S>) -> Result<Tensor<S>> {
    if seq.ndim() != 2 || seq.rows() == 0 {
        return Err(Error::Shape(format!(
            "cmvn expects a non-empty matrix, got {:?}",
            seq.shape()
        )));
    }
    let rows: Vec<Vec<f64>> = (0..seq.rows())
        .map(|i| seq.row(i).iter().map(|&v| v.to_f64()).collect())
        .collect();
    let out = cmvn_rows(&rows);
    from_rows_f64(&out)
}

/// Regression deltas over `±window` frames with edge replication.
pub fn deltas<S: Scalar>(seq: &Tensor<S>, window: usize) -> Result<Tensor<S>> {
    if seq.ndim() != 2 || seq.rows() == 0 {
        return Err(Error::Shape(format!(
            "deltas expects a non-empty matrix, got {:?}",
            seq.shape()
        )));
    }
    if window == 0 {
        return Err(Error::Config("deltas: window must be at least 1".into()));
    }
    let rows: Vec<Vec<f64>> = (0..seq.rows())
        .map(|i| seq.row(i).iter().map(|&v| v.to_f64()).collect())
        .collect();
    let out = deltas_rows(&rows, window);
    from_rows_f64(&out)
}

fn from_rows_f64<S: Scalar>(rows: &[Vec<f64>]) -> Result<Tensor<S>> {
    let cols = rows[0].len();
    let data = rows
        .iter()
        .flat_map(|r| r.iter().map(|&v| S::from_f64(v)))
        .collect();
    Tensor::new(vec![rows.len(), cols], data)
}

fn cmvn_rows(rows: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let t = rows.len() as f64;
    let cols = rows[0].len();
    let mut out = rows.to_vec();
    for c in 0..cols {
        let mean = rows.iter().map(|r| r[c]).sum::<f64>() / t;
        let var = rows.iter().map(|r| (r[c] - mean).powi(2)).sum::<f64>() / t;
        let std = var.sqrt();
        let denom = if std < VARIANCE_FLOOR { 1.0 } else { std };
        for (r, row) in rows.iter().enumerate() {
            out[r][c] = (row[c] - mean) / denom;
        }
    }
    out
}

fn deltas_rows(rows: &[Vec<f64>], window: usize) -> Vec<Vec<f64>> {
    let t_len = rows.len();
    let cols = rows[0].len();
    let denom: f64 = 2.0 * (1..=window).map(|n| (n * n) as f64).sum::<f64>();
    let clamp = |i: isize| -> usize { i.clamp(0, t_len as isize - 1) as usize };

    let mut out = vec![vec![0.0_f64; cols]; t_len];
    for t in 0..t_len {
        for c in 0..cols {
            let mut acc = 0.0;
            for n in 1..=window {
                let ahead = rows[clamp(t as isize + n as isize)][c];
                let behind = rows[clamp(t as isize - n as isize)][c];
                acc += n as f64 * (ahead - behind);
            }
            out[t][c] = acc / denom;
        }
    }
    out
}

fn hamming(len: usize) -> Vec<f64> {
    (0..len)
        .map(|n| {
            0.54 - 0.46 * (2.0 * std::f64::consts::PI * n as f64 / (len as f64 - 1.0)).cos()
        })
        .collect()
}

fn hz_to_mel(hz: f64) -> f64 {
    2595.0 * (1.0 + hz / 700.0).log10()
}

/// Triangular filters with unit peak, spaced evenly on the mel scale.
/// Weights come from each FFT bin's position on the mel axis, so filters
/// stay triangles in mel space regardless of bin granularity.
///
/// Returns, per filter, the list of `(bin, weight)` pairs with nonzero weight.
fn mel_filterbank(cfg: &FeatureConfig) -> Vec<Vec<(usize, f64)>> {
    let num_bins = cfg.fft_size / 2 + 1;
    let mel_lo = hz_to_mel(cfg.mel_low_hz as f64);
    let mel_hi = hz_to_mel(cfg.mel_high_hz as f64);
    let n = cfg.mel_filters;
    let point = |i: usize| mel_lo + (mel_hi - mel_lo) * i as f64 / (n + 1) as f64;

    let bin_mel: Vec<f64> = (0..num_bins)
        .map(|k| hz_to_mel(k as f64 * cfg.sample_rate as f64 / cfg.fft_size as f64))
        .collect();

    (0..n)
        .map(|m| {
            let (left, center, right) = (point(m), point(m + 1), point(m + 2));
            bin_mel
                .iter()
                .enumerate()
                .filter_map(|(k, &mel)| {
                    let w = if mel <= left || mel >= right {
                        0.0
                    } else if mel <= center {
                        (mel - left) / (center - left)
                    } else {
                        (right - mel) / (right - center)
                    };
                    (w > 0.0).then_some((k, w))
                })
                .collect()
        })
        .collect()
}

/// Orthonormal DCT-II, `keep×n` rows.
fn dct_matrix(keep: usize, n: usize) -> Vec<Vec<f64>> {
    (0..keep)
        .map(|k| {
            let scale = if k == 0 {
                (1.0 / n as f64).sqrt()
            } else {
                (2.0 / n as f64).sqrt()
            };
            (0..n)
                .map(|i| {
                    scale * (std::f64::consts::PI * k as f64 * (i as f64 + 0.5) / n as f64).cos()
                })
                .collect()
        })
        .collect()
}
