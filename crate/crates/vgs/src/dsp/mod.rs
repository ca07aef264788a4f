//! Audio front-end: waveform container, extraction settings, and the MFCC
//! pipeline producing the 39-column feature matrices the encoders consume.

pub mod mfcc;
pub mod resample;

pub use mfcc::{cmvn, deltas, extract_features};
pub use resample::resample;

use crate::autodiff::tensor::Tensor;
use crate::error::{Error, Result};

/// A mono audio signal with amplitudes in `[-1, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Waveform {
    pub samples: Vec<f32>,
    pub sample_rate: u32,
}

impl Waveform {
    /// Validates that the signal is non-empty, finite, and has a positive
    /// sample rate.
    pub fn new(samples: Vec<f32>, sample_rate: u32) -> Result<Self> {
        if sample_rate == 0 {
            return Err(Error::Audio("waveform sample rate must be positive".into()));
        }
        if samples.is_empty() {
            return Err(Error::Audio("waveform has no samples".into()));
        }
        if samples.iter().any(|v| !v.is_finite()) {
            return Err(Error::Audio("waveform contains non-finite samples".into()));
        }
        Ok(Waveform { samples, sample_rate })
    }

    pub fn duration_secs(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate as f64
    }
}

/// Settings for [`extract_features`]. The defaults give standard 39-dim
/// MFCCs: 25 ms Hamming frames every 10 ms at 16 kHz, 512-point FFT, 40 mel
/// filters to 8 kHz, 13 cepstra plus deltas over ±2 frames.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default)]
pub struct FeatureConfig {
    /// Canonical rate; input at any other rate is resampled first.
    pub sample_rate: u32,
    pub frame_length_ms: u32,
    pub frame_shift_ms: u32,
    pub pre_emphasis: f32,
    pub fft_size: usize,
    pub mel_filters: usize,
    pub mel_low_hz: f32,
    pub mel_high_hz: f32,
    /// Cepstral coefficients kept per frame (including c0).
    pub num_ceps: usize,
    /// Filterbank energies are clamped here before the log.
    pub log_floor: f32,
    pub delta_window: usize,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        FeatureConfig {
            sample_rate: 16000,
            frame_length_ms: 25,
            frame_shift_ms: 10,
            pre_emphasis: 0.97,
            fft_size: 512,
            mel_filters: 40,
            mel_low_hz: 0.0,
            mel_high_hz: 8000.0,
            num_ceps: 13,
            log_floor: 1e-10,
            delta_window: 2,
        }
    }
}

impl FeatureConfig {
    pub fn frame_samples(&self) -> usize {
        (self.sample_rate as usize * self.frame_length_ms as usize) / 1000
    }

    pub fn shift_samples(&self) -> usize {
        (self.sample_rate as usize * self.frame_shift_ms as usize) / 1000
    }

    /// Feature-matrix width: cepstra plus first and second derivatives.
    pub fn feature_dim(&self) -> usize {
        3 * self.num_ceps
    }

    pub fn validate(&self) -> Result<()> {
        if self.sample_rate == 0 {
            return Err(Error::Config("sample_rate must be positive".into()));
        }
        if self.frame_length_ms == 0 || self.frame_shift_ms == 0 {
            return Err(Error::Config("frame length and shift must be positive".into()));
        }
        if self.frame_samples() > self.fft_size {
            return Err(Error::Config(format!(
                "frame of {} samples does not fit the {}-point FFT",
                self.frame_samples(),
                self.fft_size
            )));
        }
        if self.mel_filters == 0 || self.num_ceps == 0 || self.num_ceps > self.mel_filters {
            return Err(Error::Config(format!(
                "need 1 <= num_ceps ({}) <= mel_filters ({})",
                self.num_ceps, self.mel_filters
            )));
        }
        if !(self.mel_low_hz >= 0.0 && self.mel_high_hz > self.mel_low_hz) {
            return Err(Error::Config("mel band edges must satisfy 0 <= low < high".into()));
        }
        if self.mel_high_hz as f64 > self.sample_rate as f64 / 2.0 {
            return Err(Error::Config(format!(
                "mel_high_hz {} exceeds the Nyquist frequency {}",
                self.mel_high_hz,
                self.sample_rate / 2
            )));
        }
        if self.delta_window == 0 {
            return Err(Error::Config("delta_window must be at least 1".into()));
        }
        if !(0.0..1.0).contains(&self.pre_emphasis) {
            return Err(Error::Config(format!(
                "pre_emphasis {} outside [0, 1)",
                self.pre_emphasis
            )));
        }
        Ok(())
    }
}

/// Feature matrix for one utterance: `T` frames by `3·num_ceps` columns
/// (cepstra, then Δ, then ΔΔ).
#[derive(Debug, Clone, PartialEq)]
pub struct AudioFeatures {
    pub frames: Tensor<f32>,
    pub frame_length_ms: u32,
    pub frame_shift_ms: u32,
}

impl AudioFeatures {
    pub fn num_frames(&self) -> usize {
        self.frames.rows()
    }

    pub fn width(&self) -> usize {
        self.frames.cols()
    }
}
