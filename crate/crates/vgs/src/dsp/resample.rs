//! Sample-rate conversion with a windowed-sinc kernel.

use crate::error::{Error, Result};

/// Half-width of the sinc kernel in output-bandwidth lobes. Larger is
/// sharper and slower; 24 keeps aliasing well below the 16-bit noise floor.
const LOBES: f64 = 24.0;

/// Resamples `samples` from `from_rate` to `to_rate`.
///
/// Equal rates return an exact copy. The output length is
/// `round(len · to_rate / from_rate)`. Downsampling low-passes at the new
/// Nyquist frequency; the kernel is normalized per output sample so constant
/// signals pass through unchanged.
pub fn resample(samples: &[f32], from_rate: u32, to_rate: u32) -> Result<Vec<f32>> {
    if from_rate == 0 || to_rate == 0 {
        return Err(Error::Audio(format!(
            "resample: rates must be positive, got {from_rate} -> {to_rate}"
        )));
    }
    if samples.is_empty() {
        return Err(Error::Audio("resample: empty input".into()));
    }
    if from_rate == to_rate {
        return Ok(samples.to_vec());
    }

    let ratio = to_rate as f64 / from_rate as f64;
    let out_len = ((samples.len() as f64) * ratio).round().max(1.0) as usize;

    // Cutoff relative to the input Nyquist; slightly inside the band edge to
    // leave room for the kernel's transition width.
    let cutoff = ratio.min(1.0) * 0.95;
    let half_width = (LOBES / cutoff).ceil() as isize;

    let mut out = Vec::with_capacity(out_len);
    for i in 0..out_len {
        let center = i as f64 / ratio;
        let lo = center.floor() as isize - half_width;
        let hi = center.floor() as isize + half_width + 1;

        let mut acc = 0.0_f64;
        let mut weight_sum = 0.0_f64;
        for n in lo..=hi {
            let u = center - n as f64;
            let w = hann(u / half_width as f64) * sinc(cutoff * u);
            if w == 0.0 {
                continue;
            }
            weight_sum += w;
            if n >= 0 && (n as usize) < samples.len() {
                acc += w * samples[n as usize] as f64;
            }
        }
        out.push((acc / weight_sum) as f32);
    }
    Ok(out)
}

fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-12 {
        1.0
    } else {
        let px = std::f64::consts::PI * x;
        px.sin() / px
    }
}

/// Hann window on [-1, 1], zero outside.
fn hann(u: f64) -> f64 {
    if u.abs() >= 1.0 {
        0.0
    } else {
        0.5 * (1.0 + (std::f64::consts::PI * u).cos())
    }
}
