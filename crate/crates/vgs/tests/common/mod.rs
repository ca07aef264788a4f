//! Oracles and fixtures shared by the integration suites.
//!
//! Everything here recomputes expected values from first principles and
//! deliberately avoids the code paths under test: the spectral reference
//! uses a naive DFT instead of the library FFT, retrieval ranks come from
//! an explicit sort-and-scan, and the statistics are spelled out as
//! textbook formulas.

#![allow(dead_code)]

use std::f64::consts::PI;

use vgs::dsp::FeatureConfig;

// ---------------------------------------------------------------------------
// Spectral front-end reference

/// Recomputes the full front-end in f64 with a quadratic-time DFT.
/// Input must already be at the configured sample rate.
pub fn reference_features(samples: &[f32], cfg: &FeatureConfig) -> Vec<Vec<f64>> {
    let frame_len = (cfg.sample_rate as usize * cfg.frame_length_ms as usize) / 1000;
    let shift = (cfg.sample_rate as usize * cfg.frame_shift_ms as usize) / 1000;
    assert!(samples.len() >= frame_len, "signal shorter than one frame");

    let pre = cfg.pre_emphasis as f64;
    let mut emphasized = vec![samples[0] as f64];
    for i in 1..samples.len() {
        emphasized.push(samples[i] as f64 - pre * samples[i - 1] as f64);
    }

    let window: Vec<f64> = (0..frame_len)
        .map(|n| 0.54 - 0.46 * (2.0 * PI * n as f64 / (frame_len as f64 - 1.0)).cos())
        .collect();

    let num_bins = cfg.fft_size / 2 + 1;
    let mel = |hz: f64| 2595.0 * (1.0 + hz / 700.0).log10();
    let mel_lo = mel(cfg.mel_low_hz as f64);
    let mel_hi = mel(cfg.mel_high_hz as f64);
    let point =
        |i: usize| mel_lo + (mel_hi - mel_lo) * i as f64 / (cfg.mel_filters + 1) as f64;
    let bin_mel: Vec<f64> = (0..num_bins)
        .map(|k| mel(k as f64 * cfg.sample_rate as f64 / cfg.fft_size as f64))
        .collect();

    let num_frames = 1 + (samples.len() - frame_len) / shift;
    let mut cepstra = Vec::with_capacity(num_frames);
    for t in 0..num_frames {
        let start = t * shift;
        let frame: Vec<f64> = (0..cfg.fft_size)
            .map(|i| {
                if i < frame_len {
                    emphasized[start + i] * window[i]
                } else {
                    0.0
                }
            })
            .collect();

        // Naive DFT, real input.
        let mut power = vec![0.0_f64; num_bins];
        for (k, p) in power.iter_mut().enumerate() {
            let (mut re, mut im) = (0.0_f64, 0.0_f64);
            for (i, &x) in frame.iter().enumerate() {
                let angle = -2.0 * PI * (k * i) as f64 / cfg.fft_size as f64;
                re += x * angle.cos();
                im += x * angle.sin();
            }
            *p = re * re + im * im;
        }

        let mut log_energies = Vec::with_capacity(cfg.mel_filters);
        for m in 0..cfg.mel_filters {
            let (left, center, right) = (point(m), point(m + 1), point(m + 2));
            let mut energy = 0.0;
            for (k, &bm) in bin_mel.iter().enumerate() {
                let w = if bm <= left || bm >= right {
                    0.0
                } else if bm <= center {
                    (bm - left) / (center - left)
                } else {
                    (right - bm) / (right - center)
                };
                energy += w * power[k];
            }
            log_energies.push(energy.max(cfg.log_floor as f64).ln());
        }

        let n = cfg.mel_filters as f64;
        let ceps: Vec<f64> = (0..cfg.num_ceps)
            .map(|k| {
                let scale = if k == 0 { (1.0 / n).sqrt() } else { (2.0 / n).sqrt() };
                log_energies
                    .iter()
                    .enumerate()
                    .map(|(i, &e)| scale * e * (PI * k as f64 * (i as f64 + 0.5) / n).cos())
                    .sum()
            })
            .collect();
        cepstra.push(ceps);
    }

    let normalized = reference_cmvn(&cepstra);
    let d1 = reference_deltas(&normalized, cfg.delta_window);
    let d2 = reference_deltas(&d1, cfg.delta_window);
    (0..num_frames)
        .map(|t| {
            let mut row = normalized[t].clone();
            row.extend(&d1[t]);
            row.extend(&d2[t]);
            row
        })
        .collect()
}

pub fn reference_cmvn(rows: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let t = rows.len() as f64;
    let cols = rows[0].len();
    let mut out = rows.to_vec();
    for c in 0..cols {
        let mean: f64 = rows.iter().map(|r| r[c]).sum::<f64>() / t;
        let var: f64 = rows.iter().map(|r| (r[c] - mean).powi(2)).sum::<f64>() / t;
        let denom = if var.sqrt() < 1e-8 { 1.0 } else { var.sqrt() };
        for (i, row) in rows.iter().enumerate() {
            out[i][c] = (row[c] - mean) / denom;
        }
    }
    out
}

pub fn reference_deltas(rows: &[Vec<f64>], window: usize) -> Vec<Vec<f64>> {
    let t_len = rows.len() as isize;
    let cols = rows[0].len();
    let denom: f64 = 2.0 * (1..=window).map(|n| (n * n) as f64).sum::<f64>();
    (0..rows.len())
        .map(|t| {
            (0..cols)
                .map(|c| {
                    let mut acc = 0.0;
                    for n in 1..=window as isize {
                        let ahead = rows[(t as isize + n).clamp(0, t_len - 1) as usize][c];
                        let behind = rows[(t as isize - n).clamp(0, t_len - 1) as usize][c];
                        acc += n as f64 * (ahead - behind);
                    }
                    acc / denom
                })
                .collect()
        })
        .collect()
}

/// Frobenius-norm relative difference between a tensor-shaped slice and
/// reference rows.
pub fn relative_error(actual: &[f32], expected: &[Vec<f64>]) -> f64 {
    let flat: Vec<f64> = expected.iter().flatten().copied().collect();
    assert_eq!(actual.len(), flat.len(), "shape mismatch against reference");
    let mut diff = 0.0;
    let mut norm = 0.0;
    for (&a, &e) in actual.iter().zip(&flat) {
        diff += (a as f64 - e) * (a as f64 - e);
        norm += e * e;
    }
    (diff / norm.max(1e-300)).sqrt()
}

// ---------------------------------------------------------------------------
// Retrieval reference

pub struct RefMetrics {
    pub r1: f64,
    pub r5: f64,
    pub r10: f64,
    pub med: usize,
    pub queries: usize,
}

fn ref_metrics(ranks: &[usize]) -> RefMetrics {
    let q = ranks.len();
    let recall = |n: usize| 100.0 * ranks.iter().filter(|&&r| r <= n).count() as f64 / q as f64;
    let mut sorted = ranks.to_vec();
    sorted.sort_unstable();
    RefMetrics {
        r1: recall(1),
        r5: recall(5),
        r10: recall(10),
        med: sorted[(q - 1) / 2],
        queries: q,
    }
}

fn ref_cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    dot / (na * nb)
}

/// Sort-and-scan ranks for both retrieval directions. `truth[c]` is the
/// image index owning caption `c`. Returns (caption->image, image->caption).
pub fn brute_force_retrieval(
    captions: &[Vec<f64>],
    images: &[Vec<f64>],
    truth: &[usize],
) -> (RefMetrics, RefMetrics) {
    let mut c2i_ranks = Vec::with_capacity(captions.len());
    for (c, cap) in captions.iter().enumerate() {
        let mut scored: Vec<(usize, f64)> = images
            .iter()
            .enumerate()
            .map(|(i, img)| (i, ref_cosine(cap, img)))
            .collect();
        scored.sort_by(|x, y| y.1.partial_cmp(&x.1).unwrap().then(x.0.cmp(&y.0)));
        let pos = scored.iter().position(|&(i, _)| i == truth[c]).unwrap();
        c2i_ranks.push(pos + 1);
    }

    let mut i2c_ranks = Vec::new();
    for (i, img) in images.iter().enumerate() {
        if !truth.contains(&i) {
            continue;
        }
        let mut scored: Vec<(usize, f64)> = captions
            .iter()
            .enumerate()
            .map(|(c, cap)| (c, ref_cosine(cap, img)))
            .collect();
        scored.sort_by(|x, y| y.1.partial_cmp(&x.1).unwrap().then(x.0.cmp(&y.0)));
        let pos = scored.iter().position(|&(c, _)| truth[c] == i).unwrap();
        i2c_ranks.push(pos + 1);
    }
    (ref_metrics(&c2i_ranks), ref_metrics(&i2c_ranks))
}

// ---------------------------------------------------------------------------
// Statistics references

pub fn reference_pearson(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sx = (x.iter().map(|v| (v - mx).powi(2)).sum::<f64>() / n).sqrt();
    let sy = (y.iter().map(|v| (v - my).powi(2)).sum::<f64>() / n).sqrt();
    x.iter()
        .zip(y)
        .map(|(&a, &b)| ((a - mx) / sx) * ((b - my) / sy))
        .sum::<f64>()
        / n
}

/// 95% interval via the z-transform, with tanh spelled out through exp.
pub fn reference_fisher_ci(r: f64, n: usize) -> (f64, f64) {
    let z = 0.5 * ((1.0 + r) / (1.0 - r)).ln();
    let se = 1.0 / ((n as f64 - 3.0).sqrt());
    let zc = 1.959964;
    let back = |u: f64| {
        let e = (2.0 * u).exp();
        (e - 1.0) / (e + 1.0)
    };
    (back(z - zc * se), back(z + zc * se))
}

pub struct RefFit {
    pub intercept: f64,
    pub slope: f64,
    pub sigma2: f64,
    pub log_likelihood: f64,
    pub aic: f64,
}

pub fn reference_regression(y: &[f64], x: &[f64]) -> RefFit {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(&a, &b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|&a| (a - mx).powi(2)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let rss: f64 = x
        .iter()
        .zip(y)
        .map(|(&a, &b)| (b - intercept - slope * a).powi(2))
        .sum();
    let sigma2 = rss / n;
    let log_likelihood = -0.5 * n * ((2.0 * PI * sigma2).ln() + 1.0);
    RefFit {
        intercept,
        slope,
        sigma2,
        log_likelihood,
        aic: 6.0 - 2.0 * log_likelihood,
    }
}

// ---------------------------------------------------------------------------
// Finite differences

/// Central-difference gradient of `f` at `x0`.
pub fn central_diff<F: FnMut(&[f64]) -> f64>(x0: &[f64], mut f: F, step: f64) -> Vec<f64> {
    let mut x = x0.to_vec();
    let mut grad = vec![0.0; x0.len()];
    for (i, g) in grad.iter_mut().enumerate() {
        let orig = x[i];
        x[i] = orig + step;
        let hi = f(&x);
        x[i] = orig - step;
        let lo = f(&x);
        x[i] = orig;
        *g = (hi - lo) / (2.0 * step);
    }
    grad
}

/// Relative agreement in the usual guarded form: the absolute gap may not
/// exceed tol times (1 + |finite difference|).
pub fn assert_grads_close(analytic: &[f64], fd: &[f64], tol: f64, what: &str) {
    assert_eq!(analytic.len(), fd.len(), "{what}: gradient length mismatch");
    for (i, (&a, &d)) in analytic.iter().zip(fd).enumerate() {
        assert!(
            (a - d).abs() < tol * (1.0 + d.abs()),
            "{what}: coordinate {i} analytic {a} vs finite-difference {d}"
        );
    }
}

// ---------------------------------------------------------------------------
// Frozen regression results used by the AIC consistency check

/// (captions per image, published AIC, published delta AIC, log likelihood),
/// all fits over the same 12544 pairs.
pub const REFERENCE_AIC_ROWS: [(&str, f64, f64, f64); 5] = [
    ("5", 127974.5, 0.00, -63984.23),
    ("3", 127985.3, 10.81, -63989.64),
    ("4", 128116.3, 141.80, -64055.13),
    ("2", 128218.3, 243.80, -64106.13),
    ("1", 128269.7, 295.26, -64131.86),
];
