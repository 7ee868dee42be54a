//! Naive reference implementation of the frame-level feature pipeline.
//!
//! The spectrum comes from a direct O(N^2) DFT, the filterbank from directly
//! summed triangular weights, the cepstrum from a literal DCT-II sum. The
//! shared conventions (per-frame pre-emphasis with the first sample left
//! untouched, Hamming window, HTK mel scale, log floor 1e-10, orthonormal
//! DCT-II, population statistics) are re-stated here from scratch.

use std::f64::consts::PI;

/// Mirror of the extractor configuration, kept structurally separate.
#[derive(Debug, Clone, Copy)]
pub struct NaiveConfig {
    pub frame_len_s: f64,
    pub hop_s: f64,
    pub preemphasis: f64,
    pub n_mel: usize,
    pub n_mfcc: usize,
    pub include_log_energy: bool,
    pub include_zcr: bool,
    pub include_deltas: bool,
}

impl Default for NaiveConfig {
    fn default() -> Self {
        NaiveConfig {
            frame_len_s: 0.025,
            hop_s: 0.010,
            preemphasis: 0.97,
            n_mel: 26,
            n_mfcc: 13,
            include_log_energy: true,
            include_zcr: true,
            include_deltas: true,
        }
    }
}

const LOG_FLOOR: f64 = 1e-10;

pub fn hz_to_mel(hz: f64) -> f64 {
    2595.0 * (1.0 + hz / 700.0).log10()
}

pub fn mel_to_hz(mel: f64) -> f64 {
    700.0 * (10f64.powf(mel / 2595.0) - 1.0)
}

/// Cut the signal into frames of `len` samples every `hop` samples.
pub fn frames(samples: &[f64], len: usize, hop: usize) -> Vec<Vec<f64>> {
    let mut out = Vec::new();
    if samples.len() < len {
        return out;
    }
    let n_frames = (samples.len() - len) / hop + 1;
    for t in 0..n_frames {
        out.push(samples[t * hop..t * hop + len].to_vec());
    }
    out
}

fn preemphasize(frame: &[f64], alpha: f64) -> Vec<f64> {
    let mut y = vec![0.0; frame.len()];
    y[0] = frame[0];
    for n in 1..frame.len() {
        y[n] = frame[n] - alpha * frame[n - 1];
    }
    y
}

fn hamming(len: usize) -> Vec<f64> {
    if len == 1 {
        return vec![1.0];
    }
    (0..len)
        .map(|n| 0.54 - 0.46 * (2.0 * PI * n as f64 / (len - 1) as f64).cos())
        .collect()
}

/// One-sided power spectrum by direct DFT: bins 0..=len/2.
pub fn naive_power_spectrum(frame: &[f64]) -> Vec<f64> {
    let len = frame.len();
    let n_bins = len / 2 + 1;
    let mut power = vec![0.0; n_bins];
    for (k, p) in power.iter_mut().enumerate() {
        let mut re = 0.0;
        let mut im = 0.0;
        for (n, &x) in frame.iter().enumerate() {
            let phase = -2.0 * PI * (k as f64) * (n as f64) / len as f64;
            re += x * phase.cos();
            im += x * phase.sin();
        }
        *p = re * re + im * im;
    }
    power
}

/// Response of the `n_mel` triangular HTK-mel filters (0 Hz .. sr/2) over a
/// one-sided power spectrum of a `frame_len`-sample frame.
pub fn naive_filterbank_response(
    power: &[f64],
    frame_len: usize,
    sample_rate: f64,
    n_mel: usize,
) -> Vec<f64> {
    let mel_max = hz_to_mel(sample_rate / 2.0);
    let centers: Vec<f64> = (0..n_mel + 2)
        .map(|j| mel_to_hz(mel_max * j as f64 / (n_mel + 1) as f64))
        .collect();
    let mut energies = vec![0.0; n_mel];
    for (j, e) in energies.iter_mut().enumerate() {
        let (lo, mid, hi) = (centers[j], centers[j + 1], centers[j + 2]);
        for (k, &p) in power.iter().enumerate() {
            let f = k as f64 * sample_rate / frame_len as f64;
            let w = if f >= lo && f <= mid {
                if mid > lo {
                    (f - lo) / (mid - lo)
                } else {
                    1.0
                }
            } else if f > mid && f <= hi {
                if hi > mid {
                    (hi - f) / (hi - mid)
                } else {
                    1.0
                }
            } else {
                0.0
            };
            *e += w * p;
        }
    }
    energies
}

fn naive_dct2_orthonormal(input: &[f64], n_out: usize) -> Vec<f64> {
    let m = input.len();
    let mut out = vec![0.0; n_out];
    for (q, c) in out.iter_mut().enumerate() {
        let mut sum = 0.0;
        for (j, &v) in input.iter().enumerate() {
            sum += v * (PI * q as f64 * (2.0 * j as f64 + 1.0) / (2.0 * m as f64)).cos();
        }
        let scale = if q == 0 {
            (1.0 / m as f64).sqrt()
        } else {
            (2.0 / m as f64).sqrt()
        };
        *c = scale * sum;
    }
    out
}

fn log_energy(frame: &[f64]) -> f64 {
    let e: f64 = frame.iter().map(|x| x * x).sum();
    e.max(LOG_FLOOR).ln()
}

fn zero_crossing_rate(frame: &[f64]) -> f64 {
    if frame.len() < 2 {
        return 0.0;
    }
    let mut crossings = 0usize;
    for n in 1..frame.len() {
        if frame[n - 1] * frame[n] < 0.0 {
            crossings += 1;
        }
    }
    crossings as f64 / (frame.len() - 1) as f64
}

/// Full frame-level descriptor matrix (rows = frames, cols = descriptors),
/// column order: MFCCs, then log-energy, then ZCR, then deltas of those.
pub fn naive_lld(samples: &[f64], sample_rate: f64, cfg: &NaiveConfig) -> Vec<Vec<f64>> {
    let len = (cfg.frame_len_s * sample_rate).round() as usize;
    let hop = (cfg.hop_s * sample_rate).round() as usize;
    let window = hamming(len);
    let mut base: Vec<Vec<f64>> = Vec::new();
    for frame in frames(samples, len, hop) {
        let mut row = Vec::new();
        let pre = preemphasize(&frame, cfg.preemphasis);
        let windowed: Vec<f64> = pre.iter().zip(&window).map(|(x, w)| x * w).collect();
        let power = naive_power_spectrum(&windowed);
        let mel = naive_filterbank_response(&power, len, sample_rate, cfg.n_mel);
        let logmel: Vec<f64> = mel.iter().map(|e| e.max(LOG_FLOOR).ln()).collect();
        row.extend(naive_dct2_orthonormal(&logmel, cfg.n_mfcc));
        if cfg.include_log_energy {
            row.push(log_energy(&frame));
        }
        if cfg.include_zcr {
            row.push(zero_crossing_rate(&frame));
        }
        base.push(row);
    }
    if !cfg.include_deltas {
        return base;
    }
    let n_frames = base.len();
    let n_base = base[0].len();
    let mut full = base.clone();
    for t in 0..n_frames {
        for c in 0..n_base {
            let mut num = 0.0;
            for k in 1..=2usize {
                let fwd = (t + k).min(n_frames - 1);
                let bwd = t.saturating_sub(k);
                num += k as f64 * (base[fwd][c] - base[bwd][c]);
            }
            full[t].push(num / 10.0);
        }
    }
    full
}

/// The eight statistical functionals, per column, directly from their
/// definitions: mean, population stddev, min, max, range, median (midpoint
/// for even counts), population skewness, uncorrected population kurtosis.
/// Degenerate columns (zero variance or a single frame) get 0 for stddev,
/// range, skewness and kurtosis.
pub fn naive_functionals(lld: &[Vec<f64>]) -> Vec<f64> {
    let n_frames = lld.len();
    let n_cols = lld[0].len();
    let mut out = Vec::with_capacity(n_cols * 8);
    for c in 0..n_cols {
        let col: Vec<f64> = lld.iter().map(|row| row[c]).collect();
        let mean = col.iter().sum::<f64>() / n_frames as f64;
        let m2 = col.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n_frames as f64;
        let m3 = col.iter().map(|x| (x - mean).powi(3)).sum::<f64>() / n_frames as f64;
        let m4 = col.iter().map(|x| (x - mean).powi(4)).sum::<f64>() / n_frames as f64;
        let mut sorted = col.clone();
        sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let min = sorted[0];
        let max = sorted[n_frames - 1];
        let median = if n_frames % 2 == 1 {
            sorted[n_frames / 2]
        } else {
            0.5 * (sorted[n_frames / 2 - 1] + sorted[n_frames / 2])
        };
        let (skew, kurt) = if m2 <= 1e-24 {
            (0.0, 0.0)
        } else {
            (m3 / m2.powf(1.5), m4 / (m2 * m2))
        };
        out.push(mean);
        out.push(m2.sqrt());
        out.push(min);
        out.push(max);
        out.push(max - min);
        out.push(median);
        out.push(skew);
        out.push(kurt);
    }
    out
}

/// End-to-end per-utterance vector: LLDs then functionals.
pub fn naive_utterance_vector(samples: &[f64], sample_rate: f64, cfg: &NaiveConfig) -> Vec<f64> {
    naive_functionals(&naive_lld(samples, sample_rate, cfg))
}
