//! Fixed-length per-utterance acoustic vectors.
//!
//! Two sources: loading precomputed vectors from a sidecar file, or the
//! built-in extractor (frame-level descriptors mapped through statistical
//! functionals). The extractor computes MFCCs over an HTK-mel triangular
//! filterbank (orthonormal DCT-II, log floor 1e-10), optional log-energy and
//! zero-crossing-rate columns on the raw frame, and optional +-2-frame
//! regression deltas of all base columns.

use std::collections::BTreeMap;
use std::path::Path;

use rustfft::{num_complex::Complex, FftPlanner};

use crate::error::{Error, Result};
use crate::numerics::Matrix;
use crate::sidecar;

const LOG_FLOOR: f64 = 1e-10;
/// Columns with population variance at or below this are treated as
/// constant: their skewness and kurtosis are 0 by convention.
const VARIANCE_GUARD: f64 = 1e-24;

#[derive(Debug, Clone)]
pub struct AudioClip {
    samples: Vec<f64>,
    sample_rate: f64,
}

impl AudioClip {
    pub fn new(samples: Vec<f64>, sample_rate: f64) -> Result<AudioClip> {
        if samples.is_empty() {
            return Err(Error::EmptyInput("audio clip has no samples".into()));
        }
        if sample_rate <= 0.0 {
            return Err(Error::Config(format!("bad sample rate {}", sample_rate)));
        }
        Ok(AudioClip {
            samples,
            sample_rate,
        })
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn sample_rate(&self) -> f64 {
        self.sample_rate
    }
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default)]
pub struct LldConfig {
    /// Frame length in seconds.
    pub frame_len: f64,
    /// Hop between frame starts in seconds.
    pub hop: f64,
    pub preemphasis: f64,
    pub n_mel: usize,
    pub n_mfcc: usize,
    pub include_log_energy: bool,
    pub include_zcr: bool,
    pub include_deltas: bool,
}

impl Default for LldConfig {
    fn default() -> Self {
        LldConfig {
            frame_len: 0.025,
            hop: 0.010,
            preemphasis: 0.97,
            n_mel: 26,
            n_mfcc: 13,
            include_log_energy: true,
            include_zcr: true,
            include_deltas: true,
        }
    }
}

impl LldConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.hop > 0.0 && self.hop <= self.frame_len) {
            return Err(Error::Config(format!(
                "need 0 < hop <= frame_len, got hop {} frame_len {}",
                self.hop, self.frame_len
            )));
        }
        if self.n_mfcc > self.n_mel || self.n_mel == 0 || self.n_mfcc == 0 {
            return Err(Error::Config(format!(
                "need 1 <= n_mfcc <= n_mel, got n_mfcc {} n_mel {}",
                self.n_mfcc, self.n_mel
            )));
        }
        Ok(())
    }

    /// Number of descriptor columns this config produces.
    pub fn n_lld(&self) -> usize {
        let base = self.n_mfcc
            + usize::from(self.include_log_energy)
            + usize::from(self.include_zcr);
        if self.include_deltas {
            base * 2
        } else {
            base
        }
    }
}

/// Where an utterance vector came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AcousticSource {
    PrecomputedIs10,
    Builtin,
}

#[derive(Debug, Clone, PartialEq)]
pub struct UtteranceAcoustics {
    pub vector: Vec<f64>,
    pub source: AcousticSource,
}

impl UtteranceAcoustics {
    pub fn dim(&self) -> usize {
        self.vector.len()
    }
}

pub fn hz_to_mel(hz: f64) -> f64 {
    2595.0 * (1.0 + hz / 700.0).log10()
}

pub fn mel_to_hz(mel: f64) -> f64 {
    700.0 * (10f64.powf(mel / 2595.0) - 1.0)
}

/// Triangular filter weights over the one-sided spectrum bins, precomputed
/// per (frame length, sample rate, filter count). Filter endpoints are
/// equally spaced on the HTK mel scale between 0 Hz and sr/2.
struct MelFilterbank {
    /// Dense weights, one row per filter over all bins.
    weights: Vec<Vec<f64>>,
}

impl MelFilterbank {
    fn new(frame_len: usize, sample_rate: f64, n_mel: usize) -> MelFilterbank {
        let n_bins = frame_len / 2 + 1;
        let mel_max = hz_to_mel(sample_rate / 2.0);
        let edges: Vec<f64> = (0..n_mel + 2)
            .map(|j| mel_to_hz(mel_max * j as f64 / (n_mel + 1) as f64))
            .collect();
        let mut weights = vec![vec![0.0; n_bins]; n_mel];
        for (m, row) in weights.iter_mut().enumerate() {
            let (lo, mid, hi) = (edges[m], edges[m + 1], edges[m + 2]);
            for (k, w) in row.iter_mut().enumerate() {
                let f = k as f64 * sample_rate / frame_len as f64;
                *w = if f >= lo && f <= mid {
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
            }
        }
        MelFilterbank { weights }
    }

    fn apply(&self, power: &[f64]) -> Vec<f64> {
        self.weights
            .iter()
            .map(|row| row.iter().zip(power).map(|(w, p)| w * p).sum())
            .collect()
    }

    /// Hz center (peak) frequency of each filter.
    fn centers(sample_rate: f64, n_mel: usize) -> Vec<f64> {
        let mel_max = hz_to_mel(sample_rate / 2.0);
        (1..=n_mel)
            .map(|j| mel_to_hz(mel_max * j as f64 / (n_mel + 1) as f64))
            .collect()
    }
}

fn hamming(len: usize) -> Vec<f64> {
    if len == 1 {
        return vec![1.0];
    }
    (0..len)
        .map(|n| {
            0.54 - 0.46 * (2.0 * std::f64::consts::PI * n as f64 / (len - 1) as f64).cos()
        })
        .collect()
}

/// Orthonormal DCT-II coefficient table, n_out x n_in.
fn dct2_table(n_in: usize, n_out: usize) -> Vec<Vec<f64>> {
    (0..n_out)
        .map(|q| {
            let scale = if q == 0 {
                (1.0 / n_in as f64).sqrt()
            } else {
                (2.0 / n_in as f64).sqrt()
            };
            (0..n_in)
                .map(|j| {
                    scale
                        * (std::f64::consts::PI * q as f64 * (2.0 * j as f64 + 1.0)
                            / (2.0 * n_in as f64))
                            .cos()
                })
                .collect()
        })
        .collect()
}

/// Frame count for N samples, frame length L, hop S: floor((N - L) / S) + 1.
pub fn frame_count(n_samples: usize, frame_len: usize, hop: usize) -> Option<usize> {
    if n_samples < frame_len || frame_len == 0 || hop == 0 {
        return None;
    }
    Some((n_samples - frame_len) / hop + 1)
}

/// Runs `visit(raw_frame, mel_energies)` over every frame of the clip.
fn for_each_frame(
    clip: &AudioClip,
    cfg: &LldConfig,
    mut visit: impl FnMut(&[f64], Vec<f64>),
) -> Result<usize> {
    cfg.validate()?;
    let sr = clip.sample_rate();
    let frame_len = (cfg.frame_len * sr).round() as usize;
    let hop = (cfg.hop * sr).round() as usize;
    let n_frames = frame_count(clip.samples().len(), frame_len, hop).ok_or_else(|| {
        Error::Data(format!(
            "clip of {} samples is shorter than one {}-sample frame",
            clip.samples().len(),
            frame_len
        ))
    })?;
    let window = hamming(frame_len);
    let filterbank = MelFilterbank::new(frame_len, sr, cfg.n_mel);
    let mut planner = FftPlanner::new();
    let fft = planner.plan_fft_forward(frame_len);
    let n_bins = frame_len / 2 + 1;
    let mut buffer = vec![Complex::new(0.0, 0.0); frame_len];
    for t in 0..n_frames {
        let frame = &clip.samples()[t * hop..t * hop + frame_len];
        // pre-emphasis within the frame; the first sample stays as-is
        for (n, slot) in buffer.iter_mut().enumerate() {
            let pre = if n == 0 {
                frame[0]
            } else {
                frame[n] - cfg.preemphasis * frame[n - 1]
            };
            *slot = Complex::new(pre * window[n], 0.0);
        }
        fft.process(&mut buffer);
        let power: Vec<f64> = buffer[..n_bins].iter().map(|c| c.norm_sqr()).collect();
        visit(frame, filterbank.apply(&power));
    }
    Ok(n_frames)
}

/// Frame-level descriptor matrix, one row per frame.
pub fn extract_lld(clip: &AudioClip, cfg: &LldConfig) -> Result<Matrix> {
    let dct = dct2_table(cfg.n_mel, cfg.n_mfcc);
    let n_base = cfg.n_mfcc
        + usize::from(cfg.include_log_energy)
        + usize::from(cfg.include_zcr);
    let mut base: Vec<Vec<f64>> = Vec::new();
    let n_frames = for_each_frame(clip, cfg, |frame, mel_energies| {
        let mut row = vec![0.0; n_base];
        let mel: Vec<f64> = mel_energies
            .into_iter()
            .map(|e| e.max(LOG_FLOOR).ln())
            .collect();
        for (q, out) in row.iter_mut().take(cfg.n_mfcc).enumerate() {
            *out = dct[q].iter().zip(&mel).map(|(c, v)| c * v).sum();
        }
        let mut col = cfg.n_mfcc;
        if cfg.include_log_energy {
            let energy: f64 = frame.iter().map(|x| x * x).sum();
            row[col] = energy.max(LOG_FLOOR).ln();
            col += 1;
        }
        if cfg.include_zcr {
            row[col] = if frame.len() < 2 {
                0.0
            } else {
                let crossings = frame.windows(2).filter(|w| w[0] * w[1] < 0.0).count();
                crossings as f64 / (frame.len() - 1) as f64
            };
        }
        base.push(row);
    })?;

    let n_cols = cfg.n_lld();
    let mut data = Vec::with_capacity(n_frames * n_cols);
    for t in 0..n_frames {
        data.extend_from_slice(&base[t]);
        if cfg.include_deltas {
            for c in 0..n_base {
                let mut num = 0.0;
                for k in 1..=2usize {
                    let fwd = (t + k).min(n_frames - 1);
                    let bwd = t.saturating_sub(k);
                    num += k as f64 * (base[fwd][c] - base[bwd][c]);
                }
                data.push(num / 10.0);
            }
        }
    }
    Matrix::from_vec(n_frames, n_cols, data)
}

/// The eight functionals, in order: mean, population stddev, min, max,
/// range, median (midpoint of the two middle values for even counts),
/// population skewness, uncorrected population kurtosis. Constant columns
/// get 0 for skewness and kurtosis.
pub const N_FUNCTIONALS: usize = 8;

/// Per-column functionals over a frames x n_lld matrix, laid out as one
/// contiguous block of eight per descriptor column.
pub fn apply_functionals(lld: &Matrix) -> Result<Vec<f64>> {
    if lld.rows() == 0 || lld.cols() == 0 {
        return Err(Error::EmptyInput("functionals over an empty matrix".into()));
    }
    let n = lld.rows() as f64;
    let mut out = Vec::with_capacity(lld.cols() * N_FUNCTIONALS);
    for c in 0..lld.cols() {
        let col: Vec<f64> = (0..lld.rows()).map(|r| lld.get(r, c)).collect();
        let mean = col.iter().sum::<f64>() / n;
        let mut m2 = 0.0;
        let mut m3 = 0.0;
        let mut m4 = 0.0;
        for &x in &col {
            let d = x - mean;
            let d2 = d * d;
            m2 += d2;
            m3 += d2 * d;
            m4 += d2 * d2;
        }
        m2 /= n;
        m3 /= n;
        m4 /= n;
        let mut sorted = col;
        sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let min = sorted[0];
        let max = *sorted.last().unwrap();
        let mid = sorted.len() / 2;
        let median = if sorted.len() % 2 == 1 {
            sorted[mid]
        } else {
            0.5 * (sorted[mid - 1] + sorted[mid])
        };
        let (skew, kurt) = if m2 <= VARIANCE_GUARD {
            (0.0, 0.0)
        } else {
            (m3 / m2.powf(1.5), m4 / (m2 * m2))
        };
        out.extend_from_slice(&[mean, m2.sqrt(), min, max, max - min, median, skew, kurt]);
    }
    Ok(out)
}

/// Runs the built-in extractor end to end.
pub fn extract_utterance(clip: &AudioClip, cfg: &LldConfig) -> Result<UtteranceAcoustics> {
    let lld = extract_lld(clip, cfg)?;
    Ok(UtteranceAcoustics {
        vector: apply_functionals(&lld)?,
        source: AcousticSource::Builtin,
    })
}

/// Frequency in Hz of each mel filter's peak, for diagnostics.
pub fn filter_center_frequencies(sample_rate: f64, n_mel: usize) -> Vec<f64> {
    MelFilterbank::centers(sample_rate, n_mel)
}

/// Mean per-filter response across all frames, for diagnostics and tests
/// that reason about where spectral energy lands.
pub fn mean_filterbank_response(clip: &AudioClip, cfg: &LldConfig) -> Result<Vec<f64>> {
    let mut acc = vec![0.0; cfg.n_mel];
    let n_frames = for_each_frame(clip, cfg, |_, mel_energies| {
        for (a, e) in acc.iter_mut().zip(mel_energies) {
            *a += e;
        }
    })?;
    for a in acc.iter_mut() {
        *a /= n_frames as f64;
    }
    Ok(acc)
}

/// Loads a sidecar of precomputed utterance vectors (IS10-style exports).
pub fn load_precomputed(path: impl AsRef<Path>) -> Result<BTreeMap<String, UtteranceAcoustics>> {
    Ok(sidecar::read_utterance_rows(path)?
        .into_iter()
        .map(|(id, vector)| {
            (
                id,
                UtteranceAcoustics {
                    vector,
                    source: AcousticSource::PrecomputedIs10,
                },
            )
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sine_clip(freq: f64, sr: f64, secs: f64, amplitude: f64) -> AudioClip {
        let n = (sr * secs) as usize;
        let samples = (0..n)
            .map(|i| amplitude * (2.0 * std::f64::consts::PI * freq * i as f64 / sr).sin())
            .collect();
        AudioClip::new(samples, sr).unwrap()
    }

    #[test]
    fn frame_count_example() {
        // 16 kHz, 1.0 s, 25 ms frames, 10 ms hop
        assert_eq!(frame_count(16000, 400, 160), Some(98));
    }

    #[test]
    fn one_second_clip_gives_98_frames() {
        let clip = sine_clip(100.0, 16000.0, 1.0, 0.5);
        let lld = extract_lld(&clip, &LldConfig::default()).unwrap();
        assert_eq!(lld.rows(), 98);
        assert_eq!(lld.cols(), 30);
    }

    #[test]
    fn all_zero_clip_floors_energy_and_zcr() {
        let clip = AudioClip::new(vec![0.0; 8000], 16000.0).unwrap();
        let cfg = LldConfig {
            include_deltas: false,
            ..LldConfig::default()
        };
        let lld = extract_lld(&clip, &cfg).unwrap();
        let energy_col = cfg.n_mfcc;
        let zcr_col = cfg.n_mfcc + 1;
        for r in 0..lld.rows() {
            assert_eq!(lld.get(r, energy_col), (1e-10f64).ln());
            assert_eq!(lld.get(r, zcr_col), 0.0);
        }
    }

    #[test]
    fn too_short_clip_rejected() {
        let clip = AudioClip::new(vec![0.1; 100], 16000.0).unwrap();
        assert!(matches!(
            extract_lld(&clip, &LldConfig::default()),
            Err(Error::Data(_))
        ));
    }

    #[test]
    fn sine_peaks_in_the_filter_covering_its_frequency() {
        let clip = sine_clip(440.0, 16000.0, 0.3, 0.8);
        let cfg = LldConfig::default();
        let response = mean_filterbank_response(&clip, &cfg).unwrap();
        let centers = filter_center_frequencies(16000.0, cfg.n_mel);
        let argmax = response
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
            .unwrap()
            .0;
        // the winning filter is the one whose center is nearest 440 Hz
        let nearest = centers
            .iter()
            .enumerate()
            .min_by(|a, b| {
                (a.1 - 440.0)
                    .abs()
                    .partial_cmp(&(b.1 - 440.0).abs())
                    .unwrap()
            })
            .unwrap()
            .0;
        assert_eq!(argmax, nearest);
    }

    #[test]
    fn functionals_hand_example() {
        let lld = Matrix::from_vec(3, 1, vec![1.0, 2.0, 3.0]).unwrap();
        let f = apply_functionals(&lld).unwrap();
        assert_eq!(f.len(), 8);
        assert!((f[0] - 2.0).abs() < 1e-15); // mean
        assert!((f[1] - (2.0f64 / 3.0).sqrt()).abs() < 1e-15); // population stddev
        assert_eq!(f[2], 1.0); // min
        assert_eq!(f[3], 3.0); // max
        assert_eq!(f[4], 2.0); // range
        assert_eq!(f[5], 2.0); // median
        assert_eq!(f[6], 0.0); // skewness of symmetric data
    }

    #[test]
    fn constant_column_functionals() {
        let lld = Matrix::from_vec(4, 1, vec![1.5; 4]).unwrap();
        let f = apply_functionals(&lld).unwrap();
        assert_eq!(f[0], 1.5);
        assert_eq!(f[1], 0.0);
        assert_eq!(f[4], 0.0);
        assert_eq!(f[5], 1.5);
        assert_eq!(f[6], 0.0);
        assert_eq!(f[7], 0.0);
    }

    #[test]
    fn single_frame_conventions() {
        let lld = Matrix::from_vec(1, 2, vec![3.0, -4.0]).unwrap();
        let f = apply_functionals(&lld).unwrap();
        // stddev, range, skewness, kurtosis all zero
        for block in f.chunks(8) {
            assert_eq!(block[1], 0.0);
            assert_eq!(block[4], 0.0);
            assert_eq!(block[6], 0.0);
            assert_eq!(block[7], 0.0);
        }
        assert_eq!(f[0], 3.0);
        assert_eq!(f[8], -4.0);
    }

    #[test]
    fn thirty_columns_give_240_dims() {
        let lld = Matrix::from_vec(5, 30, (0..150).map(|i| i as f64 * 0.1).collect()).unwrap();
        assert_eq!(apply_functionals(&lld).unwrap().len(), 240);
    }

    #[test]
    fn default_config_dim_is_240() {
        let clip = sine_clip(300.0, 16000.0, 0.2, 0.4);
        let ua = extract_utterance(&clip, &LldConfig::default()).unwrap();
        assert_eq!(ua.dim(), 240);
        assert_eq!(ua.source, AcousticSource::Builtin);
    }

    #[test]
    fn extraction_is_deterministic() {
        let clip = sine_clip(523.0, 16000.0, 0.25, 0.6);
        let a = extract_utterance(&clip, &LldConfig::default()).unwrap();
        let b = extract_utterance(&clip, &LldConfig::default()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn scaling_shifts_energy_but_not_zcr() {
        let cfg = LldConfig {
            include_deltas: false,
            ..LldConfig::default()
        };
        let clip = sine_clip(440.0, 16000.0, 0.3, 0.8);
        let half = AudioClip::new(
            clip.samples().iter().map(|x| 0.5 * x).collect(),
            16000.0,
        )
        .unwrap();
        let full_lld = extract_lld(&clip, &cfg).unwrap();
        let half_lld = extract_lld(&half, &cfg).unwrap();
        let energy_col = cfg.n_mfcc;
        let zcr_col = cfg.n_mfcc + 1;
        for r in 0..full_lld.rows() {
            // energy of a 0.5x signal drops by ln(4)
            assert!(
                (full_lld.get(r, energy_col) - half_lld.get(r, energy_col) - 4.0f64.ln()).abs()
                    < 1e-9
            );
            assert_eq!(full_lld.get(r, zcr_col), half_lld.get(r, zcr_col));
        }
    }

    #[test]
    fn permutation_equivariance_of_functionals() {
        let lld = Matrix::from_vec(
            4,
            3,
            vec![
                0.1, 1.0, -2.0, //
                0.4, 0.5, -1.0, //
                0.2, 2.0, 0.0, //
                0.9, 1.5, -3.0,
            ],
        )
        .unwrap();
        let f = apply_functionals(&lld).unwrap();
        // swap columns 0 and 2
        let swapped = Matrix::from_vec(
            4,
            3,
            vec![
                -2.0, 1.0, 0.1, //
                -1.0, 0.5, 0.4, //
                0.0, 2.0, 0.2, //
                -3.0, 1.5, 0.9,
            ],
        )
        .unwrap();
        let g = apply_functionals(&swapped).unwrap();
        assert_eq!(&f[0..8], &g[16..24]);
        assert_eq!(&f[8..16], &g[8..16]);
        assert_eq!(&f[16..24], &g[0..8]);
    }

    #[test]
    fn precomputed_sidecar_loads() {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        use std::io::Write;
        for id in ["u1", "u2", "u3"] {
            let row: Vec<String> = (0..6).map(|i| format!("{}.5", i)).collect();
            writeln!(f, "{}\t{}", id, row.join(",")).unwrap();
        }
        let map = load_precomputed(f.path()).unwrap();
        assert_eq!(map.len(), 3);
        assert!(map
            .values()
            .all(|u| u.dim() == 6 && u.source == AcousticSource::PrecomputedIs10));
    }
}
