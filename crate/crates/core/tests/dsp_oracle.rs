//! The built-in acoustic pipeline against the naive direct-DFT reference.

use mmslu_core::acoustic::{
    apply_functionals, extract_lld, extract_utterance, frame_count, AudioClip, LldConfig,
};
use mmslu_core::numerics::relative_error;
use mmslu_oracles::dsp::{naive_utterance_vector, NaiveConfig};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn naive_cfg(cfg: &LldConfig) -> NaiveConfig {
    NaiveConfig {
        frame_len_s: cfg.frame_len,
        hop_s: cfg.hop,
        preemphasis: cfg.preemphasis,
        n_mel: cfg.n_mel,
        n_mfcc: cfg.n_mfcc,
        include_log_energy: cfg.include_log_energy,
        include_zcr: cfg.include_zcr,
        include_deltas: cfg.include_deltas,
    }
}

fn assert_matches_oracle(samples: Vec<f64>, sample_rate: f64, cfg: &LldConfig) {
    let clip = AudioClip::new(samples.clone(), sample_rate).unwrap();
    let ours = extract_utterance(&clip, cfg).unwrap().vector;
    let reference = naive_utterance_vector(&samples, sample_rate, &naive_cfg(cfg));
    assert_eq!(ours.len(), reference.len());
    let worst = ours
        .iter()
        .zip(&reference)
        .map(|(a, b)| relative_error(*a, *b))
        .fold(0.0f64, f64::max);
    assert!(worst <= 1e-6, "worst relative error {}", worst);
}

fn noise_clip(seed: u64, n: usize) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| rng.gen_range(-0.9..0.9)).collect()
}

#[test]
fn pipeline_matches_oracle_on_sine() {
    let sr = 16000.0;
    let samples: Vec<f64> = (0..4800)
        .map(|i| 0.7 * (2.0 * std::f64::consts::PI * 440.0 * i as f64 / sr).sin())
        .collect();
    assert_matches_oracle(samples, sr, &LldConfig::default());
}

#[test]
fn pipeline_matches_oracle_on_zero_clip() {
    assert_matches_oracle(vec![0.0; 4000], 16000.0, &LldConfig::default());
}

#[test]
fn pipeline_matches_oracle_on_noise_without_deltas() {
    let cfg = LldConfig {
        include_deltas: false,
        n_mel: 20,
        n_mfcc: 10,
        ..LldConfig::default()
    };
    assert_matches_oracle(noise_clip(3, 6400), 16000.0, &cfg);
}

#[test]
fn pipeline_matches_oracle_at_8khz() {
    let cfg = LldConfig {
        frame_len: 0.032,
        hop: 0.016,
        ..LldConfig::default()
    };
    assert_matches_oracle(noise_clip(11, 3200), 8000.0, &cfg);
}

#[test]
fn sine_peak_filter_agrees_with_oracle_filterbank() {
    // compute the filter that should win from the oracle's own response
    let sr = 16000.0;
    let samples: Vec<f64> = (0..4800)
        .map(|i| 0.8 * (2.0 * std::f64::consts::PI * 440.0 * i as f64 / sr).sin())
        .collect();
    let cfg = LldConfig::default();
    let clip = AudioClip::new(samples.clone(), sr).unwrap();
    let ours = mmslu_core::acoustic::mean_filterbank_response(&clip, &cfg).unwrap();

    // oracle: accumulate filterbank responses frame by frame
    let frame_len = (cfg.frame_len * sr).round() as usize;
    let hop = (cfg.hop * sr).round() as usize;
    let frames = mmslu_oracles::dsp::frames(&samples, frame_len, hop);
    let window: Vec<f64> = (0..frame_len)
        .map(|n| {
            0.54 - 0.46
                * (2.0 * std::f64::consts::PI * n as f64 / (frame_len - 1) as f64).cos()
        })
        .collect();
    let mut oracle_acc = vec![0.0; cfg.n_mel];
    for frame in &frames {
        let mut pre = vec![frame[0]];
        for n in 1..frame.len() {
            pre.push(frame[n] - cfg.preemphasis * frame[n - 1]);
        }
        let windowed: Vec<f64> = pre.iter().zip(&window).map(|(x, w)| x * w).collect();
        let power = mmslu_oracles::dsp::naive_power_spectrum(&windowed);
        let resp =
            mmslu_oracles::dsp::naive_filterbank_response(&power, frame_len, sr, cfg.n_mel);
        for (a, e) in oracle_acc.iter_mut().zip(resp) {
            *a += e;
        }
    }
    let argmax = |v: &[f64]| {
        v.iter()
            .enumerate()
            .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
            .unwrap()
            .0
    };
    assert_eq!(argmax(&ours), argmax(&oracle_acc));
    // and 440 Hz falls inside the winning filter's support
    let centers = mmslu_core::acoustic::filter_center_frequencies(sr, cfg.n_mel);
    let peak = argmax(&ours);
    let lo = if peak == 0 { 0.0 } else { centers[peak - 1] };
    let hi = centers.get(peak + 1).copied().unwrap_or(sr / 2.0);
    assert!(lo < 440.0 && 440.0 < hi);
}

#[test]
fn time_reversal_preserves_order_free_functionals() {
    // Frames must tile the signal exactly for reversal to permute them, and
    // pre-emphasis is direction-sensitive, so it is disabled here. The
    // order-free functionals (mean, min, max, range, median) of non-delta
    // columns then survive reversal.
    let cfg = LldConfig {
        preemphasis: 0.0,
        include_deltas: false,
        ..LldConfig::default()
    };
    let sr = 16000.0;
    let frame_len = 400;
    let hop = 160;
    let n = frame_len + 9 * hop; // exact tiling
    let samples = noise_clip(21, n);
    let reversed: Vec<f64> = samples.iter().rev().cloned().collect();
    let fwd = extract_utterance(&AudioClip::new(samples, sr).unwrap(), &cfg)
        .unwrap()
        .vector;
    let rev = extract_utterance(&AudioClip::new(reversed, sr).unwrap(), &cfg)
        .unwrap()
        .vector;
    for (block_f, block_r) in fwd.chunks(8).zip(rev.chunks(8)) {
        for idx in [0usize, 2, 3, 4, 5] {
            assert!(
                relative_error(block_f[idx], block_r[idx]) < 1e-9,
                "functional {} changed under reversal",
                idx
            );
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn frame_count_formula_exact(
        n in 1usize..40000,
        len in 1usize..2000,
        hop in 1usize..500,
    ) {
        prop_assume!(n >= len);
        let count = frame_count(n, len, hop).unwrap();
        prop_assert_eq!(count, (n - len) / hop + 1);
        // last frame fits, one more would not
        prop_assert!((count - 1) * hop + len <= n);
        prop_assert!(count * hop + len > n);
    }

    #[test]
    fn functionals_match_oracle_on_random_matrices(
        rows in 1usize..12,
        cols in 1usize..6,
        seed in 0u64..1000,
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let data: Vec<f64> = (0..rows * cols).map(|_| rng.gen_range(-5.0..5.0)).collect();
        let lld: Vec<Vec<f64>> = data.chunks(cols).map(|c| c.to_vec()).collect();
        let reference = mmslu_oracles::dsp::naive_functionals(&lld);
        let matrix = mmslu_core::numerics::Matrix::from_vec(rows, cols, data).unwrap();
        let ours = apply_functionals(&matrix).unwrap();
        prop_assert_eq!(ours.len(), reference.len());
        for (a, b) in ours.iter().zip(&reference) {
            prop_assert!(relative_error(*a, *b) < 1e-9);
        }
    }
}

#[test]
fn lld_frame_rows_match_spec_formula() {
    let cfg = LldConfig::default();
    for (n, sr) in [(4000usize, 16000.0), (4567, 16000.0), (2400, 8000.0)] {
        let clip = AudioClip::new(noise_clip(n as u64, n), sr).unwrap();
        let lld = extract_lld(&clip, &cfg).unwrap();
        let frame_len = (cfg.frame_len * sr).round() as usize;
        let hop = (cfg.hop * sr).round() as usize;
        assert_eq!(lld.rows(), (n - frame_len) / hop + 1);
    }
}
