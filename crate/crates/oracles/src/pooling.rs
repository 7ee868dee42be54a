//! Per-element pooling loops for comparing against the visual module.

pub fn mean_pool(frames: &[Vec<f64>]) -> Vec<f64> {
    let dim = frames[0].len();
    let mut out = vec![0.0; dim];
    for i in 0..dim {
        let mut sum = 0.0;
        for frame in frames {
            sum += frame[i];
        }
        out[i] = sum / frames.len() as f64;
    }
    out
}

pub fn max_pool(frames: &[Vec<f64>]) -> Vec<f64> {
    let dim = frames[0].len();
    let mut out = vec![f64::NEG_INFINITY; dim];
    for i in 0..dim {
        for frame in frames {
            if frame[i] > out[i] {
                out[i] = frame[i];
            }
        }
    }
    out
}
