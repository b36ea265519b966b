pub const MIN_PITCH_HZ: f64 = 50.0;
pub const MAX_PITCH_HZ: f64 = 500.0;
pub const VOICING_THRESHOLD: f64 = 0.3;

/// Autocorrelation pitch estimate in Hz, or 0 for unvoiced frames.
pub fn pitch(frame: &[f64], sample_rate: u32) -> f64 {
    pitch_with_threshold(frame, sample_rate, VOICING_THRESHOLD)
}

/// Searches lags corresponding to 50-500 Hz for the strongest local maximum
/// of the biased autocorrelation normalized by `r(0)`, refines it with a
/// parabola through its neighbours, and reports 0 when the peak is below
/// `threshold` or the frame is shorter than two periods of 50 Hz.
pub fn pitch_with_threshold(frame: &[f64], sample_rate: u32, threshold: f64) -> f64 {
    let sr = sample_rate as f64;
    let n = frame.len();
    if (n as f64) < 2.0 * sr / MIN_PITCH_HZ {
        return 0.0;
    }
    let r0: f64 = frame.iter().map(|v| v * v).sum();
    if r0 <= 1e-20 {
        return 0.0;
    }
    let lag_min = ((sr / MAX_PITCH_HZ).floor() as usize).max(2);
    let lag_max = ((sr / MIN_PITCH_HZ).ceil() as usize).min(n - 2);
    let r = |lag: usize| -> f64 {
        frame[..n - lag].iter().zip(&frame[lag..]).map(|(a, b)| a * b).sum::<f64>() / r0
    };
    let rs: Vec<f64> = (lag_min - 1..=lag_max + 1).map(r).collect();
    let mut best: Option<(usize, f64)> = None;
    for i in 1..rs.len() - 1 {
        if rs[i] > rs[i - 1] && rs[i] >= rs[i + 1] && best.is_none_or(|(_, v)| rs[i] > v) {
            best = Some((i, rs[i]));
        }
    }
    let Some((i, peak)) = best else { return 0.0 };
    if peak < threshold {
        return 0.0;
    }
    let (a, b, c) = (rs[i - 1], rs[i], rs[i + 1]);
    let denom = a - 2.0 * b + c;
    let shift = if denom.abs() > 1e-12 { 0.5 * (a - c) / denom } else { 0.0 };
    let lag = (lag_min - 1 + i) as f64 + shift.clamp(-0.5, 0.5);
    sr / lag
}

/// Mean of squared samples.
pub fn energy(frame: &[f64]) -> f64 {
    if frame.is_empty() {
        return 0.0;
    }
    frame.iter().map(|v| v * v).sum::<f64>() / frame.len() as f64
}

/// Fraction of adjacent sample pairs with strictly opposite signs.
pub fn zcr(frame: &[f64]) -> f64 {
    if frame.len() < 2 {
        return 0.0;
    }
    let crossings = frame.windows(2).filter(|w| w[0] * w[1] < 0.0).count();
    crossings as f64 / (frame.len() - 1) as f64
}
