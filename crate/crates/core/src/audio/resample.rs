use std::f64::consts::PI;

use super::AudioSegment;
use crate::error::{Error, Result};

/// Anti-alias cutoff as a fraction of the target rate.
pub const CUTOFF_FRACTION: f64 = 0.45;
/// Kernel half-width in zero crossings of the low-pass sinc.
const HALF_ZEROS: f64 = 16.0;

fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-12 {
        1.0
    } else {
        (PI * x).sin() / (PI * x)
    }
}

fn blackman(u: f64) -> f64 {
    // u in [-1, 1]
    0.42 + 0.5 * (PI * u).cos() + 0.08 * (2.0 * PI * u).cos()
}

/// Band-limited downsampling with a Blackman-windowed sinc low-pass
/// (cutoff `0.45 * target_hz`). Output length is `ceil(N * target / source)`.
pub fn resample(seg: &AudioSegment, target_hz: u32) -> Result<AudioSegment> {
    let src = seg.sample_rate;
    if target_hz == 0 {
        return Err(Error::config("target sample rate must be positive"));
    }
    if target_hz > src {
        return Err(Error::UnsupportedDirection { from: src, to: target_hz });
    }
    if target_hz == src {
        return Ok(seg.clone());
    }
    let x = &seg.samples;
    let n_out = ((x.len() as u64 * target_hz as u64).div_ceil(src as u64)) as usize;
    // Normalized cutoff in cycles per input sample.
    let fc = CUTOFF_FRACTION * target_hz as f64 / src as f64;
    let half = (HALF_ZEROS / (2.0 * fc)).ceil();
    let ratio = src as f64 / target_hz as f64;

    let mut out = Vec::with_capacity(n_out);
    for m in 0..n_out {
        let centre = m as f64 * ratio;
        let lo = ((centre - half).ceil().max(0.0)) as usize;
        let hi = ((centre + half).floor() as usize).min(x.len().saturating_sub(1));
        let mut acc = 0.0;
        let mut wsum = 0.0;
        for (n, &xn) in x.iter().enumerate().take(hi + 1).skip(lo) {
            let u = n as f64 - centre;
            let w = 2.0 * fc * sinc(2.0 * fc * u) * blackman(u / half);
            acc += w * xn;
            wsum += w;
        }
        out.push(if wsum.abs() > 1e-12 { acc / wsum } else { 0.0 });
    }
    AudioSegment::new(out, target_hz)
}
