use super::AudioSegment;
use crate::error::{Error, Result};

/// Milliseconds to a whole number of samples (rounded).
pub fn ms_to_samples(ms: f64, sample_rate: u32) -> usize {
    (ms * sample_rate as f64 / 1000.0).round() as usize
}

/// Number of frames produced for `n` samples, window `w`, step `s`.
pub fn frame_count(n: usize, w: usize, s: usize) -> usize {
    if n == 0 {
        0
    } else if n < w {
        1
    } else {
        (n - w) / s + 1
    }
}

/// Splits samples into windows of `w` samples every `s` samples. Trailing
/// samples that do not fill a window are dropped; input shorter than one
/// window yields a single zero-padded frame.
pub fn frame_samples(samples: &[f64], w: usize, s: usize) -> Result<Vec<Vec<f64>>> {
    if samples.is_empty() {
        return Err(Error::EmptyInput("cannot frame an empty segment"));
    }
    if w == 0 || s == 0 || s > w {
        return Err(Error::config(format!("invalid framing: window {w}, step {s}")));
    }
    if samples.len() < w {
        let mut f = samples.to_vec();
        f.resize(w, 0.0);
        return Ok(vec![f]);
    }
    Ok((0..frame_count(samples.len(), w, s))
        .map(|i| samples[i * s..i * s + w].to_vec())
        .collect())
}

pub fn frame(seg: &AudioSegment, window_ms: f64, step_ms: f64) -> Result<Vec<Vec<f64>>> {
    if !(step_ms > 0.0 && window_ms >= step_ms) {
        return Err(Error::config(format!("invalid framing: window {window_ms} ms, step {step_ms} ms")));
    }
    let w = ms_to_samples(window_ms, seg.sample_rate).max(1);
    let s = ms_to_samples(step_ms, seg.sample_rate).clamp(1, w);
    frame_samples(&seg.samples, w, s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn standard_sizes_at_8k() {
        assert_eq!(ms_to_samples(25.0, 8000), 200);
        assert_eq!(ms_to_samples(10.0, 8000), 80);
    }

    #[test]
    fn counts() {
        let seg = AudioSegment::new(vec![0.1; 1000], 8000).unwrap();
        assert_eq!(frame(&seg, 25.0, 10.0).unwrap().len(), 11);
        let seg = AudioSegment::new(vec![0.1; 200], 8000).unwrap();
        assert_eq!(frame(&seg, 25.0, 10.0).unwrap().len(), 1);
    }

    #[test]
    fn short_input_is_padded() {
        let f = frame_samples(&[1.0, 2.0], 4, 2).unwrap();
        assert_eq!(f, vec![vec![1.0, 2.0, 0.0, 0.0]]);
    }

    #[test]
    fn empty_is_error() {
        assert!(matches!(frame_samples(&[], 4, 2), Err(Error::EmptyInput(_))));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]
        #[test]
        fn count_matches_enumeration(n in 1usize..600, w in 1usize..120, s_frac in 0.0f64..1.0) {
            let s = ((w as f64 * s_frac) as usize).max(1);
            let x = vec![0.0; n];
            let frames = frame_samples(&x, w, s).unwrap();
            // Brute force: every start position whose window fits.
            let brute = if n < w { 1 } else { (0..n).filter(|&st| st % s == 0 && st + w <= n).count() };
            prop_assert_eq!(frames.len(), brute);
            prop_assert!(frames.iter().all(|f| f.len() == w));
        }
    }
}
