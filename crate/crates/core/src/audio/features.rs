use super::frame::{frame_count, ms_to_samples};
use super::mfcc::{delta, MfccConfig, MfccExtractor};
use super::pitch::{energy, pitch_with_threshold, zcr, VOICING_THRESHOLD};
use super::AudioSegment;
use crate::error::{Error, Result};
use crate::math::Tensor;

/// Width of the per-frame vector: 13 MFCC, 13 delta, 13 delta-delta, pitch,
/// energy, zero-crossing rate.
pub const FEATURE_DIM: usize = 42;

pub const PITCH_COLUMN: usize = 39;
pub const ENERGY_COLUMN: usize = 40;
pub const ZCR_COLUMN: usize = 41;

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureConfig {
    pub window_ms: f64,
    pub step_ms: f64,
    pub mfcc: MfccConfig,
    pub delta_width: usize,
    pub voicing_threshold: f64,
    /// Pitch is measured on a longer window centred on each frame so that it
    /// covers two periods of the lowest pitch.
    pub pitch_window_ms: f64,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        FeatureConfig {
            window_ms: 25.0,
            step_ms: 10.0,
            mfcc: MfccConfig::default(),
            delta_width: 2,
            voicing_threshold: VOICING_THRESHOLD,
            pitch_window_ms: 40.0,
        }
    }
}

impl FeatureConfig {
    pub fn dim(&self) -> usize {
        3 * self.mfcc.n_coeffs + 3
    }
}

/// Frame-level acoustic features, one row per frame (`[frames x 42]` with
/// the default configuration).
pub fn frame_features(seg: &AudioSegment, cfg: &FeatureConfig) -> Result<Tensor> {
    if seg.samples.is_empty() {
        return Err(Error::EmptyInput("no audio samples"));
    }
    let sr = seg.sample_rate;
    let w = ms_to_samples(cfg.window_ms, sr).max(1);
    let s = ms_to_samples(cfg.step_ms, sr).max(1);
    if s > w {
        return Err(Error::config("feature step longer than window"));
    }
    let pw = ms_to_samples(cfg.pitch_window_ms, sr).max(w);
    let x = &seg.samples;
    let n_frames = frame_count(x.len(), w, s);
    let ex = MfccExtractor::new(cfg.mfcc.clone(), w, sr)?;

    let window_at = |start: isize, len: usize| -> Vec<f64> {
        (0..len as isize)
            .map(|i| {
                let j = start + i;
                if j >= 0 && (j as usize) < x.len() { x[j as usize] } else { 0.0 }
            })
            .collect()
    };

    let mut mfccs = Vec::with_capacity(n_frames);
    let mut prosody = Vec::with_capacity(n_frames);
    for t in 0..n_frames {
        let start = t * s;
        let fr = window_at(start as isize, w);
        mfccs.push(ex.compute(&fr)?);
        let centre = start as isize + w as isize / 2;
        let pf = window_at(centre - pw as isize / 2, pw);
        prosody.push([
            pitch_with_threshold(&pf, sr, cfg.voicing_threshold),
            energy(&fr),
            zcr(&fr),
        ]);
    }
    let d1 = delta(&mfccs, cfg.delta_width)?;
    let d2 = delta(&d1, cfg.delta_width)?;
    let dim = cfg.dim();
    let mut data = Vec::with_capacity(n_frames * dim);
    for t in 0..n_frames {
        data.extend_from_slice(&mfccs[t]);
        data.extend_from_slice(&d1[t]);
        data.extend_from_slice(&d2[t]);
        data.extend_from_slice(&prosody[t]);
    }
    Tensor::matrix(n_frames, dim, data)
}

/// Sample rate at which utterance-level features are computed.
pub const FEATURE_SAMPLE_RATE: u32 = 8000;

/// Default frame features of an utterance, after downsampling to 8 kHz when
/// the source rate is higher.
pub fn utterance_features(seg: &AudioSegment) -> Result<Tensor> {
    if seg.sample_rate > FEATURE_SAMPLE_RATE {
        frame_features(&seg.at_rate(FEATURE_SAMPLE_RATE)?, &FeatureConfig::default())
    } else {
        frame_features(seg, &FeatureConfig::default())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;
    use std::time::Instant;

    #[test]
    fn layout_and_invariants() {
        let n = 8000;
        let x: Vec<f64> = (0..n).map(|i| 0.5 * (2.0 * PI * 200.0 * i as f64 / 8000.0).sin()).collect();
        let f = frame_features(&AudioSegment::new(x, 8000).unwrap(), &FeatureConfig::default()).unwrap();
        assert_eq!(f.cols(), FEATURE_DIM);
        assert_eq!(f.rows(), (8000 - 200) / 80 + 1);
        for t in 0..f.rows() {
            let r = f.row(t);
            assert!(r[ENERGY_COLUMN] >= 0.0 && r[PITCH_COLUMN] >= 0.0);
            assert!((0.0..=1.0).contains(&r[ZCR_COLUMN]));
        }
        let mid = f.row(f.rows() / 2);
        assert!((mid[PITCH_COLUMN] - 200.0).abs() < 5.0);
        assert!((mid[ENERGY_COLUMN] - 0.125).abs() < 0.01);
    }

    #[test]
    fn short_segment_gives_one_frame() {
        let f = frame_features(&AudioSegment::new(vec![0.1; 30], 8000).unwrap(), &FeatureConfig::default()).unwrap();
        assert_eq!(f.rows(), 1);
    }

    #[test]
    fn thirteen_seconds_is_fast() {
        let n = 13 * 8000;
        let x: Vec<f64> = (0..n).map(|i| ((i * 7919) % 1000) as f64 / 1000.0 - 0.5).collect();
        let seg = AudioSegment::new(x, 8000).unwrap();
        let t = Instant::now();
        frame_features(&seg, &FeatureConfig::default()).unwrap();
        assert!(t.elapsed().as_millis() < 500, "{:?}", t.elapsed());
    }
}
