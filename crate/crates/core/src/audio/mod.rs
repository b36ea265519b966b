//! WAV I/O, resampling, framing and frame-level acoustic features.

mod features;
mod frame;
mod mfcc;
mod pitch;
mod resample;
mod wav;

pub use features::{
    frame_features, utterance_features, FeatureConfig, ENERGY_COLUMN, FEATURE_DIM, FEATURE_SAMPLE_RATE, PITCH_COLUMN,
    ZCR_COLUMN,
};
pub use frame::{frame, frame_count, frame_samples, ms_to_samples};
pub use mfcc::{delta, hz_to_mel, mel_filterbank, mel_to_hz, mfcc, MfccConfig, MfccExtractor};
pub use pitch::{energy, pitch, pitch_with_threshold, zcr, MAX_PITCH_HZ, MIN_PITCH_HZ, VOICING_THRESHOLD};
pub use resample::{resample, CUTOFF_FRACTION};
pub use wav::{encode_wav, encode_wav_pcm16, parse_wav, read_wav, write_wav};

use crate::error::{Error, Result};

/// Mono audio with its sample rate.
#[derive(Debug, Clone, PartialEq)]
pub struct AudioSegment {
    pub samples: Vec<f64>,
    pub sample_rate: u32,
}

impl AudioSegment {
    pub fn new(samples: Vec<f64>, sample_rate: u32) -> Result<Self> {
        if sample_rate == 0 {
            return Err(Error::config("sample rate must be positive"));
        }
        if let Some(i) = samples.iter().position(|v| !v.is_finite()) {
            return Err(Error::config(format!("non-finite sample at index {i}")));
        }
        Ok(AudioSegment { samples, sample_rate })
    }

    pub fn silence(seconds: f64, sample_rate: u32) -> Self {
        let n = (seconds * sample_rate as f64).round() as usize;
        AudioSegment { samples: vec![0.0; n], sample_rate }
    }

    pub fn duration(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate as f64
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Samples in `[start_s, end_s)`, clipped to the segment.
    pub fn slice_seconds(&self, start_s: f64, end_s: f64) -> AudioSegment {
        let sr = self.sample_rate as f64;
        let a = ((start_s * sr).round().max(0.0) as usize).min(self.samples.len());
        let b = ((end_s * sr).round().max(0.0) as usize).clamp(a, self.samples.len());
        AudioSegment { samples: self.samples[a..b].to_vec(), sample_rate: self.sample_rate }
    }

    /// Resamples down to `rate` unless already there.
    pub fn at_rate(&self, rate: u32) -> Result<AudioSegment> {
        resample(self, rate)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn validation() {
        assert!(AudioSegment::new(vec![0.0], 0).is_err());
        assert!(AudioSegment::new(vec![f64::NAN], 8000).is_err());
        let s = AudioSegment::new(vec![0.0; 8000], 8000).unwrap();
        assert_eq!(s.duration(), 1.0);
        assert_eq!(s.slice_seconds(0.25, 0.5).samples.len(), 2000);
        assert_eq!(s.slice_seconds(0.9, 2.0).samples.len(), 800);
    }
}
