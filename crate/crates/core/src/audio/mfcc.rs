use std::f64::consts::PI;
use std::sync::Arc;

use rustfft::{num_complex::Complex, Fft, FftPlanner};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct MfccConfig {
    pub n_coeffs: usize,
    pub n_filters: usize,
    pub pre_emphasis: f64,
    pub log_floor: f64,
}

impl Default for MfccConfig {
    fn default() -> Self {
        MfccConfig {
            n_coeffs: 13,
            n_filters: 26,
            pre_emphasis: 0.97,
            log_floor: 1e-10,
        }
    }
}

pub fn hz_to_mel(hz: f64) -> f64 {
    2595.0 * (1.0 + hz / 700.0).log10()
}

pub fn mel_to_hz(mel: f64) -> f64 {
    700.0 * (10f64.powf(mel / 2595.0) - 1.0)
}

/// Triangular filters with edges equally spaced on the mel scale between
/// 0 Hz and Nyquist, evaluated at the FFT bin frequencies. Returns one row of
/// `nfft / 2 + 1` weights per filter.
pub fn mel_filterbank(n_filters: usize, nfft: usize, sample_rate: u32) -> Vec<Vec<f64>> {
    let nyquist = sample_rate as f64 / 2.0;
    let top = hz_to_mel(nyquist);
    let edges: Vec<f64> = (0..n_filters + 2)
        .map(|i| mel_to_hz(top * i as f64 / (n_filters + 1) as f64))
        .collect();
    let bins = nfft / 2 + 1;
    (0..n_filters)
        .map(|m| {
            let (lo, mid, hi) = (edges[m], edges[m + 1], edges[m + 2]);
            (0..bins)
                .map(|k| {
                    let f = k as f64 * sample_rate as f64 / nfft as f64;
                    if f <= lo || f >= hi {
                        0.0
                    } else if f <= mid {
                        (f - lo) / (mid - lo)
                    } else {
                        (hi - f) / (hi - mid)
                    }
                })
                .collect()
        })
        .collect()
}

/// Reusable MFCC extractor for a fixed frame length and sample rate.
pub struct MfccExtractor {
    cfg: MfccConfig,
    frame_len: usize,
    nfft: usize,
    fft: Arc<dyn Fft<f64>>,
    window: Vec<f64>,
    filters: Vec<Vec<f64>>,
    dct: Vec<Vec<f64>>,
}

impl MfccExtractor {
    pub fn new(cfg: MfccConfig, frame_len: usize, sample_rate: u32) -> Result<Self> {
        if frame_len == 0 {
            return Err(Error::EmptyInput("mfcc frame"));
        }
        if cfg.n_coeffs == 0 || cfg.n_filters == 0 || cfg.n_coeffs > cfg.n_filters {
            return Err(Error::config(format!(
                "mfcc needs 0 < n_coeffs ({}) <= n_filters ({})",
                cfg.n_coeffs, cfg.n_filters
            )));
        }
        let nfft = frame_len.next_power_of_two().max(2);
        let window = (0..frame_len)
            .map(|n| {
                if frame_len == 1 {
                    1.0
                } else {
                    0.54 - 0.46 * (2.0 * PI * n as f64 / (frame_len - 1) as f64).cos()
                }
            })
            .collect();
        let m = cfg.n_filters as f64;
        let dct = (0..cfg.n_coeffs)
            .map(|k| {
                let scale = if k == 0 { (1.0 / m).sqrt() } else { (2.0 / m).sqrt() };
                (0..cfg.n_filters)
                    .map(|j| scale * (PI * k as f64 * (j as f64 + 0.5) / m).cos())
                    .collect()
            })
            .collect();
        Ok(MfccExtractor {
            filters: mel_filterbank(cfg.n_filters, nfft, sample_rate),
            fft: FftPlanner::new().plan_fft_forward(nfft),
            cfg,
            frame_len,
            nfft,
            window,
            dct,
        })
    }

    pub fn n_coeffs(&self) -> usize {
        self.cfg.n_coeffs
    }

    pub fn compute(&self, frame: &[f64]) -> Result<Vec<f64>> {
        if frame.len() != self.frame_len {
            return Err(Error::dim("mfcc frame", &[self.frame_len], &[frame.len()]));
        }
        let a = self.cfg.pre_emphasis;
        let mut buf = vec![Complex::new(0.0, 0.0); self.nfft];
        for n in 0..frame.len() {
            let prev = if n == 0 { 0.0 } else { frame[n - 1] };
            buf[n].re = (frame[n] - a * prev) * self.window[n];
        }
        self.fft.process(&mut buf);
        let power: Vec<f64> = buf[..self.nfft / 2 + 1]
            .iter()
            .map(|c| c.norm_sqr() / self.nfft as f64)
            .collect();
        let log_energies: Vec<f64> = self
            .filters
            .iter()
            .map(|f| {
                let e: f64 = f.iter().zip(&power).map(|(w, p)| w * p).sum();
                e.max(self.cfg.log_floor).ln()
            })
            .collect();
        Ok(self
            .dct
            .iter()
            .map(|row| row.iter().zip(&log_energies).map(|(c, e)| c * e).sum())
            .collect())
    }
}

/// MFCCs of a single frame with the default configuration: pre-emphasis,
/// Hamming window, power spectrum, mel filterbank, log and orthonormal
/// DCT-II (coefficients 0 to 12).
pub fn mfcc(frame: &[f64], sample_rate: u32) -> Result<Vec<f64>> {
    MfccExtractor::new(MfccConfig::default(), frame.len(), sample_rate)?.compute(frame)
}

/// Regression deltas over `±width` frames with edge replication:
/// `d_t = sum_n n (c_{t+n} - c_{t-n}) / (2 sum_n n^2)`.
pub fn delta(features: &[Vec<f64>], width: usize) -> Result<Vec<Vec<f64>>> {
    if features.is_empty() {
        return Err(Error::EmptyInput("delta of an empty sequence"));
    }
    if width == 0 {
        return Err(Error::config("delta width must be at least 1"));
    }
    let d = features[0].len();
    if let Some(bad) = features.iter().find(|f| f.len() != d) {
        return Err(Error::dim("delta", &[d], &[bad.len()]));
    }
    let t_max = features.len() as isize - 1;
    let at = |t: isize| &features[t.clamp(0, t_max) as usize];
    let denom = 2.0 * (1..=width).map(|n| (n * n) as f64).sum::<f64>();
    Ok((0..features.len() as isize)
        .map(|t| {
            let mut out = vec![0.0; d];
            for n in 1..=width as isize {
                let (fwd, back) = (at(t + n), at(t - n));
                for j in 0..d {
                    out[j] += n as f64 * (fwd[j] - back[j]);
                }
            }
            out.iter_mut().for_each(|v| *v /= denom);
            out
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::math::Rng;

    /// Independent reference: direct DFT, explicit mel arithmetic, explicit
    /// DCT-II with orthonormal scaling.
    fn oracle(frame: &[f64], sr: u32) -> Vec<f64> {
        let n = frame.len();
        let mut nfft = 1;
        while nfft < n {
            nfft *= 2;
        }
        let mut x = vec![0.0; nfft];
        for i in 0..n {
            let emph = frame[i] - if i > 0 { 0.97 * frame[i - 1] } else { 0.0 };
            let ham = if n > 1 { 0.54 - 0.46 * (2.0 * PI * i as f64 / (n as f64 - 1.0)).cos() } else { 1.0 };
            x[i] = emph * ham;
        }
        let power: Vec<f64> = (0..=nfft / 2)
            .map(|k| {
                let (mut re, mut im) = (0.0, 0.0);
                for (t, v) in x.iter().enumerate() {
                    let ang = -2.0 * PI * (k * t) as f64 / nfft as f64;
                    re += v * ang.cos();
                    im += v * ang.sin();
                }
                (re * re + im * im) / nfft as f64
            })
            .collect();
        let mel = |f: f64| 2595.0 * (1.0 + f / 700.0).ln() / std::f64::consts::LN_10;
        let inv = |m: f64| 700.0 * ((m * std::f64::consts::LN_10 / 2595.0).exp() - 1.0);
        let top = mel(sr as f64 / 2.0);
        let pts: Vec<f64> = (0..28).map(|i| inv(top * i as f64 / 27.0)).collect();
        let loge: Vec<f64> = (0..26)
            .map(|m| {
                let mut e = 0.0;
                for (k, p) in power.iter().enumerate() {
                    let f = k as f64 * sr as f64 / nfft as f64;
                    let w = if f > pts[m] && f <= pts[m + 1] {
                        (f - pts[m]) / (pts[m + 1] - pts[m])
                    } else if f > pts[m + 1] && f < pts[m + 2] {
                        (pts[m + 2] - f) / (pts[m + 2] - pts[m + 1])
                    } else {
                        0.0
                    };
                    e += w * p;
                }
                e.max(1e-10).ln()
            })
            .collect();
        (0..13)
            .map(|k| {
                let s: f64 = loge
                    .iter()
                    .enumerate()
                    .map(|(j, e)| e * (PI * k as f64 * (2 * j + 1) as f64 / 52.0).cos())
                    .sum();
                s * if k == 0 { (1.0f64 / 26.0).sqrt() } else { (2.0f64 / 26.0).sqrt() }
            })
            .collect()
    }

    #[test]
    fn silent_frame_is_constant_log_floor() {
        let c = mfcc(&[0.0; 200], 8000).unwrap();
        let expect = 26f64.sqrt() * 1e-10f64.ln();
        assert!((c[0] - expect).abs() < 1e-9);
        assert!(c[1..].iter().all(|v| v.abs() < 1e-9));
    }

    #[test]
    fn tone_matches_oracle() {
        let frame: Vec<f64> = (0..200).map(|i| (2.0 * PI * 1000.0 * i as f64 / 8000.0).sin()).collect();
        let got = mfcc(&frame, 8000).unwrap();
        for (a, b) in got.iter().zip(oracle(&frame, 8000)) {
            assert!((a - b).abs() < 1e-6, "{a} vs {b}");
        }
    }

    #[test]
    fn random_frames_match_oracle() {
        let mut rng = Rng::new(21);
        let ex = MfccExtractor::new(MfccConfig::default(), 200, 8000).unwrap();
        for _ in 0..100 {
            let frame: Vec<f64> = (0..200).map(|_| rng.uniform_range(-1.0, 1.0)).collect();
            for (a, b) in ex.compute(&frame).unwrap().iter().zip(oracle(&frame, 8000)) {
                assert!((a - b).abs() < 1e-6, "{a} vs {b}");
            }
        }
    }

    #[test]
    fn mel_scale_round_trip() {
        for hz in [0.0, 100.0, 1000.0, 4000.0] {
            assert!((mel_to_hz(hz_to_mel(hz)) - hz).abs() < 1e-9);
        }
        assert!((hz_to_mel(1000.0) - 1000.0).abs() < 0.1);
    }

    #[test]
    fn delta_constant_and_ramp() {
        let constant = vec![vec![2.0, -1.0]; 6];
        assert!(delta(&constant, 2).unwrap().iter().flatten().all(|v| *v == 0.0));
        let ramp: Vec<Vec<f64>> = (0..9).map(|t| vec![3.0 * t as f64]).collect();
        let d = delta(&ramp, 2).unwrap();
        for t in 2..7 {
            assert!((d[t][0] - 3.0).abs() < 1e-12);
        }
    }

    #[test]
    fn delta_matches_direct_formula() {
        let mut rng = Rng::new(2);
        let seq: Vec<Vec<f64>> = (0..5).map(|_| (0..3).map(|_| rng.normal()).collect()).collect();
        let d = delta(&seq, 2).unwrap();
        let clamp = |t: i64| seq[t.clamp(0, 4) as usize].clone();
        for t in 0..5i64 {
            for j in 0..3 {
                let num = (clamp(t + 1)[j] - clamp(t - 1)[j]) + 2.0 * (clamp(t + 2)[j] - clamp(t - 2)[j]);
                assert!((d[t as usize][j] - num / 10.0).abs() < 1e-12);
            }
        }
    }
}
