//! Finite-difference verification of every layer type and of small
//! instances of the three pipelines.

use std::fmt;
use std::time::Instant;

use crate::audio::{utterance_features, AudioSegment};
use crate::emotion::{build_emotion_model, EmotionCnnConfig};
use crate::error::Result;
use crate::humor::{ContextMode, HumorInput, HumorNet, HumorNetConfig};
use crate::math::{Activation, Rng, Tensor};
use crate::nn::{grad_check_with, standard_probes, Classifier, GradCheckReport, Parameterized};
use crate::sentiment::{SentimentCnn, SentimentCnnConfig, SentimentInput};
use crate::text::EmbeddingTable;

pub const DEFAULT_EPS: f64 = 1e-5;
pub const DEFAULT_THRESHOLD: f64 = 1e-4;

#[derive(Debug, Clone)]
pub struct GradCheckRow {
    pub name: String,
    pub report: GradCheckReport,
}

impl GradCheckRow {
    pub fn passes(&self, threshold: f64) -> bool {
        self.report.max_relative_error < threshold
    }
}

impl fmt::Display for GradCheckRow {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{:<36} {:>12.3e} {:>8}  {}",
            self.name, self.report.max_relative_error, self.report.checked, self.report.worst_param
        )
    }
}

pub const REPORT_HEADER: &str = "check                                 max_rel_err  scalars  worst_param";

/// Which rows get a corrupted backward pass (negative control).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Fault {
    #[default]
    None,
    /// Scales the analytic gradients of every pipeline row by 1.5.
    Pipelines,
}

fn check_both<M: Classifier>(name: &str, m: &M, x: &M::Input, eps: f64, fault: bool) -> Result<GradCheckRow> {
    let mut worst: Option<GradCheckReport> = None;
    for label in 0..2 {
        let r = grad_check_with(m, x, label, eps, |_, g| {
            if fault {
                g.data_mut().iter_mut().for_each(|v| *v *= 1.5);
            }
        })?;
        let checked = r.checked + worst.as_ref().map_or(0, |w| w.checked);
        let mut keep = match worst {
            Some(w) if w.max_relative_error >= r.max_relative_error => w,
            _ => r,
        };
        keep.checked = checked;
        worst = Some(keep);
    }
    Ok(GradCheckRow { name: name.to_string(), report: worst.expect("two labels checked") })
}

fn toks(s: &str) -> Vec<String> {
    s.split_whitespace().map(String::from).collect()
}

fn noisy_tone(freq: f64, n: usize, seed: u64) -> AudioSegment {
    let mut rng = Rng::new(seed);
    let x = (0..n)
        .map(|i| 0.3 * (2.0 * std::f64::consts::PI * freq * i as f64 / 8000.0).sin() + 0.05 * rng.normal())
        .collect();
    AudioSegment { samples: x, sample_rate: 8000 }
}

/// Runs the whole suite: one row per layer type, then the pipelines.
pub fn gradcheck_suite(eps: f64, fault: Fault) -> Result<Vec<GradCheckRow>> {
    let mut rng = Rng::new(0x9c);
    let mut rows = Vec::new();
    for (name, probe) in standard_probes(&mut rng)? {
        rows.push(check_both(&format!("layer: {name}"), &probe, &(), eps, false)?);
    }
    let bad = fault == Fault::Pipelines;

    let ecfg = EmotionCnnConfig { window: 8, step: 4, hidden: 3, activation: Activation::Relu };
    let em = build_emotion_model(&ecfg, &mut Rng::new(5))?;
    let mut r = Rng::new(6);
    let seg = AudioSegment::new((0..40).map(|_| r.uniform_range(-1.0, 1.0)).collect(), 8000)?;
    rows.push(check_both("pipeline: emotion CNN", &em, &em.prepare(&seg)?, eps, bad)?);

    let table = EmbeddingTable::random(&["good", "bad", "movie", "the", "plot"], 4, 0.5, &mut Rng::new(3))?;
    let scfg = SentimentCnnConfig {
        heights: vec![2, 3],
        maps: 3,
        activation: Activation::Tanh,
        use_audio: false,
        audio_window: 3,
        audio_maps: 2,
        audio_dim: 5,
    };
    let sm = SentimentCnn::new(&scfg, &table, ["unseen"], &mut Rng::new(2))?;
    let x = SentimentInput::text(toks("the plot unseen good zzz movie"));
    rows.push(check_both("pipeline: sentiment multichannel CNN", &sm, &x, eps, bad)?);
    let mut sb = SentimentCnn::new(&SentimentCnnConfig { use_audio: true, ..scfg }, &table, [], &mut Rng::new(4))?;
    let audio = Tensor::matrix(6, 5, (0..30).map(|_| r.uniform_range(-1.0, 1.0)).collect())?;
    let x = SentimentInput { tokens: toks("bad movie"), audio: Some(audio) };
    sb.fit_audio_norm([&x])?;
    rows.push(check_both("pipeline: sentiment bichannel CNN", &sb, &x, eps, bad)?);

    let roster = vec!["PENNY".to_string(), "SHELDON".to_string()];
    let window = HumorInput {
        context: vec![None, Some(toks("the plot")), Some(toks("good bad movie zing"))],
        audio: utterance_features(&noisy_tone(800.0, 800, 800))?,
        speaker: "PENNY".into(),
        duration_s: 1.0,
    };
    let other = HumorInput {
        audio: utterance_features(&noisy_tone(300.0, 800, 300))?,
        duration_s: 2.5,
        ..window.clone()
    };
    for (label, mode) in [("pipeline: humor CNN+CNN+LSTM", ContextMode::Lstm), ("pipeline: humor shifted CNN", ContextMode::Shifted)] {
        let hcfg = HumorNetConfig {
            lang_hidden: 3,
            lang_window: 3,
            audio_hidden: 3,
            audio_window: 3,
            lstm_hidden: 3,
            dropout: 0.5,
            k: 3,
            mode,
            use_audio: true,
            use_speaker: true,
        };
        let mut hm = HumorNet::new(&hcfg, &table, &roster, &mut Rng::new(4))?;
        hm.fit_normalization([&window, &other])?;
        hm.visit_params_mut(&mut |n, p| {
            if n.starts_with("audio") && n.ends_with("bias") {
                p.value.data_mut().iter_mut().for_each(|b| *b += 0.1);
            }
        });
        rows.push(check_both(label, &hm, &window, eps, bad)?);
    }
    Ok(rows)
}

/// Report text plus the first row at or above `threshold`, if any.
pub fn gradcheck_report(rows: &[GradCheckRow], threshold: f64, started: Instant) -> (String, Option<&GradCheckRow>) {
    let mut s = format!("{REPORT_HEADER}\n");
    for r in rows {
        s.push_str(&format!("{r}\n"));
    }
    let failed = rows.iter().find(|r| !r.passes(threshold));
    s.push_str(&format!(
        "threshold {threshold:e}: {} ({} checks, {:.1} s)\n",
        if failed.is_some() { "FAIL" } else { "PASS" },
        rows.len(),
        started.elapsed().as_secs_f64()
    ));
    (s, failed)
}
