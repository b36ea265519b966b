//! Real-time speech emotion classifier over raw 8 kHz samples.
//!
//! The network frames the waveform into windows of 200 samples every 50
//! samples, maps every window through one convolution stage, takes the
//! per-unit maximum over time and classifies with a two-way softmax. One
//! binary model is trained per emotion category.

use std::fmt;
use std::str::FromStr;

use crate::audio::{frame_samples, AudioSegment};
use crate::error::{Error, Result};
use crate::math::{Activation, Rng, Tensor};
use crate::nn::{Classifier, ConvLayer, MaxPoolTime, Padding, Param, Parameterized, SoftmaxHead};
use crate::training::{
    evaluate, make_binary_task, train, Example, Metrics, NormStats, TrainConfig, TrainOutcome,
};

pub const EMOTION_SAMPLE_RATE: u32 = 8000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum EmotionCategory {
    Criticism,
    Anxiety,
    Anger,
    Loneliness,
    Happiness,
    Sadness,
}

impl EmotionCategory {
    pub const ALL: [EmotionCategory; 6] = [
        EmotionCategory::Criticism,
        EmotionCategory::Anxiety,
        EmotionCategory::Anger,
        EmotionCategory::Loneliness,
        EmotionCategory::Happiness,
        EmotionCategory::Sadness,
    ];

    pub fn name(self) -> &'static str {
        match self {
            EmotionCategory::Criticism => "criticism",
            EmotionCategory::Anxiety => "anxiety",
            EmotionCategory::Anger => "anger",
            EmotionCategory::Loneliness => "loneliness",
            EmotionCategory::Happiness => "happiness",
            EmotionCategory::Sadness => "sadness",
        }
    }
}

impl fmt::Display for EmotionCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for EmotionCategory {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let lower = s.trim().to_ascii_lowercase();
        Self::ALL
            .into_iter()
            .find(|c| c.name() == lower)
            .ok_or_else(|| Error::config(format!("unknown emotion category {s:?}")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmotionCnnConfig {
    pub window: usize,
    pub step: usize,
    pub hidden: usize,
    pub activation: Activation,
}

impl Default for EmotionCnnConfig {
    fn default() -> Self {
        EmotionCnnConfig { window: 200, step: 50, hidden: 64, activation: Activation::Relu }
    }
}

impl EmotionCnnConfig {
    pub fn validate(&self) -> Result<()> {
        if self.window == 0 || self.step == 0 || self.step > self.window {
            return Err(Error::config(format!(
                "emotion CNN needs 0 < step <= window, got window {} step {}",
                self.window, self.step
            )));
        }
        if self.hidden == 0 {
            return Err(Error::config("emotion CNN hidden size must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct EmotionCnn {
    pub cfg: EmotionCnnConfig,
    pub category: Option<EmotionCategory>,
    /// Scalar sample statistics of the training audio.
    pub norm: NormStats,
    conv: ConvLayer,
    pool: MaxPoolTime,
    head: SoftmaxHead,
}

pub fn build_emotion_model(cfg: &EmotionCnnConfig, rng: &mut Rng) -> Result<EmotionCnn> {
    cfg.validate()?;
    Ok(EmotionCnn {
        conv: ConvLayer::new(cfg.window, cfg.hidden, 1, Padding::Valid, cfg.activation, rng)?,
        head: SoftmaxHead::new(cfg.hidden, rng)?,
        pool: MaxPoolTime::new(),
        norm: NormStats::identity(1),
        category: None,
        cfg: cfg.clone(),
    })
}

impl EmotionCnn {
    /// All weights zero: predicts exactly 0.5 for every input.
    pub fn zeros(cfg: &EmotionCnnConfig) -> Result<Self> {
        cfg.validate()?;
        Ok(EmotionCnn {
            conv: ConvLayer::from_params(
                Tensor::zeros(&[cfg.hidden, cfg.window]),
                Tensor::zeros(&[cfg.hidden]),
                1,
                Padding::Valid,
                cfg.activation,
            )?,
            head: SoftmaxHead::zeros(cfg.hidden)?,
            pool: MaxPoolTime::new(),
            norm: NormStats::identity(1),
            category: None,
            cfg: cfg.clone(),
        })
    }

    /// Resamples to 8 kHz when needed, standardizes with the stored
    /// statistics and frames into `[frames x window]`.
    pub fn prepare(&self, seg: &AudioSegment) -> Result<Tensor> {
        if seg.samples.is_empty() {
            return Err(Error::EmptyInput("empty audio"));
        }
        let resampled;
        let seg = if seg.sample_rate == EMOTION_SAMPLE_RATE {
            seg
        } else {
            resampled = seg.at_rate(EMOTION_SAMPLE_RATE)?;
            &resampled
        };
        let (m, s) = (self.norm.mean[0], self.norm.std[0]);
        let x: Vec<f64> = seg.samples.iter().map(|v| (v - m) / s).collect();
        let frames = frame_samples(&x, self.cfg.window, self.cfg.step)?;
        let n = frames.len();
        Tensor::matrix(n, self.cfg.window, frames.concat())
    }

    pub fn probabilities_frames(&self, frames: &Tensor) -> Result<[f64; 2]> {
        let h = self.conv.compute(frames)?;
        let (pooled, _) = MaxPoolTime::compute(&h)?;
        self.head.compute(pooled.data())
    }

    pub fn predict(&self, seg: &AudioSegment) -> Result<f64> {
        Ok(self.probabilities_frames(&self.prepare(seg)?)?[1])
    }
}

/// Positive-class probability of `model`'s category for `seg`.
pub fn predict_emotion(model: &EmotionCnn, seg: &AudioSegment) -> Result<f64> {
    model.predict(seg)
}

impl Parameterized for EmotionCnn {
    fn visit_params(&self, f: &mut dyn FnMut(&str, &Param)) {
        self.conv.visit("conv", f);
        self.head.visit("head", f);
    }

    fn visit_params_mut(&mut self, f: &mut dyn FnMut(&str, &mut Param)) {
        self.conv.visit_mut("conv", f);
        self.head.visit_mut("head", f);
    }
}

/// Input is the already prepared frame matrix (see [`EmotionCnn::prepare`]).
impl Classifier for EmotionCnn {
    type Input = Tensor;

    fn probabilities(&self, frames: &Tensor) -> Result<[f64; 2]> {
        self.probabilities_frames(frames)
    }

    fn forward_train(&mut self, frames: &Tensor, _rng: &mut Rng) -> Result<[f64; 2]> {
        let h = self.conv.forward(frames)?;
        let pooled = self.pool.forward(&h)?;
        self.head.forward(pooled.data())
    }

    fn backward(&mut self, label: usize) -> Result<()> {
        let d = self.head.backward(label)?;
        let dh = self.pool.backward(&Tensor::vector(d))?;
        self.conv.backward(&dh)?;
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct EmotionRun {
    pub model: EmotionCnn,
    pub outcome_log: Vec<crate::training::EpochRecord>,
    pub best_epoch: usize,
    pub test: Metrics,
}

/// Binary one-vs-rest training for `category`: balanced task, scalar input
/// standardization fitted on the training audio, momentum SGD with early
/// stopping, metrics on the held-out test split.
pub fn train_emotion(
    category: EmotionCategory,
    corpus: &[(AudioSegment, EmotionCategory)],
    cfg: &EmotionCnnConfig,
    train_cfg: &TrainConfig,
) -> Result<EmotionRun> {
    let split = make_binary_task(corpus, &category, train_cfg.seed)?;
    let split = split.map(|seg| seg.at_rate(EMOTION_SAMPLE_RATE))?;
    let norm = NormStats::fit(split.train.iter().flat_map(|e| e.input.samples.iter().map(std::slice::from_ref)))?;

    let mut rng = Rng::new(train_cfg.seed ^ 0x5eed_e707);
    let mut model = build_emotion_model(cfg, &mut rng)?;
    model.norm = norm;
    model.category = Some(category);
    let prepared = split.map(|seg| model.prepare(&seg))?;

    let TrainOutcome { model, log, best_epoch, .. } = train(model, &prepared, train_cfg)?;
    let test = evaluate(&model, &prepared.test)?;
    Ok(EmotionRun { model, outcome_log: log, best_epoch, test })
}

/// Prepared examples for direct use with the training module.
pub fn prepare_examples(model: &EmotionCnn, items: &[(AudioSegment, usize)]) -> Result<Vec<Example<Tensor>>> {
    items.iter().map(|(s, l)| Ok(Example::new(model.prepare(s)?, *l))).collect()
}
