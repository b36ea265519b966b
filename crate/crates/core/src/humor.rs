//! Punchline detection in dialog.
//!
//! Each utterance is encoded by a language CNN (word vectors, a per-token
//! embedding layer, a width-5 tanh convolution and max-over-time pooling)
//! and, for the utterance being classified, an audio CNN over frame
//! features (two stacked ReLU embedding layers, a width-3 ReLU convolution
//! and max-over-time pooling). The language encodings of the last `k`
//! utterances pass through an LSTM, or are concatenated in the shifted
//! variant. The context vector, the audio encoding and a few
//! hand-crafted features feed a softmax head. Dropout is applied to the
//! context vector and the audio encoding during training only.

use std::collections::HashMap;

use crate::audio::{utterance_features, AudioSegment};
use crate::error::{Error, Result};
use crate::math::{Activation, Rng, Tensor};
use crate::nn::{
    Classifier, ConvLayer, Dense, Dropout, DropoutMode, DropoutSpec, LstmCell, MaxPoolTime, Padding, Param,
    Parameterized, SoftmaxHead,
};
use crate::text::{hashed_vector, tokenize, EmbeddingTable};
use crate::training::{
    evaluate, train, DatasetSplit, EpochRecord, Example, Metrics, NormStats, TrainConfig,
};

/// One dialog turn.
#[derive(Debug, Clone, PartialEq)]
pub struct Utterance {
    /// Position of the source caption within its episode.
    pub id: usize,
    pub text: String,
    pub tokens: Vec<String>,
    pub speaker: String,
    pub start_s: f64,
    pub end_s: f64,
    /// `None` when no usable audio remains (e.g. fully covered by laughter).
    pub audio: Option<AudioSegment>,
    pub is_punchline: bool,
}

impl Utterance {
    /// An unlabelled utterance without audio, tokenized from `text`.
    pub fn from_text(id: usize, text: &str, speaker: &str, start_s: f64, end_s: f64) -> Self {
        Utterance {
            id,
            text: text.to_string(),
            tokens: tokenize(text),
            speaker: speaker.to_string(),
            start_s,
            end_s,
            audio: None,
            is_punchline: false,
        }
    }

    pub fn duration(&self) -> f64 {
        (self.end_s - self.start_s).max(0.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ContextMode {
    Lstm,
    Shifted,
}

impl ContextMode {
    pub fn name(self) -> &'static str {
        match self {
            ContextMode::Lstm => "lstm",
            ContextMode::Shifted => "shifted",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s.trim() {
            "lstm" => Ok(ContextMode::Lstm),
            "shifted" => Ok(ContextMode::Shifted),
            other => Err(Error::config(format!("unknown context mode {other:?} (lstm|shifted)"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HumorNetConfig {
    pub lang_hidden: usize,
    pub lang_window: usize,
    pub audio_hidden: usize,
    pub audio_window: usize,
    pub lstm_hidden: usize,
    pub dropout: f64,
    pub k: usize,
    pub mode: ContextMode,
    pub use_audio: bool,
    pub use_speaker: bool,
}

impl Default for HumorNetConfig {
    fn default() -> Self {
        HumorNetConfig {
            lang_hidden: 100,
            lang_window: 5,
            audio_hidden: 50,
            audio_window: 3,
            lstm_hidden: 100,
            dropout: 0.7,
            k: 3,
            mode: ContextMode::Lstm,
            use_audio: true,
            use_speaker: true,
        }
    }
}

impl HumorNetConfig {
    pub fn validate(&self) -> Result<()> {
        if [self.lang_hidden, self.audio_hidden, self.lstm_hidden, self.k].contains(&0) {
            return Err(Error::config("humor network sizes and k must be positive"));
        }
        if self.lang_window % 2 == 0 || self.audio_window % 2 == 0 {
            return Err(Error::config("humor convolution windows must be odd"));
        }
        DropoutSpec::new(self.dropout, DropoutMode::Train)?;
        Ok(())
    }

    /// The recurrent layer only exists for the LSTM variant with context.
    pub fn has_lstm(&self) -> bool {
        self.mode == ContextMode::Lstm && self.k > 1
    }

    pub fn context_len(&self) -> usize {
        match self.mode {
            ContextMode::Lstm if self.k > 1 => self.lstm_hidden,
            _ => self.k * self.lang_hidden,
        }
    }
}

/// Hand-crafted features of the utterance being classified.
#[derive(Debug, Clone, PartialEq)]
pub struct ExtraFeatures {
    pub avg_word_length: f64,
    pub sentence_length: f64,
    /// Current length minus the length of each previous utterance in the
    /// window, most recent first; zero where there is no history.
    pub length_deltas: Vec<f64>,
    pub speaker_onehot: Vec<f64>,
    pub speaking_rate: f64,
}

impl ExtraFeatures {
    pub fn to_vec(&self) -> Vec<f64> {
        let mut v = vec![self.avg_word_length, self.sentence_length];
        v.extend_from_slice(&self.length_deltas);
        v.extend_from_slice(&self.speaker_onehot);
        v.push(self.speaking_rate);
        v
    }
}

/// Feature count for window length `k` and a roster of `roster_len`
/// speakers (plus one out-of-roster slot when speakers are used).
pub fn extra_feature_len(k: usize, roster_len: Option<usize>) -> usize {
    3 + (k - 1) + roster_len.map_or(0, |n| n + 1)
}

/// `history` holds the previous utterances of the window, oldest first.
/// `roster` enables the speaker one-hot (last slot = unknown speaker).
pub fn extra_features(
    tokens: &[String],
    duration_s: f64,
    speaker: &str,
    history: &[Option<usize>],
    roster: Option<&[String]>,
) -> ExtraFeatures {
    let n = tokens.len();
    let chars: usize = tokens.iter().map(|t| t.chars().count()).sum();
    let length_deltas = history
        .iter()
        .rev()
        .map(|h| h.map_or(0.0, |len| n as f64 - len as f64))
        .collect();
    let speaker_onehot = roster.map_or_else(Vec::new, |r| {
        let mut v = vec![0.0; r.len() + 1];
        let slot = r.iter().position(|s| s == speaker).unwrap_or(r.len());
        v[slot] = 1.0;
        v
    });
    ExtraFeatures {
        avg_word_length: if n == 0 { 0.0 } else { chars as f64 / n as f64 },
        sentence_length: n as f64,
        length_deltas,
        speaker_onehot,
        speaking_rate: if n == 0 { 0.0 } else { duration_s.max(0.0) / n as f64 },
    }
}

/// A classification window: the last `k` utterances' tokens (oldest first,
/// `None` for empty context before the dialog starts) plus the audio
/// features, speaker and duration of the last one.
#[derive(Debug, Clone, PartialEq)]
pub struct HumorInput {
    pub context: Vec<Option<Vec<String>>>,
    pub audio: Tensor,
    pub speaker: String,
    pub duration_s: f64,
}

impl HumorInput {
    pub fn current_tokens(&self) -> &[String] {
        self.context.last().and_then(|c| c.as_deref()).unwrap_or(&[])
    }
}

fn silent_features() -> Result<Tensor> {
    utterance_features(&AudioSegment::silence(0.025, 8000))
}

/// One window per speech utterance of a dialog. Turns without tokens are
/// skipped both as targets and as context.
pub fn dialog_windows(utterances: &[Utterance], k: usize) -> Result<Vec<Example<HumorInput>>> {
    if k == 0 {
        return Err(Error::config("context window k must be at least 1"));
    }
    let speech: Vec<&Utterance> = utterances.iter().filter(|u| !u.tokens.is_empty()).collect();
    let mut out = Vec::with_capacity(speech.len());
    for (t, u) in speech.iter().enumerate() {
        let context = (0..k)
            .map(|j| {
                let idx = t as isize - (k - 1 - j) as isize;
                (idx >= 0).then(|| speech[idx as usize].tokens.clone())
            })
            .collect();
        let audio = match &u.audio {
            Some(seg) if !seg.is_empty() => utterance_features(seg)?,
            _ => silent_features()?,
        };
        out.push(Example::new(
            HumorInput { context, audio, speaker: u.speaker.clone(), duration_s: u.duration() },
            usize::from(u.is_punchline),
        ));
    }
    Ok(out)
}

#[derive(Debug, Clone)]
struct LangEncoder {
    embed: Dense,
    conv: ConvLayer,
    pool: MaxPoolTime,
}

#[derive(Debug, Clone)]
struct AudioEncoder {
    embed1: Dense,
    embed2: Dense,
    conv: ConvLayer,
    pool: MaxPoolTime,
}

#[derive(Debug, Clone)]
struct TrainCache {
    sentinel_slots: Vec<bool>,
}

#[derive(Debug, Clone)]
pub struct HumorNet {
    pub cfg: HumorNetConfig,
    pub roster: Vec<String>,
    vocab: Vec<String>,
    index: HashMap<String, usize>,
    dim: usize,
    words: Param,
    lang: LangEncoder,
    sentinel: Param,
    lstm: Option<LstmCell>,
    audio: Option<AudioEncoder>,
    pub audio_norm: NormStats,
    pub extra_norm: NormStats,
    ctx_dropout: Dropout,
    audio_dropout: Dropout,
    head: SoftmaxHead,
    cache: Vec<TrainCache>,
}

impl HumorNet {
    /// Word vectors come from `table` and stay fixed. `roster` lists the
    /// known speakers; it is ignored when the speaker feature is disabled.
    pub fn new(cfg: &HumorNetConfig, table: &EmbeddingTable, roster: &[String], rng: &mut Rng) -> Result<Self> {
        cfg.validate()?;
        let dim = table.dim();
        let vocab = table.tokens().to_vec();
        let mut words = Vec::with_capacity(vocab.len().max(1) * dim);
        for i in 0..vocab.len() {
            words.extend_from_slice(table.row(i));
        }
        if vocab.is_empty() {
            words.resize(dim, 0.0);
        }
        let index = vocab.iter().enumerate().map(|(i, t)| (t.clone(), i)).collect();
        let roster: Vec<String> = if cfg.use_speaker { roster.to_vec() } else { Vec::new() };
        let lh = cfg.lang_hidden;
        let lang = LangEncoder {
            embed: Dense::new(dim, lh, Activation::Tanh, rng)?,
            conv: ConvLayer::new(lh, lh, cfg.lang_window, Padding::Same, Activation::Tanh, rng)?,
            pool: MaxPoolTime::new(),
        };
        let sentinel = Param::new(Tensor::vector((0..lh).map(|_| rng.uniform_range(-0.1, 0.1)).collect()));
        let lstm = if cfg.has_lstm() { Some(LstmCell::new(lh, cfg.lstm_hidden, rng)?) } else { None };
        let audio = if cfg.use_audio {
            let ah = cfg.audio_hidden;
            Some(AudioEncoder {
                embed1: Dense::new(crate::audio::FEATURE_DIM, ah, Activation::Relu, rng)?,
                embed2: Dense::new(ah, ah, Activation::Relu, rng)?,
                conv: ConvLayer::new(ah, ah, cfg.audio_window, Padding::Same, Activation::Relu, rng)?,
                pool: MaxPoolTime::new(),
            })
        } else {
            None
        };
        let n_extra = extra_feature_len(cfg.k, cfg.use_speaker.then_some(roster.len()));
        let head_in = cfg.context_len() + if cfg.use_audio { cfg.audio_hidden } else { 0 } + n_extra;
        let spec = DropoutSpec::new(cfg.dropout, DropoutMode::Infer)?;
        Ok(HumorNet {
            words: Param::frozen(Tensor::matrix(vocab.len().max(1), dim, words)?),
            vocab,
            index,
            dim,
            lang,
            sentinel,
            lstm,
            audio,
            audio_norm: NormStats::identity(crate::audio::FEATURE_DIM),
            extra_norm: NormStats::identity(n_extra),
            ctx_dropout: Dropout::new(spec),
            audio_dropout: Dropout::new(spec),
            head: SoftmaxHead::new(head_in, rng)?,
            roster,
            cfg: cfg.clone(),
            cache: Vec::new(),
        })
    }

    /// Every trainable weight set to zero: predicts exactly 0.5.
    pub fn zeros(cfg: &HumorNetConfig, table: &EmbeddingTable, roster: &[String]) -> Result<Self> {
        let mut m = Self::new(cfg, table, roster, &mut Rng::new(0))?;
        m.visit_params_mut(&mut |_, p| {
            if p.trainable {
                p.value.fill(0.0)
            }
        });
        Ok(m)
    }

    pub fn vocab(&self) -> &[String] {
        &self.vocab
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn extra_len(&self) -> usize {
        self.extra_norm.dim()
    }

    fn word_rows(&self, tokens: &[String]) -> Result<Tensor> {
        if tokens.is_empty() {
            return Err(Error::EmptyInput("utterance without tokens"));
        }
        let d = self.dim;
        let rows = tokens.len().max(self.cfg.lang_window);
        let mut data = vec![0.0; rows * d];
        for (r, t) in tokens.iter().enumerate() {
            let v = match self.index.get(t) {
                Some(&i) => self.words.value.row(i).to_vec(),
                None => hashed_vector(t, d),
            };
            data[r * d..(r + 1) * d].copy_from_slice(&v);
        }
        Tensor::matrix(rows, d, data)
    }

    /// Language encoding of one utterance (length `lang_hidden`).
    pub fn encode_language(&self, tokens: &[String]) -> Result<Vec<f64>> {
        let e = self.lang.embed.compute(&self.word_rows(tokens)?)?;
        Ok(MaxPoolTime::compute(&self.lang.conv.compute(&e)?)?.0.into_data())
    }

    fn normalized_audio(&self, frames: &Tensor) -> Result<Tensor> {
        if frames.shape().len() != 2 || frames.rows() == 0 {
            return Err(Error::EmptyInput("no audio frames"));
        }
        let mut a = frames.clone();
        for r in 0..a.rows() {
            self.audio_norm.apply_in_place(a.row_mut(r))?;
        }
        Ok(a)
    }

    /// Audio encoding of frame features (length `audio_hidden`).
    pub fn encode_audio_features(&self, frames: &Tensor) -> Result<Vec<f64>> {
        let enc = self.audio.as_ref().ok_or_else(|| Error::config("model has no audio channel"))?;
        let a = self.normalized_audio(frames)?;
        let h = enc.embed2.compute(&enc.embed1.compute(&a)?)?;
        Ok(MaxPoolTime::compute(&enc.conv.compute(&h)?)?.0.into_data())
    }

    pub fn encode_audio(&self, seg: &AudioSegment) -> Result<Vec<f64>> {
        if seg.is_empty() {
            return Err(Error::EmptyInput("empty audio"));
        }
        self.encode_audio_features(&utterance_features(seg)?)
    }

    /// Raw (unnormalized) extra features of a window.
    pub fn raw_extras(&self, x: &HumorInput) -> Vec<f64> {
        let history: Vec<Option<usize>> = x.context[..x.context.len() - 1]
            .iter()
            .map(|c| c.as_ref().map(|t| t.len()))
            .collect();
        let roster = self.cfg.use_speaker.then_some(self.roster.as_slice());
        extra_features(x.current_tokens(), x.duration_s, &x.speaker, &history, roster).to_vec()
    }

    fn check(&self, x: &HumorInput) -> Result<()> {
        if x.context.len() != self.cfg.k {
            return Err(Error::config(format!(
                "window has {} utterances, model expects k = {}",
                x.context.len(),
                self.cfg.k
            )));
        }
        if x.current_tokens().is_empty() {
            return Err(Error::EmptyInput("last utterance of the window has no tokens"));
        }
        Ok(())
    }

    fn context_vector(&self, x: &HumorInput) -> Result<Vec<f64>> {
        let encs: Vec<Vec<f64>> = x
            .context
            .iter()
            .map(|c| match c {
                Some(t) => self.encode_language(t),
                None => Ok(self.sentinel.value.data().to_vec()),
            })
            .collect::<Result<_>>()?;
        match &self.lstm {
            Some(cell) => {
                let hs = cell.compute_seq(&Tensor::matrix(encs.len(), self.cfg.lang_hidden, encs.concat())?)?;
                Ok(hs.row(hs.rows() - 1).to_vec())
            }
            None => Ok(encs.concat()),
        }
    }

    fn head_input(&self, x: &HumorInput) -> Result<Vec<f64>> {
        self.check(x)?;
        let mut f = self.context_vector(x)?;
        if self.audio.is_some() {
            f.extend(self.encode_audio_features(&x.audio)?);
        }
        f.extend(self.extra_norm.apply(&self.raw_extras(x))?);
        Ok(f)
    }

    /// Fits audio and extra-feature standardization on training windows.
    pub fn fit_normalization<'a>(&mut self, inputs: impl IntoIterator<Item = &'a HumorInput> + Clone) -> Result<()> {
        if self.audio.is_some() {
            let mut rows: Vec<&[f64]> = Vec::new();
            for x in inputs.clone() {
                rows.extend((0..x.audio.rows()).map(|r| x.audio.row(r)));
            }
            self.audio_norm = NormStats::fit(rows)?;
        }
        let extras: Vec<Vec<f64>> = inputs.into_iter().map(|x| self.raw_extras(x)).collect();
        self.extra_norm = NormStats::fit(extras.iter().map(|v| v.as_slice()))?;
        Ok(())
    }

    fn lang_forward(&mut self, tokens: &[String]) -> Result<Vec<f64>> {
        let rows = self.word_rows(tokens)?;
        let e = self.lang.embed.forward(&rows)?;
        let c = self.lang.conv.forward(&e)?;
        Ok(self.lang.pool.forward(&c)?.into_data())
    }

    fn lang_backward(&mut self, d: &[f64]) -> Result<()> {
        let dc = self.lang.pool.backward(&Tensor::vector(d.to_vec()))?;
        let de = self.lang.conv.backward(&dc)?;
        self.lang.embed.backward(&de)?;
        Ok(())
    }
}

impl Parameterized for HumorNet {
    fn visit_params(&self, f: &mut dyn FnMut(&str, &Param)) {
        f("words", &self.words);
        self.lang.embed.visit("lang.embed", f);
        self.lang.conv.visit("lang.conv", f);
        f("lang.sentinel", &self.sentinel);
        if let Some(l) = &self.lstm {
            l.visit("lstm", f);
        }
        if let Some(a) = &self.audio {
            a.embed1.visit("audio.embed1", f);
            a.embed2.visit("audio.embed2", f);
            a.conv.visit("audio.conv", f);
        }
        self.head.visit("head", f);
    }

    fn visit_params_mut(&mut self, f: &mut dyn FnMut(&str, &mut Param)) {
        f("words", &mut self.words);
        self.lang.embed.visit_mut("lang.embed", f);
        self.lang.conv.visit_mut("lang.conv", f);
        f("lang.sentinel", &mut self.sentinel);
        if let Some(l) = &mut self.lstm {
            l.visit_mut("lstm", f);
        }
        if let Some(a) = &mut self.audio {
            a.embed1.visit_mut("audio.embed1", f);
            a.embed2.visit_mut("audio.embed2", f);
            a.conv.visit_mut("audio.conv", f);
        }
        self.head.visit_mut("head", f);
    }
}

impl Classifier for HumorNet {
    type Input = HumorInput;

    fn probabilities(&self, x: &HumorInput) -> Result<[f64; 2]> {
        self.head.compute(&self.head_input(x)?)
    }

    fn forward_train(&mut self, x: &HumorInput, rng: &mut Rng) -> Result<[f64; 2]> {
        self.check(x)?;
        let lh = self.cfg.lang_hidden;
        let mut encs = Vec::with_capacity(self.cfg.k * lh);
        let mut sentinel_slots = Vec::with_capacity(self.cfg.k);
        for c in &x.context {
            match c {
                Some(t) => {
                    encs.extend(self.lang_forward(t)?);
                    sentinel_slots.push(false);
                }
                None => {
                    encs.extend_from_slice(self.sentinel.value.data());
                    sentinel_slots.push(true);
                }
            }
        }
        let ctx = match &mut self.lstm {
            Some(cell) => {
                let hs = cell.forward_seq(&Tensor::matrix(self.cfg.k, lh, encs)?)?;
                hs.row(hs.rows() - 1).to_vec()
            }
            None => encs,
        };
        let mut f = self.ctx_dropout.forward(&Tensor::vector(ctx), rng)?.into_data();
        if self.audio.is_some() {
            let a = self.normalized_audio(&x.audio)?;
            let enc = self.audio.as_mut().expect("checked");
            let h1 = enc.embed1.forward(&a)?;
            let h2 = enc.embed2.forward(&h1)?;
            let c = enc.conv.forward(&h2)?;
            let pooled = enc.pool.forward(&c)?;
            f.extend(self.audio_dropout.forward(&pooled, rng)?.into_data());
        }
        f.extend(self.extra_norm.apply(&self.raw_extras(x))?);
        self.cache.push(TrainCache { sentinel_slots });
        self.head.forward(&f)
    }

    fn backward(&mut self, label: usize) -> Result<()> {
        let cache = self
            .cache
            .pop()
            .ok_or(Error::State("humor backward called without a recorded forward"))?;
        let df = self.head.backward(label)?;
        let cl = self.cfg.context_len();
        if let Some(enc) = &mut self.audio {
            let ah = self.cfg.audio_hidden;
            let da = self.audio_dropout.backward(&Tensor::vector(df[cl..cl + ah].to_vec()))?;
            let dc = enc.pool.backward(&da)?;
            let dh2 = enc.conv.backward(&dc)?;
            let dh1 = enc.embed2.backward(&dh2)?;
            enc.embed1.backward(&dh1)?;
        }
        let dctx = self.ctx_dropout.backward(&Tensor::vector(df[..cl].to_vec()))?;
        let k = self.cfg.k;
        let lh = self.cfg.lang_hidden;
        let dencs = match &mut self.lstm {
            Some(cell) => {
                let mut dhs = Tensor::zeros(&[k, self.cfg.lstm_hidden]);
                dhs.row_mut(k - 1).copy_from_slice(dctx.data());
                cell.backward_seq(&dhs)?.into_data()
            }
            None => dctx.into_data(),
        };
        for j in (0..k).rev() {
            let d = &dencs[j * lh..(j + 1) * lh];
            if cache.sentinel_slots[j] {
                if self.sentinel.trainable {
                    for (g, v) in self.sentinel.grad.data_mut().iter_mut().zip(d) {
                        *g += v;
                    }
                }
            } else {
                self.lang_backward(d)?;
            }
        }
        Ok(())
    }

    fn is_deterministic(&self) -> bool {
        self.ctx_dropout.spec.is_deterministic()
    }

    fn set_training(&mut self, training: bool) {
        let mode = if training { DropoutMode::Train } else { DropoutMode::Infer };
        self.ctx_dropout.spec.mode = mode;
        self.audio_dropout.spec.mode = mode;
    }
}

/// Probability that the last utterance of `window` is a punchline, using
/// the LSTM context model.
pub fn classify_punchline(model: &HumorNet, window: &HumorInput) -> Result<f64> {
    if model.cfg.mode != ContextMode::Lstm {
        return Err(Error::config("model is not the LSTM variant"));
    }
    model.positive_probability(window)
}

/// As [`classify_punchline`] for the shifted-context variant.
pub fn classify_punchline_shifted(model: &HumorNet, window: &HumorInput) -> Result<f64> {
    if model.cfg.mode != ContextMode::Shifted {
        return Err(Error::config("model is not the shifted-context variant"));
    }
    model.positive_probability(window)
}

#[derive(Debug, Clone)]
pub struct HumorRun {
    pub model: HumorNet,
    pub log: Vec<EpochRecord>,
    pub best_epoch: usize,
    pub test: Option<Metrics>,
}

/// Builds, normalizes and trains a humor network on prepared windows.
pub fn train_humor(
    split: &DatasetSplit<HumorInput>,
    table: &EmbeddingTable,
    roster: &[String],
    cfg: &HumorNetConfig,
    train_cfg: &TrainConfig,
) -> Result<HumorRun> {
    let mut rng = Rng::new(train_cfg.seed ^ 0x4a4a_4a4a);
    let mut model = HumorNet::new(cfg, table, roster, &mut rng)?;
    model.fit_normalization(split.train.iter().map(|e| &e.input))?;
    let out = train(model, split, train_cfg)?;
    let test = if split.test.is_empty() { None } else { Some(evaluate(&out.model, &split.test)?) };
    Ok(HumorRun { model: out.model, log: out.log, best_epoch: out.best_epoch, test })
}

#[derive(Debug, Clone)]
pub struct CrossCorpusReport {
    pub metrics: Metrics,
    /// True when the test corpus was also part of the training data.
    pub self_evaluation: bool,
    pub model: HumorNet,
}

/// Trains on every window of the `train` corpora (shuffled together, 10%
/// held out for early stopping) and evaluates on `test`. The speaker
/// feature must be disabled because rosters differ between shows.
pub fn evaluate_cross_corpus(
    train_corpora: &[(&str, Vec<Example<HumorInput>>)],
    test_corpus: (&str, &[Example<HumorInput>]),
    table: &EmbeddingTable,
    cfg: &HumorNetConfig,
    train_cfg: &TrainConfig,
) -> Result<CrossCorpusReport> {
    if cfg.use_speaker {
        return Err(Error::config("cross-corpus evaluation requires use_speaker = false"));
    }
    let self_evaluation = train_corpora.iter().any(|(name, _)| *name == test_corpus.0);
    let mut pool: Vec<Example<HumorInput>> = train_corpora.iter().flat_map(|(_, v)| v.iter().cloned()).collect();
    let mut rng = Rng::new(train_cfg.seed ^ 0xc0c0);
    rng.shuffle(&mut pool);
    let n_dev = (pool.len() / 10).max(1);
    if pool.len() < 2 {
        return Err(Error::config("cross-corpus training needs at least two windows"));
    }
    let dev = pool.split_off(pool.len() - n_dev);
    let split = DatasetSplit { train: pool, dev, test: Vec::new() };
    let run = train_humor(&split, table, &[], cfg, train_cfg)?;
    let metrics = evaluate(&run.model, test_corpus.1)?;
    Ok(CrossCorpusReport { metrics, self_evaluation, model: run.model })
}

/// Fraction of punchlines (after the first in each dialog) that occur
/// within `distance` utterances of the previous punchline.
pub fn punchline_proximity(dialogs: &[&[Utterance]], distance: usize) -> Option<f64> {
    let (mut near, mut total) = (0usize, 0usize);
    for d in dialogs {
        let mut last: Option<usize> = None;
        for (i, _) in d.iter().enumerate().filter(|(_, u)| u.is_punchline) {
            if let Some(p) = last {
                total += 1;
                if i - p <= distance {
                    near += 1;
                }
            }
            last = Some(i);
        }
    }
    (total > 0).then(|| near as f64 / total as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::grad_check;
    use crate::text::OovPolicy;
    use std::f64::consts::PI;

    fn toks(s: &str) -> Vec<String> {
        s.split_whitespace().map(String::from).collect()
    }

    fn table() -> EmbeddingTable {
        EmbeddingTable::random(&["ok", "then", "zing", "so", "what", "now"], 4, 0.5, &mut Rng::new(1)).unwrap()
    }

    fn toy_cfg(k: usize, mode: ContextMode) -> HumorNetConfig {
        HumorNetConfig {
            lang_hidden: 3,
            lang_window: 3,
            audio_hidden: 3,
            audio_window: 3,
            lstm_hidden: 3,
            dropout: 0.5,
            k,
            mode,
            use_audio: true,
            use_speaker: true,
        }
    }

    fn roster() -> Vec<String> {
        vec!["PENNY".into(), "SHELDON".into()]
    }

    fn tone(freq: f64) -> AudioSegment {
        let mut rng = Rng::new(freq as u64);
        let x = (0..800).map(|i| 0.3 * (2.0 * PI * freq * i as f64 / 8000.0).sin() + 0.05 * rng.normal()).collect();
        AudioSegment::new(x, 8000).unwrap()
    }

    fn window(k: usize) -> HumorInput {
        let mut context: Vec<Option<Vec<String>>> = vec![None; k];
        context[k - 1] = Some(toks("so what now zing"));
        if k > 1 {
            context[k - 2] = Some(toks("ok then"));
        }
        HumorInput {
            context,
            audio: utterance_features(&tone(800.0)).unwrap(),
            speaker: "PENNY".into(),
            duration_s: 1.0,
        }
    }

    #[test]
    fn extra_feature_examples() {
        let e = extra_features(&toks("ok then"), 2.0, "X", &[None, None], None);
        assert_eq!(e.avg_word_length, 3.0);
        assert_eq!(e.sentence_length, 2.0);
        assert_eq!(e.length_deltas, vec![0.0, 0.0]);
        let e = extra_features(&toks("a b c d e f g h i j"), 2.0, "SHELDON", &[Some(4), Some(12)], Some(&roster()));
        assert!((e.speaking_rate - 0.2).abs() < 1e-12);
        assert_eq!(e.length_deltas, vec![-2.0, 6.0]);
        assert_eq!(e.speaker_onehot, vec![0.0, 1.0, 0.0]);
        let e = extra_features(&toks("hi"), 1.0, "LEONARD", &[], Some(&roster()));
        assert_eq!(e.speaker_onehot, vec![0.0, 0.0, 1.0]);
    }

    #[test]
    fn encoder_dimensions() {
        let m = HumorNet::new(&HumorNetConfig::default(), &table(), &roster(), &mut Rng::new(2)).unwrap();
        assert_eq!(m.encode_language(&toks("ok then")).unwrap().len(), 100);
        let silent = m.encode_audio(&AudioSegment::silence(0.3, 8000)).unwrap();
        let loud = m.encode_audio(&tone(800.0)).unwrap();
        assert_eq!(silent.len(), 50);
        let dist: f64 = silent.iter().zip(&loud).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        assert!(dist > 0.0);
        assert!(matches!(m.encode_audio(&AudioSegment::silence(0.0, 8000)), Err(Error::EmptyInput(_))));
    }

    #[test]
    fn repeated_token_encoding_is_length_free() {
        let m = HumorNet::new(&HumorNetConfig::default(), &table(), &roster(), &mut Rng::new(2)).unwrap();
        let base = m.encode_language(&vec!["ok".to_string(); 5]).unwrap();
        for n in [6, 9, 20] {
            assert_eq!(m.encode_language(&vec!["ok".to_string(); n]).unwrap(), base);
        }
    }

    #[test]
    fn zero_model_and_distribution() {
        let m = HumorNet::zeros(&HumorNetConfig::default(), &table(), &roster()).unwrap();
        assert_eq!(classify_punchline(&m, &window(3)).unwrap(), 0.5);
        let m = HumorNet::new(&HumorNetConfig::default(), &table(), &roster(), &mut Rng::new(3)).unwrap();
        let p = m.probabilities(&window(3)).unwrap();
        assert!((p[0] + p[1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn k_mismatch_is_config_error() {
        let m = HumorNet::new(&HumorNetConfig::default(), &table(), &roster(), &mut Rng::new(3)).unwrap();
        assert!(matches!(m.probabilities(&window(2)), Err(Error::Config(_))));
    }

    #[test]
    fn gradients_for_both_variants() {
        for mode in [ContextMode::Lstm, ContextMode::Shifted] {
            let mut m = HumorNet::new(&toy_cfg(3, mode), &table(), &roster(), &mut Rng::new(4)).unwrap();
            let mut other = window(3);
            other.audio = utterance_features(&tone(300.0)).unwrap();
            other.duration_s = 2.5;
            m.fit_normalization([&window(3), &other]).unwrap();
            m.visit_params_mut(&mut |n, p| {
                if n.starts_with("audio") && n.ends_with("bias") {
                    p.value.data_mut().iter_mut().for_each(|b| *b += 0.1);
                }
            });
            for label in 0..2 {
                let r = grad_check(&m, &window(3), label, 1e-5).unwrap();
                assert!(r.max_relative_error < 1e-4, "{mode:?}: {r:?}");
            }
        }
    }

    #[test]
    fn single_utterance_variants_coincide() {
        let lstm = HumorNet::new(&toy_cfg(1, ContextMode::Lstm), &table(), &roster(), &mut Rng::new(5)).unwrap();
        let mut shifted = HumorNet::new(&toy_cfg(1, ContextMode::Shifted), &table(), &roster(), &mut Rng::new(9)).unwrap();
        let mut params = HashMap::new();
        lstm.visit_params(&mut |n, p| {
            params.insert(n.to_string(), p.value.clone());
        });
        shifted.visit_params_mut(&mut |n, p| p.value = params[n].clone());
        let w = window(1);
        assert_eq!(lstm.probabilities(&w).unwrap(), shifted.probabilities(&w).unwrap());
    }

    #[test]
    fn shifted_head_grows_linearly_in_k() {
        let count = |k| {
            let m = HumorNet::new(&toy_cfg(k, ContextMode::Shifted), &table(), &roster(), &mut Rng::new(1)).unwrap();
            let mut n = 0;
            m.visit_params(&mut |name, p| {
                if name.starts_with("head") {
                    n += p.value.len()
                }
            });
            n
        };
        let (a, b, c) = (count(1), count(2), count(3));
        assert_eq!(b - a, c - b);
        assert!(b > a);
    }

    #[test]
    fn inference_ignores_dropout() {
        let mut m = HumorNet::new(&HumorNetConfig::default(), &table(), &roster(), &mut Rng::new(6)).unwrap();
        m.set_training(true);
        assert!(!m.is_deterministic());
        m.set_training(false);
        let w = window(3);
        assert_eq!(m.probabilities(&w).unwrap(), m.probabilities(&w).unwrap());
        assert!(m.is_deterministic());
    }

    #[test]
    fn windows_from_dialog() {
        let u = |t: &str, p| Utterance { is_punchline: p, ..Utterance::from_text(0, t, "PENNY", 0.0, 1.0) };
        let dialog = vec![u("ok", false), u("", false), u("so what", false), u("zing", true)];
        let w = dialog_windows(&dialog, 3).unwrap();
        assert_eq!(w.len(), 3);
        assert_eq!(w[0].input.context, vec![None, None, Some(toks("ok"))]);
        assert_eq!(w[2].input.context, vec![Some(toks("ok")), Some(toks("so what")), Some(toks("zing"))]);
        assert_eq!(w[2].label, 1);
        assert_eq!(w[2].input.audio.rows(), 1);
    }

    #[test]
    fn cross_corpus_rejects_speaker_feature() {
        let t = EmbeddingTable::new(2, OovPolicy::HashSeeded).unwrap();
        let r = evaluate_cross_corpus(&[], ("c", &[]), &t, &HumorNetConfig::default(), &TrainConfig::default());
        assert!(matches!(r, Err(Error::Config(_))));
    }

    #[test]
    fn proximity_statistic() {
        let u = |p| Utterance { is_punchline: p, ..Utterance::from_text(0, "x", "", 0.0, 1.0) };
        let d: Vec<Utterance> = [true, false, true, false, false, false, false, false, false, true].iter().map(|&p| u(p)).collect();
        assert_eq!(punchline_proximity(&[&d], 5), Some(0.5));
    }
}
