//! Multichannel sentence-sentiment CNN.
//!
//! Two copies of the word vectors feed the network: a static channel that
//! never changes and a fine-tuned channel updated by backpropagation. Each
//! channel has its own bank of valid convolutions (heights 3, 4 and 5 with
//! 100 maps each by default) followed by max-over-time pooling. The pooled
//! vectors are concatenated and classified by a two-way softmax. The
//! optional audio channel runs a convolution over frame-level acoustic
//! features and joins the same concatenation.

use std::collections::{HashMap, HashSet};

use crate::audio::{utterance_features, AudioSegment, FEATURE_DIM};
use crate::error::{Error, Result};
use crate::math::{Activation, Rng, Tensor};
use crate::nn::{Classifier, ConvLayer, MaxPoolTime, Padding, Param, Parameterized, SoftmaxHead};
use crate::text::{hashed_vector, EmbeddingTable};
use crate::training::{evaluate, train, DatasetSplit, EpochRecord, Metrics, NormStats, TrainConfig};

#[derive(Debug, Clone, PartialEq)]
pub struct SentimentCnnConfig {
    pub heights: Vec<usize>,
    pub maps: usize,
    pub activation: Activation,
    pub use_audio: bool,
    pub audio_window: usize,
    pub audio_maps: usize,
    pub audio_dim: usize,
}

impl Default for SentimentCnnConfig {
    fn default() -> Self {
        SentimentCnnConfig {
            heights: vec![3, 4, 5],
            maps: 100,
            activation: Activation::Relu,
            use_audio: false,
            audio_window: 3,
            audio_maps: 100,
            audio_dim: FEATURE_DIM,
        }
    }
}

impl SentimentCnnConfig {
    pub fn validate(&self) -> Result<()> {
        if self.heights.is_empty() || self.heights.contains(&0) {
            return Err(Error::config("sentiment CNN needs positive filter heights"));
        }
        if self.maps == 0 {
            return Err(Error::config("sentiment CNN needs at least one map per height"));
        }
        if self.use_audio && (self.audio_maps == 0 || self.audio_dim == 0 || self.audio_window % 2 == 0) {
            return Err(Error::config("audio channel needs positive sizes and an odd window"));
        }
        Ok(())
    }

    pub fn max_height(&self) -> usize {
        self.heights.iter().copied().max().unwrap_or(1)
    }

    pub fn feature_len(&self) -> usize {
        2 * self.heights.len() * self.maps + if self.use_audio { self.audio_maps } else { 0 }
    }
}

/// One sentence, with frame features of its audio for the bichannel model.
#[derive(Debug, Clone, PartialEq)]
pub struct SentimentInput {
    pub tokens: Vec<String>,
    pub audio: Option<Tensor>,
}

impl SentimentInput {
    pub fn text(tokens: Vec<String>) -> Self {
        SentimentInput { tokens, audio: None }
    }

    pub fn with_audio(tokens: Vec<String>, seg: &AudioSegment) -> Result<Self> {
        Ok(SentimentInput { tokens, audio: Some(utterance_features(seg)?) })
    }
}

#[derive(Debug, Clone)]
struct TrainCache {
    ids: Vec<Option<usize>>,
}

#[derive(Debug, Clone)]
pub struct SentimentCnn {
    pub cfg: SentimentCnnConfig,
    dim: usize,
    vocab: Vec<String>,
    index: HashMap<String, usize>,
    static_emb: Param,
    tuned_emb: Param,
    static_convs: Vec<ConvLayer>,
    tuned_convs: Vec<ConvLayer>,
    audio_conv: Option<ConvLayer>,
    pub audio_norm: NormStats,
    pools: Vec<MaxPoolTime>,
    head: SoftmaxHead,
    cache: Vec<TrainCache>,
}

impl SentimentCnn {
    /// Vocabulary is every token of `table` plus `extra_tokens` that the
    /// table lacks. Extra tokens start at zero in the static channel and at
    /// their hash-seeded vector in the fine-tuned channel.
    pub fn new<'a>(
        cfg: &SentimentCnnConfig,
        table: &EmbeddingTable,
        extra_tokens: impl IntoIterator<Item = &'a str>,
        rng: &mut Rng,
    ) -> Result<Self> {
        cfg.validate()?;
        let dim = table.dim();
        let mut vocab: Vec<String> = table.tokens().to_vec();
        let mut seen: HashSet<String> = vocab.iter().cloned().collect();
        for t in extra_tokens {
            if seen.insert(t.to_string()) {
                vocab.push(t.to_string());
            }
        }
        let v = vocab.len().max(1);
        let mut st = vec![0.0; v * dim];
        let mut tu = vec![0.0; v * dim];
        for (i, tok) in vocab.iter().enumerate() {
            let row = match table.id(tok) {
                Some(id) => {
                    st[i * dim..(i + 1) * dim].copy_from_slice(table.row(id));
                    table.row(id).to_vec()
                }
                None => hashed_vector(tok, dim),
            };
            tu[i * dim..(i + 1) * dim].copy_from_slice(&row);
        }
        let index = vocab.iter().enumerate().map(|(i, t)| (t.clone(), i)).collect();
        let bank = |rng: &mut Rng| -> Result<Vec<ConvLayer>> {
            cfg.heights
                .iter()
                .map(|&h| ConvLayer::new(dim, cfg.maps, h, Padding::Valid, cfg.activation, rng))
                .collect()
        };
        let static_convs = bank(rng)?;
        let tuned_convs = bank(rng)?;
        let audio_conv = if cfg.use_audio {
            Some(ConvLayer::new(cfg.audio_dim, cfg.audio_maps, cfg.audio_window, Padding::Same, Activation::Relu, rng)?)
        } else {
            None
        };
        let n_pools = 2 * cfg.heights.len() + usize::from(cfg.use_audio);
        Ok(SentimentCnn {
            dim,
            static_emb: Param::frozen(Tensor::matrix(v, dim, st)?),
            tuned_emb: Param::new(Tensor::matrix(v, dim, tu)?),
            vocab,
            index,
            static_convs,
            tuned_convs,
            audio_conv,
            audio_norm: NormStats::identity(cfg.audio_dim),
            pools: vec![MaxPoolTime::new(); n_pools],
            head: SoftmaxHead::new(cfg.feature_len(), rng)?,
            cfg: cfg.clone(),
            cache: Vec::new(),
        })
    }

    /// Same vocabulary and embeddings, every other weight zero.
    pub fn zeros(cfg: &SentimentCnnConfig, table: &EmbeddingTable) -> Result<Self> {
        let mut m = Self::new(cfg, table, std::iter::empty(), &mut Rng::new(0))?;
        m.visit_params_mut(&mut |name, p| {
            if !name.starts_with("embedding") {
                p.value.fill(0.0);
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

    pub fn static_embeddings(&self) -> &Tensor {
        &self.static_emb.value
    }

    pub fn tuned_embeddings(&self) -> &Tensor {
        &self.tuned_emb.value
    }

    fn ids(&self, tokens: &[String]) -> Vec<Option<usize>> {
        tokens.iter().map(|t| self.index.get(t).copied()).collect()
    }

    /// `(static rows, fine-tuned rows)`, zero-padded to the tallest filter.
    fn embed(&self, tokens: &[String], ids: &[Option<usize>]) -> Result<(Tensor, Tensor)> {
        if tokens.is_empty() {
            return Err(Error::EmptyInput("empty sentence"));
        }
        let d = self.dim;
        let rows = tokens.len().max(self.cfg.max_height());
        let mut st = vec![0.0; rows * d];
        let mut tu = vec![0.0; rows * d];
        for (r, (tok, id)) in tokens.iter().zip(ids).enumerate() {
            match id {
                Some(i) => {
                    st[r * d..(r + 1) * d].copy_from_slice(self.static_emb.value.row(*i));
                    tu[r * d..(r + 1) * d].copy_from_slice(self.tuned_emb.value.row(*i));
                }
                None => tu[r * d..(r + 1) * d].copy_from_slice(&hashed_vector(tok, d)),
            }
        }
        Ok((Tensor::matrix(rows, d, st)?, Tensor::matrix(rows, d, tu)?))
    }

    fn audio_input(&self, x: &SentimentInput) -> Result<Option<Tensor>> {
        if !self.cfg.use_audio {
            return Ok(None);
        }
        let a = x
            .audio
            .as_ref()
            .ok_or_else(|| Error::config("bichannel sentiment model needs audio features"))?;
        if a.shape().len() != 2 || a.cols() != self.cfg.audio_dim {
            return Err(Error::dim("sentiment audio", &[0, self.cfg.audio_dim], a.shape()));
        }
        let mut a = a.clone();
        for r in 0..a.rows() {
            self.audio_norm.apply_in_place(a.row_mut(r))?;
        }
        Ok(Some(a))
    }

    /// Pooled feature vector fed to the softmax head.
    pub fn features(&self, x: &SentimentInput) -> Result<Vec<f64>> {
        let ids = self.ids(&x.tokens);
        let (st, tu) = self.embed(&x.tokens, &ids)?;
        let mut f = Vec::with_capacity(self.cfg.feature_len());
        for (convs, rows) in [(&self.static_convs, &st), (&self.tuned_convs, &tu)] {
            for c in convs {
                f.extend_from_slice(MaxPoolTime::compute(&c.compute(rows)?)?.0.data());
            }
        }
        if let (Some(c), Some(a)) = (&self.audio_conv, self.audio_input(x)?) {
            f.extend_from_slice(MaxPoolTime::compute(&c.compute(&a)?)?.0.data());
        }
        Ok(f)
    }

    /// Fits the audio standardization on the training inputs' frames.
    pub fn fit_audio_norm<'a>(&mut self, inputs: impl IntoIterator<Item = &'a SentimentInput>) -> Result<()> {
        if !self.cfg.use_audio {
            return Ok(());
        }
        let mut rows: Vec<&[f64]> = Vec::new();
        for x in inputs {
            let a = x.audio.as_ref().ok_or_else(|| Error::config("training example without audio"))?;
            rows.extend((0..a.rows()).map(|r| a.row(r)));
        }
        self.audio_norm = NormStats::fit(rows)?;
        Ok(())
    }
}

impl Parameterized for SentimentCnn {
    fn visit_params(&self, f: &mut dyn FnMut(&str, &Param)) {
        f("embedding.static", &self.static_emb);
        f("embedding.tuned", &self.tuned_emb);
        for (c, h) in self.static_convs.iter().zip(&self.cfg.heights) {
            c.visit(&format!("static.conv{h}"), f);
        }
        for (c, h) in self.tuned_convs.iter().zip(&self.cfg.heights) {
            c.visit(&format!("tuned.conv{h}"), f);
        }
        if let Some(c) = &self.audio_conv {
            c.visit("audio.conv", f);
        }
        self.head.visit("head", f);
    }

    fn visit_params_mut(&mut self, f: &mut dyn FnMut(&str, &mut Param)) {
        f("embedding.static", &mut self.static_emb);
        f("embedding.tuned", &mut self.tuned_emb);
        for (c, h) in self.static_convs.iter_mut().zip(&self.cfg.heights) {
            c.visit_mut(&format!("static.conv{h}"), f);
        }
        for (c, h) in self.tuned_convs.iter_mut().zip(&self.cfg.heights) {
            c.visit_mut(&format!("tuned.conv{h}"), f);
        }
        if let Some(c) = &mut self.audio_conv {
            c.visit_mut("audio.conv", f);
        }
        self.head.visit_mut("head", f);
    }
}

impl Classifier for SentimentCnn {
    type Input = SentimentInput;

    fn probabilities(&self, x: &SentimentInput) -> Result<[f64; 2]> {
        self.head.compute(&self.features(x)?)
    }

    fn forward_train(&mut self, x: &SentimentInput, _rng: &mut Rng) -> Result<[f64; 2]> {
        let ids = self.ids(&x.tokens);
        let (st, tu) = self.embed(&x.tokens, &ids)?;
        let audio = self.audio_input(x)?;
        let mut f = Vec::with_capacity(self.cfg.feature_len());
        let nh = self.cfg.heights.len();
        for (i, c) in self.static_convs.iter_mut().enumerate() {
            let y = c.forward(&st)?;
            f.extend_from_slice(self.pools[i].forward(&y)?.data());
        }
        for (i, c) in self.tuned_convs.iter_mut().enumerate() {
            let y = c.forward(&tu)?;
            f.extend_from_slice(self.pools[nh + i].forward(&y)?.data());
        }
        if let (Some(c), Some(a)) = (&mut self.audio_conv, audio) {
            let y = c.forward(&a)?;
            f.extend_from_slice(self.pools[2 * nh].forward(&y)?.data());
        }
        self.cache.push(TrainCache { ids });
        self.head.forward(&f)
    }

    fn backward(&mut self, label: usize) -> Result<()> {
        let cache = self
            .cache
            .pop()
            .ok_or(Error::State("sentiment backward called without a recorded forward"))?;
        let df = self.head.backward(label)?;
        let maps = self.cfg.maps;
        let nh = self.cfg.heights.len();
        for i in 0..nh {
            let dy = self.pools[i].backward(&Tensor::vector(df[i * maps..(i + 1) * maps].to_vec()))?;
            self.static_convs[i].backward(&dy)?;
        }
        let d = self.dim;
        for i in 0..nh {
            let off = (nh + i) * maps;
            let dy = self.pools[nh + i].backward(&Tensor::vector(df[off..off + maps].to_vec()))?;
            let dx = self.tuned_convs[i].backward(&dy)?;
            if self.tuned_emb.trainable {
                let g = self.tuned_emb.grad.data_mut();
                for (r, id) in cache.ids.iter().enumerate() {
                    if let Some(id) = id {
                        for (gj, dj) in g[id * d..(id + 1) * d].iter_mut().zip(dx.row(r)) {
                            *gj += dj;
                        }
                    }
                }
            }
        }
        if let Some(c) = &mut self.audio_conv {
            let off = 2 * nh * maps;
            let dy = self.pools[2 * nh].backward(&Tensor::vector(df[off..].to_vec()))?;
            c.backward(&dy)?;
        }
        Ok(())
    }
}

pub fn classify_sentiment(model: &SentimentCnn, tokens: &[String]) -> Result<f64> {
    model.positive_probability(&SentimentInput::text(tokens.to_vec()))
}

pub fn classify_sentiment_bichannel(model: &SentimentCnn, tokens: &[String], seg: &AudioSegment) -> Result<f64> {
    if !model.cfg.use_audio {
        return Err(Error::config("model has no audio channel"));
    }
    if tokens.is_empty() || seg.is_empty() {
        return Err(Error::config("bichannel classification needs both text and audio"));
    }
    model.positive_probability(&SentimentInput::with_audio(tokens.to_vec(), seg)?)
}

/// `(positive hits - negative hits) / max(total hits, 1)`.
pub fn lexicon_polarity(tokens: &[String], positive: &HashSet<String>, negative: &HashSet<String>) -> f64 {
    let pos = tokens.iter().filter(|t| positive.contains(t.as_str())).count() as f64;
    let neg = tokens.iter().filter(|t| negative.contains(t.as_str())).count() as f64;
    (pos - neg) / (pos + neg).max(1.0)
}

#[derive(Debug, Clone)]
pub struct SentimentRun {
    pub model: SentimentCnn,
    pub log: Vec<EpochRecord>,
    pub best_epoch: usize,
    pub test: Metrics,
}

/// Builds the vocabulary from `table` plus the training tokens, fits the
/// audio standardization, trains with early stopping and reports test
/// metrics.
pub fn train_sentiment(
    split: &DatasetSplit<SentimentInput>,
    table: &EmbeddingTable,
    cfg: &SentimentCnnConfig,
    train_cfg: &TrainConfig,
) -> Result<SentimentRun> {
    let mut rng = Rng::new(train_cfg.seed ^ 0x5e47_1e47);
    let extra: Vec<&str> = split.train.iter().flat_map(|e| e.input.tokens.iter().map(|s| s.as_str())).collect();
    let mut model = SentimentCnn::new(cfg, table, extra, &mut rng)?;
    model.fit_audio_norm(split.train.iter().map(|e| &e.input))?;
    let out = train(model, split, train_cfg)?;
    let test = if split.test.is_empty() { Metrics { accuracy: 0.0, precision: 0.0, recall: 0.0, f1: 0.0 } } else { evaluate(&out.model, &split.test)? };
    Ok(SentimentRun { model: out.model, log: out.log, best_epoch: out.best_epoch, test })
}
